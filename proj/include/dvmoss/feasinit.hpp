#pragma once

// Feasible starting point: on each subcarrier, the powers that pin every
// member's rate to its minimum solve a small dense linear system
//   p_j / delta_j - sum_{j' != j} p_j' = sigma^2 / g_j,   delta_j = 2^(r_min,j / B) - 1.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/network_configuration.hpp"

namespace dvmoss {

// SINR threshold for rate r over bandwidth B.
inline double sinr_threshold(double r_min_bps, double bandwidth_hz) {
  return std::expm1(r_min_bps / bandwidth_hz * std::log(2.0));
}

struct SubcarrierSystem {
  int subcarrier = 0;
  std::vector<std::size_t> members;
  std::vector<double> delta;
  Eigen::MatrixXd A;
  Eigen::VectorXd eps;

  std::size_t size() const { return members.size(); }
  bool contains(std::size_t ue) const { return std::find(members.begin(), members.end(), ue) != members.end(); }
};

// One member's data: its gain on the subcarrier and its rate floor.
struct MemberSpec {
  std::size_t ue = 0;
  double gain = 0.0;
  double r_min_bps = 0.0;
};

namespace detail {
inline double member_delta(const MemberSpec& m, double bandwidth_hz) {
  if (!(m.gain > 0.0) || !std::isfinite(m.gain))
    throw InvalidArgument("UE " + std::to_string(m.ue) + " gain must be positive");
  if (!(m.r_min_bps > 0.0))
    throw InvalidArgument("UE " + std::to_string(m.ue) + " rate floor must be positive");
  return sinr_threshold(m.r_min_bps, bandwidth_hz);
}
}  // namespace detail

inline SubcarrierSystem empty_system(int k) {
  SubcarrierSystem s;
  s.subcarrier = k;
  s.A.resize(0, 0);
  s.eps.resize(0);
  return s;
}

inline SubcarrierSystem augment(const SubcarrierSystem& sys, const MemberSpec& m, double bandwidth_hz,
                                double noise_w) {
  if (sys.contains(m.ue)) throw ContractViolation("UE " + std::to_string(m.ue) + " already on subcarrier");
  const double d = detail::member_delta(m, bandwidth_hz);
  const Eigen::Index n = static_cast<Eigen::Index>(sys.size());
  SubcarrierSystem out;
  out.subcarrier = sys.subcarrier;
  out.members = sys.members;
  out.members.push_back(m.ue);
  out.delta = sys.delta;
  out.delta.push_back(d);
  out.A = Eigen::MatrixXd::Constant(n + 1, n + 1, -1.0);
  out.A.topLeftCorner(n, n) = sys.A;
  out.A(n, n) = 1.0 / d;
  out.eps.resize(n + 1);
  out.eps.head(n) = sys.eps;
  out.eps(n) = noise_w / m.gain;
  return out;
}

inline SubcarrierSystem build_system(int k, const std::vector<MemberSpec>& members, double bandwidth_hz,
                                     double noise_w) {
  SubcarrierSystem s = empty_system(k);
  for (const auto& m : members) s = augment(s, m, bandwidth_hz, noise_w);
  return s;
}

// log|det| must exceed log(1e-12 * ||A||_inf^n); checked in the log domain
// so large systems do not overflow.
inline constexpr double kDetRelThreshold = 1e-12;

// Positive solution of A p = eps, or nothing when the system is singular or
// the solution has a non-positive component.
inline std::optional<Eigen::VectorXd> solve_system(const SubcarrierSystem& sys) {
  const Eigen::Index n = sys.A.rows();
  if (n == 0) return Eigen::VectorXd(0);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.A);
  const auto& U = lu.matrixLU();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = std::abs(U(i, i));
    if (!(u > 0.0)) return std::nullopt;
    log_det += std::log(u);
  }
  const double norm_inf = sys.A.cwiseAbs().rowwise().sum().maxCoeff();
  if (log_det <= std::log(kDetRelThreshold) + static_cast<double>(n) * std::log(norm_inf)) return std::nullopt;
  Eigen::VectorXd p = lu.solve(sys.eps);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(p(i) > 0.0) || !std::isfinite(p(i))) return std::nullopt;
  return p;
}

inline bool is_solvable(const SubcarrierSystem& sys) { return solve_system(sys).has_value(); }

inline double rate_floor(const OptimizerLimits& limits, std::size_t j) {
  return limits.min_rate_bps.empty() ? 0.0 : limits.min_rate_bps[j];
}

// Mean gain over the selected satellites the UE sees (or all selected ones
// when it sees none), across each satellite's band.
inline double mean_selected_gain(const BandPartition& bands, const ChannelTable& tbl, std::size_t j) {
  auto accumulate = [&](bool visible_only) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t o = 0; o < bands.owners.size(); ++o) {
      const std::size_t s = tbl.require(bands.owners[o]);
      if (visible_only && !tbl.visible(s, j)) continue;
      for (int k : bands.blocks[o]) {
        sum += tbl.gain(s, j, k);
        ++count;
      }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
  };
  const double g = accumulate(true);
  return g > 0.0 ? g : accumulate(false);
}

// Descending r_min / mean gain; ties by UE index.
inline std::vector<std::size_t> initialization_order(const BandPartition& bands, const ChannelTable& tbl,
                                                     const OptimizerLimits& limits) {
  const std::size_t J = tbl.num_ues();
  std::vector<double> key(J);
  for (std::size_t j = 0; j < J; ++j) key[j] = rate_floor(limits, j) / mean_selected_gain(bands, tbl, j);
  std::vector<std::size_t> order(J);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return order;
}

struct InitCandidate {
  std::size_t owner = 0;  // index into BandPartition::owners
  int subcarrier = 0;
  double gain = 0.0;
};

inline std::vector<InitCandidate> candidate_subcarriers(const BandPartition& bands, const ChannelTable& tbl,
                                                        std::size_t j) {
  std::vector<InitCandidate> out;
  for (std::size_t o = 0; o < bands.owners.size(); ++o) {
    const std::size_t s = tbl.require(bands.owners[o]);
    for (int k : bands.blocks[o]) out.push_back({o, k, tbl.gain(s, j, k)});
  }
  std::stable_sort(out.begin(), out.end(), [](const InitCandidate& a, const InitCandidate& b) {
    if (a.gain != b.gain) return a.gain > b.gain;
    return a.subcarrier < b.subcarrier;
  });
  return out;
}

// Places every UE, highest demand first, on the first subcarrier (by
// descending own gain) whose augmented system stays solvable within P_max.
inline NetworkConfiguration initialize(const std::vector<SatelliteId>& selected, const BandPartition& bands,
                                       const ChannelTable& tbl, const OptimizerLimits& limits) {
  if (selected.empty()) throw InvalidArgument("initialization needs a non-empty selection");
  if (bands.owners != selected) throw ContractViolation("band partition does not match the selection");
  const std::size_t J = tbl.num_ues();
  if (limits.min_rate_bps.size() != J) throw InvalidArgument("rate floors must be given for every UE");
  for (const auto& s : selected) tbl.require(s);

  NetworkConfiguration cfg(J);
  cfg.slot_time_s = tbl.slot_time_s();
  cfg.selected = selected;
  cfg.bands = bands;

  std::vector<SubcarrierSystem> systems;
  systems.reserve(static_cast<std::size_t>(bands.num_subcarriers));
  for (int k = 0; k < bands.num_subcarriers; ++k) systems.push_back(empty_system(k));
  std::vector<double> sat_power(selected.size(), 0.0);

  for (std::size_t j : initialization_order(bands, tbl, limits)) {
    bool placed = false;
    for (const auto& c : candidate_subcarriers(bands, tbl, j)) {
      const auto& old_sys = systems[static_cast<std::size_t>(c.subcarrier)];
      SubcarrierSystem trial = augment(old_sys, {j, c.gain, limits.min_rate_bps[j]}, tbl.bandwidth_hz(), tbl.noise_w());
      auto p = solve_system(trial);
      if (!p) continue;
      double old_k = 0.0;
      for (std::size_t m : old_sys.members) old_k += cfg.power[m];
      const double total = sat_power[c.owner] - old_k + p->sum();
      if (!within_power(total, limits.max_power_w)) continue;

      sat_power[c.owner] = total;
      for (std::size_t i = 0; i < trial.members.size(); ++i) cfg.power[trial.members[i]] = (*p)(static_cast<Eigen::Index>(i));
      cfg.serving[j] = selected[c.owner];
      cfg.subcarrier[j] = c.subcarrier;
      systems[static_cast<std::size_t>(c.subcarrier)] = std::move(trial);
      placed = true;
      break;
    }
    if (!placed) throw InitializationInfeasible(j, "no subcarrier admits a solvable system within P_max");
  }
  return cfg;
}

}  // namespace dvmoss
