#pragma once

// Per-satellite power allocation. Under the high-SINR approximation and the
// change of variables p' = log2 p, I' = log2 I, the problem becomes
// convex; its Lagrangian is minimized in closed form for fixed multipliers
// and the multipliers follow projected subgradient steps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/feasinit.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/network_configuration.hpp"

namespace dvmoss {

struct PaParams {
  double lambda0 = 1.0;
  double n0 = 0.0;
  double m0 = 0.0;
  double q_lambda0 = 1e-3;
  double q_n0 = 1e-2;
  double q_m0 = 1e-2;
  double tolerance = 1e-5;  // on max |dp'| / max(1, |p'|)
  int max_iterations = 500;
  double interference_floor_w = 1e-30;
  double lambda_floor = 1e-12;  // keeps the closed-form power finite
};

// One satellite's subproblem. Index i runs over the satellite's members.
struct PaProblem {
  std::vector<std::size_t> members;  // UE indices
  std::vector<int> subcarrier;
  std::vector<double> gain;          // own-link gain on the assigned subcarrier
  std::vector<double> chi;           // r_min / B
  double noise_w = 1.0;
  double bandwidth_hz = 1.0;
  double max_power_w = 1.0;

  std::size_t size() const { return members.size(); }
  double interference_cap() const {
    return max_power_w * *std::max_element(gain.begin(), gain.end());
  }
};

inline PaProblem make_pa_problem(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                                 const OptimizerLimits& limits, const SatelliteId& sat) {
  PaProblem pb;
  pb.noise_w = tbl.noise_w();
  pb.bandwidth_hz = tbl.bandwidth_hz();
  pb.max_power_w = limits.max_power_w;
  for (std::size_t j = 0; j < cfg.num_ues(); ++j) {
    if (!cfg.scheduled(j) || *cfg.serving[j] != sat) continue;
    pb.members.push_back(j);
    pb.subcarrier.push_back(*cfg.subcarrier[j]);
    pb.gain.push_back(tbl.gain(sat, j, *cfg.subcarrier[j]));
    pb.chi.push_back(rate_floor(limits, j) / tbl.bandwidth_hz());
  }
  return pb;
}

struct DualState {
  double lambda = 1.0;
  std::vector<double> n;
  std::vector<double> m;
  int iteration = 0;  // r

  static DualState initial(std::size_t size, const PaParams& p = {}) {
    return {p.lambda0, std::vector<double>(size, p.n0), std::vector<double>(size, p.m0), 0};
  }
};

struct PaPrimal {
  std::vector<double> p_log;  // log2 W
  std::vector<double> i_log;
  std::vector<double> p;      // W
  std::vector<double> i;      // W
};

inline double safe_log2(double x, double floor) { return std::log2(std::max(x, floor)); }

inline PaPrimal primal_update(const DualState& dual, const PaProblem& pb, const PaParams& params = {}) {
  if (!(dual.lambda > 0.0)) throw InvalidArgument("power multiplier must be positive");
  const std::size_t N = dual.n.size();
  PaPrimal out;
  out.p_log.resize(N);
  out.i_log.resize(N);
  out.p.resize(N);
  out.i.resize(N);
  const double cap = pb.size() ? pb.interference_cap() : 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    out.p[i] = (1.0 + dual.n[i]) / (dual.lambda * std::log(2.0));
    out.p_log[i] = std::log2(out.p[i]);
    const double denom = 1.0 + dual.n[i] - dual.m[i];
    out.i[i] = denom > 0.0 ? std::max(dual.m[i] * pb.noise_w / denom, 0.0) : cap;
    out.i_log[i] = safe_log2(out.i[i], params.interference_floor_w);
  }
  return out;
}

// Co-channel interference each member sees at powers `p`.
inline std::vector<double> measured_interference(const PaProblem& pb, const std::vector<double>& p) {
  std::vector<double> out(pb.size(), 0.0);
  for (std::size_t i = 0; i < pb.size(); ++i) {
    double others = 0.0;
    for (std::size_t o = 0; o < pb.size(); ++o)
      if (o != i && pb.subcarrier[o] == pb.subcarrier[i]) others += p[o];
    out[i] = others * pb.gain[i];
  }
  return out;
}

// log2[2^-p' (2^I' + sigma^2) / g], i.e. -log2 of the approximate SINR.
inline double inverse_sinr_log(double p_log, double i_log, double gain, double noise) {
  return -p_log + std::log2(std::exp2(i_log) + noise) - std::log2(gain);
}

struct Subgradients {
  double lambda = 0.0;
  std::vector<double> n;
  std::vector<double> m;
};

inline Subgradients subgradients(const PaProblem& pb, const std::vector<double>& p_log,
                                 const std::vector<double>& i_log, const std::vector<double>& measured_i,
                                 const PaParams& params = {}) {
  Subgradients g;
  g.n.resize(pb.size());
  g.m.resize(pb.size());
  g.lambda = -pb.max_power_w;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    g.lambda += std::exp2(p_log[i]);
    g.n[i] = inverse_sinr_log(p_log[i], i_log[i], pb.gain[i], pb.noise_w) + pb.chi[i];
    g.m[i] = safe_log2(measured_i[i], params.interference_floor_w) - i_log[i];
  }
  return g;
}

// Projected step r -> r+1 with q^(r+1) = q0 / sqrt(r+1).
inline DualState multiplier_update(const DualState& dual, const Subgradients& g, const PaParams& params = {}) {
  DualState out = dual;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dual.iteration + 1));
  out.lambda = std::max(params.lambda_floor, dual.lambda + params.q_lambda0 * scale * g.lambda);
  for (std::size_t i = 0; i < out.n.size(); ++i) {
    out.n[i] = std::max(0.0, dual.n[i] + params.q_n0 * scale * g.n[i]);
    out.m[i] = std::max(0.0, dual.m[i] + params.q_m0 * scale * g.m[i]);
  }
  out.iteration = dual.iteration + 1;
  return out;
}

inline DualState multiplier_update(const DualState& dual, const PaPrimal& primal, const PaProblem& pb,
                                   const PaParams& params = {}) {
  const auto measured = measured_interference(pb, primal.p);
  return multiplier_update(dual, subgradients(pb, primal.p_log, primal.i_log, measured, params), params);
}

// Lagrangian with the measured interference `measured_i` held as data.
inline double lagrangian_value(const PaProblem& pb, const std::vector<double>& p_log,
                               const std::vector<double>& i_log, const DualState& dual,
                               const std::vector<double>& measured_i, const PaParams& params = {}) {
  double objective = 0.0, power = -pb.max_power_w, rate = 0.0, consistency = 0.0;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    const double f = inverse_sinr_log(p_log[i], i_log[i], pb.gain[i], pb.noise_w);
    objective += f;
    power += std::exp2(p_log[i]);
    rate += dual.n[i] * (f + pb.chi[i]);
    consistency += dual.m[i] * (-i_log[i] + safe_log2(measured_i[i], params.interference_floor_w));
  }
  return objective + dual.lambda * power + rate + consistency;
}

// True (non-approximated) rates of the members at powers `p`.
inline std::vector<double> member_rates(const PaProblem& pb, const std::vector<double>& p) {
  const auto interf = measured_interference(pb, p);
  std::vector<double> out(pb.size());
  for (std::size_t i = 0; i < pb.size(); ++i)
    out[i] = shannon_rate(pb.bandwidth_hz, p[i] * pb.gain[i] / (interf[i] + pb.noise_w));
  return out;
}

// Largest tau <= 1 with tau * sum(p) <= P_max.
inline double safeguard_scale(const std::vector<double>& p, double max_power_w) {
  double total = 0.0;
  for (double v : p) total += v;
  return total > max_power_w ? max_power_w / total : 1.0;
}

struct PaResult {
  std::vector<std::size_t> members;
  std::vector<double> power;
  DualState dual;
  int iterations = 0;
  bool converged = false;
  bool meets_floors = false;
};

// Subgradient iteration from `p_init`; returns the best safeguarded iterate
// by true sum rate, floor-feasible iterates first.
inline PaResult solve_pa(const PaProblem& pb, const std::vector<double>& p_init, const PaParams& params = {}) {
  if (pb.size() == 0) throw InvalidArgument("power allocation needs at least one member");
  if (p_init.size() != pb.size()) throw InvalidArgument("initial power vector size mismatch");

  PaResult res;
  res.members = pb.members;
  bool have_best = false;
  bool best_feasible = false;
  double best_rate = -std::numeric_limits<double>::infinity();

  auto consider = [&](std::vector<double> p) {
    const double tau = safeguard_scale(p, pb.max_power_w);
    for (double& v : p) v *= tau;
    const auto rates = member_rates(pb, p);
    bool feasible = true;
    double total = 0.0;
    for (std::size_t i = 0; i < pb.size(); ++i) {
      feasible = feasible && p[i] > 0.0 && meets_min_rate(rates[i], pb.chi[i] * pb.bandwidth_hz);
      total += rates[i];
    }
    const bool better = !have_best || (feasible && !best_feasible) || (feasible == best_feasible && total > best_rate);
    if (better) {
      have_best = true;
      best_feasible = feasible;
      best_rate = total;
      res.power = std::move(p);
    }
  };

  consider(p_init);

  DualState dual = DualState::initial(pb.size(), params);
  {
    std::vector<double> p_log(pb.size()), i_log(pb.size());
    const auto measured = measured_interference(pb, p_init);
    for (std::size_t i = 0; i < pb.size(); ++i) {
      p_log[i] = std::log2(p_init[i]);
      i_log[i] = safe_log2(measured[i], params.interference_floor_w);
    }
    dual = multiplier_update(dual, subgradients(pb, p_log, i_log, measured, params), params);
  }

  std::optional<std::vector<double>> prev_log;
  int r = 1;
  for (; r <= params.max_iterations; ++r) {
    const PaPrimal primal = primal_update(dual, pb, params);
    consider(primal.p);
    if (prev_log) {
      double change = 0.0;
      for (std::size_t i = 0; i < pb.size(); ++i)
        change = std::max(change, std::abs(primal.p_log[i] - (*prev_log)[i]) / std::max(1.0, std::abs(primal.p_log[i])));
      if (change < params.tolerance) {
        res.converged = true;
        break;
      }
    }
    prev_log = primal.p_log;
    dual = multiplier_update(dual, primal, pb, params);
  }
  res.iterations = std::min(r, params.max_iterations);
  res.dual = dual;
  res.meets_floors = best_feasible;
  return res;
}

// Writes the satellite's PA solution into a copy of `cfg`.
inline NetworkConfiguration apply_pa(const NetworkConfiguration& cfg, const PaResult& res) {
  NetworkConfiguration out = cfg;
  for (std::size_t i = 0; i < res.members.size(); ++i) out.power[res.members[i]] = res.power[i];
  return out;
}

}  // namespace dvmoss
