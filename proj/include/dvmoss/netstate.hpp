#pragma once

// Bandwidth partitioning, feasibility checking of a configuration against
// the constraint set, and the per-slot objective.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/network_configuration.hpp"

namespace dvmoss {

struct OptimizerLimits {
  int max_satellites = 10;        // Z_th
  double max_power_w = 5.0;       // P_max per satellite
  std::vector<double> min_rate_bps;  // r_min per UE

  void validate() const {
    if (max_satellites < 1) throw InvalidArgument("Z_th must be >= 1");
    if (!(max_power_w > 0.0)) throw InvalidArgument("P_max must be > 0");
    for (double r : min_rate_bps)
      if (!(r >= 0.0)) throw InvalidArgument("r_min must be >= 0");
  }

  static OptimizerLimits uniform(int z_th, double p_max, double r_min, std::size_t num_ues) {
    return {z_th, p_max, std::vector<double>(num_ues, r_min)};
  }
};

// Relative slack applied to the rate and power comparisons; pinned rates
// land on r_min up to rounding.
inline constexpr double kRateRelTolerance = 1e-9;
inline constexpr double kPowerRelTolerance = 1e-12;

inline bool meets_min_rate(double rate, double r_min) { return rate >= r_min * (1.0 - kRateRelTolerance); }
inline bool within_power(double total, double p_max) { return total <= p_max * (1.0 + kPowerRelTolerance); }

// Contiguous blocks in ascending satellite order; the first K mod n
// satellites get one extra subcarrier.
inline BandPartition bandwidth_partition(std::vector<SatelliteId> selected, int num_subcarriers) {
  std::sort(selected.begin(), selected.end());
  if (std::adjacent_find(selected.begin(), selected.end()) != selected.end())
    throw InvalidArgument("selection contains duplicate satellites");
  const int n = static_cast<int>(selected.size());
  if (n < 1) throw InfeasiblePartition("cannot partition the band over an empty selection");
  if (n > num_subcarriers)
    throw InfeasiblePartition(std::to_string(n) + " satellites exceed " + std::to_string(num_subcarriers) +
                              " subcarriers");
  BandPartition bp;
  bp.num_subcarriers = num_subcarriers;
  bp.owners = std::move(selected);
  bp.blocks.resize(static_cast<std::size_t>(n));
  bp.owner_of.assign(static_cast<std::size_t>(num_subcarriers), 0);
  const int base = num_subcarriers / n;
  const int extra = num_subcarriers % n;
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int size = base + (i < extra ? 1 : 0);
    for (int c = 0; c < size; ++c) {
      bp.blocks[static_cast<std::size_t>(i)].push_back(next);
      bp.owner_of[static_cast<std::size_t>(next)] = i;
      ++next;
    }
  }
  return bp;
}

enum class Constraint {
  SingleAssociation,  // x couples only to selected satellites, at most one per UE
  PowerBudget,
  ConstellationSize,
  MinimumRate,
  PositivePower,
  VisibilityCone,
  Structure,
};

inline const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::SingleAssociation: return "single-association";
    case Constraint::PowerBudget: return "power-budget";
    case Constraint::ConstellationSize: return "constellation-size";
    case Constraint::MinimumRate: return "minimum-rate";
    case Constraint::PositivePower: return "positive-power";
    case Constraint::VisibilityCone: return "visibility-cone";
    case Constraint::Structure: return "structure";
  }
  return "unknown";
}

struct Violation {
  Constraint constraint;
  std::string detail;
};

struct FeasibilityReport {
  std::vector<Violation> violations;

  bool feasible() const { return violations.empty(); }
  bool violates(Constraint c) const {
    for (const auto& v : violations)
      if (v.constraint == c) return true;
    return false;
  }
};

// Per-satellite sum of associated UE powers.
inline std::map<SatelliteId, double> satellite_power(const NetworkConfiguration& cfg) {
  std::map<SatelliteId, double> out;
  for (const auto& s : cfg.selected) out[s] = 0.0;
  for (std::size_t j = 0; j < cfg.num_ues(); ++j)
    if (cfg.serving[j]) out[*cfg.serving[j]] += cfg.power[j];
  return out;
}

inline FeasibilityReport check_feasible(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                                        const OptimizerLimits& limits) {
  FeasibilityReport rep;
  auto add = [&](Constraint c, std::string d) { rep.violations.push_back({c, std::move(d)}); };
  const std::size_t J = cfg.num_ues();

  if (cfg.subcarrier.size() != J || cfg.power.size() != J || tbl.num_ues() != J ||
      (!limits.min_rate_bps.empty() && limits.min_rate_bps.size() != J)) {
    add(Constraint::Structure, "per-UE vectors disagree in length");
    return rep;
  }
  if (!std::is_sorted(cfg.selected.begin(), cfg.selected.end()) ||
      std::adjacent_find(cfg.selected.begin(), cfg.selected.end()) != cfg.selected.end())
    add(Constraint::Structure, "selection must be sorted and duplicate-free");
  if (cfg.bands.owners != cfg.selected)
    add(Constraint::Structure, "band partition owners differ from the selection");

  if (static_cast<int>(cfg.selected.size()) > limits.max_satellites)
    add(Constraint::ConstellationSize, std::to_string(cfg.selected.size()) + " selected > Z_th " +
                                           std::to_string(limits.max_satellites));
  for (const auto& s : cfg.selected)
    if (!tbl.contains(s)) add(Constraint::VisibilityCone, to_string(s) + " is outside the visible union");

  std::vector<bool> rate_computable(J, false);
  for (std::size_t j = 0; j < J; ++j) {
    if (!cfg.serving[j]) {
      if (cfg.subcarrier[j]) add(Constraint::Structure, "UE " + std::to_string(j) + " has a subcarrier but no satellite");
      continue;
    }
    const SatelliteId& s = *cfg.serving[j];
    const bool is_selected = std::binary_search(cfg.selected.begin(), cfg.selected.end(), s);
    if (!is_selected)
      add(Constraint::SingleAssociation, "UE " + std::to_string(j) + " served by unselected " + to_string(s));
    if (!(cfg.power[j] > 0.0) || !std::isfinite(cfg.power[j]))
      add(Constraint::PositivePower, "UE " + std::to_string(j) + " power is not positive");
    if (!cfg.subcarrier[j]) {
      add(Constraint::Structure, "UE " + std::to_string(j) + " is associated without a subcarrier");
      continue;
    }
    if (!cfg.bands.owns(s, *cfg.subcarrier[j])) {
      add(Constraint::Structure, "UE " + std::to_string(j) + " subcarrier is outside its satellite's band");
      continue;
    }
    rate_computable[j] = is_selected && tbl.contains(s);
  }

  for (const auto& [s, total] : satellite_power(cfg))
    if (!within_power(total, limits.max_power_w))
      add(Constraint::PowerBudget, to_string(s) + " power " + std::to_string(total) + " W > P_max");

  for (std::size_t j = 0; j < J; ++j) {
    const double r_min = limits.min_rate_bps.empty() ? 0.0 : limits.min_rate_bps[j];
    if (!cfg.serving[j]) {
      if (r_min > 0.0) add(Constraint::MinimumRate, "UE " + std::to_string(j) + " is unassociated");
      continue;
    }
    if (!rate_computable[j]) continue;
    if (!meets_min_rate(user_rate(cfg, tbl, j), r_min))
      add(Constraint::MinimumRate, "UE " + std::to_string(j) + " rate below r_min");
  }
  return rep;
}

// Per-slot objective: the sum rate.
inline double theta(const NetworkConfiguration& cfg, const ChannelTable& tbl) { return sum_rate(cfg, tbl); }

}  // namespace dvmoss
