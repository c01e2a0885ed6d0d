#pragma once

// Inner loop for a fixed satellite selection: feasible initialization, then
// alternate matching (UA+BA) and per-satellite power allocation until the
// matching is stable under powers that PA has already processed.

#include <cstddef>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/feasinit.hpp"
#include "dvmoss/matching.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/network_configuration.hpp"
#include "dvmoss/power.hpp"

namespace dvmoss {

struct JubpaParams {
  MatchingParams matching;
  PaParams pa;
  int max_iterations = 50;
};

struct TracePoint {
  int iteration = 0;
  double sum_rate_bps = 0.0;
};

struct JubpaResult {
  NetworkConfiguration config;
  MatchingState matching;
  std::vector<TracePoint> trace;
  int iterations = 0;  // PA phases run
  bool converged = false;
  bool pa_applied = false;  // PA has already run on the current (x, y)
  double sum_rate_bps = 0.0;  // of `config`; can exceed the last trace point when capped
};

// One PA phase; each satellite's new powers are kept only if the
// configuration stays feasible and the sum rate does not drop.
inline bool power_phase(NetworkConfiguration& cfg, const ChannelTable& tbl, const OptimizerLimits& limits,
                        const PaParams& params) {
  bool changed = false;
  const std::vector<SatelliteId> selected = cfg.selected;  // cfg is reassigned below
  for (const auto& sat : selected) {
    const PaProblem pb = make_pa_problem(cfg, tbl, limits, sat);
    if (pb.size() == 0) continue;
    std::vector<double> p_init(pb.size());
    for (std::size_t i = 0; i < pb.size(); ++i) p_init[i] = cfg.power[pb.members[i]];
    const PaResult res = solve_pa(pb, p_init, params);
    if (res.power == p_init) continue;
    NetworkConfiguration trial = apply_pa(cfg, res);
    if (check_feasible(trial, tbl, limits).feasible() && sum_rate(trial, tbl) >= sum_rate(cfg, tbl)) {
      cfg = std::move(trial);
      changed = true;
    }
  }
  return changed;
}

// Resumes the BCD loop from `prev` (typically a previous result).
inline JubpaResult continue_jubpa(JubpaResult prev, const ChannelTable& tbl, const OptimizerLimits& limits,
                                  const JubpaParams& params = {}) {
  JubpaResult res = std::move(prev);
  res.converged = false;
  if (res.trace.empty()) res.trace.push_back({0, sum_rate(res.config, tbl)});
  for (;;) {
    const MatchingReport m = run_matching(res.config, res.matching, tbl, limits, params.matching);
    if (m.changed()) res.pa_applied = false;
    if (!m.changed() && res.pa_applied) {
      res.converged = true;
      break;
    }
    if (res.iterations >= params.max_iterations) break;
    power_phase(res.config, tbl, limits, params.pa);
    res.pa_applied = true;
    ++res.iterations;
    res.trace.push_back({res.iterations, sum_rate(res.config, tbl)});
  }
  res.sum_rate_bps = sum_rate(res.config, tbl);
  return res;
}

inline JubpaResult run_jubpa(const std::vector<SatelliteId>& selected, const ChannelTable& tbl,
                             const OptimizerLimits& limits, const JubpaParams& params = {}) {
  JubpaResult res;
  const BandPartition bands = bandwidth_partition(selected, tbl.num_subcarriers());
  res.config = initialize(bands.owners, bands, tbl, limits);
  res.matching = MatchingState::make(tbl.num_ues(), params.matching);
  res.trace.push_back({0, sum_rate(res.config, tbl)});
  return continue_jubpa(std::move(res), tbl, limits, params);
}

}  // namespace dvmoss
