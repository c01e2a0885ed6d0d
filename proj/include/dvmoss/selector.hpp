#pragma once

// Satellite-subset search by Markov approximation, plus the baseline
// selection policies. The chain is generic over its state so it can be run
// on synthetic objectives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/jubpa.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/orbits.hpp"

namespace dvmoss {

// q(from -> to) = 1 / (1 + exp(beta (theta_from - theta_to))).
inline double transition_prob(double theta_from, double theta_to, double beta) {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  const double x = beta * (theta_from - theta_to);
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

inline std::vector<double> stationary_weights(std::span<const double> theta, double beta) {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  std::vector<double> w(theta.size());
  if (theta.empty()) return w;
  const double top = beta * *std::max_element(theta.begin(), theta.end());
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    w[i] = std::exp(beta * theta[i] - top);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

struct MarkovParams {
  double beta0 = 1.0;  // on theta / theta_ref, dimensionless
  double beta_step = 0.1;
  double nu0 = 1.0;
  double nu_step = 0.05;
  int max_stages = 1000;
  int max_initial_draws = 200;

  void validate() const {
    if (!(beta0 >= 0.0)) throw InvalidArgument("beta0 must be >= 0");
    if (!(beta_step >= 0.0)) throw InvalidArgument("beta_step must be >= 0");
    if (!(nu0 >= 0.0 && nu0 <= 1.0)) throw InvalidArgument("nu0 must lie in [0, 1]");
    if (!(nu_step >= 0.0)) throw InvalidArgument("nu_step must be >= 0");
    if (max_stages < 1) throw InvalidArgument("max_stages must be >= 1");
  }
};

enum class StageRule {
  Alternating,  // even stages explore, odd stages consolidate
  Randomized,   // each stage type with probability 1/2
};

struct ChainStage {
  int stage = 0;
  bool exploration = false;
  double theta = 0.0;       // current state's objective after the stage
  double best_theta = 0.0;  // best seen so far
  double beta = 0.0;
  double nu = 0.0;
};

template <typename State>
struct ChainResult {
  State best;
  double best_theta = 0.0;
  State last;
  std::vector<ChainStage> trace;
};

struct NoObserver {
  template <typename State>
  void operator()(const ChainStage&, const State&) const {}
};

// `evaluate(state)` returns the objective or nothing for infeasible states;
// `propose(rng)` draws a fresh state. Objectives are divided by
// `theta_scale` before entering the transition probabilities.
template <typename State, typename Evaluate, typename Propose, typename Rng, typename Observer = NoObserver>
ChainResult<State> run_markov_chain(Evaluate&& evaluate, Propose&& propose, const MarkovParams& params, Rng& rng,
                                    StageRule rule = StageRule::Alternating, double theta_scale = 1.0,
                                    Observer&& observe = {}) {
  params.validate();
  if (!(theta_scale > 0.0)) throw InvalidArgument("theta scale must be > 0");
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::optional<State> cur;
  double theta_cur = 0.0;
  for (int d = 0; d < params.max_initial_draws && !cur; ++d) {
    State s = propose(rng);
    if (auto th = evaluate(s)) {
      cur = std::move(s);
      theta_cur = *th;
    }
  }
  if (!cur) throw NoFeasibleConfiguration("no feasible state among the initial draws");

  ChainResult<State> res;
  res.best = *cur;
  res.best_theta = theta_cur;
  State prev = *cur;
  double theta_prev = theta_cur;
  double beta = params.beta0;
  double nu = params.nu0;

  for (int c = 0; c < params.max_stages && nu > 0.0; ++c) {
    const bool explore = rule == StageRule::Alternating ? (c % 2 == 0) : unit(rng) < 0.5;
    if (explore) {
      prev = *cur;
      theta_prev = theta_cur;
      if (unit(rng) < nu) {
        State s = propose(rng);
        if (auto th = evaluate(s)) {
          cur = std::move(s);
          theta_cur = *th;
        }
      }
    } else {
      const double alpha = transition_prob(theta_cur / theta_scale, theta_prev / theta_scale, beta);
      if (unit(rng) < alpha) {
        cur = prev;
        theta_cur = theta_prev;
      }
      beta += params.beta_step;
      if (*cur == prev) nu = std::max(0.0, nu - params.nu_step);
    }
    if (theta_cur > res.best_theta) {
      res.best = *cur;
      res.best_theta = theta_cur;
    }
    ChainStage st{c, explore, theta_cur, res.best_theta, beta, nu};
    res.trace.push_back(st);
    observe(st, *cur);
  }
  res.last = *cur;
  return res;
}

// Uniform n-subset, sorted.
template <typename Rng>
std::vector<SatelliteId> random_subset(std::span<const SatelliteId> visible, int n, Rng& rng) {
  std::vector<SatelliteId> pool(visible.begin(), visible.end());
  std::sort(pool.begin(), pool.end());
  n = std::clamp(n, 0, static_cast<int>(pool.size()));
  std::vector<SatelliteId> out;
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), n, rng);
  return out;
}

// Uniform size in [1, min(Z_th, |visible|, K)], then a uniform subset.
template <typename Rng>
std::vector<SatelliteId> draw_selection(std::span<const SatelliteId> visible, int max_size, Rng& rng) {
  const int cap = std::min<int>(max_size, static_cast<int>(visible.size()));
  if (cap < 1) throw InvalidArgument("cannot draw a selection from an empty visible set");
  std::uniform_int_distribution<int> size_dist(1, cap);
  return random_subset(visible, size_dist(rng), rng);
}

struct SelectionProblem {
  const ChannelTable* table = nullptr;
  OptimizerLimits limits;
  JubpaParams jubpa;

  std::span<const SatelliteId> visible() const { return table->satellites(); }
  int max_selection() const { return std::min(limits.max_satellites, table->num_subcarriers()); }
  double theta_ref() const {
    double s = 0.0;
    for (double r : limits.min_rate_bps) s += r;
    return s > 0.0 ? s : 1.0;
  }
};

// JUBPA results memoized per selection.
class JubpaCache {
 public:
  explicit JubpaCache(const SelectionProblem& pb) : pb_(pb) {}

  const JubpaResult* get(const std::vector<SatelliteId>& z) {
    auto it = cache_.find(z);
    if (it == cache_.end()) {
      std::optional<JubpaResult> r;
      try {
        r = run_jubpa(z, *pb_.table, pb_.limits, pb_.jubpa);
      } catch (const InitializationInfeasible&) {
      } catch (const InfeasiblePartition&) {
      }
      it = cache_.emplace(z, std::move(r)).first;
    }
    return it->second ? &*it->second : nullptr;
  }
  std::size_t evaluations() const { return cache_.size(); }

 private:
  const SelectionProblem& pb_;
  std::map<std::vector<SatelliteId>, std::optional<JubpaResult>> cache_;
};

struct SelectionOutcome {
  std::vector<SatelliteId> selection;
  JubpaResult result;
  std::vector<ChainStage> trace;  // empty for one-shot baselines
  bool truncated = false;         // requested size exceeded the visible set
  double theta_bps() const { return result.sum_rate_bps; }
};

template <typename Rng>
SelectionOutcome run_dvmoss(const SelectionProblem& pb, const MarkovParams& params, Rng& rng,
                            StageRule rule = StageRule::Alternating) {
  if (pb.visible().empty()) throw NoFeasibleConfiguration("no visible satellites");
  JubpaCache cache(pb);
  auto evaluate = [&](const std::vector<SatelliteId>& z) -> std::optional<double> {
    const JubpaResult* r = cache.get(z);
    if (!r) return std::nullopt;
    return r->sum_rate_bps;
  };
  auto propose = [&](Rng& g) { return draw_selection(pb.visible(), pb.max_selection(), g); };
  auto chain = run_markov_chain<std::vector<SatelliteId>>(evaluate, propose, params, rng, rule, pb.theta_ref());
  SelectionOutcome out;
  out.selection = chain.best;
  out.result = *cache.get(chain.best);
  out.trace = std::move(chain.trace);
  return out;
}

template <typename Rng>
SelectionOutcome run_eps_markov(const SelectionProblem& pb, const MarkovParams& params, Rng& rng) {
  return run_dvmoss(pb, params, rng, StageRule::Randomized);
}

inline Vec3 centroid(std::span<const GeoState> ues) {
  Vec3 c{0.0, 0.0, 0.0};
  for (const auto& u : ues) c = c + u.position_km;
  return ues.empty() ? c : c * (1.0 / static_cast<double>(ues.size()));
}

// n visible satellites closest to `center`; ties by id.
inline std::vector<SatelliteId> k_nearest(const ChannelTable& tbl, const Vec3& center, int n, bool* truncated = nullptr) {
  std::vector<std::size_t> idx(tbl.num_satellites());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<double> d(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) d[i] = distance(tbl.position(i), center);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  if (truncated) *truncated = n > static_cast<int>(idx.size());
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(std::max(n, 0))));
  std::vector<SatelliteId> out;
  for (std::size_t i : idx) out.push_back(tbl.satellites()[i]);
  std::sort(out.begin(), out.end());
  return out;
}

inline SelectionOutcome run_fixed_selection(const SelectionProblem& pb, std::vector<SatelliteId> z,
                                            bool truncated = false) {
  if (z.empty()) throw NoFeasibleConfiguration("empty selection");
  SelectionOutcome out;
  out.selection = std::move(z);
  out.truncated = truncated;
  out.result = run_jubpa(out.selection, *pb.table, pb.limits, pb.jubpa);
  return out;
}

template <typename Rng>
SelectionOutcome run_random_selection(const SelectionProblem& pb, int n, Rng& rng) {
  const bool truncated = n > static_cast<int>(pb.visible().size());
  return run_fixed_selection(pb, random_subset(pb.visible(), n, rng), truncated);
}

inline SelectionOutcome run_nearest_selection(const SelectionProblem& pb, std::span<const GeoState> ues, int n) {
  bool truncated = false;
  auto z = k_nearest(*pb.table, centroid(ues), n, &truncated);
  return run_fixed_selection(pb, std::move(z), truncated);
}

}  // namespace dvmoss
