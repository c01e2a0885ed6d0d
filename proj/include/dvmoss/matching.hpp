#pragma once

// Two-sided matching for a fixed selection and fixed powers: user association
// (UEs propose to satellites under a per-round quota and a per-UE change
// limit) followed by bandwidth allocation (minimum-rate UE of each subcarrier
// swaps to another subcarrier of the same satellite).
//
// The association and subcarrier maps live in NetworkConfiguration; the
// state below carries only the bookkeeping.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/feasinit.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/network_configuration.hpp"

namespace dvmoss {

struct MatchingParams {
  std::optional<int> quota;      // U_q; defaults to max(1, ceil(J/5))
  int change_limit = 4;          // U_max
  double phi_ua = 1.0;
  double interference_cost = 1.0;  // c_k, per W, same on every subcarrier
  int max_rounds = 100;          // UA+BA rounds per run_matching call
  int max_ba_passes = 1000;

  int quota_for(std::size_t num_ues) const {
    if (quota) return *quota;
    return std::max(1, static_cast<int>((num_ues + 4) / 5));
  }
};

struct PendingMove {
  std::size_t ue = 0;
  std::optional<SatelliteId> from_satellite;
  std::optional<int> from_subcarrier;
};

struct MatchingState {
  std::vector<int> change_count;  // U_j
  int quota = 1;
  int change_limit = 4;
  std::set<std::pair<int, int>> blocked;  // (old, new) subcarrier pairs
  std::vector<PendingMove> pending;       // UA moves awaiting the BA re-seat

  static MatchingState make(std::size_t num_ues, const MatchingParams& p) {
    MatchingState s;
    s.change_count.assign(num_ues, 0);
    s.quota = p.quota_for(num_ues);
    s.change_limit = p.change_limit;
    return s;
  }
};

inline constexpr double kNoPreference = -std::numeric_limits<double>::infinity();

// Rate UE j would get on (sat, k) with its current power, everyone else fixed.
inline double hypothetical_rate(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j,
                                const SatelliteId& sat, int k) {
  const double g = tbl.gain(sat, j, k);
  double others = 0.0;
  for (std::size_t o = 0; o < cfg.num_ues(); ++o) {
    if (o == j || !cfg.scheduled(o)) continue;
    if (*cfg.serving[o] == sat && *cfg.subcarrier[o] == k) others += cfg.power[o];
  }
  return shannon_rate(tbl.bandwidth_hz(), cfg.power[j] * g / (g * others + tbl.noise_w()));
}

// Mean rate increment over the improving subcarriers of `sat`; kNoPreference
// when no subcarrier is at least as good as the current one.
inline double ue_ua_preference(std::size_t j, const SatelliteId& sat, const NetworkConfiguration& cfg,
                               const ChannelTable& tbl) {
  const double r = user_rate(cfg, tbl, j);
  double sum = 0.0;
  int count = 0;
  for (int k : cfg.bands.band(sat)) {
    const double rk = hypothetical_rate(cfg, tbl, j, sat, k);
    if (rk >= r) {
      sum += rk - r;
      ++count;
    }
  }
  return count ? sum / count : kNoPreference;
}

inline double sat_ua_preference(const SatelliteId& sat, std::size_t j, const NetworkConfiguration& cfg,
                                const ChannelTable& tbl, const OptimizerLimits& limits,
                                const MatchingParams& params = {}) {
  const double d = sinr_threshold(rate_floor(limits, j), tbl.bandwidth_hz());
  const double p = cfg.power[j];
  double adv = 0.0, cost = 0.0;
  for (int k : cfg.bands.band(sat)) {
    const double eps = tbl.noise_w() / tbl.gain(sat, j, k);
    if (d > 0.0) {
      adv += p / d - eps;
    } else {
      adv = p > 0.0 ? std::numeric_limits<double>::infinity() : adv - eps;
    }
    cost += params.interference_cost * p;
  }
  return params.phi_ua * adv - cost;
}

// Every scheduled UE meets its rate floor.
inline bool rates_meet_floors(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                              const OptimizerLimits& limits) {
  for (std::size_t j = 0; j < cfg.num_ues(); ++j)
    if (cfg.scheduled(j) && !meets_min_rate(user_rate(cfg, tbl, j), rate_floor(limits, j))) return false;
  return true;
}

inline double satellite_load(const NetworkConfiguration& cfg, const SatelliteId& sat) {
  double total = 0.0;
  for (std::size_t j = 0; j < cfg.num_ues(); ++j)
    if (cfg.serving[j] && *cfg.serving[j] == sat) total += cfg.power[j];
  return total;
}

// Band of `sat` ordered by descending gain for UE j; ties by subcarrier.
inline std::vector<int> subcarriers_by_gain(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                                            std::size_t j, const SatelliteId& sat) {
  std::vector<int> ks = cfg.bands.band(sat);
  std::stable_sort(ks.begin(), ks.end(), [&](int a, int b) { return tbl.gain(sat, j, a) > tbl.gain(sat, j, b); });
  return ks;
}

// First subcarrier of `sat` (by gain) where seating j keeps every floor and
// strictly raises the sum rate over `base_rate`.
inline std::optional<NetworkConfiguration> try_seat(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                                                    const OptimizerLimits& limits, std::size_t j,
                                                    const SatelliteId& sat, double base_rate) {
  for (int k : subcarriers_by_gain(cfg, tbl, j, sat)) {
    NetworkConfiguration trial = cfg;
    trial.serving[j] = sat;
    trial.subcarrier[j] = k;
    if (rates_meet_floors(trial, tbl, limits) && sum_rate(trial, tbl) > base_rate) return trial;
  }
  return std::nullopt;
}

// Satellite-side acceptance test for a single proposal.
inline std::optional<NetworkConfiguration> accept_proposal(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                                                           const OptimizerLimits& limits, std::size_t j,
                                                           const SatelliteId& sat, double base_rate) {
  if (!within_power(satellite_load(cfg, sat) + cfg.power[j], limits.max_power_w)) return std::nullopt;
  return try_seat(cfg, tbl, limits, j, sat, base_rate);
}

namespace detail {
struct Proposal {
  double score;
  SatelliteId sat;
};

// Satellites other than the current one with positive UE-side score, best first.
inline std::vector<Proposal> proposal_list(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j) {
  std::vector<Proposal> out;
  for (const auto& s : cfg.selected) {
    if (cfg.serving[j] && *cfg.serving[j] == s) continue;
    const double pf = ue_ua_preference(j, s, cfg, tbl);
    if (pf > 0.0) out.push_back({pf, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  return out;
}

inline bool may_propose(const NetworkConfiguration& cfg, const MatchingState& st, std::size_t j) {
  return cfg.scheduled(j) && st.change_count[j] < st.change_limit;
}
}  // namespace detail

// One user-association round. Returns the number of UEs that changed
// satellite (never more than the quota). Accepted moves are recorded in
// `st.pending` for the following ba_round.
inline int ua_round(NetworkConfiguration& cfg, MatchingState& st, const ChannelTable& tbl,
                    const OptimizerLimits& limits, const MatchingParams& params = {}) {
  const std::size_t J = cfg.num_ues();
  if (st.quota <= 0) return 0;

  std::vector<std::vector<detail::Proposal>> lists(J);
  std::vector<std::size_t> ranking;
  for (std::size_t j = 0; j < J; ++j) {
    if (!detail::may_propose(cfg, st, j)) continue;
    lists[j] = detail::proposal_list(cfg, tbl, j);
    if (!lists[j].empty()) ranking.push_back(j);
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [&](std::size_t a, std::size_t b) { return lists[a].front().score > lists[b].front().score; });

  int accepted = 0;
  std::size_t next_rank = 0;
  std::vector<std::size_t> active;
  auto refill = [&] {
    while (static_cast<int>(active.size()) + accepted < st.quota && next_rank < ranking.size())
      active.push_back(ranking[next_rank++]);
  };
  refill();
  double current = sum_rate(cfg, tbl);

  while (!active.empty() && accepted < st.quota) {
    std::map<SatelliteId, std::vector<std::size_t>> targets;
    for (std::size_t j : active) targets[lists[j].front().sat].push_back(j);

    std::vector<std::size_t> done;  // accepted or out of options this sub-round
    for (auto& [sat, proposers] : targets) {
      std::vector<double> pref(J, 0.0);
      for (std::size_t j : proposers) pref[j] = sat_ua_preference(sat, j, cfg, tbl, limits, params);
      std::stable_sort(proposers.begin(), proposers.end(),
                       [&](std::size_t a, std::size_t b) { return pref[a] > pref[b]; });

      for (std::size_t j : proposers) {
        std::optional<NetworkConfiguration> next;
        if (accepted < st.quota) next = accept_proposal(cfg, tbl, limits, j, sat, current);
        if (next) {
          st.pending.push_back({j, cfg.serving[j], cfg.subcarrier[j]});
          cfg = std::move(*next);
          current = sum_rate(cfg, tbl);
          ++st.change_count[j];
          ++accepted;
          done.push_back(j);
        } else {
          lists[j].erase(lists[j].begin());
          if (lists[j].empty()) done.push_back(j);
        }
      }
    }
    std::erase_if(active, [&](std::size_t j) { return std::find(done.begin(), done.end(), j) != done.end(); });
    refill();
  }
  return accepted;
}

struct BaReport {
  int reseated = 0;
  int reverted = 0;
  int swaps = 0;
  int changes() const { return reverted + swaps; }
};

namespace detail {
struct SwapCandidate {
  double score = kNoPreference;
  std::size_t ue = 0;
  int from = 0;
  int to = 0;
};

// Minimum-rate member of (sat, k); ties by UE index.
inline std::optional<std::size_t> weakest_member(const NetworkConfiguration& cfg, const SatelliteId& sat, int k,
                                                 const std::vector<double>& rates) {
  std::optional<std::size_t> best;
  for (std::size_t j = 0; j < cfg.num_ues(); ++j) {
    if (!cfg.scheduled(j) || *cfg.serving[j] != sat || *cfg.subcarrier[j] != k) continue;
    if (!best || rates[j] < rates[*best]) best = j;
  }
  return best;
}

// PF1 + PF2: rate change of the members left on `from` plus the change on `to`,
// the mover included.
inline double swap_score(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j, int to,
                         const std::vector<double>& rates) {
  const SatelliteId sat = *cfg.serving[j];
  const int from = *cfg.subcarrier[j];
  NetworkConfiguration moved = cfg;
  moved.subcarrier[j] = to;
  double pf1 = 0.0, pf2 = 0.0;
  for (std::size_t o = 0; o < cfg.num_ues(); ++o) {
    if (!cfg.scheduled(o) || *cfg.serving[o] != sat) continue;
    if (o == j) {
      pf2 += user_rate(moved, tbl, o) - rates[o];
    } else if (*cfg.subcarrier[o] == from) {
      pf1 += user_rate(moved, tbl, o) - rates[o];
    } else if (*cfg.subcarrier[o] == to) {
      pf2 += user_rate(moved, tbl, o) - rates[o];
    }
  }
  return pf1 + pf2;
}

template <typename Skip>
std::vector<SwapCandidate> swap_candidates(const NetworkConfiguration& cfg, const ChannelTable& tbl, Skip skip) {
  const std::vector<double> rates = user_rates(cfg, tbl);
  std::vector<SwapCandidate> out;
  for (std::size_t o = 0; o < cfg.bands.owners.size(); ++o) {
    const SatelliteId& sat = cfg.bands.owners[o];
    const auto& band = cfg.bands.blocks[o];
    for (int k : band) {
      auto mover = weakest_member(cfg, sat, k, rates);
      if (!mover) continue;
      for (int to : band) {
        if (to == k || skip(k, to)) continue;
        out.push_back({swap_score(cfg, tbl, *mover, to, rates), *mover, k, to});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SwapCandidate& a, const SwapCandidate& b) { return a.score > b.score; });
  return out;
}

inline std::optional<NetworkConfiguration> try_swap(const NetworkConfiguration& cfg, const ChannelTable& tbl,
                                                    const OptimizerLimits& limits, const SwapCandidate& c,
                                                    double base_rate) {
  NetworkConfiguration trial = cfg;
  trial.subcarrier[c.ue] = c.to;
  if (rates_meet_floors(trial, tbl, limits) && sum_rate(trial, tbl) > base_rate) return trial;
  return std::nullopt;
}
}  // namespace detail

// Bandwidth-allocation round: re-seat the UEs moved by the preceding
// ua_round, then run the swap phase until no positive-score swap remains.
inline BaReport ba_round(NetworkConfiguration& cfg, MatchingState& st, const ChannelTable& tbl,
                         const OptimizerLimits& limits, const MatchingParams& params = {}) {
  BaReport rep;

  for (const auto& mv : st.pending) {
    const std::size_t j = mv.ue;
    if (rates_meet_floors(cfg, tbl, limits)) continue;
    const SatelliteId sat = *cfg.serving[j];
    bool seated = false;
    for (int k : subcarriers_by_gain(cfg, tbl, j, sat)) {
      NetworkConfiguration trial = cfg;
      trial.subcarrier[j] = k;
      if (rates_meet_floors(trial, tbl, limits)) {
        cfg = std::move(trial);
        seated = true;
        ++rep.reseated;
        break;
      }
    }
    if (!seated) {
      cfg.serving[j] = mv.from_satellite;
      cfg.subcarrier[j] = mv.from_subcarrier;
      --st.change_count[j];
      ++rep.reverted;
    }
  }
  st.pending.clear();

  for (int pass = 0; pass < params.max_ba_passes; ++pass) {
    st.blocked.clear();
    int executed = 0;
    double current = sum_rate(cfg, tbl);
    for (;;) {
      auto cands = detail::swap_candidates(
          cfg, tbl, [&](int a, int b) { return st.blocked.count({a, b}) > 0; });
      if (cands.empty() || !(cands.front().score > 0.0)) break;
      const auto& best = cands.front();
      st.blocked.insert({best.from, best.to});
      if (auto next = detail::try_swap(cfg, tbl, limits, best, current)) {
        cfg = std::move(*next);
        current = sum_rate(cfg, tbl);
        ++executed;
      }
    }
    rep.swaps += executed;
    if (executed == 0) break;
  }
  return rep;
}

// No acceptable UA proposal and no executable BA swap.
inline bool is_stable(const NetworkConfiguration& cfg, const MatchingState& st, const ChannelTable& tbl,
                      const OptimizerLimits& limits) {
  const double base = sum_rate(cfg, tbl);
  for (std::size_t j = 0; j < cfg.num_ues(); ++j) {
    if (!detail::may_propose(cfg, st, j)) continue;
    for (const auto& prop : detail::proposal_list(cfg, tbl, j))
      if (accept_proposal(cfg, tbl, limits, j, prop.sat, base)) return false;
  }
  for (const auto& c : detail::swap_candidates(cfg, tbl, [](int, int) { return false; })) {
    if (!(c.score > 0.0)) break;
    if (detail::try_swap(cfg, tbl, limits, c, base)) return false;
  }
  return true;
}

struct MatchingReport {
  int rounds = 0;
  int ua_changes = 0;
  int ba_changes = 0;
  bool stable = false;
  bool changed() const { return ua_changes + ba_changes > 0; }
};

// Alternates ua_round and ba_round until a round changes nothing.
inline MatchingReport run_matching(NetworkConfiguration& cfg, MatchingState& st, const ChannelTable& tbl,
                                   const OptimizerLimits& limits, const MatchingParams& params = {}) {
  MatchingReport rep;
  for (int r = 0; r < params.max_rounds; ++r) {
    ++rep.rounds;
    const int ua = ua_round(cfg, st, tbl, limits, params);
    const BaReport ba = ba_round(cfg, st, tbl, limits, params);
    rep.ua_changes += ua - ba.reverted;
    rep.ba_changes += ba.swaps;
    if (ua - ba.reverted == 0 && ba.swaps == 0) {
      rep.stable = true;
      break;
    }
  }
  return rep;
}

}  // namespace dvmoss
