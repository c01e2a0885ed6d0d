#pragma once

// Experiment execution over (slot, seed, algorithm) cells, CSV output and
// baseline comparison.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/orbits.hpp"
#include "dvmoss/scenario.hpp"
#include "dvmoss/selector.hpp"

namespace dvmoss {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream per (seed, algorithm, slot).
inline std::uint64_t stream_seed(std::uint64_t seed, const std::string& algorithm, double slot_s) {
  const auto slot_ms = static_cast<std::uint64_t>(std::llround(slot_s * 1000.0));
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a(algorithm));
  return splitmix64(h ^ slot_ms);
}

inline std::uint64_t ue_placement_seed(const ScenarioConfig& cfg, std::uint64_t run_seed) {
  return cfg.ues.vary_with_run_seed ? splitmix64(cfg.ues.seed ^ splitmix64(run_seed)) : cfg.ues.seed;
}

struct RunRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  double slot_s = 0.0;
  double theta_bps = 0.0;
  std::vector<ChainStage> trace;
  std::vector<SatelliteId> selection;
  std::vector<double> rates_bps;
  NetworkConfiguration config;
  double wall_ms = 0.0;
  bool truncated = false;
};

struct CellError {
  std::string algorithm;
  std::uint64_t seed = 0;
  double slot_s = 0.0;
  std::string message;
};

// Geometry and channel for one (slot, seed).
struct SlotContext {
  double slot_s = 0.0;
  std::uint64_t seed = 0;
  std::vector<GeoState> ues;
  std::vector<SatellitePosition> satellites;
  VisibilitySet visibility;
  ChannelTable table;
};

inline SlotContext build_slot(const ScenarioConfig& cfg, const std::vector<Satellite>& constellation, double slot_s,
                              std::uint64_t seed) {
  SlotContext ctx;
  ctx.slot_s = slot_s;
  ctx.seed = seed;
  ctx.ues = place_ues(cfg.ues.center_km, cfg.ues.radius_km, cfg.ues.count, ue_placement_seed(cfg, seed));
  for (auto& u : ctx.ues) u.time_s = slot_s;
  ctx.satellites = constellation_at(constellation, slot_s);
  ctx.visibility = compute_visibility(ctx.ues, ctx.satellites, cfg.limits.cone_angle_rad, slot_s);
  ctx.table = build_channel_table(ctx.visibility, ctx.satellites, ctx.ues, cfg.channel);
  return ctx;
}

struct CellOutcome {
  std::vector<RunRecord> records;
  std::vector<CellError> errors;
};

// Runs every requested algorithm on one (slot, seed). The s_phi baselines
// reuse DV-MOSS's selection size, so DV-MOSS runs whenever one is requested.
inline CellOutcome run_cell(const ScenarioConfig& cfg, const std::vector<Satellite>& constellation, double slot_s,
                            std::uint64_t seed) {
  CellOutcome out;
  const auto& algos = cfg.runs.algorithms;
  auto requested = [&](const std::string& a) { return std::find(algos.begin(), algos.end(), a) != algos.end(); };
  auto fail_all = [&](const std::string& why) {
    for (const auto& a : algos) out.errors.push_back({a, seed, slot_s, why});
  };

  SlotContext ctx;
  try {
    ctx = build_slot(cfg, constellation, slot_s, seed);
  } catch (const std::exception& e) {
    fail_all(e.what());
    return out;
  }
  if (ctx.visibility.all.empty()) {
    fail_all("no satellite is visible");
    return out;
  }
  const SelectionProblem pb = cfg.problem(ctx.table);

  auto finish = [&](const std::string& algo, SelectionOutcome&& so, double ms) {
    RunRecord r;
    r.algorithm = algo;
    r.seed = seed;
    r.slot_s = slot_s;
    r.theta_bps = so.theta_bps();
    r.trace = std::move(so.trace);
    r.selection = so.selection;
    r.config = so.result.config;
    r.rates_bps = user_rates(r.config, ctx.table);
    r.wall_ms = cfg.runs.record_wall_time ? ms : 0.0;
    r.truncated = so.truncated;
    return r;
  };

  using clock = std::chrono::steady_clock;
  std::optional<RunRecord> dv;
  std::optional<std::string> dv_error;
  const bool need_dv = requested("dvmoss") || requested("k-nearest") || requested("random");
  if (need_dv) {
    const auto t0 = clock::now();
    try {
      std::mt19937_64 rng(stream_seed(seed, "dvmoss", slot_s));
      auto so = run_dvmoss(pb, cfg.markov, rng);
      dv = finish("dvmoss", std::move(so), std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    } catch (const std::exception& e) {
      dv_error = e.what();
    }
  }

  for (const auto& algo : algos) {
    if (algo == "dvmoss") {
      if (dv) out.records.push_back(*dv);
      else out.errors.push_back({algo, seed, slot_s, *dv_error});
      continue;
    }
    const auto t0 = clock::now();
    try {
      std::mt19937_64 rng(stream_seed(seed, algo, slot_s));
      SelectionOutcome so;
      if (algo == "eps-markov") {
        so = run_eps_markov(pb, cfg.markov, rng);
      } else if (algo == "2-nearest") {
        so = run_nearest_selection(pb, ctx.ues, 2);
      } else {
        if (!dv) throw NoFeasibleConfiguration("selection size unavailable: " + *dv_error);
        const int s_phi = static_cast<int>(dv->selection.size());
        so = algo == "k-nearest" ? run_nearest_selection(pb, ctx.ues, s_phi) : run_random_selection(pb, s_phi, rng);
      }
      out.records.push_back(
          finish(algo, std::move(so), std::chrono::duration<double, std::milli>(clock::now() - t0).count()));
    } catch (const std::exception& e) {
      out.errors.push_back({algo, seed, slot_s, e.what()});
    }
  }
  return out;
}

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<CellError> errors;
  std::vector<SlotContext> snapshots;  // first seed, one per slot
};

struct RunOptions {
  int parallel = 1;
  bool write_snapshots = true;
};

inline ExperimentResult execute(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  validate_scenario(cfg);
  const auto constellation = generate_walker(cfg.constellation);
  std::vector<std::pair<double, std::uint64_t>> cells;
  for (double t : cfg.slots_s)
    for (auto s : cfg.runs.seeds) cells.emplace_back(t, s);

  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      outcomes[i] = run_cell(cfg, constellation, cells[i].first, cells[i].second);
  };
  const int n = std::max(1, std::min<int>(opt.parallel, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult res;
  for (auto& o : outcomes) {
    for (auto& r : o.records) res.records.push_back(std::move(r));
    for (auto& e : o.errors) res.errors.push_back(std::move(e));
  }
  if (opt.write_snapshots) {
    for (double t : cfg.slots_s) {
      try {
        res.snapshots.push_back(build_slot(cfg, constellation, t, cfg.runs.seeds.front()));
      } catch (const std::exception&) {
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------- CSV output

inline std::string fmt_double(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_summary_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "algorithm,seed,slot,theta_bps,wall_ms\n";
  for (const auto& r : records)
    os << r.algorithm << ',' << r.seed << ',' << fmt_double(r.slot_s) << ',' << fmt_double(r.theta_bps) << ','
       << fmt_double(r.wall_ms, 6) << '\n';
}

inline void write_trace_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "algorithm,seed,slot,stage,theta_bps\n";
  for (const auto& r : records) {
    const std::string prefix = r.algorithm + ',' + std::to_string(r.seed) + ',' + fmt_double(r.slot_s) + ',';
    if (r.trace.empty()) {
      os << prefix << 0 << ',' << fmt_double(r.theta_bps) << '\n';
      continue;
    }
    for (const auto& st : r.trace) os << prefix << st.stage << ',' << fmt_double(st.theta) << '\n';
  }
}

inline void write_cdf_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "algorithm,seed,slot,rate_bps,cum_frac\n";
  for (const auto& r : records) {
    std::vector<double> rates = r.rates_bps;
    std::sort(rates.begin(), rates.end());
    for (std::size_t i = 0; i < rates.size(); ++i)
      os << r.algorithm << ',' << r.seed << ',' << fmt_double(r.slot_s) << ',' << fmt_double(rates[i]) << ','
         << fmt_double(static_cast<double>(i + 1) / static_cast<double>(rates.size())) << '\n';
  }
}

// Visible satellites per slot; `selected` marks the DV-MOSS choice when a
// record for that slot is given.
inline void write_snapshot_csv(std::ostream& os, const std::vector<SlotContext>& slots,
                               const std::vector<RunRecord>& records, std::uint64_t seed) {
  os << "slot,plane,index,x_km,y_km,z_km,selected\n";
  for (const auto& ctx : slots) {
    const RunRecord* dv = nullptr;
    for (const auto& r : records)
      if (r.algorithm == "dvmoss" && r.seed == seed && r.slot_s == ctx.slot_s) dv = &r;
    for (std::size_t i = 0; i < ctx.table.num_satellites(); ++i) {
      const SatelliteId& id = ctx.table.satellites()[i];
      const Vec3& p = ctx.table.position(i);
      const bool sel = dv && std::binary_search(dv->selection.begin(), dv->selection.end(), id);
      os << fmt_double(ctx.slot_s) << ',' << id.plane << ',' << id.slot << ',' << fmt_double(p.x) << ','
         << fmt_double(p.y) << ',' << fmt_double(p.z) << ',' << (sel ? 1 : 0) << '\n';
    }
  }
}

inline void write_errors_csv(std::ostream& os, const std::vector<CellError>& errors) {
  os << "algorithm,seed,slot,error\n";
  for (const auto& e : errors)
    os << e.algorithm << ',' << e.seed << ',' << fmt_double(e.slot_s) << ',' << csv_escape(e.message) << '\n';
}

namespace detail {
template <typename Fn>
void write_file(const std::filesystem::path& p, Fn&& fn) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  fn(os);
}
}  // namespace detail

inline ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                                       const RunOptions& opt = {}) {
  ExperimentResult res = execute(cfg, opt);
  std::filesystem::create_directories(out_dir);
  detail::write_file(out_dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, res.records); });
  detail::write_file(out_dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, res.records); });
  detail::write_file(out_dir / "cdf.csv", [&](std::ostream& os) { write_cdf_csv(os, res.records); });
  if (opt.write_snapshots)
    detail::write_file(out_dir / "snapshot.csv", [&](std::ostream& os) {
      write_snapshot_csv(os, res.snapshots, res.records, cfg.runs.seeds.front());
    });
  detail::write_file(out_dir / "errors.csv", [&](std::ostream& os) { write_errors_csv(os, res.errors); });
  return res;
}

// Visibility-only snapshot of one slot for the first seed's UE drop.
inline void write_visibility_snapshot(const ScenarioConfig& cfg, double slot_s, std::ostream& os) {
  validate_scenario(cfg);
  const auto constellation = generate_walker(cfg.constellation);
  std::vector<SlotContext> slots{build_slot(cfg, constellation, slot_s, cfg.runs.seeds.front())};
  write_snapshot_csv(os, slots, {}, cfg.runs.seeds.front());
}

// ---------------------------------------------------------------- comparison

struct SummaryRow {
  std::string algorithm;
  std::uint64_t seed = 0;
  double slot_s = 0.0;
  double theta_bps = 0.0;
};

inline std::vector<SummaryRow> summary_rows(const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> out;
  for (const auto& r : records) out.push_back({r.algorithm, r.seed, r.slot_s, r.theta_bps});
  return out;
}

inline std::vector<SummaryRow> read_summary_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("algorithm,seed,slot,theta_bps", 0) != 0)
    throw std::runtime_error("summary CSV header missing");
  std::vector<SummaryRow> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, seed, slot, theta;
    if (!std::getline(ss, a, ',') || !std::getline(ss, seed, ',') || !std::getline(ss, slot, ',') ||
        !std::getline(ss, theta, ','))
      throw std::runtime_error("malformed summary row: " + line);
    out.push_back({a, std::stoull(seed), std::stod(slot), std::stod(theta)});
  }
  return out;
}

struct AlgorithmStats {
  std::string algorithm;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct Improvement {
  std::string baseline;
  std::size_t pairs = 0;
  double mean_relative = 0.0;  // mean of (theta_dvmoss - theta_base) / theta_base
};

struct ComparisonTable {
  std::vector<AlgorithmStats> stats;
  std::vector<Improvement> improvements;
};

inline AlgorithmStats describe(const std::string& name, std::vector<double> xs) {
  AlgorithmStats s;
  s.algorithm = name;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  s.median = n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
  if (n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

inline ComparisonTable compare_baselines(const std::vector<SummaryRow>& rows, const std::string& reference = "dvmoss") {
  std::vector<std::string> order;
  std::map<std::string, std::map<std::pair<double, std::uint64_t>, double>> by_algo;
  for (const auto& r : rows) {
    if (!by_algo.count(r.algorithm)) order.push_back(r.algorithm);
    auto [it, fresh] = by_algo[r.algorithm].emplace(std::make_pair(r.slot_s, r.seed), r.theta_bps);
    if (!fresh) throw PairingError("duplicate cell for " + r.algorithm);
    (void)it;
  }
  if (by_algo.size() < 2) throw PairingError("comparison needs at least two algorithms");
  if (!by_algo.count(reference)) throw PairingError("no " + reference + " records to pair against");

  ComparisonTable t;
  for (const auto& a : order) {
    std::vector<double> xs;
    for (const auto& [cell, v] : by_algo[a]) xs.push_back(v);
    t.stats.push_back(describe(a, std::move(xs)));
  }
  const auto& ref = by_algo[reference];
  for (const auto& a : order) {
    if (a == reference) continue;
    const auto& base = by_algo[a];
    if (base.size() != ref.size()) throw PairingError(a + " and " + reference + " cover different cells");
    Improvement imp;
    imp.baseline = a;
    double sum = 0.0;
    for (const auto& [cell, v] : base) {
      auto it = ref.find(cell);
      if (it == ref.end())
        throw PairingError(a + " has a cell (slot " + fmt_double(cell.first) + ", seed " +
                           std::to_string(cell.second) + ") without a " + reference + " counterpart");
      if (!(v > 0.0)) throw PairingError(a + " has a non-positive objective; relative improvement undefined");
      sum += (it->second - v) / v;
      ++imp.pairs;
    }
    imp.mean_relative = imp.pairs ? sum / static_cast<double>(imp.pairs) : 0.0;
    t.improvements.push_back(imp);
  }
  return t;
}

inline ComparisonTable compare_baselines(const std::vector<RunRecord>& records) {
  return compare_baselines(summary_rows(records));
}

inline void write_comparison(std::ostream& os, const ComparisonTable& t) {
  os << "algorithm,count,mean_bps,median_bps,stddev_bps\n";
  for (const auto& s : t.stats)
    os << s.algorithm << ',' << s.count << ',' << fmt_double(s.mean) << ',' << fmt_double(s.median) << ','
       << fmt_double(s.stddev) << '\n';
  os << "\nbaseline,pairs,mean_improvement_pct\n";
  for (const auto& i : t.improvements)
    os << i.baseline << ',' << i.pairs << ',' << fmt_double(100.0 * i.mean_relative, 6) << '\n';
}

}  // namespace dvmoss
