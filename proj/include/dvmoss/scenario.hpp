#pragma once

// Scenario description and its JSON loader. Unknown keys are rejected;
// every validation failure carries the dotted key path.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dvmoss/channel.hpp"
#include "dvmoss/errors.hpp"
#include "dvmoss/geometry.hpp"
#include "dvmoss/jubpa.hpp"
#include "dvmoss/netstate.hpp"
#include "dvmoss/orbits.hpp"
#include "dvmoss/selector.hpp"

namespace dvmoss {

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"dvmoss", "eps-markov", "k-nearest", "2-nearest", "random"};
  return names;
}

inline bool is_known_algorithm(const std::string& name) {
  for (const auto& n : known_algorithms())
    if (n == name) return true;
  return false;
}

struct UeBlock {
  bool has_center = false;
  Vec3 center_km{0.0, 0.0, 0.0};
  double radius_km = 1500.0;
  int count = 30;
  std::uint64_t seed = 1;
  bool vary_with_run_seed = true;  // mix the run seed into the placement seed
};

struct LimitsBlock {
  int max_satellites = 10;
  double max_power_w = 5.0;
  double min_rate_bps = 3e5;
  double cone_angle_rad = 5.0 * kPi / 12.0;
};

struct RunsBlock {
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> algorithms = known_algorithms();
  bool record_wall_time = false;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ConstellationSpec constellation{25, 40, 550.0, 70.0 * kPi / 180.0, 0.0};
  UeBlock ues;
  ChannelParams channel;
  double noise_figure_db = 7.0;
  bool noise_given = false;
  LimitsBlock limits;
  MarkovParams markov;
  JubpaParams jubpa;
  std::vector<double> slots_s{0.0};
  RunsBlock runs;

  SelectionProblem problem(const ChannelTable& tbl) const {
    return {&tbl, OptimizerLimits::uniform(limits.max_satellites, limits.max_power_w, limits.min_rate_bps,
                                           static_cast<std::size_t>(ues.count)),
            jubpa};
  }
};

namespace detail {

using nlohmann::json;

inline std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed accessors over one JSON object that remember which keys were read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  ObjectReader child(const std::string& key) {
    static const json kEmpty = json::object();
    seen_.insert(key);
    return ObjectReader(has(key) ? j_.at(key) : kEmpty, join_key(path_, key));
  }

  void number(const std::string& key, double& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(join_key(path_, key), "expected a number");
    out = v.get<double>();
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(join_key(path_, key), "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
        out = v.get<Int>();
        return;
      }
      throw ConfigError(join_key(path_, key), "expected a non-negative integer");
    } else {
      out = v.get<Int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(join_key(path_, key), "expected true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(join_key(path_, key), "expected a string");
    out = v.get<std::string>();
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(join_key(path_, key), "expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(join_key(path_, key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  void seeds(const std::string& key, std::vector<std::uint64_t>& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(join_key(path_, key), "expected an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer() || (!e.is_number_unsigned() && e.get<std::int64_t>() < 0))
        throw ConfigError(join_key(path_, key), "expected non-negative integers");
      out.push_back(e.get<std::uint64_t>());
    }
  }

  void strings(const std::string& key, std::vector<std::string>& out) {
    if (!take(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(join_key(path_, key), "expected an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError(join_key(path_, key), "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
  }

  bool vec3(const std::string& key, Vec3& out) {
    if (!take(key)) return false;
    std::vector<double> xs;
    seen_.erase(key);
    numbers(key, xs);
    if (xs.size() != 3) throw ConfigError(join_key(path_, key), "expected three coordinates");
    out = {xs[0], xs[1], xs[2]};
    return true;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(join_key(path_, item.key()), "unknown key");
  }

 private:
  bool take(const std::string& key) {
    if (!has(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace detail

inline void validate_scenario(const ScenarioConfig& c) {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) throw ConfigError(key, why);
  };
  const auto& k = c.constellation;
  require(k.num_planes >= 1, "constellation.planes", "must be >= 1");
  require(k.sats_per_plane >= 1, "constellation.sats_per_plane", "must be >= 1");
  require(k.altitude_km > 0.0, "constellation.altitude_km", "must be > 0");
  require(k.inclination_rad >= 0.0 && k.inclination_rad <= kPi, "constellation.inclination_deg",
          "must lie in [0, 180]");
  require(std::isfinite(k.phasing_offset_rad), "constellation.phasing_deg", "must be finite");

  require(c.ues.has_center, "ues.center_km", "is required");
  const double cn = c.ues.center_km.norm();
  require(std::abs(cn - kEarthRadiusKm) <= 0.01 * kEarthRadiusKm, "ues.center_km",
          "must lie on the Earth surface (norm within 1% of 6371 km)");
  require(c.ues.radius_km > 0.0 && c.ues.radius_km <= kPi * kEarthRadiusKm, "ues.radius_km",
          "must lie in (0, pi * 6371]");
  require(c.ues.count >= 1, "ues.count", "must be >= 1");

  const auto& ch = c.channel;
  require(ch.carrier_hz > 0.0, "channel.f_c_hz", "must be > 0");
  require(ch.subcarrier_bw_hz > 0.0, "channel.bandwidth_hz", "must be > 0");
  require(ch.num_subcarriers >= 1, "channel.K", "must be >= 1");
  require(ch.noise_w > 0.0 && std::isfinite(ch.noise_w), c.noise_given ? "channel.noise_w" : "channel.noise_figure_db",
          "noise power must be positive and finite");
  require(ch.carrier_hz - (ch.num_subcarriers - 1) / 2.0 * ch.subcarrier_bw_hz > 0.0, "channel.K",
          "lowest subcarrier frequency must be positive");

  require(c.limits.max_satellites >= 1, "limits.Z_th", "must be >= 1");
  require(c.limits.max_power_w > 0.0, "limits.P_max", "must be > 0");
  require(c.limits.min_rate_bps > 0.0, "limits.r_min", "must be > 0");
  require(c.limits.cone_angle_rad > 0.0 && c.limits.cone_angle_rad < kPi / 2.0, "limits.phi",
          "must lie in (0, pi/2)");

  const auto& m = c.markov;
  require(m.beta0 >= 0.0, "optimizer.markov.beta0", "must be >= 0");
  require(m.beta_step >= 0.0, "optimizer.markov.beta_step", "must be >= 0");
  require(m.nu0 >= 0.0 && m.nu0 <= 1.0, "optimizer.markov.nu0", "must lie in [0, 1]");
  require(m.nu_step > 0.0, "optimizer.markov.nu_step", "must be > 0");
  require(m.max_stages >= 1, "optimizer.markov.max_stages", "must be >= 1");
  require(m.max_initial_draws >= 1, "optimizer.markov.max_initial_draws", "must be >= 1");
  const auto& mp = c.jubpa.matching;
  require(!mp.quota || *mp.quota >= 0, "optimizer.matching.quota", "must be >= 0");
  require(mp.change_limit >= 0, "optimizer.matching.change_limit", "must be >= 0");
  require(std::isfinite(mp.phi_ua), "optimizer.matching.phi_ua", "must be finite");
  require(mp.interference_cost >= 0.0, "optimizer.matching.interference_cost", "must be >= 0");
  require(mp.max_rounds >= 1, "optimizer.matching.max_rounds", "must be >= 1");
  const auto& pa = c.jubpa.pa;
  require(pa.lambda0 > 0.0, "optimizer.power.lambda0", "must be > 0");
  require(pa.n0 >= 0.0, "optimizer.power.n0", "must be >= 0");
  require(pa.m0 >= 0.0, "optimizer.power.m0", "must be >= 0");
  require(pa.q_lambda0 > 0.0, "optimizer.power.q_lambda0", "must be > 0");
  require(pa.q_n0 > 0.0, "optimizer.power.q_n0", "must be > 0");
  require(pa.q_m0 > 0.0, "optimizer.power.q_m0", "must be > 0");
  require(pa.tolerance > 0.0, "optimizer.power.tolerance", "must be > 0");
  require(pa.max_iterations >= 1, "optimizer.power.max_iterations", "must be >= 1");
  require(c.jubpa.max_iterations >= 1, "optimizer.jubpa_max_iterations", "must be >= 1");

  require(!c.slots_s.empty(), "time.slots_s", "must not be empty");
  for (double t : c.slots_s) require(t >= 0.0 && std::isfinite(t), "time.slots_s", "slot times must be >= 0");

  require(!c.runs.seeds.empty(), "runs.seeds", "must not be empty");
  require(!c.runs.algorithms.empty(), "runs.algorithms", "must not be empty");
  std::set<std::string> algos;
  for (const auto& a : c.runs.algorithms) {
    if (!is_known_algorithm(a)) throw ConfigError("runs.algorithms", "unknown algorithm '" + a + "'");
    if (!algos.insert(a).second) throw ConfigError("runs.algorithms", "duplicate algorithm '" + a + "'");
  }
}

inline ScenarioConfig parse_scenario(const nlohmann::json& root) {
  ScenarioConfig c;
  detail::ObjectReader top(root, "");
  top.string("name", c.name);

  {
    auto r = top.child("constellation");
    double incl = detail::rad_to_deg(c.constellation.inclination_rad);
    double phase = detail::rad_to_deg(c.constellation.phasing_offset_rad);
    r.integer("planes", c.constellation.num_planes);
    r.integer("sats_per_plane", c.constellation.sats_per_plane);
    r.number("altitude_km", c.constellation.altitude_km);
    r.number("inclination_deg", incl);
    r.number("phasing_deg", phase);
    c.constellation.inclination_rad = detail::deg_to_rad(incl);
    c.constellation.phasing_offset_rad = detail::deg_to_rad(phase);
    r.finish();
  }
  {
    auto r = top.child("ues");
    c.ues.has_center = r.vec3("center_km", c.ues.center_km);
    r.number("radius_km", c.ues.radius_km);
    r.integer("count", c.ues.count);
    r.integer("seed", c.ues.seed);
    r.boolean("vary_with_run_seed", c.ues.vary_with_run_seed);
    r.finish();
  }
  {
    auto r = top.child("channel");
    r.number("f_c_hz", c.channel.carrier_hz);
    r.number("bandwidth_hz", c.channel.subcarrier_bw_hz);
    r.integer("K", c.channel.num_subcarriers);
    r.number("C1", c.channel.c1);
    r.number("C2", c.channel.c2);
    r.number("C3", c.channel.c3);
    r.number("SF_db", c.channel.shadowing_db);
    r.number("G_t_db", c.channel.tx_gain_db);
    if (r.has("noise_w") && r.has("noise_figure_db"))
      throw ConfigError("channel.noise_w", "give either noise_w or noise_figure_db, not both");
    c.noise_given = r.has("noise_w");
    r.number("noise_w", c.channel.noise_w);
    r.number("noise_figure_db", c.noise_figure_db);
    if (!c.noise_given) c.channel.noise_w = thermal_noise_w(c.channel.subcarrier_bw_hz, c.noise_figure_db);
    r.finish();
  }
  {
    auto r = top.child("limits");
    r.integer("Z_th", c.limits.max_satellites);
    r.number("P_max", c.limits.max_power_w);
    r.number("r_min", c.limits.min_rate_bps);
    r.number("phi", c.limits.cone_angle_rad);
    r.finish();
  }
  {
    auto opt = top.child("optimizer");
    {
      auto r = opt.child("markov");
      r.number("beta0", c.markov.beta0);
      r.number("beta_step", c.markov.beta_step);
      r.number("nu0", c.markov.nu0);
      r.number("nu_step", c.markov.nu_step);
      r.integer("max_stages", c.markov.max_stages);
      r.integer("max_initial_draws", c.markov.max_initial_draws);
      r.finish();
    }
    {
      auto r = opt.child("matching");
      if (r.has("quota")) {
        int q = 0;
        r.integer("quota", q);
        c.jubpa.matching.quota = q;
      }
      r.integer("change_limit", c.jubpa.matching.change_limit);
      r.number("phi_ua", c.jubpa.matching.phi_ua);
      r.number("interference_cost", c.jubpa.matching.interference_cost);
      r.integer("max_rounds", c.jubpa.matching.max_rounds);
      r.finish();
    }
    {
      auto r = opt.child("power");
      r.number("lambda0", c.jubpa.pa.lambda0);
      r.number("n0", c.jubpa.pa.n0);
      r.number("m0", c.jubpa.pa.m0);
      r.number("q_lambda0", c.jubpa.pa.q_lambda0);
      r.number("q_n0", c.jubpa.pa.q_n0);
      r.number("q_m0", c.jubpa.pa.q_m0);
      r.number("tolerance", c.jubpa.pa.tolerance);
      r.integer("max_iterations", c.jubpa.pa.max_iterations);
      r.finish();
    }
    opt.integer("jubpa_max_iterations", c.jubpa.max_iterations);
    opt.finish();
  }
  {
    auto r = top.child("time");
    r.numbers("slots_s", c.slots_s);
    r.finish();
  }
  {
    auto r = top.child("runs");
    r.seeds("seeds", c.runs.seeds);
    r.strings("algorithms", c.runs.algorithms);
    r.boolean("record_wall_time", c.runs.record_wall_time);
    r.finish();
  }
  top.finish();
  validate_scenario(c);
  return c;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  nlohmann::json root;
  if (blank) {
    root = nlohmann::json::object();
  } else {
    try {
      root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("", std::string("parse error: ") + e.what());
    }
  }
  return parse_scenario(root);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

}  // namespace dvmoss
