#pragma once

// Link budget, per-subcarrier channel gains, co-channel interference, SINR
// and Shannon rates for the downlink.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvmoss/errors.hpp"
#include "dvmoss/geometry.hpp"
#include "dvmoss/network_configuration.hpp"
#include "dvmoss/orbits.hpp"

namespace dvmoss {

// Thermal noise -174 dBm/Hz over `bandwidth_hz` plus a receiver noise figure.
inline double thermal_noise_w(double bandwidth_hz, double noise_figure_db = 7.0) {
  const double dbm = -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct ChannelParams {
  double carrier_hz = 6e9;
  double subcarrier_bw_hz = 10e6;
  int num_subcarriers = 25;
  // Path loss C1*log10(d_km) + C2 + C3*log10(f_MHz); free-space defaults.
  double c1 = 20.0;
  double c2 = 32.45;
  double c3 = 20.0;
  double shadowing_db = 1.0;
  double tx_gain_db = 30.0;
  double noise_w = thermal_noise_w(10e6);

  void validate() const {
    if (!(carrier_hz > 0.0)) throw InvalidArgument("carrier frequency must be > 0");
    if (!(subcarrier_bw_hz > 0.0)) throw InvalidArgument("subcarrier bandwidth must be > 0");
    if (num_subcarriers < 1) throw InvalidArgument("need at least one subcarrier");
    if (!(noise_w > 0.0)) throw InvalidArgument("noise power must be > 0");
  }

  // Center frequency of subcarrier k (0-based), symmetric about the carrier.
  double subcarrier_hz(int k) const {
    return carrier_hz + (k - (num_subcarriers - 1) / 2.0) * subcarrier_bw_hz;
  }
};

inline double path_loss_db(double d_km, double f_hz, double c1, double c2, double c3) {
  if (!(d_km > 0.0)) throw InvalidArgument("path-loss distance must be > 0");
  if (!(f_hz > 0.0)) throw InvalidArgument("path-loss frequency must be > 0");
  return c1 * std::log10(d_km) + c2 + c3 * std::log10(f_hz / 1e6);
}

inline double path_loss_db(double d_km, double f_hz, const ChannelParams& p) {
  return path_loss_db(d_km, f_hz, p.c1, p.c2, p.c3);
}

// h = exp(j 2 pi f_k d / c).
inline std::complex<double> small_scale_fading(double d_km, int k, const ChannelParams& p) {
  const double phase = 2.0 * kPi * p.subcarrier_hz(k) * d_km / kSpeedOfLightKmPerS;
  return std::polar(1.0, std::fmod(phase, 2.0 * kPi));
}

// Linear power gain |H^k|^2. The fading term is unit modulus, so it
// contributes exactly 1 to the power.
inline double channel_gain(double d_km, int k, const ChannelParams& p) {
  if (k < 0 || k >= p.num_subcarriers) throw InvalidArgument("subcarrier index out of range");
  const double pl = path_loss_db(d_km, p.carrier_hz, p);
  return db_to_linear(-pl + p.tx_gain_db - p.shadowing_db);
}

// Per-slot gains for every (visible satellite, UE, subcarrier) triple.
class ChannelTable {
 public:
  ChannelTable() = default;
  ChannelTable(double slot_time_s, std::vector<SatelliteId> satellites, std::size_t num_ues,
               int num_subcarriers, double bandwidth_hz, double noise_w)
      : slot_time_s_(slot_time_s),
        satellites_(std::move(satellites)),
        num_ues_(num_ues),
        num_subcarriers_(num_subcarriers),
        bandwidth_hz_(bandwidth_hz),
        noise_w_(noise_w),
        gains_(satellites_.size() * num_ues * static_cast<std::size_t>(num_subcarriers), 0.0),
        distances_(satellites_.size() * num_ues, 0.0),
        visible_(satellites_.size() * num_ues, 1),
        positions_(satellites_.size()) {
    if (!std::is_sorted(satellites_.begin(), satellites_.end()))
      throw InvalidArgument("channel table satellites must be sorted");
    if (num_subcarriers < 1) throw InvalidArgument("need at least one subcarrier");
    if (!(bandwidth_hz > 0.0) || !(noise_w > 0.0))
      throw InvalidArgument("bandwidth and noise must be > 0");
  }

  double slot_time_s() const { return slot_time_s_; }
  const std::vector<SatelliteId>& satellites() const { return satellites_; }
  std::size_t num_satellites() const { return satellites_.size(); }
  std::size_t num_ues() const { return num_ues_; }
  int num_subcarriers() const { return num_subcarriers_; }
  double bandwidth_hz() const { return bandwidth_hz_; }
  double noise_w() const { return noise_w_; }

  std::optional<std::size_t> index_of(const SatelliteId& id) const {
    auto it = std::lower_bound(satellites_.begin(), satellites_.end(), id);
    if (it == satellites_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - satellites_.begin());
  }
  bool contains(const SatelliteId& id) const { return index_of(id).has_value(); }

  double gain(std::size_t sat, std::size_t ue, int k) const { return gains_[gain_slot(sat, ue, k)]; }
  double gain(const SatelliteId& id, std::size_t ue, int k) const { return gain(require(id), ue, k); }
  double distance_km(std::size_t sat, std::size_t ue) const { return distances_[sat * num_ues_ + ue]; }
  bool visible(std::size_t sat, std::size_t ue) const { return visible_[sat * num_ues_ + ue] != 0; }
  const Vec3& position(std::size_t sat) const { return positions_[sat]; }

  void set_gain(std::size_t sat, std::size_t ue, int k, double g) {
    if (!(g > 0.0) || !std::isfinite(g)) throw InvalidArgument("channel gain must be positive and finite");
    gains_[gain_slot(sat, ue, k)] = g;
  }
  // Same gain on every subcarrier.
  void set_gain(std::size_t sat, std::size_t ue, double g) {
    for (int k = 0; k < num_subcarriers_; ++k) set_gain(sat, ue, k, g);
  }
  void set_distance(std::size_t sat, std::size_t ue, double d) { distances_[sat * num_ues_ + ue] = d; }
  void set_visible(std::size_t sat, std::size_t ue, bool v) { visible_[sat * num_ues_ + ue] = v ? 1 : 0; }
  void set_position(std::size_t sat, const Vec3& p) { positions_[sat] = p; }

  // Every stored gain positive and finite.
  bool complete() const {
    for (double g : gains_)
      if (!(g > 0.0) || !std::isfinite(g)) return false;
    return true;
  }

  std::size_t require(const SatelliteId& id) const {
    auto idx = index_of(id);
    if (!idx) throw ContractViolation("satellite " + to_string(id) + " not in channel table");
    return *idx;
  }

 private:
  std::size_t gain_slot(std::size_t sat, std::size_t ue, int k) const {
    return (sat * num_ues_ + ue) * static_cast<std::size_t>(num_subcarriers_) + static_cast<std::size_t>(k);
  }

  double slot_time_s_ = 0.0;
  std::vector<SatelliteId> satellites_;
  std::size_t num_ues_ = 0;
  int num_subcarriers_ = 1;
  double bandwidth_hz_ = 1.0;
  double noise_w_ = 1.0;
  std::vector<double> gains_;
  std::vector<double> distances_;
  std::vector<char> visible_;
  std::vector<Vec3> positions_;
};

// Builds the table for the union of visible satellites at one slot.
inline ChannelTable build_channel_table(const VisibilitySet& vis, std::span<const SatellitePosition> sats,
                                        std::span<const GeoState> ues, const ChannelParams& params) {
  params.validate();
  ChannelTable tbl(vis.time_s, vis.all, ues.size(), params.num_subcarriers, params.subcarrier_bw_hz,
                   params.noise_w);
  for (const auto& s : sats) {
    auto idx = tbl.index_of(s.id);
    if (!idx) continue;
    tbl.set_position(*idx, s.state.position_km);
    for (std::size_t j = 0; j < ues.size(); ++j) {
      const double d = distance(s.state.position_km, ues[j].position_km);
      tbl.set_distance(*idx, j, d);
      tbl.set_visible(*idx, j, vis.visible_to(j, s.id));
      for (int k = 0; k < params.num_subcarriers; ++k) tbl.set_gain(*idx, j, k, channel_gain(d, k, params));
    }
  }
  if (!tbl.complete()) throw ContractViolation("visibility set references satellites without positions");
  return tbl;
}

// Gain of UE j on its own scheduled link.
inline double link_gain(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j) {
  return tbl.gain(*cfg.serving[j], j, *cfg.subcarrier[j]);
}

inline double interference(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j, int k) {
  if (!cfg.scheduled(j) || *cfg.subcarrier[j] != k)
    throw ContractViolation("UE " + std::to_string(j) + " is not scheduled on subcarrier " + std::to_string(k));
  const SatelliteId& s = *cfg.serving[j];
  const double g = tbl.gain(s, j, k);
  double total = 0.0;
  for (std::size_t o = 0; o < cfg.num_ues(); ++o) {
    if (o == j || !cfg.scheduled(o)) continue;
    if (*cfg.serving[o] == s && *cfg.subcarrier[o] == k) total += cfg.power[o] * g;
  }
  return total;
}

inline double sinr(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j, int k) {
  const double i = interference(cfg, tbl, j, k);
  return cfg.power[j] * tbl.gain(*cfg.serving[j], j, k) / (i + tbl.noise_w());
}

inline double shannon_rate(double bandwidth_hz, double sinr_value) {
  return bandwidth_hz * std::log2(1.0 + sinr_value);
}

// r_j; zero for unscheduled UEs.
inline double user_rate(const NetworkConfiguration& cfg, const ChannelTable& tbl, std::size_t j) {
  if (!cfg.scheduled(j)) return 0.0;
  return shannon_rate(tbl.bandwidth_hz(), sinr(cfg, tbl, j, *cfg.subcarrier[j]));
}

inline std::vector<double> user_rates(const NetworkConfiguration& cfg, const ChannelTable& tbl) {
  std::vector<double> out(cfg.num_ues());
  for (std::size_t j = 0; j < cfg.num_ues(); ++j) out[j] = user_rate(cfg, tbl, j);
  return out;
}

inline double sum_rate(const NetworkConfiguration& cfg, const ChannelTable& tbl) {
  double total = 0.0;
  for (std::size_t j = 0; j < cfg.num_ues(); ++j) total += user_rate(cfg, tbl, j);
  return total;
}

}  // namespace dvmoss
