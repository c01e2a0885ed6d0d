#pragma once

// Walker constellations on circular orbits, ground-user placement and
// cone-angle visibility. All positions are in one Earth-centered inertial
// frame; ground users are held fixed (Earth rotation is ignored).

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dvmoss/errors.hpp"
#include "dvmoss/geometry.hpp"

namespace dvmoss {

struct ConstellationSpec {
  int num_planes = 1;
  int sats_per_plane = 1;
  double altitude_km = 550.0;
  double inclination_rad = 0.0;
  double phasing_offset_rad = 0.0;  // Walker inter-plane phase shift

  double orbit_radius_km() const { return kEarthRadiusKm + altitude_km; }
  int size() const { return num_planes * sats_per_plane; }

  void validate() const {
    if (num_planes < 1) throw InvalidArgument("num_planes must be >= 1");
    if (sats_per_plane < 1) throw InvalidArgument("sats_per_plane must be >= 1");
    if (!(altitude_km > 0.0)) throw InvalidArgument("altitude must be > 0");
    if (!(inclination_rad >= 0.0 && inclination_rad <= kPi))
      throw InvalidArgument("inclination must lie in [0, pi]");
  }
};

// 1-based (plane, slot) pair; ordered lexicographically.
struct SatelliteId {
  int plane = 1;
  int slot = 1;
  auto operator<=>(const SatelliteId&) const = default;
};

inline std::string to_string(const SatelliteId& id) {
  return "s" + std::to_string(id.plane) + "," + std::to_string(id.slot);
}

struct OrbitalElements {
  double radius_km = kEarthRadiusKm;
  double inclination_rad = 0.0;
  double raan_rad = 0.0;
  double anomaly_rad = 0.0;  // argument of latitude at epoch

  double mean_motion_rad_s() const {
    return std::sqrt(kEarthMuKm3PerS2 / (radius_km * radius_km * radius_km));
  }
  double period_s() const { return 2.0 * kPi / mean_motion_rad_s(); }
};

struct Satellite {
  SatelliteId id;
  OrbitalElements elements;
};

struct GeoState {
  Vec3 position_km;
  double time_s = 0.0;
};

struct SatellitePosition {
  SatelliteId id;
  GeoState state;
};

inline std::vector<Satellite> generate_walker(const ConstellationSpec& spec) {
  spec.validate();
  std::vector<Satellite> out;
  out.reserve(static_cast<std::size_t>(spec.size()));
  for (int o = 1; o <= spec.num_planes; ++o) {
    const double raan = 2.0 * kPi * (o - 1) / spec.num_planes;
    for (int i = 1; i <= spec.sats_per_plane; ++i) {
      const double anomaly =
          2.0 * kPi * (i - 1) / spec.sats_per_plane + (o - 1) * spec.phasing_offset_rad;
      out.push_back({{o, i}, {spec.orbit_radius_km(), spec.inclination_rad, raan, anomaly}});
    }
  }
  return out;
}

inline GeoState propagate(const OrbitalElements& el, double t_s) {
  if (t_s < 0.0) throw InvalidArgument("propagation time must be >= 0");
  const double u = el.anomaly_rad + el.mean_motion_rad_s() * t_s;
  const double cu = std::cos(u), su = std::sin(u);
  const double cr = std::cos(el.raan_rad), sr = std::sin(el.raan_rad);
  const double ci = std::cos(el.inclination_rad), si = std::sin(el.inclination_rad);
  const double r = el.radius_km;
  return {{r * (cr * cu - sr * su * ci), r * (sr * cu + cr * su * ci), r * su * si}, t_s};
}

inline std::vector<SatellitePosition> constellation_at(std::span<const Satellite> sats, double t_s) {
  std::vector<SatellitePosition> out;
  out.reserve(sats.size());
  for (const auto& s : sats) out.push_back({s.id, propagate(s.elements, t_s)});
  return out;
}

// Uniform samples over the spherical cap of geodesic radius `radius_km`
// around `center` (projected onto the Earth sphere).
inline std::vector<GeoState> place_ues(const Vec3& center, double radius_km, int count,
                                       std::uint64_t seed) {
  if (!(radius_km >= 0.0)) throw InvalidArgument("UE area radius must be >= 0");
  if (radius_km > kPi * kEarthRadiusKm) throw InvalidArgument("UE area radius exceeds pi * R_e");
  if (count < 0) throw InvalidArgument("UE count must be >= 0");
  const double cn = center.norm();
  if (!(cn > 0.0) || std::abs(cn - kEarthRadiusKm) > 0.01 * kEarthRadiusKm)
    throw InvalidArgument("UE area center must lie on the Earth surface");

  const Vec3 zc = center.normalized();
  const Vec3 helper = std::abs(zc.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
  const Vec3 e1 = zc.cross(helper).normalized();
  const Vec3 e2 = zc.cross(e1);
  const double cos_max = std::cos(radius_km / kEarthRadiusKm);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GeoState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    // cos of the central angle is uniform on [cos_max, 1] for area-uniform caps.
    const double cg = 1.0 - unit(rng) * (1.0 - cos_max);
    const double sg = std::sqrt(std::max(0.0, 1.0 - cg * cg));
    const double az = 2.0 * kPi * unit(rng);
    const Vec3 dir = zc * cg + (e1 * std::cos(az) + e2 * std::sin(az)) * sg;
    out.push_back({dir * kEarthRadiusKm, 0.0});
  }
  return out;
}

// Closed-boundary slack on the cosine comparison.
inline constexpr double kConeCosineSlack = 1e-12;

// Zenith angle between the UE's local vertical and the UE->satellite vector.
inline double zenith_angle(const Vec3& ue, const Vec3& sat) {
  const Vec3 d = sat - ue;
  const double dn = d.norm();
  if (!(dn > 0.0)) throw InvalidGeometry("satellite coincides with UE");
  const double c = std::clamp(ue.normalized().dot(d) / dn, -1.0, 1.0);
  return std::acos(c);
}

inline std::vector<SatelliteId> candidate_set(const GeoState& ue,
                                              std::span<const SatellitePosition> sats,
                                              double phi_rad) {
  if (!(phi_rad > 0.0 && phi_rad < kPi / 2.0))
    throw InvalidArgument("cone angle must lie in (0, pi/2)");
  const Vec3 zenith = ue.position_km.normalized();
  const double cos_phi = std::cos(phi_rad);
  std::vector<SatelliteId> out;
  for (const auto& s : sats) {
    const Vec3 d = s.state.position_km - ue.position_km;
    const double dn = d.norm();
    if (!(dn > 0.0)) throw InvalidGeometry("satellite " + to_string(s.id) + " coincides with UE");
    if (zenith.dot(d) / dn >= cos_phi - kConeCosineSlack) out.push_back(s.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct VisibilitySet {
  double time_s = 0.0;
  std::vector<std::vector<SatelliteId>> per_ue;  // S_j(t), sorted
  std::vector<SatelliteId> all;                   // union over UEs, sorted

  bool visible_to(std::size_t ue, const SatelliteId& id) const {
    return std::binary_search(per_ue[ue].begin(), per_ue[ue].end(), id);
  }
};

inline VisibilitySet union_visible(std::vector<std::vector<SatelliteId>> per_ue, double time_s = 0.0) {
  std::set<SatelliteId> merged;
  for (auto& set : per_ue) {
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    merged.insert(set.begin(), set.end());
  }
  return {time_s, std::move(per_ue), {merged.begin(), merged.end()}};
}

inline VisibilitySet compute_visibility(std::span<const GeoState> ues,
                                        std::span<const SatellitePosition> sats, double phi_rad,
                                        double time_s) {
  std::vector<std::vector<SatelliteId>> per_ue;
  per_ue.reserve(ues.size());
  for (const auto& ue : ues) per_ue.push_back(candidate_set(ue, sats, phi_rad));
  return union_visible(std::move(per_ue), time_s);
}

}  // namespace dvmoss
