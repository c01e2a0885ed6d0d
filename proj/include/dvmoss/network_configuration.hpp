#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "dvmoss/orbits.hpp"

namespace dvmoss {

// Disjoint subcarrier blocks, one per selected satellite. Subcarrier indices
// are 0-based here: the band is {0, ..., K-1}.
struct BandPartition {
  int num_subcarriers = 0;
  std::vector<SatelliteId> owners;        // ascending
  std::vector<std::vector<int>> blocks;   // blocks[i] is owners[i]'s band
  std::vector<int> owner_of;              // subcarrier -> index into owners

  std::optional<std::size_t> owner_index(const SatelliteId& id) const {
    auto it = std::lower_bound(owners.begin(), owners.end(), id);
    if (it == owners.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - owners.begin());
  }

  // Empty for satellites that own no band.
  const std::vector<int>& band(const SatelliteId& id) const {
    static const std::vector<int> kEmpty;
    auto idx = owner_index(id);
    return idx ? blocks[*idx] : kEmpty;
  }

  bool owns(const SatelliteId& id, int k) const {
    if (k < 0 || k >= static_cast<int>(owner_of.size())) return false;
    return owners[static_cast<std::size_t>(owner_of[static_cast<std::size_t>(k)])] == id;
  }
};

// One point f = {x, y, z, p} for a single time slot. Unassociated UEs have
// empty `serving`/`subcarrier` entries.
struct NetworkConfiguration {
  double slot_time_s = 0.0;
  std::vector<SatelliteId> selected;  // z, ascending
  BandPartition bands;
  std::vector<std::optional<SatelliteId>> serving;  // x
  std::vector<std::optional<int>> subcarrier;       // y
  std::vector<double> power;                        // p, W

  NetworkConfiguration() = default;
  explicit NetworkConfiguration(std::size_t num_ues)
      : serving(num_ues), subcarrier(num_ues), power(num_ues, 0.0) {}

  std::size_t num_ues() const { return serving.size(); }

  bool scheduled(std::size_t j) const { return serving[j].has_value() && subcarrier[j].has_value(); }

  bool same_assignment(const NetworkConfiguration& o) const {
    return selected == o.selected && serving == o.serving && subcarrier == o.subcarrier;
  }
};

}  // namespace dvmoss
