#pragma once

#include "gavatar/hash_grid.hpp"
#include "gavatar/types.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace gavatar {

enum class Region : std::uint8_t { Torso = 0, Face = 1, Hand = 2 };

std::string_view to_string(Region r);
Region region_from_string(std::string_view s);

/// Triangle mesh in canonical space with per-vertex skinning weights and
/// region labels. Face and hand vertices form the high-detail set.
struct CanonicalMesh {
  std::vector<Vec3d> vertices;
  std::vector<std::array<int, 3>> faces;
  MatX<double> skin_weights;  // vertices x joints
  std::vector<Region> labels;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int joint_count() const { return static_cast<int>(skin_weights.cols()); }
  bool is_high_detail(int v) const { return labels[v] != Region::Torso; }
  BoundingBox bounds() const;

  /// Throws Validation on out-of-range indices, bad weights or label counts.
  void validate() const;

  /// Unique undirected edges (a < b), sorted.
  std::vector<std::array<int, 2>> edges() const;
};

}  // namespace gavatar
