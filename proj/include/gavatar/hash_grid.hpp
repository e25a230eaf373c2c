#pragma once

#include "gavatar/types.hpp"

#include <cstdint>
#include <span>

namespace gavatar {

/// Axis-aligned box that hash-grid coordinates are normalised against.
struct BoundingBox {
  Vec3d lo = Vec3d::Zero();
  Vec3d hi = Vec3d::Ones();

  Vec3d extent() const { return hi - lo; }
  BoundingBox padded(double fraction) const {
    const Vec3d pad = extent() * fraction;
    return {lo - pad, hi + pad};
  }
};

struct HashBandConfig {
  int levels = 8;
  int base_resolution = 16;
  double growth = 1.38;
  int log2_table_size = 16;
  int feature_dim = 2;

  int resolution(int level) const;
  int table_size() const { return 1 << log2_table_size; }
  int output_dim() const { return levels * feature_dim; }
  void validate() const;
};

/// One multi-resolution hash-grid band: per level a table of feature vectors,
/// trilinearly interpolated at the 8 cell corners. Levels whose vertex grid
/// fits the table are addressed densely, the rest by the XOR-prime hash.
template <typename S> class HashGridBand {
 public:
  HashGridBand() = default;
  HashGridBand(const HashBandConfig& config, const BoundingBox& box);

  const HashBandConfig& config() const { return config_; }
  const BoundingBox& box() const { return box_; }
  int output_dim() const { return config_.output_dim(); }
  int level_entries(int level) const { return entries_[level]; }
  bool level_is_dense(int level) const { return dense_[level]; }
  std::size_t level_offset(int level) const { return offsets_[level]; }

  /// All tables, level-major, entry-major, feature-minor.
  VecX<S>& params() { return params_; }
  const VecX<S>& params() const { return params_; }

  /// Table slot of integer grid corner (cx, cy, cz) at a level.
  std::uint32_t corner_index(int level, std::uint32_t cx, std::uint32_t cy,
                             std::uint32_t cz) const;

  /// Writes output_dim() features to `out`.
  void query(const Vec3<S>& x, std::span<S> out) const;

  /// Accumulates dL/dparams into `d_params` (same layout as params()) and,
  /// when `d_x` is non-null, dL/dx into it. Coordinates clamped to the box
  /// receive no spatial gradient on the clamped axis.
  void backward(const Vec3<S>& x, std::span<const S> d_out, VecX<S>& d_params,
                Vec3<S>* d_x) const;

 private:
  struct Cell {
    std::uint32_t corner[3];
    S frac[3];
    bool clamped[3];
    S scale;  // d(grid coordinate)/dx, per unit of box extent
  };
  void locate(const Vec3<S>& x, int level, Cell& cell, Vec3<S>& dpos_dx) const;

  HashBandConfig config_;
  BoundingBox box_;
  std::vector<int> resolutions_;
  std::vector<int> entries_;
  std::vector<bool> dense_;
  std::vector<std::size_t> offsets_;
  VecX<S> params_;
};

inline constexpr std::uint32_t kHashPrimes[3] = {1u, 2654435761u, 805459861u};

}  // namespace gavatar
