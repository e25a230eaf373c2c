#include "gavatar/hash_grid.hpp"

#include <cmath>

namespace gavatar {

int HashBandConfig::resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(growth, level)));
}

void HashBandConfig::validate() const {
  require(levels >= 0, ErrorKind::Config, "hash band levels must be >= 0");
  require(base_resolution >= 1, ErrorKind::Config, "hash band base resolution must be >= 1");
  require(growth > 1.0 || levels <= 1, ErrorKind::Config,
          "hash band growth must exceed 1 for strictly increasing resolutions");
  require(log2_table_size >= 1 && log2_table_size <= 28, ErrorKind::Config,
          "hash table size must be 2^1 .. 2^28");
  require(feature_dim >= 1, ErrorKind::Config, "feature dim must be >= 1");
  for (int l = 1; l < levels; ++l)
    require(resolution(l) > resolution(l - 1), ErrorKind::Config,
            "hash band resolutions must be strictly increasing");
}

template <typename S>
HashGridBand<S>::HashGridBand(const HashBandConfig& config, const BoundingBox& box)
    : config_(config), box_(box) {
  config.validate();
  require((box.extent().array() > 0.0).all(), ErrorKind::Config,
          "hash grid bounding box must have positive extent");
  std::size_t offset = 0;
  const std::uint64_t table = static_cast<std::uint64_t>(config.table_size());
  for (int l = 0; l < config.levels; ++l) {
    const int r = config.resolution(l);
    const std::uint64_t side = static_cast<std::uint64_t>(r) + 1;
    const bool dense = side * side * side <= table;
    resolutions_.push_back(r);
    dense_.push_back(dense);
    entries_.push_back(static_cast<int>(dense ? side * side * side : table));
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(entries_.back()) * config.feature_dim;
  }
  params_ = VecX<S>::Zero(static_cast<Eigen::Index>(offset));
}

template <typename S>
std::uint32_t HashGridBand<S>::corner_index(int level, std::uint32_t cx, std::uint32_t cy,
                                            std::uint32_t cz) const {
  if (dense_[level]) {
    const std::uint32_t side = static_cast<std::uint32_t>(resolutions_[level]) + 1;
    return cx + side * (cy + side * cz);
  }
  const std::uint32_t h = (cx * kHashPrimes[0]) ^ (cy * kHashPrimes[1]) ^ (cz * kHashPrimes[2]);
  return h & static_cast<std::uint32_t>(config_.table_size() - 1);
}

template <typename S>
void HashGridBand<S>::locate(const Vec3<S>& x, int level, Cell& cell, Vec3<S>& dpos_dx) const {
  const int r = resolutions_[level];
  for (int d = 0; d < 3; ++d) {
    const S ext = S(box_.hi[d] - box_.lo[d]);
    S p = (x[d] - S(box_.lo[d])) / ext;
    cell.clamped[d] = false;
    if (!(p >= S(0))) {
      p = S(0);
      cell.clamped[d] = true;
    } else if (p > S(1)) {
      p = S(1);
      cell.clamped[d] = true;
    }
    const S pos = p * S(r);
    int c = static_cast<int>(std::floor(pos));
    if (c > r - 1) c = r - 1;
    if (c < 0) c = 0;
    cell.corner[d] = static_cast<std::uint32_t>(c);
    cell.frac[d] = pos - S(c);
    dpos_dx[d] = cell.clamped[d] ? S(0) : S(r) / ext;
  }
}

template <typename S> void HashGridBand<S>::query(const Vec3<S>& x, std::span<S> out) const {
  const int f = config_.feature_dim;
  Cell cell;
  Vec3<S> dpos;
  for (int l = 0; l < config_.levels; ++l) {
    locate(x, l, cell, dpos);
    S* o = out.data() + l * f;
    for (int k = 0; k < f; ++k) o[k] = S(0);
    const S* table = params_.data() + offsets_[l];
    for (int c = 0; c < 8; ++c) {
      const int bx = c & 1, by = (c >> 1) & 1, bz = (c >> 2) & 1;
      const S w = (bx ? cell.frac[0] : S(1) - cell.frac[0]) *
                  (by ? cell.frac[1] : S(1) - cell.frac[1]) *
                  (bz ? cell.frac[2] : S(1) - cell.frac[2]);
      const std::uint32_t idx =
          corner_index(l, cell.corner[0] + bx, cell.corner[1] + by, cell.corner[2] + bz);
      const S* e = table + static_cast<std::size_t>(idx) * f;
      for (int k = 0; k < f; ++k) o[k] += w * e[k];
    }
  }
}

template <typename S>
void HashGridBand<S>::backward(const Vec3<S>& x, std::span<const S> d_out, VecX<S>& d_params,
                               Vec3<S>* d_x) const {
  const int f = config_.feature_dim;
  Cell cell;
  Vec3<S> dpos;
  for (int l = 0; l < config_.levels; ++l) {
    locate(x, l, cell, dpos);
    const S* g = d_out.data() + l * f;
    const S* table = params_.data() + offsets_[l];
    S* dt = d_params.data() + offsets_[l];
    Vec3<S> dgrid = Vec3<S>::Zero();
    for (int c = 0; c < 8; ++c) {
      const int b[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
      S lin[3], dlin[3];
      for (int d = 0; d < 3; ++d) {
        lin[d] = b[d] ? cell.frac[d] : S(1) - cell.frac[d];
        dlin[d] = b[d] ? S(1) : S(-1);
      }
      const S w = lin[0] * lin[1] * lin[2];
      const std::uint32_t idx =
          corner_index(l, cell.corner[0] + b[0], cell.corner[1] + b[1], cell.corner[2] + b[2]);
      const std::size_t base = static_cast<std::size_t>(idx) * f;
      S dot = S(0);
      for (int k = 0; k < f; ++k) {
        dt[base + k] += w * g[k];
        dot += g[k] * table[base + k];
      }
      if (d_x) {
        dgrid[0] += dot * dlin[0] * lin[1] * lin[2];
        dgrid[1] += dot * lin[0] * dlin[1] * lin[2];
        dgrid[2] += dot * lin[0] * lin[1] * dlin[2];
      }
    }
    if (d_x) *d_x += dgrid.cwiseProduct(dpos);
  }
}

template class HashGridBand<float>;
template class HashGridBand<double>;

}  // namespace gavatar
