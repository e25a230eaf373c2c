#include "gavatar/avatar.hpp"
#include "gavatar/field.hpp"
#include "gavatar/priors.hpp"
#include "gavatar/region_init.hpp"
#include "gavatar/rng.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace gavatar {
namespace {

const BoundingBox kUnitBox{Vec3d::Zero(), Vec3d::Ones()};

void randomize(VecX<double>& p, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = rng.uniform(lo, hi);
}

std::vector<double> query(const HashGridBand<double>& band, const Vec3d& x) {
  std::vector<double> out(band.output_dim());
  band.query(x, out);
  return out;
}

double entry(const HashGridBand<double>& band, int level, Eigen::Vector3i c, int f) {
  const auto idx = band.corner_index(level, c[0], c[1], c[2]);
  return band.params()[band.level_offset(level) + idx * band.config().feature_dim + f];
}

// Dense levels (4^3, 8^3 grids in a 2^10 table) and a hashed band.
const HashBandConfig kDense{2, 4, 2.0, 10, 2};
const HashBandConfig kHashed{2, 4, 2.0, 6, 3};

TEST(HashBand, LevelLayout) {
  HashGridBand<double> d(kDense, kUnitBox);
  EXPECT_TRUE(d.level_is_dense(0));
  EXPECT_TRUE(d.level_is_dense(1));
  EXPECT_EQ(d.level_entries(0), 125);
  EXPECT_EQ(d.level_entries(1), 729);
  EXPECT_EQ(d.params().size(), (125 + 729) * 2);
  HashGridBand<double> h(kHashed, kUnitBox);
  EXPECT_FALSE(h.level_is_dense(0));
  EXPECT_EQ(h.level_entries(0), 64);
  EXPECT_EQ(h.output_dim(), 6);
}

TEST(HashBand, HashedIndexUsesPrimeXor) {
  HashGridBand<double> h(kHashed, kUnitBox);
  const std::uint32_t expect = (3u * 1u) ^ (2u * 2654435761u) ^ (1u * 805459861u);
  EXPECT_EQ(h.corner_index(0, 3, 2, 1), expect & 63u);
}

TEST(HashBand, InvalidConfigThrows) {
  EXPECT_THROW(HashGridBand<double>(HashBandConfig{3, 4, 1.1, 10, 2}, kUnitBox), Error);
  EXPECT_THROW(HashGridBand<double>(HashBandConfig{2, 4, 2.0, 10, 0}, kUnitBox), Error);
  EXPECT_THROW(HashGridBand<double>(kDense, BoundingBox{Vec3d::Zero(), Vec3d(1, 0, 1)}), Error);
}

TEST(HashBand, AtGridCornerReturnsStoredEntry) {
  for (const auto& cfg : {kDense, kHashed}) {
    HashGridBand<double> band(cfg, kUnitBox);
    randomize(band.params(), 11);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      // Multiples of 1/4 are corners of both levels (resolutions 4 and 8).
      const Eigen::Vector3i c4(rng.uniform_int(5), rng.uniform_int(5), rng.uniform_int(5));
      const Vec3d x = c4.cast<double>() / 4.0;
      const auto out = query(band, x);
      for (int l = 0; l < 2; ++l)
        for (int f = 0; f < cfg.feature_dim; ++f)
          EXPECT_DOUBLE_EQ(out[l * cfg.feature_dim + f], entry(band, l, c4 * (l + 1), f));
    }
  }
}

TEST(HashBand, EdgeMidpointAveragesCorners) {
  HashGridBand<double> band(kDense, kUnitBox);
  randomize(band.params(), 12);
  const Eigen::Vector3i a(1, 2, 3), b(2, 2, 3);
  const Vec3d x = (a.cast<double>() + b.cast<double>()) / 8.0;
  const auto out = query(band, x);
  for (int f = 0; f < 2; ++f)
    EXPECT_NEAR(out[f], 0.5 * (entry(band, 0, a, f) + entry(band, 0, b, f)), 1e-15);
}

TEST(HashBand, ZeroTablesGiveZeroVector) {
  HashGridBand<double> band(kHashed, kUnitBox);
  const auto out = query(band, Vec3d(0.3, 0.7, 0.1));
  ASSERT_EQ(out.size(), 6u);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(HashBand, TrilinearAlongAxisSegments) {
  for (const auto& base : {kDense, kHashed}) {
    HashBandConfig cfg = base;
    cfg.levels = 1;
    HashGridBand<double> band(cfg, kUnitBox);
    randomize(band.params(), 13);
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const int axis = rng.uniform_int(3);
      Vec3d lo;
      for (int d = 0; d < 3; ++d) lo[d] = rng.uniform_int(4) / 4.0 + (d == axis ? 0.0 : rng.uniform(0, 0.25));
      auto at = [&](double t) {
        Vec3d x = lo;
        x[axis] += t * 0.25;
        return query(band, x);
      };
      const double t0 = rng.uniform(0.0, 0.3), t1 = rng.uniform(0.35, 0.65), t2 = rng.uniform(0.7, 1.0);
      const auto f0 = at(t0), f1 = at(t1), f2 = at(t2);
      for (size_t k = 0; k < f0.size(); ++k)
        EXPECT_NEAR(f1[k], f0[k] + (f2[k] - f0[k]) * (t1 - t0) / (t2 - t0), 1e-12);
    }
  }
}

TEST(HashBand, ClampsOutsideTheBox) {
  HashGridBand<double> band(kDense, kUnitBox);
  randomize(band.params(), 14);
  EXPECT_EQ(query(band, Vec3d(-3.0, 0.5, 2.0)), query(band, Vec3d(0.0, 0.5, 1.0)));
}

TEST(HashBand, BackwardMatchesFiniteDifferences) {
  HashGridBand<double> band(kHashed, kUnitBox);
  randomize(band.params(), 15);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3d x(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
    std::vector<double> w(band.output_dim());
    for (auto& v : w) v = rng.uniform(-1, 1);
    auto loss = [&](const Vec3d& p) {
      const auto o = query(band, p);
      double s = 0;
      for (size_t k = 0; k < o.size(); ++k) s += w[k] * o[k];
      return s;
    };
    VecX<double> dp = VecX<double>::Zero(band.params().size());
    Vec3d dx = Vec3d::Zero();
    band.backward(x, w, dp, &dx);
    const double h = 1e-7;
    for (int d = 0; d < 3; ++d) {
      Vec3d a = x, b = x;
      a[d] += h;
      b[d] -= h;
      EXPECT_NEAR(dx[d], (loss(a) - loss(b)) / (2 * h), 1e-5 * (1 + std::abs(dx[d])));
    }
    // The loss is linear in the tables, so a unit step is exact.
    for (Eigen::Index i = 0; i < dp.size(); i += 7) {
      const double keep = band.params()[i];
      band.params()[i] = keep + 1.0;
      const double up = loss(x);
      band.params()[i] = keep;
      EXPECT_NEAR(dp[i], up - loss(x), 1e-12);
    }
  }
}

MultiScaleHashField<double> small_field(std::uint64_t seed) {
  MultiScaleHashField<double> f(bundled_field_config(), kUnitBox, seed);
  randomize(f.low.params(), seed + 1);
  randomize(f.high.params(), seed + 2);
  randomize(f.decoder.params(), seed + 3, -0.5, 0.5);
  randomize(f.ao_decoder.params(), seed + 4, -0.5, 0.5);
  return f;
}

TEST(BlendedQuery, EndpointsAreTheBands) {
  const auto f = small_field(20);
  const int nl = f.low.output_dim(), nh = f.high.output_dim();
  const Vec3d x(0.31, 0.62, 0.47);
  std::vector<double> lo(nl), hi(nh), out(nl + nh);
  f.low.query(x, lo);
  f.high.query(x, hi);
  f.blended_query(x, 1.0, true, out);
  for (int k = 0; k < nl; ++k) EXPECT_EQ(out[k], lo[k]);
  for (int k = 0; k < nh; ++k) EXPECT_EQ(out[nl + k], hi[k]);
  f.blended_query(x, 0.0, true, out);
  for (int k = 0; k < nl; ++k) EXPECT_EQ(out[k], lo[k]);
  for (int k = 0; k < nh; ++k) EXPECT_EQ(out[nl + k], 0.0);
}

TEST(BlendedQuery, EqualsExplicitBlendOfPaddedBands) {
  const auto f = small_field(21);
  const int nl = f.low.output_dim(), nh = f.high.output_dim();
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3d x(rng.uniform(), rng.uniform(), rng.uniform());
    const double tau = rng.uniform();
    std::vector<double> fl(nl + nh, 0.0), fh(nl + nh), expect(nl + nh), out(nl + nh);
    f.low.query(x, std::span<double>(fl.data(), nl));
    f.low.query(x, std::span<double>(fh.data(), nl));
    f.high.query(x, std::span<double>(fh.data() + nl, nh));
    blend_features<double>(fh, fl, tau, expect);
    f.blended_query(x, tau, true, out);
    for (int k = 0; k < nl + nh; ++k) EXPECT_NEAR(out[k], expect[k], 1e-15);
  }
}

TEST(BlendFeatures, Midpoint) {
  const std::vector<double> fh{2.0, 2.0}, fl{0.0, 0.0};
  std::vector<double> out(2);
  blend_features<double>(fh, fl, 0.5, out);
  EXPECT_EQ(out, (std::vector<double>{1.0, 1.0}));
  std::vector<double> bad(3);
  EXPECT_THROW(blend_features<double>(fh, fl, 0.5, bad), Error);
}

// Strip of 1 mm spaced vertices with a hand at one end. The high band holds
// a constant 1 so any jump in its half of the feature comes from tau alone.
TEST(BlendedQuery, SeamIsContinuousUnlikeHardSwitch) {
  const double spacing = 0.001;
  auto mesh = test::grid_mesh(2, 301, spacing);
  for (int v = 0; v < static_cast<int>(mesh.vertices.size()); ++v)
    if (mesh.vertices[v].x() < 0.05) mesh.labels[v] = Region::Hand;
  RegionProfile profile;
  const auto geo = compute_geodesic_field(mesh, profile);

  const BoundingBox b = mesh.bounds();
  const Vec3d pad = Vec3d::Constant(0.02);
  MultiScaleHashField<double> f(bundled_field_config(), BoundingBox{b.lo - pad, b.hi + pad}, 1);
  randomize(f.low.params(), 30, -0.2, 0.2);
  f.high.params().setOnes();
  const int nl = f.low.output_dim(), width = f.layout().depth;

  double jump_blend = 0, jump_hard = 0, high_blend = 0, high_hard = 0;
  std::vector<double> prev_b, prev_h;
  for (int c = 0; c < 301; ++c) {
    const Vec3d x = mesh.vertices[c];
    const double tau = geo.tau[c];
    std::vector<double> b(width), h(width), fl(width, 0.0), fh(width), expect(width);
    f.blended_query(x, tau, true, b);
    f.blended_query(x, tau >= 0.5 ? 1.0 : 0.0, true, h);
    f.low.query(x, std::span<double>(fl.data(), nl));
    f.low.query(x, std::span<double>(fh.data(), nl));
    f.high.query(x, std::span<double>(fh.data() + nl, width - nl));
    blend_features<double>(fh, fl, tau, expect);
    for (int k = 0; k < width; ++k) ASSERT_NEAR(b[k], expect[k], 1e-15);
    if (c > 0) {
      for (int k = 0; k < width; ++k) {
        const double db = std::abs(b[k] - prev_b[k]), dh = std::abs(h[k] - prev_h[k]);
        jump_blend = std::max(jump_blend, db);
        jump_hard = std::max(jump_hard, dh);
        if (k >= nl) {
          high_blend = std::max(high_blend, db);
          high_hard = std::max(high_hard, dh);
        }
      }
    }
    prev_b = b;
    prev_h = h;
  }
  EXPECT_GT(jump_hard, jump_blend);
  EXPECT_NEAR(high_hard, 1.0, 1e-12);
  // Steepest slope of exp(-d^2 / 2 sigma^2) is e^-0.5 / sigma per metre.
  EXPECT_LE(high_blend, std::exp(-0.5) / profile.sigma * spacing * 1.01);
}

TEST(BlendedQuery, BundledSeamFieldJumpShrinksFiveFold) {
  const auto j = test::seam_jumps();
  EXPECT_GT(j.band_samples, 50);
  EXPECT_GT(j.hard, 0.5);
  EXPECT_GE(j.hard, 5.0 * j.blended) << "hard " << j.hard << " blended " << j.blended;
}

PriorMap unit_map(int w, int h, int channels) {
  OrthoFrame fr;
  fr.width = w;
  fr.height = h;
  PriorMap m;
  m.allocate(fr, channels);
  return m;
}

PriorPack empty_pack() {
  PriorPack p;
  for (auto& d : p.depth) d = unit_map(4, 4, 1);
  for (auto& n : p.normal) n = unit_map(4, 4, 3);
  return p;
}

// Texel (i, j) of the default frame covers x in [i, i+1), y in (-j-1, -j].
Vec3d texel_point(double u, double v) { return Vec3d(u, -v, 0.3); }

TEST(DepthPrior, OutsideMaskIsZero) {
  auto pack = empty_pack();
  for (auto& d : pack.depth) std::fill(d.data.begin(), d.data.end(), 7.0f);
  EXPECT_EQ(sample_depth_prior<double>(pack, texel_point(1.5, 1.5)), (Vec4<double>::Zero()));
  EXPECT_EQ(sample_depth_prior<double>(pack, texel_point(-3.0, 1.0)), (Vec4<double>::Zero()));
  EXPECT_EQ(sample_normal_prior<double>(pack, texel_point(1.5, 1.5)), (Eigen::Matrix<double, 6, 1>::Zero()));
}

TEST(DepthPrior, RandomOutOfMaskPointsAreZero) {
  auto pack = empty_pack();
  Rng rng(9);
  for (auto& d : pack.depth) {
    for (auto& v : d.data) v = static_cast<float>(rng.uniform(0.5, 2.0));
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) d.mask[j * 4 + i] = (i < 2);
  }
  for (auto& n : pack.normal) {
    for (auto& v : n.data) v = 1.0f;
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) n.mask[j * 4 + i] = (i < 2);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const double u = rng.uniform() < 0.5 ? rng.uniform(2.0, 3.999) : rng.uniform(-5.0, -0.001);
    const Vec3d x = texel_point(u, rng.uniform(-2.0, 6.0));
    EXPECT_EQ(sample_depth_prior<double>(pack, x), (Vec4<double>::Zero()));
    EXPECT_EQ(sample_normal_prior<double>(pack, x), (Eigen::Matrix<double, 6, 1>::Zero()));
  }
}

TEST(DepthPrior, ConstantMapInsideMask) {
  auto pack = empty_pack();
  auto& d = pack.depth[kLeft];
  std::fill(d.data.begin(), d.data.end(), 1.25f);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) d.mask[j * 4 + i] = (i + j) % 3 != 0 ? 1 : 0;
  Rng rng(10);
  int inside = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double u = rng.uniform(0, 4), v = rng.uniform(0, 4);
    const auto phi = sample_depth_prior<double>(pack, texel_point(u, v));
    if (d.valid(static_cast<int>(u), static_cast<int>(v))) {
      ++inside;
      EXPECT_NEAR(phi[kLeft], 1.25, 1e-12);
    } else {
      EXPECT_EQ(phi[kLeft], 0.0);
    }
    EXPECT_EQ(phi[kFront], 0.0);
  }
  EXPECT_GT(inside, 50);
}

TEST(DepthPrior, BilinearPatchCentre) {
  auto pack = empty_pack();
  auto& d = pack.depth[kFront];
  d = unit_map(2, 2, 1);
  d.data = {1.0f, 2.0f, 3.0f, 4.0f};
  std::fill(d.mask.begin(), d.mask.end(), 1);
  EXPECT_DOUBLE_EQ(sample_depth_prior<double>(pack, texel_point(1.0, 1.0))[kFront], 2.5);
  EXPECT_FLOAT_EQ(sample_depth_prior<float>(pack, texel_point(1.0, 1.0).cast<float>())[kFront], 2.5f);
}

TEST(DepthPrior, GradientMatchesFiniteDifferences) {
  PriorMap m = unit_map(6, 6, 1);
  Rng rng(11);
  for (auto& v : m.data) v = static_cast<float>(rng.uniform(0, 3));
  for (auto& k : m.mask) k = rng.uniform() < 0.8;
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 50; ++trial) {
    const Vec3d x = texel_point(rng.uniform(1.1, 4.9), rng.uniform(1.1, 4.9));
    double val, g[3];
    sample_prior_map<double>(m, x, &val, g);
    if (val == 0.0) continue;
    const double h = 1e-7;
    bool smooth = true;
    double fd[2];
    for (int d = 0; d < 2; ++d) {
      Vec3d a = x, b = x;
      a[d] += h;
      b[d] -= h;
      double va, vb;
      sample_prior_map<double>(m, a, &va);
      sample_prior_map<double>(m, b, &vb);
      if (va == 0.0 || vb == 0.0) smooth = false;
      fd[d] = (va - vb) / (2 * h);
    }
    if (!smooth) continue;
    ++checked;
    EXPECT_NEAR(g[0], fd[0], 1e-5);
    EXPECT_NEAR(g[1], fd[1], 1e-5);
    EXPECT_EQ(g[2], 0.0);
  }
  EXPECT_GE(checked, 50);
}

TEST(NormalPrior, ConstantFrontNormal) {
  auto pack = empty_pack();
  auto& n = pack.normal[0];
  for (size_t p = 0; p < n.mask.size(); ++p) {
    n.data[p * 3 + 2] = 1.0f;
    n.mask[p] = 1;
  }
  const auto phi = sample_normal_prior<double>(pack, texel_point(2.3, 1.7));
  EXPECT_EQ(phi.head<3>(), Vec3d(0, 0, 1));
  EXPECT_EQ(phi.tail<3>(), Vec3d::Zero());
}

TEST(NormalPrior, BilinearMidpointIsRaw) {
  auto pack = empty_pack();
  auto& n = pack.normal[1];
  n = unit_map(2, 1, 3);
  n.data = {1, 0, 0, 0, 1, 0};
  n.mask = {1, 1};
  const auto phi = sample_normal_prior<double>(pack, texel_point(1.0, 0.5));
  EXPECT_NEAR(phi[3], 0.5, 1e-15);
  EXPECT_NEAR(phi[4], 0.5, 1e-15);
  EXPECT_EQ(phi[5], 0.0);
}

TEST(PriorMap, ValidateRejectsMismatchedMask) {
  PriorMap m = unit_map(3, 3, 1);
  EXPECT_NO_THROW(m.validate());
  m.mask.pop_back();
  EXPECT_THROW(m.validate(), Error);
}

TEST(TemporalEncoding, Examples) {
  const auto g = temporal_encoding(0.0, 4);
  ASSERT_EQ(g.size(), 8u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(g[2 * k], 0.0);
    EXPECT_EQ(g[2 * k + 1], 1.0);
  }
  EXPECT_TRUE(temporal_encoding(0.3, 0).empty());
  const auto h = temporal_encoding(0.25, 2);
  EXPECT_NEAR(h[0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(h[1], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(h[2], 1.0, 1e-15);
  EXPECT_NEAR(h[3], 0.0, 1e-15);
  EXPECT_THROW(temporal_encoding(0.1, -1), Error);
}

TEST(TemporalEncoding, Bounded) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial)
    for (double v : temporal_encoding(rng.uniform(-3, 3), 6)) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(TemporalEncoding, NormalizeTime) {
  EXPECT_EQ(normalize_time(1.5, 1.0, 2.0), 0.5);
  EXPECT_EQ(normalize_time(1.0, 1.0, 1.0), 0.0);
}

TEST(DecodeResiduals, ZeroNetwork) {
  MultiScaleHashField<double> f(FieldConfig{}, kUnitBox, 1);
  f.decoder.params().setZero();
  std::vector<double> z(f.config().decoder_input_dim(), 0.7);
  const auto [dx, sh] = f.decode_residuals(z);
  EXPECT_EQ(dx, Vec3d::Zero());
  EXPECT_EQ(sh.size(), 48);
  EXPECT_TRUE((sh.array() == 0.0).all());
}

TEST(DecodeResiduals, WidthsAndShapeErrors) {
  FieldConfig cfg;
  EXPECT_EQ(cfg.decoder_output_dim(), 51);
  MultiScaleHashField<double> f(cfg, kUnitBox, 1);
  EXPECT_EQ(f.decoder.output_dim(), 51);
  EXPECT_EQ(f.ao_decoder.output_dim(), 1);
  EXPECT_EQ(f.decoder.input_dim(), 16 + 8 + 4 + 6 + 8);
  std::vector<double> z(f.decoder.input_dim() + 1);
  EXPECT_THROW(f.decode_residuals(z), Error);
}

TEST(DecodeResiduals, Deterministic) {
  const auto f = small_field(40);
  std::vector<double> z(f.decoder.input_dim());
  Rng rng(13);
  for (auto& v : z) v = rng.uniform(-1, 1);
  const auto a = f.decode_residuals(z), b = f.decode_residuals(z);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(DecodeResiduals, OffsetIsBounded) {
  auto f = small_field(41);
  f.decoder.params() *= 50.0;
  std::vector<double> z(f.decoder.input_dim(), 1.0);
  const auto [dx, sh] = f.decode_residuals(z);
  EXPECT_LE(dx.cwiseAbs().maxCoeff(), f.config().max_offset);
}

// d/dz of w . [dx, sh] through the decoder, against central differences.
TEST(DecodeResiduals, GradientMatchesFiniteDifferences) {
  int checked = 0;
  double worst = 0;
  for (int net = 0; net < 100; ++net) {
    const auto f = small_field(1000 + net);
    Rng rng(stream_seed(50, net));
    const int in = f.decoder.input_dim(), out = f.decoder.output_dim();
    std::vector<double> z(in);
    for (auto& v : z) v = rng.uniform(-1, 1);
    VecX<double> w(out);
    for (int k = 0; k < out; ++k) w[k] = rng.uniform(-1, 1);
    auto loss = [&](const std::vector<double>& zz) {
      const auto [dx, sh] = f.decode_residuals(zz);
      return w.head<3>().dot(dx) + w.tail(out - 3).dot(sh);
    };
    MatX<double> row = Eigen::Map<const MatX<double>>(z.data(), 1, in);
    typename Mlp<double>::Cache cache;
    const MatX<double> raw = f.decoder.forward(row, &cache);
    MatX<double> d_out(1, out);
    for (int k = 0; k < out; ++k) d_out(0, k) = w[k];
    for (int k = 0; k < 3; ++k) {
      const double t = std::tanh(raw(0, k));
      d_out(0, k) = w[k] * f.config().max_offset * (1 - t * t);
    }
    VecX<double> d_params = VecX<double>::Zero(f.decoder.params().size());
    const MatX<double> dz = f.decoder.backward(cache, d_out, d_params);
    const double h = 1e-6;
    for (int k = 0; k < in; ++k) {
      auto a = z, b = z;
      a[k] += h;
      b[k] -= h;
      const double fd = (loss(a) - loss(b)) / (2 * h);
      const double rel = std::abs(dz(0, k) - fd) / std::max(1e-6, std::abs(fd) + std::abs(dz(0, k)));
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  EXPECT_GE(checked, 100);
  EXPECT_LE(worst, 1e-4);
}

TEST(QueryAo, FrozenIsExactlyOne) {
  const auto f = small_field(60);
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial)
    EXPECT_EQ(f.query_ao(Vec3d(rng.uniform(), rng.uniform(), rng.uniform()), rng.uniform(), true), 1.0);
}

TEST(QueryAo, RangeAndZeroNetwork) {
  auto f = small_field(61);
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const double ao = f.query_ao(Vec3d(rng.uniform(), rng.uniform(), rng.uniform()), rng.uniform(), false);
    EXPECT_GT(ao, 0.0);
    EXPECT_LT(ao, 1.0);
  }
  f.ao_decoder.params().setZero();
  EXPECT_EQ(f.query_ao(Vec3d(0.2, 0.4, 0.6), 0.5, false), 0.5);
}

TEST(QueryAo, InitialValueNearOne) {
  MultiScaleHashField<double> f(FieldConfig{}, kUnitBox, 2);
  EXPECT_NEAR(f.query_ao(Vec3d(0.5, 0.5, 0.5), 0.0, false), 1.0 / (1.0 + std::exp(-4.0)), 1e-12);
}

TEST(FieldCast, RoundTripPreservesOutputs) {
  const auto f = small_field(70);
  const auto g = f.cast<float>().cast<double>();
  std::vector<double> a(f.low.output_dim()), b(f.low.output_dim());
  f.low.query(Vec3d(0.2, 0.3, 0.4), a);
  g.low.query(Vec3d(0.2, 0.3, 0.4), b);
  for (size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-6);
}

// Each switch must make the corresponding block irrelevant to the outputs.
class SwitchInvariance : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scene_ = new SyntheticScene(make_synthetic_scene(test::small_synth()));
  }
  static void TearDownTestSuite() { delete scene_; }
  static SyntheticScene* scene_;

  static PriorPack perturbed(const PriorPack& p, bool depth, bool normals) {
    PriorPack q = p;
    if (depth)
      for (auto& d : q.depth)
        for (auto& v : d.data) v += 0.37f;
    if (normals)
      for (auto& n : q.normal)
        for (auto& v : n.data) v = -v + 0.2f;
    return q;
  }
};
SyntheticScene* SwitchInvariance::scene_ = nullptr;

TEST_F(SwitchInvariance, DepthOffIgnoresDepthMaps) {
  auto m = test::small_model(*scene_);
  m.switches.depth = false;
  const auto a = evaluate_attributes(m, 0.3, false);
  const auto base = m.priors;
  m.priors = std::make_shared<PriorPack>(perturbed(*base, true, false));
  const auto b = evaluate_attributes(m, 0.3, false);
  EXPECT_EQ(a.offset, b.offset);
  EXPECT_EQ(a.sh, b.sh);
  m.switches.depth = true;
  const auto c = evaluate_attributes(m, 0.3, false);
  m.priors = base;
  const auto d = evaluate_attributes(m, 0.3, false);
  EXPECT_NE(c.sh, d.sh);
}

TEST_F(SwitchInvariance, NormalsOffIgnoresNormalMaps) {
  auto m = test::small_model(*scene_);
  m.switches.normals = false;
  const auto a = evaluate_attributes(m, 0.3, false);
  const auto base = m.priors;
  m.priors = std::make_shared<PriorPack>(perturbed(*base, false, true));
  const auto b = evaluate_attributes(m, 0.3, false);
  EXPECT_EQ(a.offset, b.offset);
  EXPECT_EQ(a.sh, b.sh);
  m.switches.normals = true;
  const auto c = evaluate_attributes(m, 0.3, false);
  m.priors = base;
  EXPECT_NE(c.sh, evaluate_attributes(m, 0.3, false).sh);
}

TEST_F(SwitchInvariance, MultiscaleOffIgnoresHighBand) {
  auto m = test::small_model(*scene_);
  m.switches.multiscale = false;
  const auto a = evaluate_attributes(m, 0.3, false);
  randomize(m.field.high.params(), 77);
  const auto b = evaluate_attributes(m, 0.3, false);
  EXPECT_EQ(a.offset, b.offset);
  EXPECT_EQ(a.sh, b.sh);
  m.switches.multiscale = true;
  const auto c = evaluate_attributes(m, 0.3, false);
  randomize(m.field.high.params(), 78);
  EXPECT_NE(c.sh, evaluate_attributes(m, 0.3, false).sh);
}

TEST_F(SwitchInvariance, HashVdOffGivesZeroOffset) {
  auto m = test::small_model(*scene_);
  m.switches.hash_vd = false;
  const auto a = evaluate_attributes(m, 0.3, false);
  EXPECT_TRUE((a.offset.array() == 0.0).all());
  randomize(m.field.decoder.params(), 79);
  EXPECT_TRUE((evaluate_attributes(m, 0.3, false).offset.array() == 0.0).all());
  m.switches.hash_vd = true;
  EXPECT_GT(evaluate_attributes(m, 0.3, false).offset.cwiseAbs().maxCoeff(), 0.0);
}

TEST_F(SwitchInvariance, HashShOffUsesPerPrimitiveSh) {
  auto m = test::small_model(*scene_);
  m.switches.hash_sh = false;
  Rng rng(16);
  for (Eigen::Index i = 0; i < m.cloud.sh.size(); ++i) m.cloud.sh.data()[i] = rng.uniform(-1, 1);
  const auto a = evaluate_attributes(m, 0.3, false);
  EXPECT_EQ(a.sh, m.cloud.sh);
  randomize(m.field.decoder.params(), 80);
  EXPECT_EQ(evaluate_attributes(m, 0.3, false).sh, m.cloud.sh);
  m.switches.hash_sh = true;
  EXPECT_NE(evaluate_attributes(m, 0.3, false).sh, m.cloud.sh);
}

TEST_F(SwitchInvariance, AoOffOrFrozenGivesOnes) {
  auto m = test::small_model(*scene_);
  EXPECT_TRUE((evaluate_attributes(m, 0.3, true).ao.array() == 1.0).all());
  m.switches.ao = false;
  EXPECT_TRUE((evaluate_attributes(m, 0.3, false).ao.array() == 1.0).all());
  m.switches.ao = true;
  const auto ao = evaluate_attributes(m, 0.3, false).ao;
  EXPECT_TRUE((ao.array() > 0.0).all() && (ao.array() < 1.0).all());
  EXPECT_LT(ao.minCoeff(), 1.0);
}

}  // namespace
}  // namespace gavatar
