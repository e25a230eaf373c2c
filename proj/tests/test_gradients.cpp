#include "gradcheck.hpp"

#include <gtest/gtest.h>

namespace gavatar {
namespace {

constexpr int kScenes = 100;

TEST(Gradients, DoubleMatchesFiniteDifferences) {
  const auto r = gradcheck::double_vs_fd(kScenes);
  RecordProperty("checked", r.checked);
  RecordProperty("skipped", r.skipped);
  EXPECT_TRUE(r.finite);
  EXPECT_LE(r.worst, 1e-4) << r.worst_at;
  EXPECT_GT(r.checked, 20 * kScenes);
  EXPECT_LE(r.skipped, 0.02 * (r.checked + r.skipped)) << r.skipped << " of " << r.checked + r.skipped;
  EXPECT_EQ(r.groups, (std::set<std::string>{"position", "rotation", "scale", "opacity", "joints", "low", "high",
                                             "decoder", "ao_decoder", "sh"}));
}

TEST(Gradients, FloatMatchesDoubleOracle) {
  const auto r = gradcheck::float_vs_double(kScenes);
  EXPECT_TRUE(r.finite);
  EXPECT_LE(r.worst, 1e-3) << r.worst_at;
  EXPECT_EQ(r.groups.size(), 10u);
}

TEST(Gradients, ScenesCoverPolarAndSwitchVariants) {
  int polar = 0, no_sh = 0, no_ao = 0, no_ms = 0;
  for (int sc = 0; sc < kScenes; ++sc) {
    const auto s = gradcheck::make_scene(sc);
    polar += s.rs.polar;
    no_sh += !s.model.switches.hash_sh;
    no_ao += !s.model.switches.ao;
    no_ms += !s.model.switches.multiscale;
  }
  EXPECT_GT(polar, 0);
  EXPECT_GT(no_sh, 0);
  EXPECT_GT(no_ao, 0);
  EXPECT_GT(no_ms, 0);
}

}  // namespace
}  // namespace gavatar
