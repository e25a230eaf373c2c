#include "gavatar/io.hpp"
#include "gavatar/project.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace gavatar {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gavatar_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(io::fnv1a_hex("foobar"), "85944171f73967e8");
}

class FormatFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { scene_ = new SyntheticScene(make_synthetic_scene(test::small_synth(16))); }
  static void TearDownTestSuite() { delete scene_; }
  static SyntheticScene* scene_;
};
SyntheticScene* FormatFixture::scene_ = nullptr;

TEST_F(FormatFixture, MeshRoundTripIsByteIdentical) {
  const fs::path d = scratch("mesh");
  io::write_mesh(scene_->mesh, d / "a.obj", d / "a.json");
  const CanonicalMesh m = io::read_mesh(d / "a.obj", d / "a.json");
  io::write_mesh(m, d / "b.obj", d / "b.json");
  EXPECT_EQ(bytes(d / "a.obj"), bytes(d / "b.obj"));
  EXPECT_EQ(bytes(d / "a.json"), bytes(d / "b.json"));
  EXPECT_EQ(m.vertices, scene_->mesh.vertices);
  EXPECT_EQ(m.faces, scene_->mesh.faces);
  EXPECT_EQ(m.labels, scene_->mesh.labels);
}

TEST_F(FormatFixture, JsonFormatsRoundTrip) {
  const json r = io::rig_to_json(scene_->rig);
  EXPECT_EQ(io::rig_to_json(io::rig_from_json(r)).dump(), r.dump());
  const json p = io::poses_to_json(scene_->poses);
  EXPECT_EQ(io::poses_to_json(io::poses_from_json(p)).dump(), p.dump());
  for (const auto& c : scene_->cameras) {
    const json j = io::camera_to_json(c);
    EXPECT_EQ(io::camera_to_json(io::camera_from_json(j)).dump(), j.dump());
  }
  EXPECT_THROW(io::rig_from_json(json{{"parents", {-1}}}), Error);
}

TEST_F(FormatFixture, PriorsRoundTripIsByteIdentical) {
  const fs::path d = scratch("priors");
  const PriorPack pack = render_priors(scene_->mesh, 32);
  io::write_priors(pack, d / "a.gapp");
  const PriorPack back = io::read_priors(d / "a.gapp");
  io::write_priors(back, d / "b.gapp");
  EXPECT_EQ(bytes(d / "a.gapp"), bytes(d / "b.gapp"));
  std::string truncated = bytes(d / "a.gapp");
  truncated.resize(truncated.size() / 2);
  std::ofstream(d / "c.gapp", std::ios::binary) << truncated;
  EXPECT_THROW(io::read_priors(d / "c.gapp"), Error);
}

TEST(FloatImage, RoundTripIsExact) {
  const fs::path d = scratch("gafi");
  Image<float> img(5, 3);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = float(i) * 0.1f - 0.3f;
  img.data[4] = std::numeric_limits<float>::denorm_min();
  io::write_float_image(img, d / "a.gafi");
  const Image<float> back = io::read_float_image(d / "a.gafi");
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.data, img.data);
  io::write_float_image(back, d / "b.gafi");
  EXPECT_EQ(bytes(d / "a.gafi"), bytes(d / "b.gafi"));
  EXPECT_EQ(bytes(d / "a.gafi").substr(0, 4), "GAFI");
  std::ofstream(d / "bad.gafi", std::ios::binary) << "NOPE 1 1\n";
  EXPECT_THROW(io::read_float_image(d / "bad.gafi"), Error);
  EXPECT_THROW(io::read_float_image(d / "missing.gafi"), Error);
}

TEST(Png, WritesSignature) {
  const fs::path d = scratch("png");
  io::write_png(Image<float>(4, 4, 0.5f), d / "a.png");
  EXPECT_EQ(bytes(d / "a.png").substr(1, 3), "PNG");
}

TEST_F(FormatFixture, CheckpointRoundTripIsByteIdentical) {
  const fs::path d = scratch("ckpt");
  auto m = test::small_model(*scene_);
  m.switches.depth = false;
  m.optimize_joints = false;
  m.joints[1] += Vec3d(0.01, 0.0, -0.02);
  io::write_checkpoint(m, d / "a.bin");
  auto back = io::read_checkpoint(d / "a.bin", scene_->rig);
  io::write_checkpoint(back, d / "b.bin");
  EXPECT_EQ(bytes(d / "a.bin"), bytes(d / "b.bin"));
  EXPECT_EQ(back.cloud.position, m.cloud.position);
  EXPECT_EQ(back.cloud.sh, m.cloud.sh);
  EXPECT_EQ(back.field.high.params(), m.field.high.params());
  EXPECT_EQ(back.field.ao_decoder.params(), m.field.ao_decoder.params());
  EXPECT_EQ(back.joints, m.joints);
  EXPECT_FALSE(back.switches.depth);
  EXPECT_FALSE(back.optimize_joints);
  back.priors = m.priors;
  const Dataset ds = make_dataset(*scene_, RenderSettings{});
  const FrameInput& f = ds.train[0].frame;
  EXPECT_EQ(render_avatar(back, f, RenderSettings{}).data, render_avatar(m, f, RenderSettings{}).data);
}

TEST(Csv, Layout) {
  const fs::path d = scratch("csv");
  io::write_eval_csv({{0, 31.5, 0.9}, {1, 29.25, 0.875}}, d / "e.csv");
  EXPECT_EQ(io::read_text(d / "e.csv"), "frame,psnr,ssim\n0,31.5,0.9\n1,29.25,0.875\n");
}

ProjectConfig tiny_config(const fs::path& out) {
  ProjectConfig c;
  c.output_dir = out.string();
  c.synth.image_size = 24;
  c.synth.poses = 3;
  c.synth.train_cameras = 2;
  c.synth.gt_primitives = 300;
  c.synth.prior_resolution = 48;
  c.region.base_count = 1;
  c.region.max_count = 2;
  c.train.iterations = 6;
  c.train.ao_freeze_iters = 3;
  c.train.log_every = 2;
  c.train.checkpoint_every = 3;
  return c;
}

TEST(ProjectConfig, JsonRoundTrip) {
  ProjectConfig c = tiny_config("x");
  c.switches.normals = false;
  c.use_double = true;
  c.render.background = Vec3d(0.1, 0.2, 0.3);
  const ProjectConfig back = ProjectConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_NE(tiny_config("y").hash(), c.hash());
}

TEST(ProjectConfig, RejectsUnknownAndInvalid) {
  json j = ProjectConfig{}.to_json();
  j["bogus"] = 1;
  EXPECT_THROW(ProjectConfig::from_json(j), Error);
  j = ProjectConfig{}.to_json();
  j["train"]["loss"]["lambda"] = 2.0;
  EXPECT_THROW(ProjectConfig::from_json(j), Error);
  j = ProjectConfig{}.to_json();
  j["region"].erase("sigma");
  EXPECT_EQ(ProjectConfig::from_json(j).region.sigma, RegionProfile{}.sigma);
}

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(GAVATAR_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof(buf), p)) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

json last_json_line(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line[0] == '{') last = line;
  return json::parse(last);
}

class CliWorkflow : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch("cli"));
    io::write_json(tiny_config(*dir_ / "out").to_json(), *dir_ / "cfg.json");
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string cfg() { return "--config " + (*dir_ / "cfg.json").string(); }
  static fs::path* dir_;
};
fs::path* CliWorkflow::dir_ = nullptr;

TEST_F(CliWorkflow, EndToEnd) {
  const fs::path out = *dir_ / "out";
  auto r = cli("synth " + cfg());
  ASSERT_EQ(r.code, 0) << r.out;
  const json s = last_json_line(r.out);
  EXPECT_EQ(s["frames"], 9);
  EXPECT_EQ(s["cameras"], 3);
  const std::string hash = s["dataset_hash"];
  EXPECT_TRUE(fs::exists(out / "data" / "targets" / "p002_c02.gafi"));

  r = cli("synth " + cfg() + " --output " + (*dir_ / "again").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(last_json_line(r.out)["dataset_hash"], hash);
  r = cli("synth " + cfg() + " --seed 8 --output " + (*dir_ / "other").string());
  EXPECT_NE(last_json_line(r.out)["dataset_hash"], hash);

  r = cli("init " + cfg());
  ASSERT_EQ(r.code, 0) << r.out;
  const json in = last_json_line(r.out);
  EXPECT_EQ(in["primitives"].get<int>(), in["torso"].get<int>() + in["face"].get<int>() + in["hand"].get<int>());
  EXPECT_GT(in["face"].get<int>(), 0);

  r = cli("train " + cfg());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(last_json_line(r.out)["iterations"], 6);
  EXPECT_TRUE(fs::exists(out / "model" / "model.bin"));
  EXPECT_TRUE(fs::exists(out / "model" / "loss.csv"));
  const json man = io::read_json(out / "model" / "manifest.json");
  EXPECT_EQ(man["dataset_hash"], hash);
  EXPECT_EQ(man["checkpoint_hash"], io::file_hash(out / "model" / "model.bin"));

  r = cli("render " + cfg() + " --pose 1 --camera 2");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(last_json_line(r.out)["images"], 1);
  const fs::path img = out / "renders" / "p001_c02.gafi";
  ASSERT_TRUE(fs::exists(img));
  EXPECT_TRUE(fs::exists(out / "renders" / "p001_c02.png"));
  const std::string first = bytes(img);
  r = cli("render " + cfg() + " --pose 1 --camera 2 --threads 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(bytes(img), first);

  r = cli("eval " + cfg());
  ASSERT_EQ(r.code, 0) << r.out;
  const json ev = last_json_line(r.out);
  EXPECT_EQ(ev["frames"], 3);
  const std::string csv = io::read_text(out / "eval" / "eval.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);

  r = cli("render " + cfg() + " --camera 2");
  ASSERT_EQ(r.code, 0) << r.out;
  r = cli("eval " + cfg() + " --images " + (out / "renders").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(last_json_line(r.out)["psnr"].get<double>(), ev["psnr"].get<double>(), 1e-9);

  r = cli("render " + cfg() + " --pose 7");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_EQ(last_json_line(r.out)["exit_code"], 3);
}

TEST_F(CliWorkflow, ExitCodes) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("config --config " + (*dir_ / "missing.json").string()).code, 2);
  json bad = tiny_config(*dir_ / "bad").to_json();
  bad["train"]["iterations"] = -4;
  io::write_json(bad, *dir_ / "bad.json");
  const auto r = cli("config --config " + (*dir_ / "bad.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(last_json_line(r.out)["exit_code"], 2);
  EXPECT_EQ(cli("init --output " + (*dir_ / "empty").string()).code, 3);
}

TEST_F(CliWorkflow, DivergenceExitsWithFour) {
  const fs::path out = *dir_ / "nan";
  io::write_json(tiny_config(out).to_json(), *dir_ / "nan.json");
  const std::string c = "--config " + (*dir_ / "nan.json").string();
  ASSERT_EQ(cli("synth " + c).code, 0);
  ASSERT_EQ(cli("init " + c).code, 0);
  for (const char* name : {"p000_c00.gafi", "p000_c01.gafi", "p001_c00.gafi", "p001_c01.gafi",
                           "p002_c00.gafi", "p002_c01.gafi"}) {
    const fs::path p = out / "data" / "targets" / name;
    Image<float> img = io::read_float_image(p);
    img.data[7] = std::numeric_limits<float>::quiet_NaN();
    io::write_float_image(img, p);
  }
  const auto r = cli("train " + c);
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_TRUE(fs::exists(out / "model" / "model.bin"));
  EXPECT_TRUE(io::read_json(out / "model" / "manifest.json")["diverged"].get<bool>());
}

}  // namespace
}  // namespace gavatar
