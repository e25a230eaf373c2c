#include "gavatar/project.hpp"

#include "gavatar/io.hpp"

#include <cstdio>
#include <initializer_list>
#include <set>

namespace gavatar {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  require(j.is_object(), ErrorKind::Config, where + " must be an object");
  const std::set<std::string> k(known.begin(), known.end());
  for (const auto& [key, _] : j.items())
    require(k.count(key) > 0, ErrorKind::Config, "unknown key '" + key + "' in " + where);
}

template <typename T> void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json band_json(const HashBandConfig& b) {
  return {{"levels", b.levels},
          {"base_resolution", b.base_resolution},
          {"growth", b.growth},
          {"log2_table_size", b.log2_table_size},
          {"feature_dim", b.feature_dim}};
}

HashBandConfig band_from(const json& j, const std::string& where) {
  check_keys(j, {"levels", "base_resolution", "growth", "log2_table_size", "feature_dim"}, where);
  HashBandConfig b;
  read_opt(j, "levels", b.levels);
  read_opt(j, "base_resolution", b.base_resolution);
  read_opt(j, "growth", b.growth);
  read_opt(j, "log2_table_size", b.log2_table_size);
  read_opt(j, "feature_dim", b.feature_dim);
  return b;
}

json switches_json(const FieldSwitches& s) {
  return {{"hash_sh", s.hash_sh}, {"hash_vd", s.hash_vd},       {"depth", s.depth},
          {"normals", s.normals}, {"multiscale", s.multiscale}, {"ao", s.ao}};
}

FieldSwitches switches_from(const json& j) {
  check_keys(j, {"hash_sh", "hash_vd", "depth", "normals", "multiscale", "ao"}, "switches");
  FieldSwitches s;
  read_opt(j, "hash_sh", s.hash_sh);
  read_opt(j, "hash_vd", s.hash_vd);
  read_opt(j, "depth", s.depth);
  read_opt(j, "normals", s.normals);
  read_opt(j, "multiscale", s.multiscale);
  read_opt(j, "ao", s.ao);
  return s;
}

std::string frame_name(int pose, int camera) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%03d_c%02d", pose, camera);
  return buf;
}

template <typename S>
AvatarModel<S> load_model(const ProjectConfig& cfg, const LoadedDataset& ds, const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::Io, "missing checkpoint " + path.string());
  AvatarModel<double> m = io::read_checkpoint(path, ds.rig);
  m.priors = ds.priors;
  m.validate();
  (void)cfg;
  return m.template cast<S>();
}

fs::path default_checkpoint(const ProjectConfig& cfg, const fs::path& given) {
  return given.empty() ? cfg.dir(cfg.paths.model_dir) / "model.bin" : given;
}

FrameInput frame_for(const LoadedDataset& ds, int pose, int camera) {
  FrameInput f;
  f.pose = ds.poses[pose];
  f.camera = ds.cameras[camera];
  f.t_norm = normalize_time(f.pose.t, ds.poses.front().t, ds.poses.back().t);
  return f;
}

template <typename S>
TrainResult train_impl(const ProjectConfig& cfg, const LoadedDataset& ds, AvatarModel<double>& md,
                       const fs::path* model_dir) {
  AvatarModel<S> m = md.template cast<S>();
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.render = cfg.render;
  CheckpointFn<S> save;
  if (model_dir)
    save = [&](int it, const AvatarModel<S>& cur) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "ckpt_%06d.bin", it);
      io::write_checkpoint(cur.template cast<double>(), *model_dir / buf);
    };
  TrainResult r = train<S>(m, ds.frames.train, tc, save);
  md = m.template cast<double>();
  md.priors = ds.priors;
  return r;
}

template <typename S>
std::vector<EvalRow> eval_model(const ProjectConfig& cfg, const LoadedDataset& ds,
                                const AvatarModel<double>& md) {
  return evaluate<S>(md.template cast<S>(), ds.frames.test, cfg.render, cfg.train.loss);
}

}  // namespace

void ProjectConfig::validate() const {
  require(!output_dir.empty(), ErrorKind::Config, "output_dir must be set");
  require(box_padding >= 0.0, ErrorKind::Config, "box_padding must be >= 0");
  field.validate();
  region.validate();
  require(region.sh_degree == field.sh_degree, ErrorKind::Config,
          "region and field SH degrees differ");
  train.validate();
  require(render.tile_size >= 1, ErrorKind::Config, "tile_size must be >= 1");
  require(render.raster.extent_sigma > 0.0 && render.raster.low_pass >= 0.0 &&
              render.raster.termination >= 0.0,
          ErrorKind::Config, "bad raster settings");
  require(synth.image_size >= train.loss.window, ErrorKind::Config,
          "images must be at least as large as the SSIM window");
}

fs::path ProjectConfig::dir(const std::string& d) const {
  const fs::path p(d);
  return p.is_absolute() ? p : out() / p;
}

fs::path ProjectConfig::target_path(int pose, int camera) const {
  return data(paths.targets) / (frame_name(pose, camera) + ".gafi");
}

ModelSpec ProjectConfig::model_spec() const {
  ModelSpec s;
  s.profile = region;
  s.profile.seed = seed;
  s.profile.sh_degree = field.sh_degree;
  s.field = field;
  s.prior_resolution = synth.prior_resolution;
  s.box_padding = box_padding;
  s.seed = seed;
  return s;
}

json ProjectConfig::to_json() const {
  const auto& p = paths;
  const auto& s = synth;
  const auto& t = train;
  return json{
      {"seed", seed},
      {"output_dir", output_dir},
      {"precision", use_double ? "double" : "float"},
      {"paths",
       {{"data_dir", p.data_dir},
        {"model_dir", p.model_dir},
        {"render_dir", p.render_dir},
        {"eval_dir", p.eval_dir},
        {"mesh", p.mesh},
        {"sidecar", p.sidecar},
        {"rig", p.rig},
        {"poses", p.poses},
        {"cameras", p.cameras},
        {"priors", p.priors},
        {"targets", p.targets}}},
      {"synth",
       {{"image_size", s.image_size},
        {"poses", s.poses},
        {"train_cameras", s.train_cameras},
        {"fps", s.fps},
        {"radius", s.radius},
        {"height", s.height},
        {"segments", s.segments},
        {"cap_rings", s.cap_rings},
        {"body_rings", s.body_rings},
        {"gt_primitives", s.gt_primitives},
        {"camera_distance", s.camera_distance},
        {"fov_y_deg", s.fov_y_deg},
        {"max_bend_deg", s.max_bend_deg},
        {"dimming", s.dimming},
        {"prior_resolution", s.prior_resolution}}},
      {"region",
       {{"sigma", region.sigma},
        {"base_count", region.base_count},
        {"max_count", region.max_count},
        {"neighborhood_radius", region.neighborhood_radius}}},
      {"field",
       {{"low", band_json(field.low)},
        {"high", band_json(field.high)},
        {"sh_degree", field.sh_degree},
        {"hidden_width", field.hidden_width},
        {"hidden_layers", field.hidden_layers},
        {"ao_hidden_width", field.ao_hidden_width},
        {"ao_hidden_layers", field.ao_hidden_layers},
        {"time_frequencies", field.time_frequencies},
        {"max_offset", field.max_offset},
        {"time_in_decoder", field.time_in_decoder},
        {"ao_init_bias", field.ao_init_bias},
        {"table_init_range", field.table_init_range},
        {"box_padding", box_padding}}},
      {"train",
       {{"iterations", t.iterations},
        {"ao_freeze_iters", t.ao_freeze_iters},
        {"optimize_joints", t.optimize_joints},
        {"log_every", t.log_every},
        {"checkpoint_every", t.checkpoint_every},
        {"lr",
         {{"position", t.lr.position},
          {"rotation", t.lr.rotation},
          {"scale", t.lr.scale},
          {"opacity", t.lr.opacity},
          {"hash", t.lr.hash},
          {"mlp", t.lr.mlp},
          {"skeleton", t.lr.skeleton},
          {"sh", t.lr.sh}}},
        {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"eps", t.adam.eps}}},
        {"loss",
         {{"lambda", t.loss.lambda},
          {"window", t.loss.window},
          {"window_sigma", t.loss.window_sigma},
          {"dynamic_range", t.loss.dynamic_range}}}}},
      {"render",
       {{"tile_size", render.tile_size},
        {"background", {render.background.x(), render.background.y(), render.background.z()}},
        {"polar", render.polar},
        {"low_pass", render.raster.low_pass},
        {"termination", render.raster.termination},
        {"extent_sigma", render.raster.extent_sigma}}},
      {"switches", switches_json(switches)},
  };
}

ProjectConfig ProjectConfig::from_json(const json& j) {
  ProjectConfig c;
  try {
    check_keys(j, {"seed", "output_dir", "precision", "paths", "synth", "region", "field", "train",
                   "render", "switches"},
               "config");
    read_opt(j, "seed", c.seed);
    read_opt(j, "output_dir", c.output_dir);
    if (j.contains("precision")) {
      const auto p = j.at("precision").get<std::string>();
      require(p == "float" || p == "double", ErrorKind::Config, "precision must be float or double");
      c.use_double = p == "double";
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, {"data_dir", "model_dir", "render_dir", "eval_dir", "mesh", "sidecar", "rig",
                     "poses", "cameras", "priors", "targets"},
                 "paths");
      auto& q = c.paths;
      read_opt(p, "data_dir", q.data_dir);
      read_opt(p, "model_dir", q.model_dir);
      read_opt(p, "render_dir", q.render_dir);
      read_opt(p, "eval_dir", q.eval_dir);
      read_opt(p, "mesh", q.mesh);
      read_opt(p, "sidecar", q.sidecar);
      read_opt(p, "rig", q.rig);
      read_opt(p, "poses", q.poses);
      read_opt(p, "cameras", q.cameras);
      read_opt(p, "priors", q.priors);
      read_opt(p, "targets", q.targets);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      check_keys(s, {"image_size", "poses", "train_cameras", "fps", "radius", "height", "segments",
                     "cap_rings", "body_rings", "gt_primitives", "camera_distance", "fov_y_deg",
                     "max_bend_deg", "dimming", "prior_resolution"},
                 "synth");
      auto& q = c.synth;
      read_opt(s, "image_size", q.image_size);
      read_opt(s, "poses", q.poses);
      read_opt(s, "train_cameras", q.train_cameras);
      read_opt(s, "fps", q.fps);
      read_opt(s, "radius", q.radius);
      read_opt(s, "height", q.height);
      read_opt(s, "segments", q.segments);
      read_opt(s, "cap_rings", q.cap_rings);
      read_opt(s, "body_rings", q.body_rings);
      read_opt(s, "gt_primitives", q.gt_primitives);
      read_opt(s, "camera_distance", q.camera_distance);
      read_opt(s, "fov_y_deg", q.fov_y_deg);
      read_opt(s, "max_bend_deg", q.max_bend_deg);
      read_opt(s, "dimming", q.dimming);
      read_opt(s, "prior_resolution", q.prior_resolution);
    }
    if (j.contains("region")) {
      const auto& r = j.at("region");
      check_keys(r, {"sigma", "base_count", "max_count", "neighborhood_radius"}, "region");
      read_opt(r, "sigma", c.region.sigma);
      read_opt(r, "base_count", c.region.base_count);
      read_opt(r, "max_count", c.region.max_count);
      read_opt(r, "neighborhood_radius", c.region.neighborhood_radius);
    }
    if (j.contains("field")) {
      const auto& f = j.at("field");
      check_keys(f, {"low", "high", "sh_degree", "hidden_width", "hidden_layers", "ao_hidden_width",
                     "ao_hidden_layers", "time_frequencies", "max_offset", "time_in_decoder",
                     "ao_init_bias", "table_init_range", "box_padding"},
                 "field");
      auto& q = c.field;
      if (f.contains("low")) q.low = band_from(f.at("low"), "field.low");
      if (f.contains("high")) q.high = band_from(f.at("high"), "field.high");
      read_opt(f, "sh_degree", q.sh_degree);
      read_opt(f, "hidden_width", q.hidden_width);
      read_opt(f, "hidden_layers", q.hidden_layers);
      read_opt(f, "ao_hidden_width", q.ao_hidden_width);
      read_opt(f, "ao_hidden_layers", q.ao_hidden_layers);
      read_opt(f, "time_frequencies", q.time_frequencies);
      read_opt(f, "max_offset", q.max_offset);
      read_opt(f, "time_in_decoder", q.time_in_decoder);
      read_opt(f, "ao_init_bias", q.ao_init_bias);
      read_opt(f, "table_init_range", q.table_init_range);
      read_opt(f, "box_padding", c.box_padding);
      c.region.sh_degree = q.sh_degree;
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, {"iterations", "ao_freeze_iters", "optimize_joints", "log_every",
                     "checkpoint_every", "lr", "adam", "loss"},
                 "train");
      auto& q = c.train;
      read_opt(t, "iterations", q.iterations);
      read_opt(t, "ao_freeze_iters", q.ao_freeze_iters);
      read_opt(t, "optimize_joints", q.optimize_joints);
      read_opt(t, "log_every", q.log_every);
      read_opt(t, "checkpoint_every", q.checkpoint_every);
      if (t.contains("lr")) {
        const auto& l = t.at("lr");
        check_keys(l, {"position", "rotation", "scale", "opacity", "hash", "mlp", "skeleton", "sh"},
                   "train.lr");
        read_opt(l, "position", q.lr.position);
        read_opt(l, "rotation", q.lr.rotation);
        read_opt(l, "scale", q.lr.scale);
        read_opt(l, "opacity", q.lr.opacity);
        read_opt(l, "hash", q.lr.hash);
        read_opt(l, "mlp", q.lr.mlp);
        read_opt(l, "skeleton", q.lr.skeleton);
        read_opt(l, "sh", q.lr.sh);
      }
      if (t.contains("adam")) {
        const auto& a = t.at("adam");
        check_keys(a, {"beta1", "beta2", "eps"}, "train.adam");
        read_opt(a, "beta1", q.adam.beta1);
        read_opt(a, "beta2", q.adam.beta2);
        read_opt(a, "eps", q.adam.eps);
      }
      if (t.contains("loss")) {
        const auto& l = t.at("loss");
        check_keys(l, {"lambda", "window", "window_sigma", "dynamic_range"}, "train.loss");
        read_opt(l, "lambda", q.loss.lambda);
        read_opt(l, "window", q.loss.window);
        read_opt(l, "window_sigma", q.loss.window_sigma);
        read_opt(l, "dynamic_range", q.loss.dynamic_range);
      }
    }
    if (j.contains("render")) {
      const auto& r = j.at("render");
      check_keys(r, {"tile_size", "background", "polar", "low_pass", "termination", "extent_sigma"},
                 "render");
      read_opt(r, "tile_size", c.render.tile_size);
      if (r.contains("background")) {
        const auto bg = r.at("background").get<std::vector<double>>();
        require(bg.size() == 3, ErrorKind::Config, "background needs 3 values");
        c.render.background = Vec3d(bg[0], bg[1], bg[2]);
      }
      read_opt(r, "polar", c.render.polar);
      read_opt(r, "low_pass", c.render.raster.low_pass);
      read_opt(r, "termination", c.render.raster.termination);
      read_opt(r, "extent_sigma", c.render.raster.extent_sigma);
    }
    if (j.contains("switches")) c.switches = switches_from(j.at("switches"));
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config: ") + e.what());
  }
  c.synth.seed = c.seed;
  c.train.seed = c.seed;
  c.region.seed = c.seed;
  c.validate();
  return c;
}

std::string ProjectConfig::hash() const { return io::fnv1a_hex(to_json().dump()); }

ProjectConfig load_project_config(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::Config, "config file not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return ProjectConfig::from_json(j);
}

LoadedDataset load_dataset(const ProjectConfig& cfg, bool with_targets) {
  const auto& p = cfg.paths;
  for (const auto& f : {p.mesh, p.sidecar, p.rig, p.poses, p.cameras, p.priors})
    if (!fs::exists(cfg.data(f)))
      fail(ErrorKind::Io, "missing dataset file " + cfg.data(f).string() + " (run synth first)");
  LoadedDataset ds;
  ds.mesh = io::read_mesh(cfg.data(p.mesh), cfg.data(p.sidecar));
  ds.rig = io::rig_from_json(io::read_json(cfg.data(p.rig)));
  ds.poses = io::poses_from_json(io::read_json(cfg.data(p.poses)));
  require(!ds.poses.empty(), ErrorKind::Validation, "pose file is empty");
  for (const auto& pose : ds.poses)
    require(static_cast<int>(pose.euler.size()) == ds.rig.joint_count(), ErrorKind::Validation,
            "pose joint count does not match the rig");
  const json cams = io::read_json(cfg.data(p.cameras));
  try {
    ds.train_camera_count = cams.at("train_count").get<int>();
    for (const auto& c : cams.at("cameras")) ds.cameras.push_back(io::camera_from_json(c));
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("cameras: ") + e.what());
  }
  require(ds.train_camera_count >= 1 &&
              ds.train_camera_count < static_cast<int>(ds.cameras.size()),
          ErrorKind::Validation, "camera file needs training and held-out cameras");
  ds.priors = std::make_shared<const PriorPack>(io::read_priors(cfg.data(p.priors)));

  const fs::path manifest = cfg.data("manifest.json");
  if (fs::exists(manifest)) ds.hash = io::read_json(manifest).value("dataset_hash", "");

  if (with_targets) {
    for (int pi = 0; pi < static_cast<int>(ds.poses.size()); ++pi)
      for (int ci = 0; ci < static_cast<int>(ds.cameras.size()); ++ci) {
        const fs::path tp = cfg.target_path(pi, ci);
        if (!fs::exists(tp)) fail(ErrorKind::Io, "missing target image " + tp.string());
        TrainSample s;
        s.frame = frame_for(ds, pi, ci);
        s.target = io::read_float_image(tp);
        require(s.target.width == s.frame.camera.width && s.target.height == s.frame.camera.height,
                ErrorKind::Shape, tp.string() + " does not match its camera size");
        (ci < ds.train_camera_count ? ds.frames.train : ds.frames.test).push_back(std::move(s));
      }
  }
  return ds;
}

json run_synth(const ProjectConfig& cfg) {
  cfg.validate();
  SynthConfig sc = cfg.synth;
  sc.seed = cfg.seed;
  const SyntheticScene scene = make_synthetic_scene(sc);
  const auto& p = cfg.paths;
  std::error_code ec;
  fs::create_directories(cfg.data(p.targets), ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + cfg.data(p.targets).string() + ": " + ec.message());

  io::write_mesh(scene.mesh, cfg.data(p.mesh), cfg.data(p.sidecar));
  io::write_json(io::rig_to_json(scene.rig), cfg.data(p.rig));
  io::write_json(io::poses_to_json(scene.poses), cfg.data(p.poses));
  json cams = json::array();
  for (const auto& c : scene.cameras) cams.push_back(io::camera_to_json(c));
  io::write_json(json{{"train_count", scene.train_camera_count}, {"cameras", cams}},
                 cfg.data(p.cameras));
  io::write_priors(render_priors(scene.mesh, sc.prior_resolution), cfg.data(p.priors));

  std::vector<std::string> files = {p.mesh, p.sidecar, p.rig, p.poses, p.cameras, p.priors};
  for (int pi = 0; pi < static_cast<int>(scene.poses.size()); ++pi)
    for (int ci = 0; ci < static_cast<int>(scene.cameras.size()); ++ci) {
      const Image<float> img = render_ground_truth(scene, pi, ci, cfg.render).cast<float>();
      io::write_float_image(img, cfg.target_path(pi, ci));
      files.push_back((fs::path(p.targets) / (frame_name(pi, ci) + ".gafi")).string());
    }
  json hashes = json::object();
  std::string all;
  for (const auto& f : files) {
    const std::string h = io::file_hash(cfg.data(f));
    hashes[f] = h;
    all += f + ":" + h + "\n";
  }
  const json manifest{{"seed", cfg.seed},
                      {"config_hash", cfg.hash()},
                      {"poses", scene.poses.size()},
                      {"train_cameras", scene.train_camera_count},
                      {"test_cameras", scene.cameras.size() - scene.train_camera_count},
                      {"cameras", scene.cameras.size()},
                      {"frames", scene.poses.size() * scene.cameras.size()},
                      {"files", hashes},
                      {"dataset_hash", io::fnv1a_hex(all)}};
  io::write_json(manifest, cfg.data("manifest.json"));
  return manifest;
}

RegionCounts run_init(const ProjectConfig& cfg) {
  cfg.validate();
  const LoadedDataset ds = load_dataset(cfg, false);
  AvatarModel<double> m = build_model(ds.mesh, ds.rig, cfg.model_spec(), ds.priors);
  m.switches = cfg.switches;
  m.optimize_joints = cfg.train.optimize_joints;
  const fs::path dir = cfg.dir(cfg.paths.model_dir);
  io::write_checkpoint(m, dir / "init.bin");
  const RegionCounts counts = count_by_region(m.cloud);
  io::write_json(json{{"config_hash", cfg.hash()},
                      {"dataset_hash", ds.hash},
                      {"primitives", counts.total()},
                      {"torso", counts.torso},
                      {"face", counts.face},
                      {"hand", counts.hand},
                      {"checkpoint", "init.bin"},
                      {"checkpoint_hash", io::file_hash(dir / "init.bin")}},
                 dir / "init_manifest.json");
  return counts;
}

TrainResult run_train(const ProjectConfig& cfg) {
  cfg.validate();
  const LoadedDataset ds = load_dataset(cfg, true);
  const fs::path dir = cfg.dir(cfg.paths.model_dir);
  AvatarModel<double> m = load_model<double>(cfg, ds, dir / "init.bin");
  m.switches = cfg.switches;
  m.optimize_joints = cfg.train.optimize_joints;
  const TrainResult r = cfg.use_double ? train_impl<double>(cfg, ds, m, &dir)
                                       : train_impl<float>(cfg, ds, m, &dir);
  io::write_checkpoint(m, dir / "model.bin");
  io::write_loss_csv(r.curve, dir / "loss.csv");
  io::write_json(json{{"config_hash", cfg.hash()},
                      {"dataset_hash", ds.hash},
                      {"precision", cfg.use_double ? "double" : "float"},
                      {"iterations", cfg.train.iterations},
                      {"diverged", r.diverged},
                      {"last_good_iteration", r.last_good_iteration},
                      {"checkpoint", "model.bin"},
                      {"checkpoint_hash", io::file_hash(dir / "model.bin")}},
                 dir / "manifest.json");
  if (r.diverged)
    fail(ErrorKind::Divergence, "training diverged (" + r.divergence_reason +
                                    "); last good iteration " +
                                    std::to_string(r.last_good_iteration) + " saved");
  return r;
}

std::vector<fs::path> run_render(const ProjectConfig& cfg, int pose, int camera,
                                 const fs::path& checkpoint) {
  cfg.validate();
  const LoadedDataset ds = load_dataset(cfg, false);
  const int np = static_cast<int>(ds.poses.size()), nc = static_cast<int>(ds.cameras.size());
  require(pose >= -1 && pose < np, ErrorKind::Validation, "pose index out of range");
  require(camera >= -1 && camera < nc, ErrorKind::Validation, "camera index out of range");
  const AvatarModel<double> md = load_model<double>(cfg, ds, default_checkpoint(cfg, checkpoint));
  const AvatarModel<float> mf = md.cast<float>();
  const fs::path dir = cfg.dir(cfg.paths.render_dir);
  std::vector<fs::path> written;
  for (int pi = 0; pi < np; ++pi) {
    if (pose >= 0 && pi != pose) continue;
    for (int ci = 0; ci < nc; ++ci) {
      if (camera >= 0 && ci != camera) continue;
      const FrameInput f = frame_for(ds, pi, ci);
      const Image<float> img = cfg.use_double
                                   ? render_avatar<double>(md, f, cfg.render).cast<float>()
                                   : render_avatar<float>(mf, f, cfg.render);
      const fs::path base = dir / frame_name(pi, ci);
      io::write_float_image(img, base.string() + ".gafi");
      io::write_png(img, base.string() + ".png");
      written.push_back(base.string() + ".png");
    }
  }
  return written;
}

std::vector<EvalRow> run_eval(const ProjectConfig& cfg, const std::optional<fs::path>& images,
                              const fs::path& checkpoint) {
  cfg.validate();
  const LoadedDataset ds = load_dataset(cfg, true);
  std::vector<EvalRow> rows;
  if (images) {
    int k = 0;
    for (int pi = 0; pi < static_cast<int>(ds.poses.size()); ++pi)
      for (int ci = ds.train_camera_count; ci < static_cast<int>(ds.cameras.size()); ++ci, ++k) {
        const fs::path ip = *images / (frame_name(pi, ci) + ".gafi");
        if (!fs::exists(ip)) fail(ErrorKind::Io, "missing image " + ip.string());
        const Image<float> img = io::read_float_image(ip);
        const Image<float>& target = ds.frames.test[k].target;
        require(img.same_shape(target), ErrorKind::Shape, ip.string() + " has the wrong size");
        rows.push_back({k, psnr<float>(img, target), ssim<float>(img, target, cfg.train.loss)});
      }
  } else {
    const AvatarModel<double> md = load_model<double>(cfg, ds, default_checkpoint(cfg, checkpoint));
    rows = cfg.use_double ? eval_model<double>(cfg, ds, md) : eval_model<float>(cfg, ds, md);
  }
  io::write_eval_csv(rows, cfg.dir(cfg.paths.eval_dir) / "eval.csv");
  return rows;
}

std::vector<std::pair<std::string, FieldSwitches>> ablation_variants(const FieldSwitches& base) {
  std::vector<std::pair<std::string, FieldSwitches>> v;
  v.emplace_back("full", base);
  auto off = [&](const char* name, bool FieldSwitches::*sw) {
    FieldSwitches s = base;
    s.*sw = false;
    v.emplace_back(name, s);
  };
  off("w/o hash-SH", &FieldSwitches::hash_sh);
  off("w/o hash-vd", &FieldSwitches::hash_vd);
  off("w/o depth", &FieldSwitches::depth);
  off("w/o normals", &FieldSwitches::normals);
  off("w/o multiscale", &FieldSwitches::multiscale);
  return v;
}

AblationResult run_ablate(const ProjectConfig& cfg) {
  cfg.validate();
  const LoadedDataset ds = load_dataset(cfg, true);
  const AvatarModel<double> init = build_model(ds.mesh, ds.rig, cfg.model_spec(), ds.priors);
  AblationResult res;
  for (const auto& [name, sw] : ablation_variants(cfg.switches)) {
    AvatarModel<double> m = init;
    m.switches = sw;
    m.optimize_joints = cfg.train.optimize_joints;
    const TrainResult r = cfg.use_double ? train_impl<double>(cfg, ds, m, nullptr)
                                         : train_impl<float>(cfg, ds, m, nullptr);
    if (r.diverged) fail(ErrorKind::Divergence, name + " run diverged: " + r.divergence_reason);
    const auto ev = cfg.use_double ? eval_model<double>(cfg, ds, m) : eval_model<float>(cfg, ds, m);
    AblationRow row{name, sw, 0.0, 0.0, ds.hash};
    for (const auto& e : ev) {
      row.psnr += e.psnr / double(ev.size());
      row.ssim += e.ssim / double(ev.size());
    }
    res.rows.push_back(row);
  }
  res.full_is_best = true;
  for (size_t i = 1; i < res.rows.size(); ++i)
    if (res.rows[i].psnr > res.rows[0].psnr) res.full_is_best = false;

  std::string csv = "variant,psnr,ssim,dataset_hash\n";
  json rows = json::array();
  for (const auto& r : res.rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%s\n", r.name.c_str(), r.psnr, r.ssim,
                  r.dataset_hash.c_str());
    csv += buf;
    rows.push_back(json{{"variant", r.name},
                        {"switches", switches_json(r.switches)},
                        {"psnr", r.psnr},
                        {"ssim", r.ssim},
                        {"dataset_hash", r.dataset_hash}});
  }
  const fs::path out = cfg.dir(cfg.paths.eval_dir);
  io::write_text(csv, out / "ablation.csv");
  io::write_json(json{{"config_hash", cfg.hash()}, {"rows", rows}, {"full_is_best", res.full_is_best}},
                 out / "ablation.json");
  return res;
}

}  // namespace gavatar
