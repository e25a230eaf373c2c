#include "gavatar/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace gavatar::io {

namespace {

json vec3_json(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::Validation, "expected a 3-vector");
  return Vec3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

std::ofstream open_out(const fs::path& p, bool binary) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
  if (!f) fail(ErrorKind::Io, "cannot open " + p.string() + " for writing");
  return f;
}

std::ifstream open_in(const fs::path& p, bool binary) {
  std::ifstream f(p, binary ? std::ios::binary : std::ios::in);
  if (!f) fail(ErrorKind::Io, "cannot open " + p.string());
  return f;
}

class Writer {
 public:
  explicit Writer(std::ostream& o) : o_(o) {}
  template <typename T> void put(T v) { o_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  void bytes(const void* p, size_t n) { o_.write(static_cast<const char*>(p), std::streamsize(n)); }
  void magic(const char* m) { o_.write(m, 4); }
  template <typename S> void f64_array(const S* p, size_t n) {
    for (size_t i = 0; i < n; ++i) put<double>(static_cast<double>(p[i]));
  }

 private:
  std::ostream& o_;
};

class Reader {
 public:
  Reader(std::istream& i, std::string name) : i_(i), name_(std::move(name)) {}
  template <typename T> T get() {
    T v;
    i_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!i_) fail(ErrorKind::Io, name_ + ": truncated file");
    return v;
  }
  void bytes(void* p, size_t n) {
    i_.read(static_cast<char*>(p), std::streamsize(n));
    if (!i_) fail(ErrorKind::Io, name_ + ": truncated file");
  }
  void expect(const char* m) {
    char b[4];
    bytes(b, 4);
    if (std::memcmp(b, m, 4) != 0)
      fail(ErrorKind::Io, name_ + ": bad magic, expected " + std::string(m, 4));
  }
  template <typename S> void f64_array(S* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = static_cast<S>(get<double>());
  }
  std::int32_t count(std::int64_t max = (1ll << 30)) {
    const auto v = get<std::int32_t>();
    if (v < 0 || v > max) fail(ErrorKind::Io, name_ + ": implausible count " + std::to_string(v));
    return v;
  }

 private:
  std::istream& i_;
  std::string name_;
};

constexpr std::uint32_t kVersion = 1;

void put_band(Writer& w, const HashBandConfig& b) {
  w.put<std::int32_t>(b.levels);
  w.put<std::int32_t>(b.base_resolution);
  w.put<double>(b.growth);
  w.put<std::int32_t>(b.log2_table_size);
  w.put<std::int32_t>(b.feature_dim);
}

HashBandConfig get_band(Reader& r) {
  HashBandConfig b;
  b.levels = r.get<std::int32_t>();
  b.base_resolution = r.get<std::int32_t>();
  b.growth = r.get<double>();
  b.log2_table_size = r.get<std::int32_t>();
  b.feature_dim = r.get<std::int32_t>();
  b.validate();
  return b;
}

void put_dims(Writer& w, const std::vector<int>& d) {
  w.put<std::int32_t>(static_cast<std::int32_t>(d.size()));
  for (int v : d) w.put<std::int32_t>(v);
}

std::vector<int> get_dims(Reader& r) {
  std::vector<int> d(r.count(64));
  for (auto& v : d) v = r.count();
  return d;
}

}  // namespace

json rig_to_json(const Rig& rig) {
  json pos = json::array();
  for (const auto& p : rig.rest_positions()) pos.push_back(vec3_json(p));
  return json{{"n_b", rig.joint_count()},
              {"parents", std::vector<int>(rig.parents().begin(), rig.parents().end())},
              {"rest_positions", pos},
              {"euler_order", Rig::euler_order()},
              {"names", std::vector<std::string>(rig.names().begin(), rig.names().end())}};
}

Rig rig_from_json(const json& j) {
  try {
    const std::string order = j.at("euler_order").get<std::string>();
    require(order == Rig::euler_order(), ErrorKind::Validation,
            "unsupported Euler order " + order + ", only XYZ is supported");
    std::vector<Vec3d> pos;
    for (const auto& p : j.at("rest_positions")) pos.push_back(vec3_from(p));
    Rig rig(j.at("parents").get<std::vector<int>>(), pos,
            j.value("names", std::vector<std::string>{}));
    require(j.at("n_b").get<int>() == rig.joint_count(), ErrorKind::Validation,
            "n_b does not match the parent list");
    return rig;
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("rig: ") + e.what());
  }
}

json poses_to_json(const std::vector<PoseFrame>& poses) {
  json arr = json::array();
  for (const auto& p : poses) {
    json e = json::array();
    for (const auto& v : p.euler) e.push_back(vec3_json(v));
    arr.push_back(json{{"t", p.t}, {"euler", e}, {"T", vec3_json(p.translation)}});
  }
  return arr;
}

std::vector<PoseFrame> poses_from_json(const json& j) {
  try {
    std::vector<PoseFrame> out;
    for (const auto& e : j) {
      PoseFrame p;
      p.t = e.at("t").get<double>();
      for (const auto& v : e.at("euler")) p.euler.push_back(vec3_from(v));
      p.translation = vec3_from(e.at("T"));
      out.push_back(std::move(p));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("poses: ") + e.what());
  }
}

json camera_to_json(const Camera& c) {
  std::vector<double> m(16);
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 4; ++k) m[r * 4 + k] = c.world_to_camera(r, k);
  return json{{"world_to_camera", m},
              {"fx", c.fx},
              {"fy", c.fy},
              {"cx", c.cx},
              {"cy", c.cy},
              {"width", c.width},
              {"height", c.height},
              {"model", c.model == ProjectionModel::Perspective ? "perspective" : "orthographic"},
              {"near", c.near_plane}};
}

Camera camera_from_json(const json& j) {
  try {
    Camera c;
    const auto m = j.at("world_to_camera").get<std::vector<double>>();
    require(m.size() == 16, ErrorKind::Validation, "camera matrix needs 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) c.world_to_camera(r, k) = m[r * 4 + k];
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const std::string model = j.at("model").get<std::string>();
    require(model == "perspective" || model == "orthographic", ErrorKind::Validation,
            "unknown camera model " + model);
    c.model = model == "perspective" ? ProjectionModel::Perspective : ProjectionModel::Orthographic;
    c.near_plane = j.at("near").get<double>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("camera: ") + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  auto f = open_out(path, false);
  f << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  auto f = open_in(path, false);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, path.string() + ": " + e.what());
  }
}

void write_text(const std::string& s, const fs::path& path) {
  auto f = open_out(path, false);
  f << s;
}

std::string read_text(const fs::path& path) {
  auto f = open_in(path, false);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_mesh(const CanonicalMesh& mesh, const fs::path& obj, const fs::path& sidecar) {
  mesh.validate();
  std::ostringstream o;
  o << std::setprecision(17);
  for (const auto& v : mesh.vertices) o << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : mesh.faces) o << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  write_text(o.str(), obj);
  json w = json::array();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    std::vector<double> row(mesh.joint_count());
    for (int k = 0; k < mesh.joint_count(); ++k) row[k] = mesh.skin_weights(v, k);
    w.push_back(row);
  }
  json labels = json::array();
  for (auto l : mesh.labels) labels.push_back(std::string(to_string(l)));
  write_json(json{{"weights", w}, {"labels", labels}}, sidecar);
}

CanonicalMesh read_mesh(const fs::path& obj, const fs::path& sidecar) {
  CanonicalMesh m;
  std::istringstream in(read_text(obj));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3d v;
      ls >> v.x() >> v.y() >> v.z();
      if (!ls) fail(ErrorKind::Validation, obj.string() + ":" + std::to_string(lineno) + ": bad vertex");
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ls >> tok;
        if (tok.empty())
          fail(ErrorKind::Validation, obj.string() + ":" + std::to_string(lineno) + ": faces must be triangles");
        f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      std::string extra;
      if (ls >> extra)
        fail(ErrorKind::Validation, obj.string() + ":" + std::to_string(lineno) + ": faces must be triangles");
      m.faces.push_back(f);
    }
  }
  const json j = read_json(sidecar);
  try {
    const auto& w = j.at("weights");
    require(w.size() == m.vertices.size(), ErrorKind::Validation,
            "sidecar has " + std::to_string(w.size()) + " weight rows for " +
                std::to_string(m.vertices.size()) + " vertices");
    const int nb = w.empty() ? 0 : static_cast<int>(w[0].size());
    m.skin_weights = MatX<double>::Zero(static_cast<Eigen::Index>(w.size()), nb);
    for (size_t v = 0; v < w.size(); ++v) {
      require(static_cast<int>(w[v].size()) == nb, ErrorKind::Validation, "ragged weight rows");
      for (int k = 0; k < nb; ++k) m.skin_weights(static_cast<Eigen::Index>(v), k) = w[v][k].get<double>();
    }
    for (const auto& l : j.at("labels")) m.labels.push_back(region_from_string(l.get<std::string>()));
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, sidecar.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_priors(const PriorPack& pack, const fs::path& path) {
  auto f = open_out(path, true);
  Writer w(f);
  w.magic("GAPP");
  w.put<std::uint32_t>(kVersion);
  auto put_map = [&](const PriorMap& m) {
    const auto& fr = m.frame;
    for (const Vec3d* v : {&fr.origin, &fr.right, &fr.up, &fr.forward})
      for (int k = 0; k < 3; ++k) w.put<double>((*v)[k]);
    w.put<double>(fr.pixel_size);
    w.put<std::int32_t>(fr.width);
    w.put<std::int32_t>(fr.height);
    w.put<std::int32_t>(m.channels);
    w.bytes(m.data.data(), m.data.size() * sizeof(float));
    w.bytes(m.mask.data(), m.mask.size());
  };
  for (const auto& m : pack.depth) put_map(m);
  for (const auto& m : pack.normal) put_map(m);
}

PriorPack read_priors(const fs::path& path) {
  auto f = open_in(path, true);
  Reader r(f, path.string());
  r.expect("GAPP");
  if (r.get<std::uint32_t>() != kVersion) fail(ErrorKind::Io, path.string() + ": unsupported version");
  auto get_map = [&](PriorMap& m) {
    OrthoFrame fr;
    for (Vec3d* v : {&fr.origin, &fr.right, &fr.up, &fr.forward})
      for (int k = 0; k < 3; ++k) (*v)[k] = r.get<double>();
    fr.pixel_size = r.get<double>();
    fr.width = r.count(1 << 15);
    fr.height = r.count(1 << 15);
    const int ch = r.count(16);
    m.allocate(fr, ch);
    r.bytes(m.data.data(), m.data.size() * sizeof(float));
    r.bytes(m.mask.data(), m.mask.size());
  };
  PriorPack p;
  for (auto& m : p.depth) get_map(m);
  for (auto& m : p.normal) get_map(m);
  p.validate();
  return p;
}

void write_float_image(const Image<float>& img, const fs::path& path) {
  auto f = open_out(path, true);
  f << "GAFI 1\n" << img.width << " " << img.height << " 3\n";
  Writer w(f);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) w.put<float>(img.at(x, y, c));
}

Image<float> read_float_image(const fs::path& path) {
  auto f = open_in(path, true);
  std::string magic;
  int version = 0, w = 0, h = 0, c = 0;
  f >> magic >> version >> w >> h >> c;
  if (!f || magic != "GAFI" || version != 1 || c != 3 || w < 1 || h < 1)
    fail(ErrorKind::Io, path.string() + ": not a GAFI v1 RGB image");
  f.get();  // newline after the header
  Image<float> img(w, h);
  Reader r(f, path.string());
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y, ch) = r.get<float>();
  return img;
}

void write_png(const Image<float>& img, const fs::path& path, double gamma) {
  require(gamma > 0.0, ErrorKind::InvalidParameter, "gamma must be > 0");
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorKind::Io, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(img.at(x, y, c)), 0.0, 1.0);
        row[x * 3 + c] = static_cast<png_byte>(std::lround(255.0 * std::pow(v, 1.0 / gamma)));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_checkpoint(const AvatarModel<double>& model, const fs::path& path) {
  auto f = open_out(path, true);
  Writer w(f);
  const auto& field = model.field;
  const auto& cfg = field.config();
  w.magic("GAHF");
  w.put<std::uint32_t>(kVersion);
  put_band(w, cfg.low);
  put_band(w, cfg.high);
  w.put<std::int32_t>(cfg.sh_degree);
  w.put<std::int32_t>(cfg.hidden_width);
  w.put<std::int32_t>(cfg.hidden_layers);
  w.put<std::int32_t>(cfg.ao_hidden_width);
  w.put<std::int32_t>(cfg.ao_hidden_layers);
  w.put<std::int32_t>(cfg.time_frequencies);
  w.put<double>(cfg.max_offset);
  w.put<std::uint8_t>(cfg.time_in_decoder ? 1 : 0);
  w.put<double>(cfg.ao_init_bias);
  w.put<double>(cfg.table_init_range);
  for (int k = 0; k < 3; ++k) w.put<double>(field.box().lo[k]);
  for (int k = 0; k < 3; ++k) w.put<double>(field.box().hi[k]);
  put_dims(w, field.decoder.dims());
  put_dims(w, field.ao_decoder.dims());
  for (const VecX<double>* p : {&field.low.params(), &field.high.params(),
                                &field.decoder.params(), &field.ao_decoder.params()})
    w.f64_array(p->data(), static_cast<size_t>(p->size()));

  const auto& c = model.cloud;
  w.magic("GACL");
  w.put<std::int32_t>(c.size());
  w.put<std::int32_t>(c.joint_count());
  w.put<std::int32_t>(c.sh_degree);
  w.f64_array(c.position.data(), c.position.size());
  w.f64_array(c.rotation.data(), c.rotation.size());
  w.f64_array(c.scale_raw.data(), c.scale_raw.size());
  w.f64_array(c.opacity_logit.data(), c.opacity_logit.size());
  w.f64_array(c.sh.data(), c.sh.size());
  w.f64_array(c.weights.data(), c.weights.size());
  w.f64_array(c.tau.data(), c.tau.size());
  for (int v : c.source_vertex) w.put<std::int32_t>(v);
  for (Region r : c.region) w.put<std::uint8_t>(static_cast<std::uint8_t>(r));

  w.magic("GAJT");
  w.put<std::int32_t>(static_cast<std::int32_t>(model.joints.size()));
  for (const auto& j : model.joints) w.f64_array(j.data(), 3);
  const auto& s = model.switches;
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.hash_sh | s.hash_vd << 1 | s.depth << 2 |
                                                s.normals << 3 | s.multiscale << 4 | s.ao << 5));
  w.put<std::uint8_t>(model.optimize_joints ? 1 : 0);
}

AvatarModel<double> read_checkpoint(const fs::path& path, const Rig& rig) {
  auto f = open_in(path, true);
  Reader r(f, path.string());
  r.expect("GAHF");
  if (r.get<std::uint32_t>() != kVersion) fail(ErrorKind::Io, path.string() + ": unsupported version");
  FieldConfig cfg;
  cfg.low = get_band(r);
  cfg.high = get_band(r);
  cfg.sh_degree = r.get<std::int32_t>();
  cfg.hidden_width = r.get<std::int32_t>();
  cfg.hidden_layers = r.get<std::int32_t>();
  cfg.ao_hidden_width = r.get<std::int32_t>();
  cfg.ao_hidden_layers = r.get<std::int32_t>();
  cfg.time_frequencies = r.get<std::int32_t>();
  cfg.max_offset = r.get<double>();
  cfg.time_in_decoder = r.get<std::uint8_t>() != 0;
  cfg.ao_init_bias = r.get<double>();
  cfg.table_init_range = r.get<double>();
  cfg.validate();
  BoundingBox box;
  for (int k = 0; k < 3; ++k) box.lo[k] = r.get<double>();
  for (int k = 0; k < 3; ++k) box.hi[k] = r.get<double>();
  const auto dec_dims = get_dims(r);
  const auto ao_dims = get_dims(r);

  AvatarModel<double> m;
  m.rig = rig;
  auto& field = m.field;
  field.low = HashGridBand<double>(cfg.low, box);
  field.high = HashGridBand<double>(cfg.high, box);
  field.decoder = Mlp<double>(dec_dims);
  field.ao_decoder = Mlp<double>(ao_dims);
  field.set_config(cfg, box);
  require(field.decoder.input_dim() == cfg.decoder_input_dim() &&
              field.decoder.output_dim() == cfg.decoder_output_dim() &&
              field.ao_decoder.input_dim() == cfg.ao_input_dim(),
          ErrorKind::Io, path.string() + ": decoder dims do not match the band config");
  for (VecX<double>* p : {&field.low.params(), &field.high.params(), &field.decoder.params(),
                          &field.ao_decoder.params()})
    r.f64_array(p->data(), static_cast<size_t>(p->size()));

  r.expect("GACL");
  const int n = r.count();
  const int nb = r.count(4096);
  const int deg = r.get<std::int32_t>();
  require(deg == cfg.sh_degree, ErrorKind::Io, path.string() + ": SH degree mismatch");
  require(nb == rig.joint_count(), ErrorKind::Validation,
          "checkpoint has " + std::to_string(nb) + " joints, rig has " +
              std::to_string(rig.joint_count()));
  auto& c = m.cloud;
  c.resize(n, nb, deg);
  r.f64_array(c.position.data(), c.position.size());
  r.f64_array(c.rotation.data(), c.rotation.size());
  r.f64_array(c.scale_raw.data(), c.scale_raw.size());
  r.f64_array(c.opacity_logit.data(), c.opacity_logit.size());
  r.f64_array(c.sh.data(), c.sh.size());
  r.f64_array(c.weights.data(), c.weights.size());
  r.f64_array(c.tau.data(), c.tau.size());
  for (auto& v : c.source_vertex) v = r.get<std::int32_t>();
  for (auto& g : c.region) {
    const auto b = r.get<std::uint8_t>();
    require(b <= 2, ErrorKind::Io, path.string() + ": bad region label");
    g = static_cast<Region>(b);
  }

  r.expect("GAJT");
  const int nj = r.count(4096);
  require(nj == rig.joint_count(), ErrorKind::Validation, "joint count mismatch");
  m.joints.resize(nj);
  for (auto& j : m.joints) r.f64_array(j.data(), 3);
  const auto bits = r.get<std::uint8_t>();
  m.switches = FieldSwitches{bool(bits & 1), bool(bits & 2), bool(bits & 4),
                             bool(bits & 8), bool(bits & 16), bool(bits & 32)};
  m.optimize_joints = r.get<std::uint8_t>() != 0;
  return m;
}

void write_loss_csv(const std::vector<LossRecord>& curve, const fs::path& path) {
  std::ostringstream o;
  o << std::setprecision(9) << "iteration,loss,psnr,ao_frozen\n";
  for (const auto& c : curve)
    o << c.iteration << "," << c.loss << "," << c.psnr << "," << (c.ao_frozen ? 1 : 0) << "\n";
  write_text(o.str(), path);
}

void write_eval_csv(const std::vector<EvalRow>& rows, const fs::path& path) {
  std::ostringstream o;
  o << std::setprecision(9) << "frame,psnr,ssim\n";
  for (const auto& r : rows) o << r.index << "," << r.psnr << "," << r.ssim << "\n";
  write_text(o.str(), path);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

std::string file_hash(const fs::path& path) {
  auto f = open_in(path, true);
  std::stringstream ss;
  ss << f.rdbuf();
  return fnv1a_hex(ss.str());
}

}  // namespace gavatar::io
