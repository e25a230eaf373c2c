#pragma once

#include "gavatar/avatar.hpp"
#include "gavatar/mesh.hpp"
#include "gavatar/priors.hpp"
#include "gavatar/rig.hpp"
#include "gavatar/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gavatar::io {

namespace fs = std::filesystem;
using nlohmann::json;

// Text formats.
json rig_to_json(const Rig& rig);
Rig rig_from_json(const json& j);
json poses_to_json(const std::vector<PoseFrame>& poses);
std::vector<PoseFrame> poses_from_json(const json& j);
json camera_to_json(const Camera& cam);
Camera camera_from_json(const json& j);

/// Mesh geometry as OBJ plus a JSON sidecar with weights and labels.
void write_mesh(const CanonicalMesh& mesh, const fs::path& obj, const fs::path& sidecar);
CanonicalMesh read_mesh(const fs::path& obj, const fs::path& sidecar);

void write_json(const json& j, const fs::path& path);
json read_json(const fs::path& path);
void write_text(const std::string& s, const fs::path& path);
std::string read_text(const fs::path& path);

// Binary formats (little-endian).
void write_priors(const PriorPack& pack, const fs::path& path);
PriorPack read_priors(const fs::path& path);

/// "GAFI" text header followed by planar float32 data.
void write_float_image(const Image<float>& img, const fs::path& path);
Image<float> read_float_image(const fs::path& path);

/// 8-bit RGB PNG with out = clamp(v, 0, 1)^(1 / gamma).
void write_png(const Image<float>& img, const fs::path& path, double gamma = 2.2);

/// Field ("GAHF"), cloud, joints and switches in one binary file.
void write_checkpoint(const AvatarModel<double>& model, const fs::path& path);
/// Priors are not part of the checkpoint; the caller attaches them.
AvatarModel<double> read_checkpoint(const fs::path& path, const Rig& rig);

void write_loss_csv(const std::vector<LossRecord>& curve, const fs::path& path);
void write_eval_csv(const std::vector<EvalRow>& rows, const fs::path& path);

/// 64-bit FNV-1a of a byte string, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_hash(const fs::path& path);

}  // namespace gavatar::io
