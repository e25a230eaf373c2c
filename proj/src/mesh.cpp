#include "gavatar/mesh.hpp"

#include <algorithm>

namespace gavatar {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Torso: return "torso";
    case Region::Face: return "face";
    case Region::Hand: return "hand";
  }
  return "torso";
}

Region region_from_string(std::string_view s) {
  if (s == "torso") return Region::Torso;
  if (s == "face") return Region::Face;
  if (s == "hand") return Region::Hand;
  fail(ErrorKind::Validation, "unknown region label '" + std::string(s) + "'");
}

BoundingBox CanonicalMesh::bounds() const {
  require(!vertices.empty(), ErrorKind::Validation, "mesh has no vertices");
  BoundingBox b{vertices.front(), vertices.front()};
  for (const auto& v : vertices) {
    b.lo = b.lo.cwiseMin(v);
    b.hi = b.hi.cwiseMax(v);
  }
  return b;
}

void CanonicalMesh::validate() const {
  const int n = vertex_count();
  require(n >= 1, ErrorKind::Validation, "mesh has no vertices");
  for (const auto& v : vertices) require(v.allFinite(), ErrorKind::Validation, "vertex not finite");
  for (const auto& f : faces)
    for (int idx : f)
      require(idx >= 0 && idx < n, ErrorKind::Validation,
              "triangle index " + std::to_string(idx) + " out of range");
  require(skin_weights.rows() == n, ErrorKind::Validation,
          "skin weight rows do not match vertex count");
  require(skin_weights.cols() >= 1, ErrorKind::Validation, "skin weights need >= 1 joint");
  require(static_cast<int>(labels.size()) == n, ErrorKind::Validation,
          "label count does not match vertex count");
  for (int v = 0; v < n; ++v) {
    const auto row = skin_weights.row(v);
    require((row.array() >= 0.0).all() && row.allFinite(), ErrorKind::Validation,
            "skin weights must be finite and non-negative");
    require(std::abs(row.sum() - 1.0) <= 1e-6, ErrorKind::Validation,
            "skin weights of vertex " + std::to_string(v) + " do not sum to 1");
  }
}

std::vector<std::array<int, 2>> CanonicalMesh::edges() const {
  std::vector<std::array<int, 2>> e;
  e.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      e.push_back({a, b});
    }
  }
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

}  // namespace gavatar
