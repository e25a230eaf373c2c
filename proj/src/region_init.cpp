#include "gavatar/region_init.hpp"

#include "gavatar/rng.hpp"

#include <cmath>
#include <limits>
#include <queue>

namespace gavatar {

void RegionProfile::validate() const {
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::Config, "sigma must be > 0");
  require(base_count >= 0 && max_count >= base_count, ErrorKind::Config,
          "sample counts need K_m >= K_b >= 0");
  require(sh_degree >= 0 && sh_degree <= kMaxShDegree, ErrorKind::Config,
          "SH degree must be in [0, 3]");
}

std::vector<double> geodesic_distance(const CanonicalMesh& mesh) {
  mesh.validate();
  const int n = mesh.vertex_count();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& e : mesh.edges()) {
    const double len = (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm();
    adj[e[0]].emplace_back(e[1], len);
    adj[e[1]].emplace_back(e[0], len);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (int v = 0; v < n; ++v) {
    if (mesh.is_high_detail(v)) {
      dist[v] = 0.0;
      queue.emplace(0.0, v);
    }
  }
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (const auto& [u, len] : adj[v]) {
      const double nd = d + len;
      if (nd < dist[u]) {
        dist[u] = nd;
        queue.emplace(nd, u);
      }
    }
  }
  return dist;
}

double region_weight(double distance, double sigma) {
  if (!std::isfinite(distance)) return 0.0;
  return std::exp(-(distance * distance) / (2.0 * sigma * sigma));
}

int sample_count(double tau, const RegionProfile& profile) {
  const double k = profile.base_count + (profile.max_count - profile.base_count) * tau;
  return static_cast<int>(std::floor(k + 0.5));
}

GeodesicField compute_geodesic_field(const CanonicalMesh& mesh, const RegionProfile& profile) {
  profile.validate();
  GeodesicField field;
  field.distance = geodesic_distance(mesh);
  field.tau.resize(field.distance.size());
  for (size_t v = 0; v < field.distance.size(); ++v)
    field.tau[v] = region_weight(field.distance[v], profile.sigma);
  return field;
}

std::vector<double> mean_incident_edge_length(const CanonicalMesh& mesh) {
  const int n = mesh.vertex_count();
  std::vector<double> sum(n, 0.0);
  std::vector<int> count(n, 0);
  double total = 0.0;
  const auto edges = mesh.edges();
  for (const auto& e : edges) {
    const double len = (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm();
    total += len;
    for (int v : e) {
      sum[v] += len;
      ++count[v];
    }
  }
  const double fallback = edges.empty() ? 0.01 : total / static_cast<double>(edges.size());
  std::vector<double> mean(n);
  for (int v = 0; v < n; ++v) mean[v] = count[v] > 0 ? sum[v] / count[v] : fallback;
  return mean;
}

GaussianCloud<double> initialize_cloud(const CanonicalMesh& mesh, const RegionProfile& profile,
                                       std::optional<int> rig_joints) {
  profile.validate();
  mesh.validate();
  if (rig_joints) {
    require(*rig_joints == mesh.joint_count(), ErrorKind::Shape,
            "mesh skin weights cover " + std::to_string(mesh.joint_count()) +
                " joints, rig has " + std::to_string(*rig_joints));
  }
  const GeodesicField geo = compute_geodesic_field(mesh, profile);
  const std::vector<double> spacing = mean_incident_edge_length(mesh);
  const int nv = mesh.vertex_count();

  std::vector<long> offset(nv + 1, 0);
  for (int v = 0; v < nv; ++v) offset[v + 1] = offset[v] + 1 + sample_count(geo.tau[v], profile);

  GaussianCloud<double> cloud;
  cloud.resize(static_cast<int>(offset[nv]), mesh.joint_count(), profile.sh_degree);

#pragma omp parallel for schedule(static)
  for (int v = 0; v < nv; ++v) {
    Rng rng(stream_seed(profile.seed, static_cast<std::uint64_t>(v)));
    const double radius = profile.neighborhood_radius > 0.0 ? profile.neighborhood_radius
                                                            : spacing[v];
    const double raw_scale = GaussianCloud<double>::scale_to_raw(spacing[v] / 3.0);
    const Vec3d& center = mesh.vertices[v];
    for (long i = offset[v]; i < offset[v + 1]; ++i) {
      Vec3d p = center;
      if (i != offset[v]) {
        Vec3d u;
        do {
          u = Vec3d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        } while (u.squaredNorm() > 1.0);
        p += radius * u;
      }
      cloud.position.row(i) = p.transpose();
      cloud.rotation.row(i) << 1.0, 0.0, 0.0, 0.0;
      cloud.scale_raw.row(i).setConstant(raw_scale);
      cloud.opacity_logit[i] = 0.0;
      cloud.weights.row(i) = mesh.skin_weights.row(v);
      cloud.tau[i] = geo.tau[v];
      cloud.source_vertex[i] = v;
      cloud.region[i] = mesh.labels[v];
    }
  }
  return cloud;
}

RegionCounts count_by_region(const GaussianCloud<double>& cloud) {
  RegionCounts c;
  for (Region r : cloud.region) {
    switch (r) {
      case Region::Torso: ++c.torso; break;
      case Region::Face: ++c.face; break;
      case Region::Hand: ++c.hand; break;
    }
  }
  return c;
}

}  // namespace gavatar
