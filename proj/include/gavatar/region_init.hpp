#pragma once

#include "gavatar/cloud.hpp"
#include "gavatar/mesh.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gavatar {

struct RegionProfile {
  double sigma = 0.05;  // transition band width, metres
  int base_count = 15;  // extra samples per torso vertex
  int max_count = 20;   // extra samples per face/hand vertex
  // Sampling ball radius in metres; <= 0 uses the vertex's mean incident
  // edge length.
  double neighborhood_radius = 0.0;
  std::uint64_t seed = 0;
  int sh_degree = 3;

  void validate() const;
};

/// Per-vertex graph distance to the high-detail set and the soft region
/// weight derived from it.
struct GeodesicField {
  std::vector<double> distance;
  std::vector<double> tau;
};

/// Multi-source Dijkstra over the mesh edge graph with Euclidean edge
/// lengths. Vertices unreachable from any face/hand vertex get +inf.
std::vector<double> geodesic_distance(const CanonicalMesh& mesh);

/// exp(-d^2 / (2 sigma^2)); +inf maps to 0.
double region_weight(double distance, double sigma);

/// round-half-up(K_b + (K_m - K_b) * tau).
int sample_count(double tau, const RegionProfile& profile);

GeodesicField compute_geodesic_field(const CanonicalMesh& mesh, const RegionProfile& profile);

/// Mean length of edges incident to each vertex; isolated vertices get the
/// mesh-wide mean edge length (or 0.01 m for an edgeless mesh).
std::vector<double> mean_incident_edge_length(const CanonicalMesh& mesh);

/// Every vertex emits itself plus K(v) points drawn uniformly from a ball
/// around it; all of them copy the vertex's skinning weights. Each vertex
/// draws from its own RNG stream, so the result does not depend on the
/// thread count.
GaussianCloud<double> initialize_cloud(const CanonicalMesh& mesh, const RegionProfile& profile,
                                       std::optional<int> rig_joints = std::nullopt);

struct RegionCounts {
  long torso = 0;
  long face = 0;
  long hand = 0;
  long total() const { return torso + face + hand; }
};

RegionCounts count_by_region(const GaussianCloud<double>& cloud);

}  // namespace gavatar
