#pragma once

#include "gavatar/types.hpp"

namespace gavatar {

enum class ProjectionModel { Perspective, Orthographic };

/// Pinhole or orthographic camera. Camera space is x right, y down, z
/// forward. Perspective pixels are u = fx x/z + cx, orthographic ones
/// u = fx x + cx (fx in pixels per metre). Pixel (i, j) has its centre at
/// (i + 0.5, j + 0.5).
struct Camera {
  Mat4d world_to_camera = Mat4d::Identity();
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  ProjectionModel model = ProjectionModel::Perspective;
  double near_plane = 0.01;

  Mat3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Vec3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  Vec3d center() const { return -rotation().transpose() * translation(); }
  Vec3d forward() const { return rotation().row(2).transpose(); }

  void validate() const;

  static Camera look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                        double fov_y_deg, int width, int height);
  /// Orthographic view of a window `extent_y` metres tall.
  static Camera ortho_look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                              double extent_y, int width, int height);
};

}  // namespace gavatar
