#include "gavatar/camera.hpp"

#include <cmath>
#include <numbers>

namespace gavatar {

void Camera::validate() const {
  require(width > 0 && height > 0, ErrorKind::InvalidParameter, "camera image size must be > 0");
  require(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0,
          ErrorKind::InvalidParameter, "camera focal lengths must be finite and > 0");
  require(world_to_camera.allFinite(), ErrorKind::InvalidParameter, "camera pose not finite");
  const Mat3d r = rotation();
  require((r * r.transpose() - Mat3d::Identity()).norm() < 1e-6 && r.determinant() > 0.0,
          ErrorKind::InvalidParameter, "camera rotation is not a rotation");
  require(near_plane >= 0.0, ErrorKind::InvalidParameter, "near plane must be >= 0");
}

namespace {
Mat4d look_at_matrix(const Vec3d& eye, const Vec3d& target, const Vec3d& up) {
  const Vec3d z = (target - eye).normalized();
  Vec3d x = z.cross(up);
  require(x.norm() > 1e-9, ErrorKind::InvalidParameter, "up vector is parallel to view direction");
  x.normalize();
  const Vec3d y = z.cross(x);
  Mat4d m = Mat4d::Identity();
  m.block<1, 3>(0, 0) = x.transpose();
  m.block<1, 3>(1, 0) = y.transpose();
  m.block<1, 3>(2, 0) = z.transpose();
  m.block<3, 1>(0, 3) = -m.topLeftCorner<3, 3>() * eye;
  return m;
}
}  // namespace

Camera Camera::look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up, double fov_y_deg,
                       int width, int height) {
  require(fov_y_deg > 0.0 && fov_y_deg < 180.0, ErrorKind::InvalidParameter,
          "field of view must be in (0, 180)");
  Camera c;
  c.world_to_camera = look_at_matrix(eye, target, up);
  c.width = width;
  c.height = height;
  c.fy = 0.5 * height / std::tan(0.5 * fov_y_deg * std::numbers::pi / 180.0);
  c.fx = c.fy;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.validate();
  return c;
}

Camera Camera::ortho_look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up,
                             double extent_y, int width, int height) {
  require(extent_y > 0.0, ErrorKind::InvalidParameter, "orthographic extent must be > 0");
  Camera c;
  c.world_to_camera = look_at_matrix(eye, target, up);
  c.model = ProjectionModel::Orthographic;
  c.width = width;
  c.height = height;
  c.fy = height / extent_y;
  c.fx = c.fy;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.near_plane = 0.0;
  c.validate();
  return c;
}

}  // namespace gavatar
