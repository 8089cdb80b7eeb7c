// SPDX-License-Identifier: Apache-2.0
//
// Rotation and rigid-transform algebra. Rotations are stored as unit
// quaternions; rotation matrices only appear inside exp/log and the
// geodesic distance. Tangent vectors are ordered (translation, rotation).
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hlik {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec7 = Eigen::Matrix<double, 7, 1>;

/// Unit quaternion with the hemisphere fixed to w >= 0.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  /// Normalizes the input and flips it into the w >= 0 hemisphere.
  UnitQuaternion(double w, double x, double y, double z);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);
  /// Rotation vector (axis * angle) to quaternion.
  static UnitQuaternion from_rotation_vector(const Vec3& omega);
  static UnitQuaternion from_matrix(const Mat3& r);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }
  Vec3 vec() const { return {x_, y_, z_}; }

  Mat3 matrix() const;
  UnitQuaternion inverse() const { return {w_, -x_, -y_, -z_}; }
  Vec3 rotate(const Vec3& v) const;
  /// Rotation angle in [0, pi].
  double angle() const;

  friend UnitQuaternion operator*(const UnitQuaternion& a,
                                  const UnitQuaternion& b);

 private:
  double w_ = 1.0, x_ = 0.0, y_ = 0.0, z_ = 0.0;
};

struct Twist {
  Vec3 v = Vec3::Zero();      // translation part
  Vec3 omega = Vec3::Zero();  // rotation part

  Vec6 vector() const;
  static Twist from_vector(const Vec6& xi);
};

/// Rigid transform x -> R x + t.
struct Pose {
  UnitQuaternion rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {UnitQuaternion{}, t}; }
  static Pose from_matrix(const Mat4& m);

  Mat4 matrix() const;
  Vec3 transform(const Vec3& p) const { return rotation.rotate(p) + translation; }
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

Mat3 skew(const Vec3& v);
/// Rodrigues' formula.
Mat3 so3_exp(const Vec3& omega);

/// Matrix logarithm of a rigid transform.
/// Throws AngleNearPi when the rotation angle is within 1e-6 of pi.
Twist log_se3(const Pose& p);
Pose exp_se3(const Twist& xi);

/// Inverse of the SE(3) right Jacobian:
/// log(exp(xi) * exp(d)) ~= xi + right_jacobian_inverse(xi) * d.
Mat6 se3_right_jacobian_inverse(const Twist& xi);

/// Angle of the relative rotation a * b^-1, in [0, pi].
double geodesic_angle(const UnitQuaternion& a, const UnitQuaternion& b);

/// 7D encoding (px, py, pz, qw, qx, qy, qz).
Vec7 to_vector7(const Pose& p);
/// Inverse of to_vector7; the quaternion part is renormalized.
/// Throws ValidationError if it is (numerically) zero.
Pose from_vector7(const Vec7& v);

/// Reflection through the x-z plane (y -> -y), applied to a frame as S T S
/// with S = diag(1, -1, 1). Maps right-arm data to the left arm and back.
Pose mirror_y(const Pose& p);

}  // namespace hlik
