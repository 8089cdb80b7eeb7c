// SPDX-License-Identifier: Apache-2.0
#include "hlik/liegroup.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hlik/errors.hpp"

namespace hlik {
namespace {

// Below this rotation angle the V / V^-1 coefficients use Taylor series.
constexpr double kSmallAngle = 1e-5;
// The Q-block coefficients of the SE(3) Jacobian cancel earlier.
constexpr double kSmallAngleQ = 1e-2;
constexpr double kNearPi = 1e-6;

// Coefficient c in V^-1 = I - Omega/2 + c Omega^2.
double inverse_v_coefficient(double theta) {
  if (theta < kSmallAngle) return 1.0 / 12.0 + theta * theta / 720.0;
  const double half = 0.5 * theta;
  return (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
}

Mat3 inverse_v(const Vec3& omega) {
  const Mat3 w = skew(omega);
  return Mat3::Identity() - 0.5 * w + inverse_v_coefficient(omega.norm()) * w * w;
}

}  // namespace

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
  const double n2 = w * w + x * x + y * y + z * z;
  if (n2 == 0.0 || !std::isfinite(n2)) return;  // degenerate input -> identity
  // Inputs already unit to within rounding are kept bit-for-bit, so that
  // normalization is idempotent (text round trips stay lossless).
  const double n = std::abs(n2 - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon() ? 1.0 : std::sqrt(n2);
  const double s = (w < 0.0 ? -1.0 : 1.0) / n;
  w_ = w * s;
  x_ = x * s;
  y_ = y * s;
  z_ = z * s;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
}

UnitQuaternion UnitQuaternion::from_rotation_vector(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    const double k = 0.5 - t2 / 48.0;
    return {1.0 - t2 / 8.0, omega.x() * k, omega.y() * k, omega.z() * k};
  }
  const double k = std::sin(0.5 * theta) / theta;
  return {std::cos(0.5 * theta), omega.x() * k, omega.y() * k, omega.z() * k};
}

UnitQuaternion UnitQuaternion::from_matrix(const Mat3& r) {
  // Shepperd: branch on the largest diagonal element for stability.
  const double tr = r.trace();
  if (tr > r(0, 0) && tr > r(1, 1) && tr > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    return {0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
            (r(1, 0) - r(0, 1)) / s};
  }
  if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    return {(r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
            (r(0, 2) + r(2, 0)) / s};
  }
  if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    return {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
            (r(1, 2) + r(2, 1)) / s};
  }
  const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
  return {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
          (r(1, 2) + r(2, 1)) / s, 0.25 * s};
}

Mat3 UnitQuaternion::matrix() const {
  const double w = w_, x = x_, y = y_, z = z_;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec3 UnitQuaternion::rotate(const Vec3& v) const {
  const Vec3 q = vec();
  const Vec3 t = 2.0 * q.cross(v);
  return v + w_ * t + q.cross(t);
}

double UnitQuaternion::angle() const {
  return 2.0 * std::atan2(vec().norm(), w_);
}

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.w_ * b.w_ - a.x_ * b.x_ - a.y_ * b.y_ - a.z_ * b.z_,
          a.w_ * b.x_ + a.x_ * b.w_ + a.y_ * b.z_ - a.z_ * b.y_,
          a.w_ * b.y_ - a.x_ * b.z_ + a.y_ * b.w_ + a.z_ * b.x_,
          a.w_ * b.z_ + a.x_ * b.y_ - a.y_ * b.x_ + a.z_ * b.w_};
}

Vec6 Twist::vector() const {
  Vec6 xi;
  xi << v, omega;
  return xi;
}

Twist Twist::from_vector(const Vec6& xi) {
  return {xi.head<3>(), xi.tail<3>()};
}

Pose Pose::from_matrix(const Mat4& m) {
  return {UnitQuaternion::from_matrix(m.topLeftCorner<3, 3>()),
          m.topRightCorner<3, 1>()};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation.rotate(b.translation) + a.translation};
}

Pose inverse(const Pose& p) {
  const UnitQuaternion r = p.rotation.inverse();
  return {r, -r.rotate(p.translation)};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& omega) {
  return UnitQuaternion::from_rotation_vector(omega).matrix();
}

Twist log_se3(const Pose& p) {
  const UnitQuaternion& q = p.rotation;
  const double n = q.vec().norm();
  const double theta = 2.0 * std::atan2(n, q.w());
  if (std::numbers::pi - theta < kNearPi) {
    throw AngleNearPi("rotation angle " + std::to_string(theta) +
                      " is within 1e-6 of pi; logarithm branch is ambiguous");
  }
  // omega = theta * axis, written so that n -> 0 stays finite.
  double scale;
  if (n < 1e-8) {
    scale = 2.0 / q.w() * (1.0 - n * n / (3.0 * q.w() * q.w()));
  } else {
    scale = theta / n;
  }
  Twist xi;
  xi.omega = scale * q.vec();
  xi.v = inverse_v(xi.omega) * p.translation;
  return xi;
}

Pose exp_se3(const Twist& xi) {
  const double theta = xi.omega.norm();
  double a, b;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double s = std::sin(0.5 * theta);
    a = 2.0 * s * s / (theta * theta);
    b = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  const Mat3 w = skew(xi.omega);
  const Mat3 v = Mat3::Identity() + a * w + b * w * w;
  return {UnitQuaternion::from_rotation_vector(xi.omega), v * xi.v};
}

Mat6 se3_right_jacobian_inverse(const Twist& xi) {
  // J_r^-1(xi) = J_l^-1(-xi); J_l^-1 = [Jinv, -Jinv Q Jinv; 0, Jinv].
  const Vec3 rho = -xi.v;
  const Vec3 phi = -xi.omega;
  const double theta = phi.norm();
  const double t2 = theta * theta;

  double c1, c2, c3;
  if (theta < kSmallAngleQ) {
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Mat3 p = skew(phi);
  const Mat3 r = skew(rho);
  const Mat3 pr = p * r;
  const Mat3 rp = r * p;
  const Mat3 prp = pr * p;
  const Mat3 q = 0.5 * r + c1 * (pr + rp + prp) + c2 * (p * pr + rp * p - 3.0 * prp) +
                 c3 * (prp * p + p * prp);

  const Mat3 jinv = inverse_v(phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.topRightCorner<3, 3>() = -jinv * q * jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  return out;
}

double geodesic_angle(const UnitQuaternion& a, const UnitQuaternion& b) {
  const UnitQuaternion d = a * b.inverse();
  return 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
}

Vec7 to_vector7(const Pose& p) {
  Vec7 v;
  v << p.translation, p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z();
  return v;
}

Pose from_vector7(const Vec7& v) {
  if (!v.tail<4>().allFinite() || v.tail<4>().norm() < 1e-12) {
    throw ValidationError("7D pose has a degenerate quaternion part");
  }
  return {UnitQuaternion(v[3], v[4], v[5], v[6]), v.head<3>()};
}

Pose mirror_y(const Pose& p) {
  const UnitQuaternion& q = p.rotation;
  return {UnitQuaternion(q.w(), -q.x(), q.y(), -q.z()),
          Vec3(p.translation.x(), -p.translation.y(), p.translation.z())};
}

}  // namespace hlik
