// SPDX-License-Identifier: Apache-2.0
//
// Shared generators and independent oracles for the unit tests. Oracles here
// deliberately avoid the library's own math paths: rotations go through
// Eigen::Quaterniond / AngleAxisd and homogeneous 4x4 products.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "hlik/chain.hpp"
#include "hlik/ik.hpp"
#include "hlik/liegroup.hpp"
#include "hlik/metrics.hpp"

namespace hlik::testing {

inline std::string data_path(const std::string& name) {
  return std::string(HLIK_DATA_DIR) + "/" + name;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  Vec3 unit_vector() {
    Vec3 v(normal(), normal(), normal());
    return v.normalized();
  }
  Vec3 vec3(double scale) { return {uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)}; }
  UnitQuaternion rotation() {
    return UnitQuaternion(normal(), normal(), normal(), normal());
  }
  Pose pose(double translation_scale = 1.0) { return {rotation(), vec3(translation_scale)}; }
  /// Uniform within the limits intersected with one turn [-pi, pi].
  JointVector config(const KinematicChain& chain, double margin = 0.0) {
    JointVector q(chain.dof());
    for (int i = 0; i < chain.dof(); ++i) {
      const auto& j = chain.joints()[i];
      q[i] = uniform(std::max(j.lower, -std::numbers::pi) + margin,
                     std::min(j.upper, std::numbers::pi) - margin);
    }
    return q;
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

/// Rotation matrix through Eigen's quaternion, independent of UnitQuaternion::matrix.
inline Mat3 oracle_rotation(const UnitQuaternion& q) {
  return Eigen::Quaterniond(q.w(), q.x(), q.y(), q.z()).normalized().toRotationMatrix();
}

inline Mat4 oracle_homogeneous(const Pose& p) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = oracle_rotation(p.rotation);
  m.topRightCorner<3, 1>() = p.translation;
  return m;
}

inline Mat4 oracle_rotation_about(const Vec3& axis, double angle) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return m;
}

/// Truncated series log(M) = sum_k (-1)^(k+1) (M - I)^k / k.
inline Mat4 oracle_matrix_log(const Mat4& m, int terms = 30) {
  const Mat4 x = m - Mat4::Identity();
  Mat4 power = x;
  Mat4 sum = Mat4::Zero();
  for (int k = 1; k <= terms; ++k) {
    sum += ((k % 2) ? 1.0 : -1.0) / k * power;
    power = power * x;
  }
  return sum;
}

/// Geodesic angle via the trace formula on explicit rotation matrices.
inline double oracle_trace_angle(const UnitQuaternion& a, const UnitQuaternion& b) {
  const Mat3 r = oracle_rotation(a) * oracle_rotation(b).transpose();
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

inline double pose_distance(const Pose& a, const Pose& b) {
  return (oracle_homogeneous(a) - oracle_homogeneous(b)).cwiseAbs().maxCoeff();
}


inline StepSnapshot random_snapshot(Rng& rng) {
  StepSnapshot s;
  s.shoulder = rng.vec3(0.5);
  s.elbow = rng.vec3(0.5);
  s.wrist = rng.vec3(0.5);
  s.ee = rng.vec3(0.5);
  s.ee_rotation = rng.rotation();
  return s;
}

// Flat sum of squares over the nine keypoint coordinates.
inline double oracle_keypoint(const StepSnapshot& a, const StepSnapshot& b) {
  const double pa[9] = {a.elbow.x(), a.elbow.y(), a.elbow.z(), a.wrist.x(), a.wrist.y(),
                        a.wrist.z(), a.ee.x(),    a.ee.y(),    a.ee.z()};
  const double pb[9] = {b.elbow.x(), b.elbow.y(), b.elbow.z(), b.wrist.x(), b.wrist.y(),
                        b.wrist.z(), b.ee.x(),    b.ee.y(),    b.ee.z()};
  double s = 0.0;
  for (int i = 0; i < 9; ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return s;
}

inline double oracle_segment_angle(const double* a, const double* b, double alpha) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int i = 0; i < 3; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  double c = dot / (std::sqrt(na) * std::sqrt(nb) + alpha);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return std::acos(c);
}

inline double oracle_line_angle(const StepSnapshot& r, const StepSnapshot& s, double alpha) {
  const Vec3* pts_r[4] = {&r.shoulder, &r.elbow, &r.wrist, &r.ee};
  const Vec3* pts_s[4] = {&s.shoulder, &s.elbow, &s.wrist, &s.ee};
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    double a[3], b[3];
    for (int i = 0; i < 3; ++i) {
      a[i] = (*pts_r[k + 1])[i] - (*pts_r[k])[i];
      b[i] = (*pts_s[k + 1])[i] - (*pts_s[k])[i];
    }
    sum += oracle_segment_angle(a, b, alpha);
  }
  return sum;
}

// Independent 4x4 matrix-chain oracle for any named frame.
inline Mat4 oracle_fk(const KinematicChain& chain, const JointVector& q, FrameName f) {
  Mat4 m = Mat4::Identity();
  const NamedFrame& nf = chain.frame(f);
  for (int i = 0; i <= nf.joint; ++i) {
    const JointSpec& j = chain.joints()[i];
    m = m * oracle_homogeneous(j.origin) * oracle_rotation_about(j.axis, q[i]);
  }
  return m * oracle_homogeneous(nf.offset);
}

// Central differences of fk: translation rows from positions, rotation rows
// from the world-frame rotation vector of R(q+h) R(q-h)^T.
inline FrameJacobian fd_jacobian(const KinematicChain& chain, const JointVector& q, FrameName f,
                          double h) {
  FrameJacobian jac(6, chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    JointVector qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Mat4 tp = oracle_fk(chain, qp, f), tm = oracle_fk(chain, qm, f);
    jac.block<3, 1>(0, i) = (tp.topRightCorner<3, 1>() - tm.topRightCorner<3, 1>()) / (2 * h);
    const Eigen::AngleAxisd aa(Mat3(tp.topLeftCorner<3, 3>() * tm.topLeftCorner<3, 3>().transpose()));
    jac.block<3, 1>(3, i) = aa.axis() * aa.angle() / (2 * h);
  }
  return jac;
}

// Central differences of the stacked residual vector.
inline Eigen::MatrixXd fd_stack_jacobian(const KinematicChain& chain, const JointVector& q,
                                  const IkTargets& t, const JointVector& q_prev,
                                  const ResidualWeights& w, double h) {
  const int rows = static_cast<int>(stack_residuals(chain, q, t, q_prev, w).residual.size());
  Eigen::MatrixXd jac(rows, chain.dof());
  for (int i = 0; i < chain.dof(); ++i) {
    JointVector qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    jac.col(i) = (stack_residuals(chain, qp, t, q_prev, w).residual -
                  stack_residuals(chain, qm, t, q_prev, w).residual) /
                 (2 * h);
  }
  return jac;
}

}  // namespace hlik::testing
