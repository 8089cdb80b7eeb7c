// SPDX-License-Identifier: Apache-2.0
#include "hlik/ik.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "hlik/errors.hpp"

namespace hlik {
namespace {

constexpr double kPiPerturbation = 1e-5;

// log(T_target^-1 T_current). On AngleNearPi the target is turned by a small
// angle about the residual's own rotation axis, which moves the residual off
// the half-turn whatever that axis is, and the log is recomputed once.
Twist pose_error(const Pose& target, const Pose& current) {
  const Pose rel = inverse(target) * current;
  try {
    return log_se3(rel);
  } catch (const AngleNearPi&) {
    const UnitQuaternion& r = rel.rotation;
    Vec3 axis(r.x(), r.y(), r.z());
    axis = axis.norm() > 0.0 ? Vec3(axis.normalized()) : Vec3::UnitX();
    Pose nudged = target;
    nudged.rotation = target.rotation * UnitQuaternion::from_axis_angle(axis, kPiPerturbation);
    return log_se3(inverse(nudged) * current);
  }
}

Vec6 sqrt_weights(const Vec6& w) { return w.cwiseMax(0.0).cwiseSqrt(); }

// Residual block and its Jacobian for one tracked frame.
void pose_block(const KinematicChain& chain, const JointVector& q, FrameName frame,
                const Pose& target, const Vec6& weights, Eigen::Ref<Eigen::VectorXd> r,
                Eigen::Ref<Eigen::MatrixXd> jac) {
  const Pose current = chain.fk(q, frame);
  const Twist err = pose_error(target, current);
  const Vec6 sw = sqrt_weights(weights);
  r = sw.cwiseProduct(err.vector());

  // Body-frame twist of the tracked frame per joint, then chained through
  // the inverse right Jacobian of the residual.
  const FrameJacobian geometric = chain.jacobian(q, frame);
  const Mat3 rt = current.rotation.matrix().transpose();
  Eigen::Matrix<double, 6, Eigen::Dynamic> body(6, chain.dof());
  body.topRows<3>() = rt * geometric.topRows<3>();
  body.bottomRows<3>() = rt * geometric.bottomRows<3>();
  jac = sw.asDiagonal() * (se3_right_jacobian_inverse(err) * body);
}

}  // namespace

ResidualWeights ResidualWeights::defaults() {
  ResidualWeights w;
  w.ee << 50, 50, 50, 40, 40, 40;
  w.elbow << 20, 20, 20, 5, 5, 5;
  w.smooth = 0.35;
  return w;
}

ResidualWeights ResidualWeights::scaled(double c) const {
  return {c * ee, c * elbow, c * smooth};
}

Vec6 cost_ee(const KinematicChain& chain, const JointVector& q, const Pose& target_ee,
             const ResidualWeights& w) {
  return sqrt_weights(w.ee).cwiseProduct(pose_error(target_ee, chain.fk(q, FrameName::Ee)).vector());
}

Vec6 cost_elbow(const KinematicChain& chain, const JointVector& q, const Pose& target_elbow,
                const ResidualWeights& w) {
  return sqrt_weights(w.elbow).cwiseProduct(
      pose_error(target_elbow, chain.fk(q, FrameName::Elbow)).vector());
}

Eigen::VectorXd cost_smooth(const JointVector& q, const JointVector& q_prev,
                            const ResidualWeights& w) {
  if (q.size() != q_prev.size()) {
    throw DimensionMismatch("smoothness residual needs equal-length joint vectors");
  }
  return std::sqrt(std::max(w.smooth, 0.0)) * (q - q_prev);
}

StackedResiduals stack_residuals(const KinematicChain& chain, const JointVector& q,
                                 const IkTargets& targets, const JointVector& q_prev,
                                 const ResidualWeights& w) {
  const int d = chain.dof();
  const bool elbow = targets.elbow_enabled;
  if (elbow && !targets.elbow) throw UsageError("elbow term enabled without an elbow target");
  const int rows = 6 + (elbow ? 6 : 0) + d;

  StackedResiduals out;
  out.residual.resize(rows);
  out.jacobian.setZero(rows, d);

  pose_block(chain, q, FrameName::Ee, targets.ee, w.ee, out.residual.segment(0, 6),
             out.jacobian.middleRows(0, 6));
  out.terms.ee = out.residual.segment(0, 6).squaredNorm();
  int row = 6;
  if (elbow) {
    pose_block(chain, q, FrameName::Elbow, *targets.elbow, w.elbow, out.residual.segment(6, 6),
               out.jacobian.middleRows(6, 6));
    out.terms.elbow = out.residual.segment(6, 6).squaredNorm();
    row = 12;
  }
  out.residual.segment(row, d) = cost_smooth(q, q_prev, w);
  out.jacobian.middleRows(row, d).diagonal().setConstant(std::sqrt(std::max(w.smooth, 0.0)));
  out.terms.smooth = out.residual.segment(row, d).squaredNorm();
  return out;
}

SolveReport solve(const KinematicChain& chain, const JointVector& q_init,
                  const Pose& target_ee, const std::optional<Pose>& target_elbow,
                  const std::optional<JointVector>& q_prev, const SolverConfig& config,
                  const ResidualWeights& weights) {
  const auto start = std::chrono::steady_clock::now();
  if (config.elbow_enabled && !target_elbow) {
    throw UsageError("HL-IK solve requires an elbow target");
  }
  if (q_prev && q_prev->size() != chain.dof()) {
    throw DimensionMismatch("previous configuration has the wrong length");
  }
  const IkTargets targets{target_ee, config.elbow_enabled ? target_elbow : std::nullopt,
                          config.elbow_enabled};

  // Without a previous configuration there is nothing to be smooth against;
  // the smoothness rows stay in the stack but contribute zero.
  ResidualWeights w = weights;
  if (!q_prev) w.smooth = 0.0;

  ClampResult state = chain.clamp(q_init);
  JointVector q = state.q;
  auto evaluate = [&](const JointVector& at) {
    return stack_residuals(chain, at, targets, q_prev ? *q_prev : at, w);
  };

  SolveReport report;
  StackedResiduals current = evaluate(q);
  double cost = current.residual.squaredNorm();
  report.accepted_costs.push_back(cost);
  report.limit_active = state.limit_active;

  const bool adaptive = config.damping == DampingMode::Adaptive;
  double lambda = config.lambda;
  if (config.max_iters > 0 && cost == 0.0) report.converged = true;

  const int d = chain.dof();
  while (!report.converged && report.iters < config.max_iters) {
    ++report.iters;
    Eigen::MatrixXd jtj = current.jacobian.transpose() * current.jacobian;
    Eigen::VectorXd g = current.jacobian.transpose() * current.residual;
    // Joints resting on a limit whose descent direction points outward are
    // held fixed for this step, otherwise clamping would eat the whole update.
    for (int i = 0; i < d; ++i) {
      const auto& j = chain.joints()[i];
      if ((q[i] <= j.lower && g[i] > 0.0) || (q[i] >= j.upper && g[i] < 0.0)) {
        jtj.row(i).setZero();
        jtj.col(i).setZero();
        g[i] = 0.0;
      }
    }

    Eigen::VectorXd dq;
    bool factored = false;
    for (int attempt = 0; attempt <= config.max_factorization_retries; ++attempt) {
      const Eigen::LLT<Eigen::MatrixXd> llt(jtj + lambda * Eigen::MatrixXd::Identity(d, d));
      if (llt.info() == Eigen::Success) {
        dq = -llt.solve(g);
        if (dq.allFinite()) {
          factored = true;
          break;
        }
      }
      lambda = std::min(lambda * config.lambda_up, config.lambda_max);
    }
    if (!factored) {
      report.singular = true;
      break;
    }

    ClampResult candidate = chain.clamp(q + dq);
    const double step = (candidate.q - q).lpNorm<Eigen::Infinity>();
    StackedResiduals next = evaluate(candidate.q);
    const double next_cost = next.residual.squaredNorm();

    if (!adaptive || next_cost <= cost) {
      const double rel = cost > 0.0 ? (cost - next_cost) / cost : 0.0;
      q = candidate.q;
      state = std::move(candidate);
      current = std::move(next);
      cost = next_cost;
      report.accepted_costs.push_back(cost);
      if (adaptive) lambda = std::max(lambda * config.lambda_down, config.lambda_min);
      if (step < config.step_tol || cost == 0.0 || (rel >= 0.0 && rel < config.cost_tol)) {
        report.converged = true;
      }
    } else {
      lambda = std::min(lambda * config.lambda_up, config.lambda_max);
      if (step < config.step_tol) report.converged = true;
    }
  }

  report.q_star = q;
  report.final_cost = cost;
  report.terms = current.terms;
  report.limit_active = state.limit_active;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace hlik
