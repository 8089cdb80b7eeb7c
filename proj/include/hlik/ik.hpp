// SPDX-License-Identifier: Apache-2.0
//
// Levenberg-Marquardt inverse kinematics over a stacked residual
//   c(q) = [ W_ee^1/2    log(T_tar_ee^-1 T_ee(q))
//            W_elbow^1/2 log(T_tar_el^-1 T_el(q))     (HL-IK only)
//            W_smooth^1/2 (q - q_prev) ]
// with update q <- q - (J^T J + lambda I)^-1 J^T c.
#pragma once

#include <optional>
#include <vector>

#include "hlik/chain.hpp"
#include "hlik/liegroup.hpp"

namespace hlik {

struct ResidualWeights {
  Vec6 ee;     // (translation x3, rotation x3)
  Vec6 elbow;  // (translation x3, rotation x3)
  double smooth = 0.0;

  /// W_ee = diag(50 I3, 40 I3), W_elbow = diag(20 I3, 5 I3), W_smooth = 0.35 I.
  static ResidualWeights defaults();
  ResidualWeights scaled(double c) const;
};

enum class DampingMode { Fixed, Adaptive };

struct SolverConfig {
  int max_iters = 100;
  double lambda = 1e-3;
  DampingMode damping = DampingMode::Adaptive;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  double lambda_min = 1e-9;
  double lambda_max = 1e6;
  double step_tol = 1e-8;  // radians, infinity norm of the accepted step
  double cost_tol = 1e-10;  // relative cost decrease
  int max_factorization_retries = 5;
  bool elbow_enabled = false;

  static SolverConfig cold_start() { return {}; }
  static SolverConfig warm_start() {
    SolverConfig c;
    c.max_iters = 10;
    return c;
  }
};

struct TermCosts {
  double ee = 0.0;
  double elbow = 0.0;
  double smooth = 0.0;
  double total() const { return ee + elbow + smooth; }
};

struct SolveReport {
  JointVector q_star;
  int iters = 0;
  double final_cost = 0.0;
  TermCosts terms;
  bool converged = false;
  bool singular = false;  // SingularUpdate: factorization failed after escalation
  double wall_time = 0.0;  // seconds
  std::vector<bool> limit_active;
  /// Cost after the initial evaluation and after every accepted step.
  std::vector<double> accepted_costs;
};

Vec6 cost_ee(const KinematicChain& chain, const JointVector& q, const Pose& target_ee,
             const ResidualWeights& w);
Vec6 cost_elbow(const KinematicChain& chain, const JointVector& q, const Pose& target_elbow,
                const ResidualWeights& w);
Eigen::VectorXd cost_smooth(const JointVector& q, const JointVector& q_prev,
                            const ResidualWeights& w);

/// What the stacked residual tracks. `target_elbow` is only read when
/// `elbow_enabled` is set.
struct IkTargets {
  Pose ee;
  std::optional<Pose> elbow;
  bool elbow_enabled = false;
};

struct StackedResiduals {
  Eigen::VectorXd residual;  // 6 [+ 6] + d
  Eigen::MatrixXd jacobian;  // rows match residual, d columns
  TermCosts terms;
};

StackedResiduals stack_residuals(const KinematicChain& chain, const JointVector& q,
                                 const IkTargets& targets, const JointVector& q_prev,
                                 const ResidualWeights& w);

/// Damped least-squares solve. When `q_prev` is absent (cold start) the
/// smoothness weight is treated as zero. Joints sitting on a limit are frozen
/// for a step when the gradient pushes them outward.
SolveReport solve(const KinematicChain& chain, const JointVector& q_init,
                  const Pose& target_ee, const std::optional<Pose>& target_elbow,
                  const std::optional<JointVector>& q_prev, const SolverConfig& config,
                  const ResidualWeights& weights);

}  // namespace hlik
