// SPDX-License-Identifier: Apache-2.0
//
// Streaming solve of a recorded reference trajectory, standing in for the
// teleoperation loop: per step, read the EE target, optionally predict the
// elbow from the robot's own recent EE/elbow states, and run warm-started
// LM IK.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hlik/chain.hpp"
#include "hlik/datagen.hpp"
#include "hlik/fista/model.hpp"
#include "hlik/ik.hpp"
#include "hlik/metrics.hpp"

namespace hlik {

enum class SolveMode { Baseline, Hlik };
std::string_view to_string(SolveMode m);
/// Throws ParseError.
SolveMode parse_solve_mode(std::string_view s);

struct StreamOptions {
  SolverConfig first_step = SolverConfig::cold_start();  // step 0 from the zero pose
  SolverConfig warm = SolverConfig::warm_start();         // later steps from q_{t-1}
  ResidualWeights weights = ResidualWeights::defaults();
  /// Replace the network's elbow pose by the closest pose the arm can take
  /// at the EE target (feasible_elbow with the chain's own link lengths).
  /// Off means the raw prediction is the IK elbow target.
  bool project_elbow = true;
  /// Pad the elbow history at start-up (otherwise the first T steps would
  /// throw ColdStart).
  bool pad_cold_start = true;
};

struct StepSolution {
  double t = 0.0;
  JointVector q;
  int iters = 0;
  bool converged = false;
  double final_cost = 0.0;
  std::optional<Pose> elbow_target;  // shoulder frame; HL-IK steps t > 0
  double preprocess_seconds = 0.0;   // history handling + network inference
  double ik_seconds = 0.0;
  double total_seconds = 0.0;        // whole step, timed on its own clock
};

struct TrajectorySolution {
  std::string id;
  Arm arm = Arm::Right;
  SolveMode mode = SolveMode::Baseline;
  std::vector<StepSolution> steps;
};

/// Solves a trajectory in streaming order on a right-arm chain. A left-arm
/// trajectory is solved on the mirror image of the chain, i.e. in its
/// right-arm mirror coordinates, and its joint values are reported as such.
///
/// Step 0 starts from the chain's zero pose without a smoothness anchor;
/// step t > 0 warm-starts from q_{t-1}. In HL-IK mode the predictor's
/// history is fed the solved EE/elbow poses (shoulder frame), never the
/// reference elbow; step 0, having no history yet, is solved without the
/// elbow term and its solution is the first history frame.
/// Throws ValidationError if `model` is missing in HL-IK mode.
TrajectorySolution solve_trajectory(const KinematicChain& chain, const Trajectory& reference, SolveMode mode,
                                    const fista::Model* model, const StreamOptions& options = {});

/// Upper arm, forearm and hand lengths of a chain, measured between its
/// named frames at the zero pose.
ArmGeometry arm_geometry(const KinematicChain& chain);

/// Reference keypoints of a frame, in right-arm shoulder coordinates (left
/// arms mirrored). The wrist is recovered from the EE pose.
StepSnapshot reference_snapshot(const TrajectoryFrame& frame, Arm arm, const ArmGeometry& geometry);
/// Robot keypoints at q, relative to the chain's shoulder frame.
StepSnapshot solved_snapshot(const KinematicChain& chain, const JointVector& q);

/// Per-step metrics of a solution against its reference.
TrajectoryErrors evaluate_solution(const KinematicChain& chain, const Trajectory& reference,
                                   const TrajectorySolution& solution, const ArmGeometry& geometry = {});

/// Joint-trajectory CSV: traj_id,arm,mode,step,t,q0..q{d-1},iters,converged,
/// final_cost,preprocess_ms,ik_ms. Importing checks column structure.
void export_solutions_csv(const std::filesystem::path& path, const std::vector<TrajectorySolution>& solutions);
std::vector<TrajectorySolution> import_solutions_csv(const std::filesystem::path& path);

}  // namespace hlik
