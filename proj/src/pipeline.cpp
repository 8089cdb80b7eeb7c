// SPDX-License-Identifier: Apache-2.0
#include "hlik/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hlik/errors.hpp"
#include "hlik/fista/predictor.hpp"

namespace hlik {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, int row, int col) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + s +
                     "' is not a number");
  }
  return v;
}

}  // namespace

std::string_view to_string(SolveMode m) { return m == SolveMode::Hlik ? "hlik" : "baseline"; }

SolveMode parse_solve_mode(std::string_view s) {
  if (s == "baseline") return SolveMode::Baseline;
  if (s == "hlik") return SolveMode::Hlik;
  throw ParseError("unknown solve mode '" + std::string(s) + "' (expected baseline or hlik)");
}

TrajectorySolution solve_trajectory(const KinematicChain& chain, const Trajectory& reference, SolveMode mode,
                                    const fista::Model* model, const StreamOptions& options) {
  if (mode == SolveMode::Hlik && model == nullptr) throw ValidationError("HL-IK mode needs an elbow model");
  const Trajectory right = reference.arm == Arm::Left ? mirror(reference) : reference;

  TrajectorySolution out;
  out.id = reference.id;
  out.arm = reference.arm;
  out.mode = mode;
  out.steps.reserve(right.frames.size());

  JointVector q = chain.zero();
  const Pose shoulder = chain.fk(q, FrameName::Shoulder);
  const Pose shoulder_inv = inverse(shoulder);

  const ArmGeometry geometry = arm_geometry(chain);
  std::optional<fista::ElbowPredictor> predictor;
  if (mode == SolveMode::Hlik) predictor.emplace(*model, Arm::Right, options.pad_cold_start);

  for (size_t i = 0; i < right.frames.size(); ++i) {
    const auto t_step = Clock::now();
    const TrajectoryFrame& f = right.frames[i];
    StepSolution step;
    step.t = f.t;

    // Step 0 has no history to predict from; its EE-only solution seeds it.
    const bool use_elbow = predictor && i > 0;
    std::optional<Pose> elbow_world;
    if (use_elbow) {
      const auto t0 = Clock::now();
      step.elbow_target = predictor->predict(f.ee_in_shoulder);
      if (options.project_elbow) {
        step.elbow_target = feasible_elbow(step.elbow_target->translation, f.ee_in_shoulder, geometry);
      }
      elbow_world = shoulder * *step.elbow_target;
      step.preprocess_seconds = seconds_since(t0);
    }

    SolverConfig config = i == 0 ? options.first_step : options.warm;
    config.elbow_enabled = use_elbow;
    const std::optional<JointVector> q_prev = i == 0 ? std::nullopt : std::optional<JointVector>(q);
    const auto t1 = Clock::now();
    const SolveReport rep = solve(chain, q, shoulder * f.ee_in_shoulder, elbow_world, q_prev, config, options.weights);
    step.ik_seconds = seconds_since(t1);

    q = rep.q_star;
    step.q = q;
    step.iters = rep.iters;
    step.converged = rep.converged;
    step.final_cost = rep.final_cost;

    if (predictor) {
      const auto t2 = Clock::now();
      const FramePoses now = chain.fk_all(q);
      predictor->observe(shoulder_inv * now[FrameName::Ee], shoulder_inv * now[FrameName::Elbow]);
      step.preprocess_seconds += seconds_since(t2);
    }
    step.total_seconds = seconds_since(t_step);
    out.steps.push_back(std::move(step));
  }
  return out;
}

ArmGeometry arm_geometry(const KinematicChain& chain) {
  const FramePoses p = chain.fk_all(chain.zero());
  ArmGeometry g;
  g.upper_arm = (p[FrameName::Elbow].translation - p[FrameName::Shoulder].translation).norm();
  g.forearm = (p[FrameName::Wrist].translation - p[FrameName::Elbow].translation).norm();
  g.hand = (p[FrameName::Ee].translation - p[FrameName::Wrist].translation).norm();
  return g;
}

StepSnapshot reference_snapshot(const TrajectoryFrame& frame, Arm arm, const ArmGeometry& geometry) {
  const Pose ee = arm == Arm::Left ? mirror_y(frame.ee_in_shoulder) : frame.ee_in_shoulder;
  const Pose elbow = arm == Arm::Left ? mirror_y(frame.elbow_in_shoulder) : frame.elbow_in_shoulder;
  StepSnapshot s;
  s.shoulder = Vec3::Zero();
  s.elbow = elbow.translation;
  s.wrist = wrist_from_ee(ee, geometry);
  s.ee = ee.translation;
  s.ee_rotation = ee.rotation;
  return s;
}

StepSnapshot solved_snapshot(const KinematicChain& chain, const JointVector& q) {
  const FramePoses p = chain.fk_all(q);
  const Pose inv = inverse(p[FrameName::Shoulder]);
  StepSnapshot s;
  s.shoulder = Vec3::Zero();
  s.elbow = inv.transform(p[FrameName::Elbow].translation);
  s.wrist = inv.transform(p[FrameName::Wrist].translation);
  const Pose ee = inv * p[FrameName::Ee];
  s.ee = ee.translation;
  s.ee_rotation = ee.rotation;
  return s;
}

TrajectoryErrors evaluate_solution(const KinematicChain& chain, const Trajectory& reference,
                                   const TrajectorySolution& solution, const ArmGeometry& geometry) {
  if (solution.id != reference.id) {
    throw MismatchedStreams("solution '" + solution.id + "' does not belong to trajectory '" + reference.id + "'");
  }
  if (solution.steps.size() != reference.frames.size()) {
    throw MismatchedStreams("trajectory '" + reference.id + "' has " + std::to_string(reference.frames.size()) +
                            " frames but the solution has " + std::to_string(solution.steps.size()) + " steps");
  }
  TrajectoryErrors e;
  e.id = reference.id;
  e.steps.reserve(solution.steps.size());
  for (size_t i = 0; i < solution.steps.size(); ++i) {
    e.steps.push_back(step_metrics(reference_snapshot(reference.frames[i], reference.arm, geometry),
                                   solved_snapshot(chain, solution.steps[i].q)));
  }
  return e;
}

void export_solutions_csv(const std::filesystem::path& path, const std::vector<TrajectorySolution>& solutions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const Eigen::Index d = solutions.empty() || solutions[0].steps.empty() ? 0 : solutions[0].steps[0].q.size();
  out << "traj_id,arm,mode,step,t";
  for (Eigen::Index j = 0; j < d; ++j) out << ",q" << j;
  out << ",iters,converged,final_cost,preprocess_ms,ik_ms\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (const TrajectorySolution& s : solutions) {
    for (size_t i = 0; i < s.steps.size(); ++i) {
      const StepSolution& st = s.steps[i];
      if (st.q.size() != d) throw DimensionMismatch("solutions mix chains of different joint counts");
      out << s.id << ',' << to_string(s.arm) << ',' << to_string(s.mode) << ',' << i;
      num(st.t);
      for (Eigen::Index j = 0; j < d; ++j) num(st.q[j]);
      out << ',' << st.iters << ',' << (st.converged ? 1 : 0);
      num(st.final_cost);
      num(st.preprocess_seconds * 1e3);
      num(st.ik_seconds * 1e3);
      out << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<TrajectorySolution> import_solutions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("row 1: empty solutions file");
  const std::vector<std::string> header = split_csv(line);
  constexpr int kFixed = 5 + 5;
  if (header.size() < kFixed + 1 || header[0] != "traj_id" || header[4] != "t") {
    throw ParseError("row 1: not a solutions file header");
  }
  const int d = static_cast<int>(header.size()) - kFixed;

  std::vector<TrajectorySolution> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(f.size()));
    }
    if (out.empty() || out.back().id != f[0]) {
      TrajectorySolution s;
      s.id = f[0];
      try {
        s.arm = parse_arm(f[1]);
        s.mode = parse_solve_mode(f[2]);
      } catch (const ParseError& e) {
        throw ParseError("row " + std::to_string(row) + ": " + e.what());
      }
      out.push_back(std::move(s));
    }
    TrajectorySolution& s = out.back();
    if (parse_number(f[3], row, 4) != static_cast<double>(s.steps.size())) {
      throw ParseError("row " + std::to_string(row) + ", column 4: steps of '" + s.id + "' are not consecutive");
    }
    StepSolution st;
    st.t = parse_number(f[4], row, 5);
    st.q.resize(d);
    for (int j = 0; j < d; ++j) st.q[j] = parse_number(f[5 + j], row, 6 + j);
    st.iters = static_cast<int>(parse_number(f[5 + d], row, 6 + d));
    st.converged = parse_number(f[6 + d], row, 7 + d) != 0.0;
    st.final_cost = parse_number(f[7 + d], row, 8 + d);
    st.preprocess_seconds = parse_number(f[8 + d], row, 9 + d) * 1e-3;
    st.ik_seconds = parse_number(f[9 + d], row, 10 + d) * 1e-3;
    s.steps.push_back(std::move(st));
  }
  return out;
}

}  // namespace hlik
