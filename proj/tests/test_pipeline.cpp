// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hlik/errors.hpp"
#include "hlik/fista/train.hpp"
#include "hlik/pipeline.hpp"
#include "test_support.hpp"

using namespace hlik;
using hlik::testing::Rng;
namespace fs = std::filesystem;

namespace {

KinematicChain arm7() { return load_chain(testing::data_path("arm7.chain")); }

Dataset small_dataset(int n = 2, double duration = 1.0, uint64_t seed = 3) {
  GenerateOptions g;
  g.seed = seed;
  g.n_traj = n;
  g.duration = duration;
  return generate(g);
}

fista::Model tiny_model() {
  fista::ModelConfig c;
  c.embed = 4;
  c.gru_hidden = 4;
  c.attn_dim = 4;
  c.film_hidden = 4;
  c.head_hidden = {8};
  fista::Model m = fista::Model::random(c, 11);
  m.normalizer = fista::fit_normalizer(fista::to_right_arm(small_dataset()));
  return m;
}

/// Shoulder-frame point of a chain frame, through explicit 4x4 products.
Vec3 oracle_in_shoulder(const KinematicChain& chain, const JointVector& q, FrameName frame) {
  const Mat4 s = testing::oracle_homogeneous(chain.fk(q, FrameName::Shoulder));
  const Mat4 f = testing::oracle_homogeneous(chain.fk(q, frame));
  return (s.inverse() * f).topRightCorner<3, 1>();
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("hlik_test_pipeline_" + name);
}

}  // namespace

TEST_CASE("arm geometry of the fixture chain") {
  const ArmGeometry g = arm_geometry(arm7());
  CHECK(g.upper_arm == doctest::Approx(0.30).epsilon(1e-12));
  CHECK(g.forearm == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(g.hand == doctest::Approx(0.10).epsilon(1e-12));
}

TEST_CASE("feasible elbow lies on the elbow circle and is idempotent") {
  const ArmGeometry g;
  Rng rng(21);
  for (int k = 0; k < 500; ++k) {
    // EE poses whose wrist is within reach.
    const Vec3 wrist_dir = rng.unit_vector();
    const double reach = rng.uniform(0.08, 0.52);
    const UnitQuaternion r = rng.rotation();
    const Vec3 z = r.matrix().col(2);
    const Pose ee{r, reach * wrist_dir + g.hand * z};
    const Vec3 wrist = wrist_from_ee(ee, g);

    const Pose e = feasible_elbow(rng.vec3(0.5), ee, g);
    CHECK(e.translation.norm() == doctest::Approx(g.upper_arm).epsilon(1e-9));
    CHECK((wrist - e.translation).norm() == doctest::Approx(g.forearm).epsilon(1e-9));
    CHECK(geodesic_angle(e.rotation, elbow_orientation(e.translation, wrist)) < 1e-9);

    const Pose again = feasible_elbow(e.translation, ee, g);
    CHECK((again.translation - e.translation).norm() < 1e-9);
  }
}

TEST_CASE("feasible elbow pulls an out-of-reach wrist to full extension") {
  const ArmGeometry g;
  const Pose ee{UnitQuaternion::identity(), Vec3(2.0, 0.0, g.hand)};
  const Pose e = feasible_elbow(Vec3(0.1, 0.1, 0.0), ee, g);
  CHECK(e.translation.norm() == doctest::Approx(g.upper_arm).epsilon(1e-9));
  CHECK(e.translation.normalized().dot(Vec3::UnitX()) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("reference snapshot mirrors left arms") {
  const Dataset d = small_dataset();
  const ArmGeometry g;
  const TrajectoryFrame& f = d[1].frames[3];
  REQUIRE(d[1].arm == Arm::Left);
  const StepSnapshot left = reference_snapshot(f, Arm::Left, g);
  const StepSnapshot as_right = reference_snapshot(f, Arm::Right, g);
  const Vec3 flip(1.0, -1.0, 1.0);
  CHECK((left.ee - as_right.ee.cwiseProduct(flip)).norm() < 1e-12);
  CHECK((left.elbow - as_right.elbow.cwiseProduct(flip)).norm() < 1e-12);
  CHECK(left.shoulder.isZero());
}

TEST_CASE("solved snapshot agrees with homogeneous-matrix forward kinematics") {
  const KinematicChain chain = arm7();
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const JointVector q = rng.config(chain);
    const StepSnapshot s = solved_snapshot(chain, q);
    CHECK((s.elbow - oracle_in_shoulder(chain, q, FrameName::Elbow)).norm() < 1e-12);
    CHECK((s.wrist - oracle_in_shoulder(chain, q, FrameName::Wrist)).norm() < 1e-12);
    CHECK((s.ee - oracle_in_shoulder(chain, q, FrameName::Ee)).norm() < 1e-12);
  }
}

TEST_CASE("hlik mode without a model is rejected") {
  CHECK_THROWS_AS(solve_trajectory(arm7(), small_dataset()[0], SolveMode::Hlik, nullptr), ValidationError);
}

TEST_CASE("baseline mode ignores the model") {
  const KinematicChain chain = arm7();
  const Trajectory t = small_dataset()[0];
  const fista::Model m = tiny_model();
  const TrajectorySolution a = solve_trajectory(chain, t, SolveMode::Baseline, nullptr);
  const TrajectorySolution b = solve_trajectory(chain, t, SolveMode::Baseline, &m);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].q == b.steps[i].q);
    CHECK_FALSE(b.steps[i].elbow_target.has_value());
    CHECK(b.steps[i].preprocess_seconds == 0.0);
  }
}

TEST_CASE("streaming solve: warm starts move little and track the EE") {
  const KinematicChain chain = arm7();
  const fista::Model m = tiny_model();
  const Dataset d = small_dataset();
  for (const SolveMode mode : {SolveMode::Baseline, SolveMode::Hlik}) {
    for (const Trajectory& t : d) {
      const TrajectorySolution s = solve_trajectory(chain, t, mode, &m);
      REQUIRE(s.steps.size() == t.frames.size());
      CHECK(s.id == t.id);
      CHECK(s.arm == t.arm);
      for (size_t i = 0; i < s.steps.size(); ++i) {
        CHECK(s.steps[i].t == t.frames[i].t);
        CHECK(s.steps[i].elbow_target.has_value() == (mode == SolveMode::Hlik && i > 0));
        CHECK(s.steps[i].total_seconds >= s.steps[i].ik_seconds);
        // An untrained model may pull the elbow anywhere, so the no-jump
        // bound is a property of the baseline stream only.
        if (i > 0 && mode == SolveMode::Baseline) {
          CHECK((s.steps[i].q - s.steps[i - 1].q).cwiseAbs().maxCoeff() < 0.2);
        }
      }
      const TrajectoryErrors e = evaluate_solution(chain, t, s, arm_geometry(chain));
      CHECK(std::sqrt(e.mean().ee_pos_err_sq) < 5e-3);
    }
  }
}

TEST_CASE("per-step EE error matches an independent recomputation") {
  const KinematicChain chain = arm7();
  for (const Trajectory& t : small_dataset()) {
    const TrajectorySolution s = solve_trajectory(chain, t, SolveMode::Baseline, nullptr);
    const TrajectoryErrors e = evaluate_solution(chain, t, s, arm_geometry(chain));
    for (size_t i = 0; i < s.steps.size(); ++i) {
      Vec3 ref = t.frames[i].ee_in_shoulder.translation;
      if (t.arm == Arm::Left) ref.y() = -ref.y();
      const Vec3 got = oracle_in_shoulder(chain, s.steps[i].q, FrameName::Ee);
      CHECK(e.steps[i].ee_pos_err_sq == doctest::Approx((ref - got).squaredNorm()).epsilon(1e-9).scale(1e-15));
    }
  }
}

TEST_CASE("a left-arm trajectory is solved as its right-arm mirror") {
  const KinematicChain chain = arm7();
  const Trajectory left = small_dataset()[1];
  REQUIRE(left.arm == Arm::Left);
  const TrajectorySolution a = solve_trajectory(chain, left, SolveMode::Baseline, nullptr);
  const TrajectorySolution b = solve_trajectory(chain, mirror(left), SolveMode::Baseline, nullptr);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].q == b.steps[i].q);
}

TEST_CASE("evaluate_solution rejects misaligned streams") {
  const KinematicChain chain = arm7();
  const Dataset d = small_dataset();
  TrajectorySolution s = solve_trajectory(chain, d[0], SolveMode::Baseline, nullptr);
  CHECK_THROWS_AS(evaluate_solution(chain, d[1], s), MismatchedStreams);
  s.steps.pop_back();
  CHECK_THROWS_AS(evaluate_solution(chain, d[0], s), MismatchedStreams);
}

TEST_CASE("solutions CSV round trip") {
  const KinematicChain chain = arm7();
  const fista::Model m = tiny_model();
  std::vector<TrajectorySolution> sols;
  for (const Trajectory& t : small_dataset()) sols.push_back(solve_trajectory(chain, t, SolveMode::Hlik, &m));
  const fs::path p = temp_file("solutions.csv");
  export_solutions_csv(p, sols);
  const std::vector<TrajectorySolution> back = import_solutions_csv(p);
  REQUIRE(back.size() == sols.size());
  for (size_t k = 0; k < sols.size(); ++k) {
    CHECK(back[k].id == sols[k].id);
    CHECK(back[k].arm == sols[k].arm);
    CHECK(back[k].mode == SolveMode::Hlik);
    REQUIRE(back[k].steps.size() == sols[k].steps.size());
    for (size_t i = 0; i < sols[k].steps.size(); ++i) {
      CHECK(back[k].steps[i].q == sols[k].steps[i].q);
      CHECK(back[k].steps[i].t == sols[k].steps[i].t);
      CHECK(back[k].steps[i].iters == sols[k].steps[i].iters);
      CHECK(back[k].steps[i].converged == sols[k].steps[i].converged);
      CHECK(back[k].steps[i].final_cost == sols[k].steps[i].final_cost);
    }
  }
  fs::remove(p);
}

TEST_CASE("solutions CSV errors") {
  CHECK_THROWS_AS(import_solutions_csv(temp_file("missing.csv")), IoError);

  const fs::path p = temp_file("bad.csv");
  auto write = [&](const std::string& text) {
    std::ofstream(p) << text;
  };
  const std::string header = "traj_id,arm,mode,step,t,q0,iters,converged,final_cost,preprocess_ms,ik_ms\n";
  write("");
  CHECK_THROWS_AS(import_solutions_csv(p), ParseError);
  write("a,b,c\n");
  CHECK_THROWS_AS(import_solutions_csv(p), ParseError);
  write(header + "x,right,baseline,0,0,0.5,1,1,0,0\n");
  CHECK_THROWS_AS(import_solutions_csv(p), ParseError);
  write(header + "x,right,baseline,0,0,abc,1,1,0,0,0\n");
  CHECK_THROWS_AS(import_solutions_csv(p), ParseError);
  write(header + "x,right,magic,0,0,0.5,1,1,0,0,0\n");
  CHECK_THROWS_AS(import_solutions_csv(p), ParseError);
  write(header + "x,right,baseline,1,0,0.5,1,1,0,0,0\n");
  CHECK_THROWS_AS(import_solutions_csv(p), ParseError);
  write(header + "x,right,baseline,0,0,0.5,1,1,0,0,0\n");
  CHECK(import_solutions_csv(p).at(0).steps.at(0).q[0] == 0.5);
  fs::remove(p);
}

TEST_CASE("solve mode names") {
  CHECK(parse_solve_mode("baseline") == SolveMode::Baseline);
  CHECK(parse_solve_mode("hlik") == SolveMode::Hlik);
  CHECK(to_string(SolveMode::Hlik) == "hlik");
  CHECK_THROWS_AS(parse_solve_mode("HLIK"), ParseError);
}
