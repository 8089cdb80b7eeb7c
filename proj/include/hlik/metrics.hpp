// SPDX-License-Identifier: Apache-2.0
//
// Arm-similarity and EE-tracking metrics between a reference (human) arm
// and a solved (robot) arm, and their aggregation over trajectories with a
// "challenging subset" ranked by the baseline's keypoint error.
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlik/liegroup.hpp"

namespace hlik {

/// Four keypoints and the EE orientation of one arm, all in one frame.
struct StepSnapshot {
  Vec3 shoulder = Vec3::Zero();
  Vec3 elbow = Vec3::Zero();
  Vec3 wrist = Vec3::Zero();
  Vec3 ee = Vec3::Zero();
  UnitQuaternion ee_rotation;
};

inline constexpr double kDefaultLineAngleAlpha = 1e-9;

/// Sum of squared position errors over elbow, wrist and EE (shoulder
/// excluded), m^2.
double keypoint_position_error(const StepSnapshot& ref, const StepSnapshot& sol);
/// Sum over upper arm, forearm and hand segments of
/// acos(clamp(a.b / (|a||b| + alpha))), radians.
double line_angle_error(const StepSnapshot& ref, const StepSnapshot& sol,
                        double alpha = kDefaultLineAngleAlpha);
/// Squared EE position error, m^2.
double ee_position_error(const StepSnapshot& ref, const StepSnapshot& sol);
/// Squared geodesic EE orientation error, rad^2.
double ee_orientation_error(const StepSnapshot& ref, const StepSnapshot& sol);

/// The metric vector used for steps, trajectory means and aggregates.
/// kp_pos_err_rms is sqrt(kp_pos_err_sq) per step, then averaged.
struct MetricValues {
  double kp_pos_err_sq = 0.0;
  double kp_pos_err_rms = 0.0;
  double line_angle_err = 0.0;
  double ee_pos_err_sq = 0.0;
  double ee_ori_err_sq = 0.0;

  static constexpr int kCount = 5;
  static const std::array<const char*, kCount>& names();
  double& operator[](int i);
  double operator[](int i) const;
};

MetricValues step_metrics(const StepSnapshot& ref, const StepSnapshot& sol,
                          double alpha = kDefaultLineAngleAlpha);

/// Per-step metrics of one solver variant along one trajectory.
struct TrajectoryErrors {
  std::string id;
  std::vector<MetricValues> steps;
  MetricValues mean() const;
};

struct MeanStd {
  MetricValues mean;
  MetricValues std;  // population standard deviation
};

/// One solver variant evaluated over a set of trajectories.
struct VariantReport {
  std::vector<MetricValues> per_trajectory;  // same order as MetricsReport::ids
  MeanStd full;                // over per-trajectory means (primary)
  MeanStd challenging;         // same, restricted to the challenging subset
  MetricValues full_pooled;    // mean over every step
  MetricValues challenging_pooled;
};

struct MetricsReport {
  std::vector<std::string> ids;
  std::vector<bool> challenging;
  int challenging_count = 0;
  double challenging_fraction = 0.2;
  VariantReport baseline;
  VariantReport hlik;
  /// 100 (baseline - hlik) / baseline on the primary aggregate means; 0
  /// where the baseline value is 0.
  MetricValues reduction_full;
  MetricValues reduction_challenging;
};

/// Challenging subset: the round(fraction * n) trajectories with the largest
/// baseline mean kp_pos_err_sq; ties go to the smaller trajectory id.
/// Aggregates are means of per-trajectory means. Throws MismatchedStreams
/// when the two variants differ in trajectory ids or step counts, and
/// ValidationError for an empty input or a fraction outside [0, 1].
MetricsReport aggregate(const std::vector<TrajectoryErrors>& baseline,
                        const std::vector<TrajectoryErrors>& hlik,
                        double challenging_fraction = 0.2);

nlohmann::json to_json(const MetricValues& v);
nlohmann::json to_json(const MetricsReport& r);
/// Rows traj_id,variant,kp_pos_err_sq,kp_pos_err_rms,line_angle_err,
/// ee_pos_err_sq,ee_ori_err_sq,challenging.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& r);

}  // namespace hlik
