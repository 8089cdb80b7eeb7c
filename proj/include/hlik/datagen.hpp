// SPDX-License-Identifier: Apache-2.0
//
// Synthetic EE/elbow trajectories in shoulder frames, plus CSV I/O and
// windowing into (history, target, label) samples.
//
// Shoulder frame: x forward, y left, z up. Trajectories are generated for a
// right arm; left-arm trajectories are the y-mirror of a right-arm one.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hlik/liegroup.hpp"

namespace hlik {

enum class Arm { Left, Right };
std::string_view to_string(Arm a);
/// Throws ParseError.
Arm parse_arm(std::string_view s);

struct ArmGeometry {
  double upper_arm = 0.30;
  double forearm = 0.25;
  double hand = 0.10;
};

/// Swivel angle phi of the elbow about the shoulder-wrist axis; phi = 0
/// puts the elbow straight below that axis, positive phi turns it towards
/// +y (medially for a right arm).
///
/// The commanded angle is base_angle + per-trajectory offset + gain . s,
/// where s is the wrist position normalized to the sampling region, and the
/// realized angle follows it through a critically damped second-order filter
/// with the given time constant.
struct SwivelPolicy {
  double base_angle = -0.45;
  Vec3 gain = Vec3(0.35, -0.55, 0.45);
  double time_constant = 0.15;  // seconds
  double offset_range = 0.35;   // per-trajectory offset ~ U(-r, r)
  /// Swivel added per m/s of vertical wrist velocity; makes the policy
  /// depend on recent motion, not only on the current wrist position.
  double velocity_gain = 1.5;
  /// The EE orientation is the elbow frame turned by a smooth wrist rotation
  /// vector whose per-trajectory mean is ~ U(-r, r) per axis.
  double wrist_bias_range = 0.3;
};

struct TrajectoryFrame {
  double t = 0.0;
  Pose ee_in_shoulder;
  Pose elbow_in_shoulder;
};

struct Trajectory {
  std::string id;
  double dt = 0.0;
  Arm arm = Arm::Right;
  std::vector<TrajectoryFrame> frames;
};

using Dataset = std::vector<Trajectory>;

struct GenerateOptions {
  uint64_t seed = 0;
  int n_traj = 20;
  double duration = 5.0;  // seconds
  double dt = 0.02;       // seconds
  int history = 5;        // only used to validate duration >= (T+1) dt
  SwivelPolicy policy;
  ArmGeometry geometry;
  int threads = 1;
};

/// Deterministic in `seed`, independent of `threads`. Even-indexed
/// trajectories are right arms, odd-indexed ones mirrored left arms.
/// Throws ValidationError on bad options, UnreachableGeometry when a
/// trajectory cannot be placed in the workspace after 100 attempts.
Dataset generate(const GenerateOptions& options);

/// (elbow_in_shoulder, ee_in_shoulder) = (T_S^-1 T_E, T_S^-1 T_EE).
std::pair<Pose, Pose> extract_relative(const Pose& world_shoulder, const Pose& world_elbow,
                                       const Pose& world_ee);

/// Swivel angle of an elbow position for a given wrist position, both in
/// the shoulder frame of a right arm, using the convention of SwivelPolicy.
double swivel_angle(const Vec3& elbow, const Vec3& wrist);

/// Wrist centre implied by an EE pose: p_ee - hand * z_ee.
Vec3 wrist_from_ee(const Pose& ee, const ArmGeometry& geometry);

/// Elbow frame convention: z along the forearm (elbow -> wrist), x the part
/// of (elbow - shoulder) orthogonal to z. Positions in the shoulder frame.
/// With the upper arm hanging and the forearm forward this is a quarter
/// turn from the shoulder frame, far from the half turn where the w >= 0
/// quaternion sign convention would jump.
UnitQuaternion elbow_orientation(const Vec3& elbow, const Vec3& wrist);

/// The elbow pose closest to `elbow_guess` among those compatible with the
/// EE pose: on the circle of elbow positions for the implied wrist, with the
/// orientation given by elbow_orientation. A wrist out of reach is pulled to
/// the nearest reachable distance along its direction; a guess on the
/// shoulder-wrist axis falls back to swivel angle 0.
Pose feasible_elbow(const Vec3& elbow_guess, const Pose& ee, const ArmGeometry& geometry);

Trajectory mirror(const Trajectory& t);

/// Writes `traj_id,arm,t,ee_*,el_*` rows with 17 significant digits.
void export_csv(const std::filesystem::path& path, const Dataset& data);
void export_csv(std::ostream& out, const Dataset& data);
/// Throws ParseError naming the row (1-based, header is row 1) and column.
Dataset import_csv(const std::filesystem::path& path);
Dataset import_csv(std::istream& in);

/// One training sample: frames [index - T, index) of a trajectory as
/// history, frame `index` as target (EE) and label (elbow).
struct SampleWindow {
  int trajectory = 0;
  int index = 0;
};

struct WindowSet {
  std::vector<SampleWindow> windows;
  int short_trajectories = 0;  // trajectories with no window
};

WindowSet window(const Dataset& data, int history);

/// Per-frame network input: (ee 7D, elbow 7D).
using FrameVector = Eigen::Matrix<double, 14, 1>;
FrameVector frame_vector(const TrajectoryFrame& f);
FrameVector frame_vector(const Pose& ee, const Pose& elbow);

}  // namespace hlik
