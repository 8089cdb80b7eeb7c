// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hlik/liegroup.hpp"

namespace hlik {

using JointVector = Eigen::VectorXd;
/// 6 x d frame Jacobian, translation rows first.
using FrameJacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

enum class FrameName { Shoulder = 0, Elbow = 1, Wrist = 2, Ee = 3 };
inline constexpr std::array<FrameName, 4> kAllFrames = {
    FrameName::Shoulder, FrameName::Elbow, FrameName::Wrist, FrameName::Ee};

std::string_view to_string(FrameName f);
/// Throws UnknownFrame for anything but shoulder/elbow/wrist/ee.
FrameName parse_frame_name(std::string_view s);

struct JointSpec {
  std::string name;
  Vec3 axis = Vec3::UnitZ();
  Pose origin;  // fixed transform from the parent link frame
  double lower = 0.0;
  double upper = 0.0;
};

struct NamedFrame {
  int joint = -1;  // attachment joint; -1 means the chain base
  Pose offset;
};

/// Poses of every named frame at one configuration.
struct FramePoses {
  std::array<Pose, 4> poses;
  const Pose& operator[](FrameName f) const { return poses[static_cast<int>(f)]; }
};

struct ClampResult {
  JointVector q;
  std::vector<bool> limit_active;
};

/// Serial chain of revolute joints with four named frames.
/// Immutable after construction; every query is a pure function.
class KinematicChain {
 public:
  /// Validates and takes ownership. Throws ValidationError.
  KinematicChain(std::string name, std::vector<JointSpec> joints,
                 std::array<NamedFrame, 4> frames);

  const std::string& name() const { return name_; }
  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const NamedFrame& frame(FrameName f) const { return frames_[static_cast<int>(f)]; }
  JointVector zero() const { return JointVector::Zero(dof()); }

  Pose fk(const JointVector& q, FrameName frame) const;
  FramePoses fk_all(const JointVector& q) const;
  FrameJacobian jacobian(const JointVector& q, FrameName frame) const;

  ClampResult clamp(const JointVector& q) const;
  bool within_limits(const JointVector& q) const;

 private:
  void check_size(const JointVector& q) const;
  /// Link frames after each joint; result[i+1] is the frame after joint i,
  /// result[0] the base.
  std::vector<Pose> link_frames(const JointVector& q) const;

  std::string name_;
  std::vector<JointSpec> joints_;
  std::array<NamedFrame, 4> frames_;
};

/// Parses the line-oriented chain format:
///   chain <name> dof <d>
///   joint <name> axis x y z origin tx ty tz qw qx qy qz limits lo hi
///   frame <shoulder|elbow|wrist|ee> after <joint-name|base> offset tx ty tz qw qx qy qz
/// Lines starting with '#' are comments.
KinematicChain parse_chain(std::istream& in);
KinematicChain load_chain(const std::filesystem::path& path);

}  // namespace hlik
