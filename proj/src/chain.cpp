// SPDX-License-Identifier: Apache-2.0
#include "hlik/chain.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "hlik/errors.hpp"

namespace hlik {
namespace {

constexpr double kAxisTolerance = 1e-9;
constexpr double kQuaternionTolerance = 1e-6;

struct LineReader {
  int line_no;
  std::vector<std::string> tokens;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
  }

  void expect(size_t index, std::string_view keyword) const {
    if (index >= tokens.size() || tokens[index] != keyword) {
      fail("expected '" + std::string(keyword) + "' at field " + std::to_string(index + 1));
    }
  }

  double number(size_t index, std::string_view field) const {
    if (index >= tokens.size()) fail("missing field '" + std::string(field) + "'");
    const std::string& s = tokens[index];
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || !std::isfinite(v)) {
      fail("field '" + std::string(field) + "' is not a number: '" + s + "'");
    }
    return v;
  }

  Pose pose(size_t index, std::string_view field) const {
    const Vec3 t(number(index, field), number(index + 1, field), number(index + 2, field));
    const double qw = number(index + 3, field), qx = number(index + 4, field),
                 qy = number(index + 5, field), qz = number(index + 6, field);
    const double n = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    if (std::abs(n - 1.0) > kQuaternionTolerance) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + std::string(field) +
                            " quaternion is not unit (norm " + std::to_string(n) + ")");
    }
    return {UnitQuaternion(qw, qx, qy, qz), t};
  }
};

std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

}  // namespace

std::string_view to_string(FrameName f) {
  switch (f) {
    case FrameName::Shoulder: return "shoulder";
    case FrameName::Elbow: return "elbow";
    case FrameName::Wrist: return "wrist";
    case FrameName::Ee: return "ee";
  }
  return "?";
}

FrameName parse_frame_name(std::string_view s) {
  for (FrameName f : kAllFrames) {
    if (to_string(f) == s) return f;
  }
  throw UnknownFrame("unknown frame '" + std::string(s) + "'");
}

KinematicChain::KinematicChain(std::string name, std::vector<JointSpec> joints,
                               std::array<NamedFrame, 4> frames)
    : name_(std::move(name)), joints_(std::move(joints)), frames_(frames) {
  for (const JointSpec& j : joints_) {
    if (std::abs(j.axis.norm() - 1.0) > kAxisTolerance) {
      throw ValidationError("joint '" + j.name + "' axis is not unit length");
    }
    if (!(j.lower <= j.upper)) {
      throw ValidationError("joint '" + j.name + "' has lower limit above upper limit");
    }
  }
  for (FrameName f : kAllFrames) {
    const int idx = frame(f).joint;
    if (idx < -1 || idx >= dof()) {
      throw ValidationError("frame '" + std::string(to_string(f)) +
                            "' references joint index " + std::to_string(idx));
    }
  }
  const int sh = frame(FrameName::Shoulder).joint;
  const int el = frame(FrameName::Elbow).joint;
  const int wr = frame(FrameName::Wrist).joint;
  const int ee = frame(FrameName::Ee).joint;
  if (!(el < ee)) throw ValidationError("elbow frame must precede the ee frame in the chain");
  if (!(sh <= el)) throw ValidationError("shoulder frame must not follow the elbow frame");
  if (!(el <= wr && wr <= ee)) {
    throw ValidationError("wrist frame must lie between the elbow and ee frames");
  }
}

void KinematicChain::check_size(const JointVector& q) const {
  if (q.size() != dof()) {
    throw DimensionMismatch("joint vector has " + std::to_string(q.size()) +
                            " entries, chain '" + name_ + "' has " + std::to_string(dof()));
  }
}

std::vector<Pose> KinematicChain::link_frames(const JointVector& q) const {
  check_size(q);
  std::vector<Pose> links;
  links.reserve(joints_.size() + 1);
  links.push_back(Pose::identity());
  for (int i = 0; i < dof(); ++i) {
    const JointSpec& j = joints_[i];
    const Pose rot{UnitQuaternion::from_axis_angle(j.axis, q[i]), Vec3::Zero()};
    links.push_back(links.back() * j.origin * rot);
  }
  return links;
}

Pose KinematicChain::fk(const JointVector& q, FrameName f) const {
  const std::vector<Pose> links = link_frames(q);
  const NamedFrame& nf = frame(f);
  return links[nf.joint + 1] * nf.offset;
}

FramePoses KinematicChain::fk_all(const JointVector& q) const {
  const std::vector<Pose> links = link_frames(q);
  FramePoses out;
  for (FrameName f : kAllFrames) {
    const NamedFrame& nf = frame(f);
    out.poses[static_cast<int>(f)] = links[nf.joint + 1] * nf.offset;
  }
  return out;
}

FrameJacobian KinematicChain::jacobian(const JointVector& q, FrameName f) const {
  const std::vector<Pose> links = link_frames(q);
  const NamedFrame& nf = frame(f);
  const Vec3 p = (links[nf.joint + 1] * nf.offset).translation;
  FrameJacobian jac = FrameJacobian::Zero(6, dof());
  for (int i = 0; i <= nf.joint; ++i) {
    // Joint i rotates about its axis expressed in the frame just after its
    // fixed origin; the joint's own rotation leaves that axis unchanged.
    const Pose axis_frame = links[i] * joints_[i].origin;
    const Vec3 a = axis_frame.rotation.rotate(joints_[i].axis);
    jac.block<3, 1>(0, i) = a.cross(p - axis_frame.translation);
    jac.block<3, 1>(3, i) = a;
  }
  return jac;
}

ClampResult KinematicChain::clamp(const JointVector& q) const {
  check_size(q);
  ClampResult out{q, std::vector<bool>(joints_.size(), false)};
  for (int i = 0; i < dof(); ++i) {
    if (out.q[i] < joints_[i].lower) {
      out.q[i] = joints_[i].lower;
      out.limit_active[i] = true;
    } else if (out.q[i] > joints_[i].upper) {
      out.q[i] = joints_[i].upper;
      out.limit_active[i] = true;
    }
  }
  return out;
}

bool KinematicChain::within_limits(const JointVector& q) const {
  check_size(q);
  for (int i = 0; i < dof(); ++i) {
    if (q[i] < joints_[i].lower || q[i] > joints_[i].upper) return false;
  }
  return true;
}

KinematicChain parse_chain(std::istream& in) {
  std::optional<std::string> name;
  int declared_dof = -1;
  std::vector<JointSpec> joints;
  std::map<std::string, int> joint_index;
  struct PendingFrame {
    int line_no;
    std::string after;
    Pose offset;
  };
  std::array<std::optional<PendingFrame>, 4> pending;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    LineReader r{line_no, split(line)};
    if (r.tokens.empty()) continue;
    const std::string& kind = r.tokens[0];

    if (kind == "chain") {
      if (name) r.fail("duplicate 'chain' header");
      if (r.tokens.size() != 4) r.fail("header must be 'chain <name> dof <d>'");
      r.expect(2, "dof");
      const double d = r.number(3, "dof");
      if (d < 0 || d != std::floor(d)) r.fail("dof must be a non-negative integer");
      name = r.tokens[1];
      declared_dof = static_cast<int>(d);
    } else if (!name) {
      r.fail("expected 'chain <name> dof <d>' header first");
    } else if (kind == "joint") {
      if (r.tokens.size() != 17) r.fail("joint line must have 17 fields");
      r.expect(2, "axis");
      r.expect(6, "origin");
      r.expect(14, "limits");
      JointSpec j;
      j.name = r.tokens[1];
      j.axis = Vec3(r.number(3, "axis"), r.number(4, "axis"), r.number(5, "axis"));
      j.origin = r.pose(7, "origin");
      j.lower = r.number(15, "limits");
      j.upper = r.number(16, "limits");
      if (joint_index.count(j.name)) r.fail("duplicate joint '" + j.name + "'");
      joint_index[j.name] = static_cast<int>(joints.size());
      joints.push_back(std::move(j));
    } else if (kind == "frame") {
      if (r.tokens.size() != 12) r.fail("frame line must have 12 fields");
      r.expect(2, "after");
      r.expect(4, "offset");
      FrameName f;
      try {
        f = parse_frame_name(r.tokens[1]);
      } catch (const UnknownFrame&) {
        r.fail("unknown frame name '" + r.tokens[1] + "'");
      }
      auto& slot = pending[static_cast<int>(f)];
      if (slot) r.fail("duplicate frame '" + r.tokens[1] + "'");
      slot = PendingFrame{line_no, r.tokens[3], r.pose(5, "offset")};
    } else {
      r.fail("unknown record '" + kind + "'");
    }
  }

  if (!name) throw ParseError("line " + std::to_string(line_no) + ": empty chain file");
  if (static_cast<int>(joints.size()) != declared_dof) {
    throw ValidationError("header declares dof " + std::to_string(declared_dof) + " but " +
                          std::to_string(joints.size()) + " joints are listed");
  }

  std::array<NamedFrame, 4> frames;
  for (FrameName f : kAllFrames) {
    const auto& p = pending[static_cast<int>(f)];
    if (!p) throw ValidationError("missing frame '" + std::string(to_string(f)) + "'");
    int idx = -1;
    if (p->after != "base") {
      const auto it = joint_index.find(p->after);
      if (it == joint_index.end()) {
        throw ValidationError("line " + std::to_string(p->line_no) + ": frame '" +
                              std::string(to_string(f)) + "' attaches to unknown joint '" +
                              p->after + "'");
      }
      idx = it->second;
    }
    frames[static_cast<int>(f)] = NamedFrame{idx, p->offset};
  }
  return KinematicChain(*name, std::move(joints), frames);
}

KinematicChain load_chain(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain file '" + path.string() + "'");
  return parse_chain(in);
}

}  // namespace hlik
