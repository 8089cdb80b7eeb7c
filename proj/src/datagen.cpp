// SPDX-License-Identifier: Apache-2.0
#include "hlik/datagen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "hlik/errors.hpp"
#include "hlik/parallel.hpp"

namespace hlik {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxAttempts = 100;
constexpr int kFilterSubsteps = 20;

// Wrist sampling region (right arm, shoulder frame).
const Vec3 kRegionLo(0.10, -0.30, -0.34);
const Vec3 kRegionHi(0.40, 0.10, 0.10);
constexpr double kMinReach = 0.15;
constexpr double kMaxReach = 0.50;
// Reject wrist directions too close to vertical, where the swivel reference
// (straight down, projected) degenerates.
constexpr double kMaxVerticalCosine = 0.9;

constexpr int kSinusoids = 3;

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Sum of sinusoids per axis around a centre; analytic derivative available.
struct SmoothPath {
  Vec3 centre = Vec3::Zero();
  std::array<Vec3, kSinusoids> amplitude, frequency, phase;

  Vec3 at(double t) const {
    Vec3 p = centre;
    for (int k = 0; k < kSinusoids; ++k) {
      for (int a = 0; a < 3; ++a) p[a] += amplitude[k][a] * std::sin(kTwoPi * frequency[k][a] * t + phase[k][a]);
    }
    return p;
  }
  Vec3 rate(double t) const {
    Vec3 v = Vec3::Zero();
    for (int k = 0; k < kSinusoids; ++k) {
      for (int a = 0; a < 3; ++a) {
        const double w = kTwoPi * frequency[k][a];
        v[a] += amplitude[k][a] * w * std::cos(w * t + phase[k][a]);
      }
    }
    return v;
  }
};

class TrajectoryRng {
 public:
  explicit TrajectoryRng(uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  Vec3 uniform(const Vec3& lo, const Vec3& hi) {
    return {uniform(lo[0], hi[0]), uniform(lo[1], hi[1]), uniform(lo[2], hi[2])};
  }

 private:
  std::mt19937_64 gen_;
};

SmoothPath random_path(TrajectoryRng& rng, const Vec3& centre, double amp_lo, double amp_hi,
                       double f_lo, double f_hi) {
  SmoothPath p;
  p.centre = centre;
  for (int k = 0; k < kSinusoids; ++k) {
    p.amplitude[k] = rng.uniform(Vec3::Constant(amp_lo), Vec3::Constant(amp_hi));
    p.frequency[k] = rng.uniform(Vec3::Constant(f_lo), Vec3::Constant(f_hi));
    p.phase[k] = rng.uniform(Vec3::Zero(), Vec3::Constant(kTwoPi));
  }
  return p;
}

bool wrist_ok(const Vec3& w) {
  const double d = w.norm();
  if (d < kMinReach || d > kMaxReach) return false;
  if (std::abs(w.z()) / d > kMaxVerticalCosine) return false;
  return (w.array() >= kRegionLo.array()).all() && (w.array() <= kRegionHi.array()).all();
}

// Orthonormal swivel basis around the shoulder-wrist axis: u along the
// axis, r0 the projected downward direction, v = u x r0.
void swivel_basis(const Vec3& wrist, Vec3& u, Vec3& r0, Vec3& v) {
  u = wrist.normalized();
  const Vec3 down(0, 0, -1);
  r0 = down - down.dot(u) * u;
  // Only reachable for a vertical shoulder-wrist axis (never generated).
  if (r0.norm() < 1e-9) r0 = Vec3::UnitX() - u.x() * u;
  r0.normalize();
  v = u.cross(r0);
}

Vec3 place_elbow(const Vec3& wrist, double phi, const ArmGeometry& g) {
  const double d = wrist.norm();
  const double a = (g.upper_arm * g.upper_arm - g.forearm * g.forearm + d * d) / (2.0 * d);
  const double rho = std::sqrt(std::max(g.upper_arm * g.upper_arm - a * a, 0.0));
  Vec3 u, r0, v;
  swivel_basis(wrist, u, r0, v);
  return a * u + rho * (std::cos(phi) * r0 + std::sin(phi) * v);
}

Trajectory generate_right(uint64_t seed, const GenerateOptions& o, int n_frames) {
  TrajectoryRng rng(seed);
  const Vec3 half = 0.5 * (kRegionHi - kRegionLo);
  const Vec3 mid = 0.5 * (kRegionHi + kRegionLo);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const Vec3 centre = rng.uniform(kRegionLo + Vec3::Constant(0.06), kRegionHi - Vec3::Constant(0.06));
    const SmoothPath wrist = random_path(rng, centre, 0.01, 0.045, 0.05, 0.45);
    const SmoothPath wrist_pert = random_path(rng, rng.uniform(Vec3::Constant(-o.policy.wrist_bias_range), Vec3::Constant(o.policy.wrist_bias_range)),
                                              0.02, 0.12, 0.05, 0.4);
    const double offset = rng.uniform(-o.policy.offset_range, o.policy.offset_range);

    bool ok = true;
    for (int i = 0; i < n_frames && ok; ++i) ok = wrist_ok(wrist.at(i * o.dt));
    if (!ok) continue;

    const SwivelPolicy& pol = o.policy;
    auto command = [&](double t) {
      const Vec3 s = (wrist.at(t) - mid).cwiseQuotient(half);
      return pol.base_angle + offset + pol.gain.dot(s) + pol.velocity_gain * wrist.rate(t).z();
    };

    Trajectory traj;
    traj.dt = o.dt;
    traj.arm = Arm::Right;
    traj.frames.reserve(n_frames);
    const double omega = 1.0 / pol.time_constant;
    const double h = o.dt / kFilterSubsteps;
    double phi = command(0.0), phi_rate = 0.0;
    for (int i = 0; i < n_frames; ++i) {
      const double t = i * o.dt;
      if (i > 0) {
        const double target = command(t);
        for (int k = 0; k < kFilterSubsteps; ++k) {
          phi_rate += h * (omega * omega * (target - phi) - 2.0 * omega * phi_rate);
          phi += h * phi_rate;
        }
      }
      const Vec3 w = wrist.at(t);
      const Vec3 e = place_elbow(w, phi, o.geometry);
      const UnitQuaternion r_el = elbow_orientation(e, w);
      const UnitQuaternion r_ee = r_el * UnitQuaternion::from_rotation_vector(wrist_pert.at(t));
      const Vec3 ee = w + o.geometry.hand * r_ee.rotate(Vec3::UnitZ());
      traj.frames.push_back({t, Pose{r_ee, ee}, Pose{r_el, e}});
    }
    return traj;
  }
  throw UnreachableGeometry("could not place a wrist path inside the workspace after " +
                            std::to_string(kMaxAttempts) + " attempts");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* const kCsvHeader =
    "traj_id,arm,t,ee_px,ee_py,ee_pz,ee_qw,ee_qx,ee_qy,ee_qz,"
    "el_px,el_py,el_pz,el_qw,el_qx,el_qy,el_qz";
constexpr int kCsvColumns = 17;

}  // namespace

std::string_view to_string(Arm a) { return a == Arm::Left ? "left" : "right"; }

Arm parse_arm(std::string_view s) {
  if (s == "left") return Arm::Left;
  if (s == "right") return Arm::Right;
  throw ParseError("unknown arm '" + std::string(s) + "'");
}

double swivel_angle(const Vec3& elbow, const Vec3& wrist) {
  Vec3 u, r0, v;
  swivel_basis(wrist, u, r0, v);
  return std::atan2(elbow.dot(v), elbow.dot(r0));
}

Vec3 wrist_from_ee(const Pose& ee, const ArmGeometry& geometry) {
  return ee.translation - geometry.hand * ee.rotation.rotate(Vec3::UnitZ());
}

UnitQuaternion elbow_orientation(const Vec3& elbow, const Vec3& wrist) {
  const Vec3 z = (wrist - elbow).normalized();
  // Shoulder at the origin: x continues the upper arm, away from the shoulder.
  const Vec3 x = (elbow - elbow.dot(z) * z).normalized();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return UnitQuaternion::from_matrix(r);
}

Pose feasible_elbow(const Vec3& elbow_guess, const Pose& ee, const ArmGeometry& g) {
  Vec3 w = wrist_from_ee(ee, g);
  const double lo = std::abs(g.upper_arm - g.forearm) + 1e-9;
  const double hi = g.upper_arm + g.forearm - 1e-9;
  const double d = std::clamp(w.norm(), lo, hi);
  if (w.norm() < 1e-12) w = Vec3(0, 0, -1);
  w = d * w.normalized();
  const double a = (g.upper_arm * g.upper_arm - g.forearm * g.forearm + d * d) / (2.0 * d);
  const double rho = std::sqrt(std::max(g.upper_arm * g.upper_arm - a * a, 0.0));
  Vec3 u, r0, v;
  swivel_basis(w, u, r0, v);
  const Vec3 radial = elbow_guess - elbow_guess.dot(u) * u;
  const Vec3 dir = radial.norm() > 1e-12 ? Vec3(radial.normalized()) : r0;
  const Vec3 e = a * u + rho * dir;
  return {elbow_orientation(e, w), e};
}

std::pair<Pose, Pose> extract_relative(const Pose& world_shoulder, const Pose& world_elbow,
                                       const Pose& world_ee) {
  const Pose inv = inverse(world_shoulder);
  return {inv * world_elbow, inv * world_ee};
}

Trajectory mirror(const Trajectory& t) {
  Trajectory m = t;
  m.arm = t.arm == Arm::Left ? Arm::Right : Arm::Left;
  for (TrajectoryFrame& f : m.frames) {
    f.ee_in_shoulder = mirror_y(f.ee_in_shoulder);
    f.elbow_in_shoulder = mirror_y(f.elbow_in_shoulder);
  }
  return m;
}

Dataset generate(const GenerateOptions& o) {
  if (!(o.dt > 0.0)) throw ValidationError("dt must be positive");
  if (o.n_traj < 0) throw ValidationError("trajectory count must be non-negative");
  if (o.history < 1) throw ValidationError("history length must be at least 1");
  if (o.duration < (o.history + 1) * o.dt) {
    throw ValidationError("duration must cover at least history + 1 frames");
  }
  if (!(o.policy.time_constant > 0.0)) throw ValidationError("swivel time constant must be positive");
  const int n_frames = static_cast<int>(std::llround(o.duration / o.dt)) + 1;

  Dataset data(o.n_traj);
  parallel_for(static_cast<size_t>(o.n_traj), o.threads, [&](size_t i) {
    Trajectory t = generate_right(splitmix64(o.seed ^ splitmix64(i)), o, n_frames);
    if (i % 2 == 1) t = mirror(t);
    char id[32];
    std::snprintf(id, sizeof id, "traj_%04zu", i);
    t.id = id;
    data[i] = std::move(t);
  });
  return data;
}

void export_csv(std::ostream& out, const Dataset& data) {
  out << kCsvHeader << '\n';
  for (const Trajectory& t : data) {
    for (const TrajectoryFrame& f : t.frames) {
      out << t.id << ',' << to_string(t.arm) << ',' << format_double(f.t);
      for (const Pose* p : {&f.ee_in_shoulder, &f.elbow_in_shoulder}) {
        const Vec7 v = to_vector7(*p);
        for (int k = 0; k < 7; ++k) out << ',' << format_double(v[k]);
      }
      out << '\n';
    }
  }
}

void export_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  export_csv(out, data);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Dataset import_csv(std::istream& in) {
  auto fail = [](int row, int col, const std::string& what) -> ParseError {
    return ParseError("row " + std::to_string(row) + ", column " + std::to_string(col) + ": " + what);
  };

  std::string line;
  if (!std::getline(in, line)) throw fail(1, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw fail(1, 1, "unexpected header");

  Dataset data;
  std::map<std::string, bool> seen;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const size_t comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<int>(fields.size()) != kCsvColumns) {
      throw fail(row, static_cast<int>(std::min<size_t>(fields.size(), kCsvColumns)) + 1,
                 "expected " + std::to_string(kCsvColumns) + " fields, found " +
                     std::to_string(fields.size()));
    }

    std::array<double, kCsvColumns - 2> num{};
    for (int c = 2; c < kCsvColumns; ++c) {
      const std::string_view f = fields[c];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), num[c - 2]);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(num[c - 2])) {
        throw fail(row, c + 1, "not a number: '" + std::string(f) + "'");
      }
    }
    Arm arm;
    try {
      arm = parse_arm(fields[1]);
    } catch (const ParseError&) {
      throw fail(row, 2, "arm must be 'left' or 'right'");
    }

    const std::string id(fields[0]);
    if (id.empty()) throw fail(row, 1, "empty trajectory id");
    if (data.empty() || data.back().id != id) {
      if (seen.count(id)) throw fail(row, 1, "rows of trajectory '" + id + "' are not contiguous");
      seen[id] = true;
      data.push_back(Trajectory{id, 0.0, arm, {}});
    }
    Trajectory& traj = data.back();
    if (traj.arm != arm) throw fail(row, 2, "arm changes within trajectory '" + id + "'");

    Vec7 ee, el;
    for (int k = 0; k < 7; ++k) {
      ee[k] = num[1 + k];
      el[k] = num[8 + k];
    }
    TrajectoryFrame frame;
    frame.t = num[0];
    try {
      frame.ee_in_shoulder = from_vector7(ee);
    } catch (const ValidationError&) {
      throw fail(row, 7, "degenerate EE quaternion");
    }
    try {
      frame.elbow_in_shoulder = from_vector7(el);
    } catch (const ValidationError&) {
      throw fail(row, 14, "degenerate elbow quaternion");
    }

    if (!traj.frames.empty()) {
      const double step = frame.t - traj.frames.back().t;
      if (traj.frames.size() == 1) {
        if (!(step > 0.0)) throw fail(row, 3, "time must increase within a trajectory");
        traj.dt = step;
      } else if (std::abs(step - traj.dt) > 1e-6 * traj.dt) {
        throw fail(row, 3, "non-uniform time step (" + format_double(step) + " vs " +
                               format_double(traj.dt) + ")");
      }
    }
    traj.frames.push_back(frame);
  }
  return data;
}

Dataset import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return import_csv(in);
}

WindowSet window(const Dataset& data, int history) {
  if (history < 1) throw ValidationError("history length must be at least 1");
  WindowSet out;
  for (size_t ti = 0; ti < data.size(); ++ti) {
    const int n = static_cast<int>(data[ti].frames.size());
    if (n <= history) ++out.short_trajectories;
    for (int i = history; i < n; ++i) out.windows.push_back({static_cast<int>(ti), i});
  }
  return out;
}

FrameVector frame_vector(const Pose& ee, const Pose& elbow) {
  FrameVector v;
  v << to_vector7(ee), to_vector7(elbow);
  return v;
}

FrameVector frame_vector(const TrajectoryFrame& f) {
  return frame_vector(f.ee_in_shoulder, f.elbow_in_shoulder);
}

}  // namespace hlik
