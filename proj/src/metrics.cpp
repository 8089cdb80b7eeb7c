// SPDX-License-Identifier: Apache-2.0
#include "hlik/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hlik/errors.hpp"

namespace hlik {
namespace {

double segment_angle(const Vec3& a, const Vec3& b, double alpha) {
  const double c = a.dot(b) / (a.norm() * b.norm() + alpha);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

MeanStd mean_std(const std::vector<const MetricValues*>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  for (int k = 0; k < MetricValues::kCount; ++k) {
    double s = 0.0;
    for (const MetricValues* x : xs) s += (*x)[k];
    const double m = s / n;
    double v = 0.0;
    for (const MetricValues* x : xs) v += ((*x)[k] - m) * ((*x)[k] - m);
    out.mean[k] = m;
    out.std[k] = std::sqrt(v / n);
  }
  return out;
}

MetricValues pooled(const std::vector<TrajectoryErrors>& streams, const std::vector<int>& members) {
  MetricValues sum;
  size_t n = 0;
  for (int i : members) {
    for (const MetricValues& s : streams[i].steps) {
      for (int k = 0; k < MetricValues::kCount; ++k) sum[k] += s[k];
    }
    n += streams[i].steps.size();
  }
  if (n > 0) {
    for (int k = 0; k < MetricValues::kCount; ++k) sum[k] /= static_cast<double>(n);
  }
  return sum;
}

VariantReport summarize(const std::vector<TrajectoryErrors>& streams, const std::vector<bool>& challenging) {
  VariantReport r;
  std::vector<int> all, hard;
  for (size_t i = 0; i < streams.size(); ++i) {
    r.per_trajectory.push_back(streams[i].mean());
    all.push_back(static_cast<int>(i));
    if (challenging[i]) hard.push_back(static_cast<int>(i));
  }
  auto pick = [&](const std::vector<int>& idx) {
    std::vector<const MetricValues*> xs;
    for (int i : idx) xs.push_back(&r.per_trajectory[i]);
    return xs;
  };
  r.full = mean_std(pick(all));
  r.challenging = mean_std(pick(hard));
  r.full_pooled = pooled(streams, all);
  r.challenging_pooled = pooled(streams, hard);
  return r;
}

MetricValues reduction(const MetricValues& base, const MetricValues& ours) {
  MetricValues out;
  for (int k = 0; k < MetricValues::kCount; ++k) {
    out[k] = base[k] == 0.0 ? 0.0 : 100.0 * (base[k] - ours[k]) / base[k];
  }
  return out;
}

nlohmann::json to_json(const MeanStd& m) { return {{"mean", to_json(m.mean)}, {"std", to_json(m.std)}}; }

}  // namespace

double keypoint_position_error(const StepSnapshot& ref, const StepSnapshot& sol) {
  return (ref.elbow - sol.elbow).squaredNorm() + (ref.wrist - sol.wrist).squaredNorm() +
         (ref.ee - sol.ee).squaredNorm();
}

double line_angle_error(const StepSnapshot& ref, const StepSnapshot& sol, double alpha) {
  return segment_angle(ref.elbow - ref.shoulder, sol.elbow - sol.shoulder, alpha) +
         segment_angle(ref.wrist - ref.elbow, sol.wrist - sol.elbow, alpha) +
         segment_angle(ref.ee - ref.wrist, sol.ee - sol.wrist, alpha);
}

double ee_position_error(const StepSnapshot& ref, const StepSnapshot& sol) {
  return (ref.ee - sol.ee).squaredNorm();
}

double ee_orientation_error(const StepSnapshot& ref, const StepSnapshot& sol) {
  const double a = geodesic_angle(ref.ee_rotation, sol.ee_rotation);
  return a * a;
}

const std::array<const char*, MetricValues::kCount>& MetricValues::names() {
  static const std::array<const char*, kCount> n = {"kp_pos_err_sq", "kp_pos_err_rms", "line_angle_err",
                                                    "ee_pos_err_sq", "ee_ori_err_sq"};
  return n;
}

double& MetricValues::operator[](int i) {
  switch (i) {
    case 0: return kp_pos_err_sq;
    case 1: return kp_pos_err_rms;
    case 2: return line_angle_err;
    case 3: return ee_pos_err_sq;
    default: return ee_ori_err_sq;
  }
}

double MetricValues::operator[](int i) const { return const_cast<MetricValues&>(*this)[i]; }

MetricValues step_metrics(const StepSnapshot& ref, const StepSnapshot& sol, double alpha) {
  MetricValues m;
  m.kp_pos_err_sq = keypoint_position_error(ref, sol);
  m.kp_pos_err_rms = std::sqrt(m.kp_pos_err_sq);
  m.line_angle_err = line_angle_error(ref, sol, alpha);
  m.ee_pos_err_sq = ee_position_error(ref, sol);
  m.ee_ori_err_sq = ee_orientation_error(ref, sol);
  return m;
}

MetricValues TrajectoryErrors::mean() const {
  MetricValues sum;
  if (steps.empty()) return sum;
  for (const MetricValues& s : steps) {
    for (int k = 0; k < MetricValues::kCount; ++k) sum[k] += s[k];
  }
  for (int k = 0; k < MetricValues::kCount; ++k) sum[k] /= static_cast<double>(steps.size());
  return sum;
}

MetricsReport aggregate(const std::vector<TrajectoryErrors>& baseline, const std::vector<TrajectoryErrors>& hlik,
                        double challenging_fraction) {
  if (baseline.empty()) throw ValidationError("no trajectories to aggregate");
  if (!(challenging_fraction >= 0.0 && challenging_fraction <= 1.0)) {
    throw ValidationError("challenging fraction must be in [0, 1]");
  }
  if (baseline.size() != hlik.size()) {
    throw MismatchedStreams("baseline has " + std::to_string(baseline.size()) + " trajectories, HL-IK has " +
                            std::to_string(hlik.size()));
  }
  const size_t n = baseline.size();
  for (size_t i = 0; i < n; ++i) {
    if (baseline[i].id != hlik[i].id) {
      throw MismatchedStreams("trajectory " + std::to_string(i) + " is '" + baseline[i].id + "' for the baseline but '" +
                              hlik[i].id + "' for HL-IK");
    }
    if (baseline[i].steps.size() != hlik[i].steps.size()) {
      throw MismatchedStreams("trajectory '" + baseline[i].id + "' has " + std::to_string(baseline[i].steps.size()) +
                              " baseline steps but " + std::to_string(hlik[i].steps.size()) + " HL-IK steps");
    }
    if (baseline[i].steps.empty()) throw ValidationError("trajectory '" + baseline[i].id + "' has no steps");
  }

  MetricsReport r;
  r.challenging_fraction = challenging_fraction;
  for (const TrajectoryErrors& t : baseline) r.ids.push_back(t.id);

  std::vector<double> rank_key(n);
  for (size_t i = 0; i < n; ++i) rank_key[i] = baseline[i].mean().kp_pos_err_sq;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (rank_key[a] != rank_key[b]) return rank_key[a] > rank_key[b];
    return r.ids[a] < r.ids[b];
  });
  r.challenging_count = static_cast<int>(std::llround(challenging_fraction * static_cast<double>(n)));
  r.challenging.assign(n, false);
  for (int k = 0; k < r.challenging_count; ++k) r.challenging[order[k]] = true;

  r.baseline = summarize(baseline, r.challenging);
  r.hlik = summarize(hlik, r.challenging);
  r.reduction_full = reduction(r.baseline.full.mean, r.hlik.full.mean);
  r.reduction_challenging = reduction(r.baseline.challenging.mean, r.hlik.challenging.mean);
  return r;
}

nlohmann::json to_json(const MetricValues& v) {
  nlohmann::json j = nlohmann::json::object();
  for (int k = 0; k < MetricValues::kCount; ++k) j[MetricValues::names()[k]] = v[k];
  return j;
}

nlohmann::json to_json(const MetricsReport& r) {
  auto variant = [&](const VariantReport& v) {
    nlohmann::json per = nlohmann::json::array();
    for (size_t i = 0; i < r.ids.size(); ++i) {
      nlohmann::json row = to_json(v.per_trajectory[i]);
      row["traj_id"] = r.ids[i];
      row["challenging"] = static_cast<bool>(r.challenging[i]);
      per.push_back(row);
    }
    return nlohmann::json{{"full", to_json(v.full)},
                          {"challenging", to_json(v.challenging)},
                          {"full_pooled", to_json(v.full_pooled)},
                          {"challenging_pooled", to_json(v.challenging_pooled)},
                          {"per_trajectory", per}};
  };
  return {{"trajectories", r.ids.size()},
          {"challenging_fraction", r.challenging_fraction},
          {"challenging_count", r.challenging_count},
          {"aggregation", "mean of per-trajectory means; std over trajectories (population); "
                          "*_pooled = mean over all steps"},
          {"baseline", variant(r.baseline)},
          {"hlik", variant(r.hlik)},
          {"reduction_percent", {{"full", to_json(r.reduction_full)}, {"challenging", to_json(r.reduction_challenging)}}}};
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "traj_id,variant";
  for (const char* name : MetricValues::names()) out << ',' << name;
  out << ",challenging\n";
  out.precision(17);
  for (const auto& [label, v] : {std::pair{"baseline", &r.baseline}, std::pair{"hlik", &r.hlik}}) {
    for (size_t i = 0; i < r.ids.size(); ++i) {
      out << r.ids[i] << ',' << label;
      for (int k = 0; k < MetricValues::kCount; ++k) out << ',' << v->per_trajectory[i][k];
      out << ',' << (r.challenging[i] ? 1 : 0) << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace hlik
