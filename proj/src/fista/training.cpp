// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <numbers>
#include <random>

#include "hlik/errors.hpp"
#include "hlik/fista/train.hpp"

namespace hlik::fista {
namespace {

constexpr double kStdFloor = 1e-8;
constexpr size_t kEvalChunk = 4096;

template <int N>
void mean_std(const std::vector<Eigen::Matrix<double, N, 1>>& xs, Eigen::Matrix<double, N, 1>& mean,
              Eigen::Matrix<double, N, 1>& stdev) {
  mean.setZero();
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  stdev.setZero();
  for (const auto& x : xs) stdev += (x - mean).cwiseAbs2();
  stdev = (stdev / static_cast<double>(xs.size())).cwiseSqrt();
  for (int i = 0; i < N; ++i) {
    if (stdev[i] < kStdFloor) stdev[i] = 1.0;
  }
}

Dataset subset(const Dataset& data, const std::vector<int>& idx) {
  Dataset out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

Dataset to_right_arm(const Dataset& data) {
  Dataset out = data;
  for (Trajectory& t : out) {
    if (t.arm == Arm::Left) t = mirror(t);
  }
  return out;
}

Split split_trajectories(int n, double val_fraction, uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ValidationError("validation fraction must be in [0, 1)");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(seed);
  std::shuffle(order.begin(), order.end(), gen);
  int n_val = static_cast<int>(std::llround(val_fraction * n));
  if (val_fraction > 0.0 && n >= 2) n_val = std::max(n_val, 1);
  n_val = std::min(n_val, std::max(n - 1, 0));
  Split s;
  s.val.assign(order.begin(), order.begin() + n_val);
  s.train.assign(order.begin() + n_val, order.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

Normalizer fit_normalizer(const Dataset& data) {
  std::vector<FrameVector> frames;
  std::vector<Vec7> ee, el;
  for (const Trajectory& t : data) {
    for (const TrajectoryFrame& f : t.frames) {
      frames.push_back(frame_vector(f));
      ee.push_back(to_vector7(f.ee_in_shoulder));
      el.push_back(to_vector7(f.elbow_in_shoulder));
    }
  }
  if (frames.empty()) throw EmptyDataset("no frames to fit the normalizer on");
  Normalizer n;
  mean_std(frames, n.frame_mean, n.frame_std);
  mean_std(ee, n.target_mean, n.target_std);
  mean_std(el, n.label_mean, n.label_std);
  return n;
}

WindowSource::WindowSource(const Dataset& data, const Normalizer& norm, int history)
    : history_(history), normalizer_(&norm), data_(&data), windows_(window(data, history)) {
  for (const Trajectory& t : data) {
    const Eigen::Index n = static_cast<Eigen::Index>(t.frames.size());
    Eigen::MatrixXd f(14, n), tg(7, n), lb(7, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const TrajectoryFrame& fr = t.frames[i];
      f.col(i) = norm.normalize_frame(frame_vector(fr));
      tg.col(i) = norm.normalize_target(to_vector7(fr.ee_in_shoulder));
      lb.col(i) = norm.normalize_label(to_vector7(fr.elbow_in_shoulder));
    }
    frames_.push_back(std::move(f));
    targets_.push_back(std::move(tg));
    labels_.push_back(std::move(lb));
  }
}

void WindowSource::gather(const std::vector<SampleWindow>& windows, size_t begin, size_t end,
                          Batch& batch, Eigen::MatrixXd& labels) const {
  const Eigen::Index b = static_cast<Eigen::Index>(end - begin);
  batch.frames.resize(history_);
  for (auto& f : batch.frames) f.resize(14, b);
  batch.target.resize(7, b);
  labels.resize(7, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const SampleWindow& w = windows[begin + j];
    for (int t = 0; t < history_; ++t) batch.frames[t].col(j) = frames_[w.trajectory].col(w.index - history_ + t);
    batch.target.col(j) = targets_[w.trajectory].col(w.index);
    labels.col(j) = labels_[w.trajectory].col(w.index);
  }
}

void WindowSource::gather(const std::vector<SampleWindow>& windows, size_t begin, size_t end, Batch& batch,
                          Eigen::MatrixXd& labels, const Jitter& jitter) const {
  gather(windows, begin, end, batch, labels);
  if (jitter.stddev <= 0.0 || jitter.prob <= 0.0) return;
  std::bernoulli_distribution coin(jitter.prob);
  std::normal_distribution<double> angle(0.0, jitter.stddev);
  for (size_t j = 0; j < end - begin; ++j) {
    if (!coin(*jitter.gen)) continue;
    const double delta = angle(*jitter.gen);
    const SampleWindow& w = windows[begin + j];
    const Trajectory& traj = (*data_)[w.trajectory];
    for (int t = 0; t < history_; ++t) {
      const TrajectoryFrame& f = traj.frames[w.index - history_ + t];
      const Vec3 axis = wrist_from_ee(f.ee_in_shoulder, jitter.geometry).normalized();
      const Pose turn{UnitQuaternion::from_axis_angle(axis, delta), Vec3::Zero()};
      const FrameVector raw = frame_vector(f.ee_in_shoulder, turn * f.elbow_in_shoulder);
      batch.frames[t].col(static_cast<Eigen::Index>(j)) = normalizer_->normalize_frame(raw);
    }
  }
}

double evaluate_mse(const Model& model, const WindowSource& source,
                    const std::vector<SampleWindow>& windows) {
  if (windows.empty()) return 0.0;
  double sum = 0.0;
  Batch batch;
  Eigen::MatrixXd labels;
  for (size_t begin = 0; begin < windows.size(); begin += kEvalChunk) {
    const size_t end = std::min(windows.size(), begin + kEvalChunk);
    source.gather(windows, begin, end, batch, labels);
    sum += (forward(model, batch) - labels).squaredNorm();
  }
  return sum / (7.0 * static_cast<double>(windows.size()));
}

TrainResult train(const ModelConfig& config, const Dataset& data, const TrainOptions& o,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  if (o.batch < 1) throw ValidationError("batch size must be at least 1");
  if (o.epochs < 1) throw ValidationError("epoch count must be at least 1");
  if (o.window_stride < 1) throw ValidationError("window stride must be at least 1");
  if (!(o.lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  if (!(o.history_jitter >= 0.0)) throw ValidationError("history jitter must be non-negative");
  if (!(o.history_jitter_prob >= 0.0 && o.history_jitter_prob <= 1.0)) {
    throw ValidationError("history jitter probability must be in [0, 1]");
  }
  if (data.empty()) throw EmptyDataset("no trajectories to train on");

  const Dataset right = to_right_arm(data);
  const Split split = split_trajectories(static_cast<int>(right.size()), o.val_fraction, o.seed);
  const Dataset train_data = subset(right, split.train);
  const Dataset val_data = subset(right, split.val);

  TrainResult result;
  TrainingReport& report = result.report;
  for (const Trajectory& t : train_data) report.train_ids.push_back(t.id);
  for (const Trajectory& t : val_data) report.val_ids.push_back(t.id);

  Model model = Model::random(config, o.seed);
  model.normalizer = fit_normalizer(train_data);
  const WindowSource train_src(train_data, model.normalizer, config.history);
  const WindowSource val_src(val_data, model.normalizer, config.history);
  const std::vector<SampleWindow>& all_train = train_src.windows().windows;
  const std::vector<SampleWindow>& all_val = val_src.windows().windows;
  if (all_train.empty()) throw EmptyDataset("training split has no windows of length " + std::to_string(config.history + 1));
  report.train_windows = all_train.size();
  report.val_windows = all_val.size();

  std::mt19937_64 shuffle_gen(o.seed ^ 0x5DEECE66Dull);
  std::mt19937_64 jitter_gen(o.seed ^ 0x9E3779B97F4A7C15ull);
  const WindowSource::Jitter jitter{o.history_jitter, o.history_jitter_prob, o.geometry, &jitter_gen};
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.params.size());
  Eigen::VectorXd grad;
  Batch batch;
  Eigen::MatrixXd labels;
  std::vector<SampleWindow> order;
  result.best = model;

  for (int epoch = 1; epoch <= o.epochs; ++epoch) {
    order.clear();
    const size_t phase = static_cast<size_t>((epoch - 1) % o.window_stride);
    for (size_t i = phase; i < all_train.size(); i += o.window_stride) order.push_back(all_train[i]);
    std::shuffle(order.begin(), order.end(), shuffle_gen);
    const double lr =
        o.cosine_decay ? o.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (epoch - 1) / o.epochs)) : o.lr;

    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += o.batch) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(o.batch));
      train_src.gather(order, begin, end, batch, labels, jitter);
      const double loss = loss_and_gradient(model, batch, labels, &grad);
      loss_sum += loss * static_cast<double>(end - begin);
      velocity = o.momentum * velocity - lr * grad;
      model.params += velocity;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = loss_sum / static_cast<double>(order.size());
    stats.val_mse = all_val.empty() ? stats.train_mse : evaluate_mse(model, val_src, all_val);
    if (!std::isfinite(stats.val_mse)) {
      throw ValidationError("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
    }
    report.epochs.push_back(stats);
    if (report.best_epoch < 0 || stats.val_mse < report.best_val_mse) {
      report.best_epoch = epoch;
      report.best_val_mse = stats.val_mse;
      result.best = model;
    }
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

void write_learning_curve(const std::filesystem::path& path, const TrainingReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,train_mse,val_mse\n";
  out.precision(17);
  for (const EpochStats& e : report.epochs) out << e.epoch << ',' << e.train_mse << ',' << e.val_mse << '\n';
}

}  // namespace hlik::fista
