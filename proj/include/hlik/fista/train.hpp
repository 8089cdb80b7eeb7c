// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hlik/datagen.hpp"
#include "hlik/fista/model.hpp"

namespace hlik::fista {

struct TrainOptions {
  double lr = 1e-3;
  double momentum = 0.9;
  /// Scale the learning rate of epoch e (1-based) by
  /// (1 + cos(pi (e - 1) / epochs)) / 2; otherwise it stays constant.
  bool cosine_decay = false;
  int batch = 64;
  int epochs = 200;
  uint64_t seed = 0;
  double val_fraction = 0.1;
  /// Use every k-th training window per epoch (offset rotates with the
  /// epoch, so all windows are visited over k epochs). Validation always
  /// uses every window.
  int window_stride = 1;
  /// Closed-loop robustness: each training window's elbow history is, with
  /// probability `history_jitter_prob`, turned about the per-frame
  /// shoulder-wrist axes by one angle ~ N(0, history_jitter^2) (radians),
  /// while the label stays the true elbow. The arm stays geometrically
  /// valid, so this mimics a robot whose elbow sits off the human swivel.
  /// 0 disables it. Validation windows are never perturbed.
  double history_jitter = 0.0;
  double history_jitter_prob = 0.5;
  ArmGeometry geometry;  // locates the wrist behind each history EE
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;  // mean over the epoch's windows, before each update
  double val_mse = 0.0;    // after the epoch
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_mse = 0.0;
  size_t train_windows = 0;
  size_t val_windows = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

struct TrainResult {
  Model best;  // parameters of the best validation epoch
  TrainingReport report;
};

/// Left-arm trajectories mirrored into the right-arm convention.
Dataset to_right_arm(const Dataset& data);

/// Trajectory-wise split: a seeded permutation, the first
/// round(val_fraction * n) trajectories go to validation (at least one when
/// val_fraction > 0 and n >= 2).
struct Split {
  std::vector<int> train;
  std::vector<int> val;
};
Split split_trajectories(int n, double val_fraction, uint64_t seed);

/// Statistics over every frame of the given trajectories. Throws
/// EmptyDataset when there are no frames.
Normalizer fit_normalizer(const Dataset& data);

/// Normalized per-trajectory tensors, from which batches are gathered.
class WindowSource {
 public:
  /// Keeps references to both arguments; they must outlive the source.
  WindowSource(const Dataset& right_arm_data, const Normalizer& normalizer, int history);
  /// Fills `batch` and `labels` (normalized) for the given windows.
  void gather(const std::vector<SampleWindow>& windows, size_t begin, size_t end, Batch& batch,
              Eigen::MatrixXd& labels) const;

  /// Swivel perturbation of the elbow history, see TrainOptions.
  struct Jitter {
    double stddev = 0.0;
    double prob = 0.0;
    ArmGeometry geometry;
    std::mt19937_64* gen = nullptr;
  };
  void gather(const std::vector<SampleWindow>& windows, size_t begin, size_t end, Batch& batch,
              Eigen::MatrixXd& labels, const Jitter& jitter) const;
  const WindowSet& windows() const { return windows_; }

 private:
  int history_;
  const Normalizer* normalizer_;
  const Dataset* data_;
  std::vector<Eigen::MatrixXd> frames_;  // 14 x n per trajectory
  std::vector<Eigen::MatrixXd> targets_;
  std::vector<Eigen::MatrixXd> labels_;
  WindowSet windows_;
};

/// Mean normalized MSE over the given windows (chunked forward passes).
double evaluate_mse(const Model& model, const WindowSource& source,
                    const std::vector<SampleWindow>& windows);

/// Throws EmptyDataset if the training split has no windows.
TrainResult train(const ModelConfig& config, const Dataset& data, const TrainOptions& options,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

/// CSV with header epoch,train_mse,val_mse.
void write_learning_curve(const std::filesystem::path& path, const TrainingReport& report);

}  // namespace hlik::fista
