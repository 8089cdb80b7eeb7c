// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <vector>

#include "hlik/datagen.hpp"
#include "hlik/fista/model.hpp"
#include "hlik/liegroup.hpp"

namespace hlik::fista {

/// The last T (EE, elbow) frames in shoulder coordinates, oldest first.
class HistoryBuffer {
 public:
  /// With `pad_cold_start` an underfilled buffer is left-padded by repeating
  /// its oldest frame; otherwise frames() throws ColdStart.
  explicit HistoryBuffer(int history, bool pad_cold_start = true);

  void push(const Pose& ee, const Pose& elbow);
  void clear() { frames_.clear(); }
  int history() const { return history_; }
  int size() const { return static_cast<int>(frames_.size()); }
  bool full() const { return size() == history_; }

  /// Exactly T raw frame vectors. Throws ColdStart when empty, or when
  /// underfilled and padding is disabled.
  std::vector<FrameVector> frames() const;

 private:
  int history_;
  bool pad_;
  std::deque<FrameVector> frames_;
};

/// Raw-space prediction for one window: normalize, forward, denormalize,
/// renormalize the quaternion. Falls back to the last history elbow's
/// orientation if the predicted quaternion is degenerate.
Pose predict_elbow(const Model& model, const std::vector<FrameVector>& history, const Pose& target_ee);
Pose predict_elbow(const Model& model, const HistoryBuffer& buffer, const Pose& target_ee);

/// Streaming predictor for one arm. Inputs and outputs are in that arm's
/// shoulder frame; a left arm is mirrored into the model's right-arm
/// convention and back.
class ElbowPredictor {
 public:
  ElbowPredictor(const Model& model, Arm arm, bool pad_cold_start = true);
  void observe(const Pose& ee, const Pose& elbow);
  Pose predict(const Pose& target_ee) const;
  void reset() { buffer_.clear(); }
  const HistoryBuffer& buffer() const { return buffer_; }

 private:
  const Model& model_;
  Arm arm_;
  HistoryBuffer buffer_;
};

}  // namespace hlik::fista
