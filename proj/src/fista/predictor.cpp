// SPDX-License-Identifier: Apache-2.0
#include "hlik/fista/predictor.hpp"

#include "hlik/errors.hpp"

namespace hlik::fista {

HistoryBuffer::HistoryBuffer(int history, bool pad_cold_start) : history_(history), pad_(pad_cold_start) {
  if (history < 1) throw ValidationError("history length must be at least 1");
}

void HistoryBuffer::push(const Pose& ee, const Pose& elbow) {
  frames_.push_back(frame_vector(ee, elbow));
  if (size() > history_) frames_.pop_front();
}

std::vector<FrameVector> HistoryBuffer::frames() const {
  if (frames_.empty()) throw ColdStart("history buffer is empty");
  if (!full() && !pad_) {
    throw ColdStart("history buffer holds " + std::to_string(size()) + " of " + std::to_string(history_) +
                    " frames and padding is disabled");
  }
  std::vector<FrameVector> out(history_ - size(), frames_.front());
  out.insert(out.end(), frames_.begin(), frames_.end());
  return out;
}

Pose predict_elbow(const Model& model, const std::vector<FrameVector>& history, const Pose& target_ee) {
  const int t_len = model.config.history;
  if (static_cast<int>(history.size()) != t_len) {
    throw DimensionMismatch("history has " + std::to_string(history.size()) + " frames, model expects " +
                            std::to_string(t_len));
  }
  const Normalizer& n = model.normalizer;
  Batch batch;
  batch.frames.resize(t_len);
  for (int t = 0; t < t_len; ++t) batch.frames[t] = n.normalize_frame(history[t]);
  batch.target = n.normalize_target(to_vector7(target_ee));
  const Vec7 raw = n.denormalize_label(forward(model, batch).col(0));

  if (raw.tail<4>().allFinite() && raw.tail<4>().norm() > 1e-9) return from_vector7(raw);
  const FrameVector& last = history.back();
  return {from_vector7(last.tail<7>()).rotation, raw.head<3>()};
}

Pose predict_elbow(const Model& model, const HistoryBuffer& buffer, const Pose& target_ee) {
  return predict_elbow(model, buffer.frames(), target_ee);
}

ElbowPredictor::ElbowPredictor(const Model& model, Arm arm, bool pad_cold_start)
    : model_(model), arm_(arm), buffer_(model.config.history, pad_cold_start) {}

void ElbowPredictor::observe(const Pose& ee, const Pose& elbow) {
  if (arm_ == Arm::Left) {
    buffer_.push(mirror_y(ee), mirror_y(elbow));
  } else {
    buffer_.push(ee, elbow);
  }
}

Pose ElbowPredictor::predict(const Pose& target_ee) const {
  if (arm_ == Arm::Left) return mirror_y(predict_elbow(model_, buffer_, mirror_y(target_ee)));
  return predict_elbow(model_, buffer_, target_ee);
}

}  // namespace hlik::fista
