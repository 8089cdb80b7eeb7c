// SPDX-License-Identifier: Apache-2.0
//
// Elbow-prediction networks: the FiSTA model (per-frame embedding, GRU over
// the history, two-token attention on the last frame, FiLM conditioning on
// the EE target, MLP head) and a flat MLP baseline. All parameters live in
// one flat vector; ParamLayout names the slices.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hlik/datagen.hpp"
#include "hlik/liegroup.hpp"

namespace hlik::fista {

enum class Architecture : uint8_t { Fista = 0, Mlp = 1 };
enum class Ablation : uint8_t { None = 0, NoSpatial = 1, NoTemporal = 2, NoFilm = 3 };

std::string_view to_string(Architecture a);
std::string_view to_string(Ablation a);
/// Throws ValidationError.
Architecture parse_architecture(std::string_view s);
Ablation parse_ablation(std::string_view s);

struct ModelConfig {
  Architecture arch = Architecture::Fista;
  int history = 5;
  int embed = 32;
  int gru_hidden = 64;
  int attn_dim = 32;
  int film_hidden = 64;
  std::vector<int> head_hidden = {128, 64};
  std::vector<int> mlp_hidden = {256, 128};
  Ablation ablate = Ablation::None;

  /// Throws ValidationError.
  void validate() const;
  bool temporal() const { return ablate != Ablation::NoTemporal; }
  bool spatial() const { return ablate != Ablation::NoSpatial; }
  bool film() const { return ablate != Ablation::NoFilm; }
  /// Width of the (modulated) temporal feature.
  int feature_dim() const { return temporal() ? gru_hidden : embed; }
  int head_input_dim() const;

  static ModelConfig mlp_baseline(int history = 5);
  bool operator==(const ModelConfig&) const = default;
};

struct ParamGroup {
  std::string name;
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;
  Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols; }
};

/// Fixed, documented order of parameter groups for a config. Matrices are
/// stored column-major inside the flat vector.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);
  const std::vector<ParamGroup>& groups() const { return groups_; }
  Eigen::Index size() const { return size_; }
  /// Throws ValidationError for unknown names.
  const ParamGroup& at(std::string_view name) const;

 private:
  void add(std::string name, int rows, int cols);
  std::vector<ParamGroup> groups_;
  Eigen::Index size_ = 0;
};

/// Per-dimension z-scores. Frame statistics are shared across history
/// steps. A standard deviation below 1e-8 is stored as 1.
struct Normalizer {
  FrameVector frame_mean = FrameVector::Zero();
  FrameVector frame_std = FrameVector::Ones();
  Vec7 target_mean = Vec7::Zero();
  Vec7 target_std = Vec7::Ones();
  Vec7 label_mean = Vec7::Zero();
  Vec7 label_std = Vec7::Ones();

  FrameVector normalize_frame(const FrameVector& v) const;
  Vec7 normalize_target(const Vec7& v) const;
  Vec7 normalize_label(const Vec7& v) const;
  Vec7 denormalize_label(const Vec7& v) const;
  bool operator==(const Normalizer&) const = default;
};

struct Model {
  ModelConfig config;
  Eigen::VectorXd params;
  Normalizer normalizer;

  /// All parameters zero.
  static Model zeros(const ModelConfig& config);
  /// Glorot-uniform weights, zero biases.
  static Model random(const ModelConfig& config, uint64_t seed);
};

/// A batch in normalized units: frames[t] is 14 x B for t = 0..T-1 (oldest
/// first), target is 7 x B.
struct Batch {
  std::vector<Eigen::MatrixXd> frames;
  Eigen::MatrixXd target;
  Eigen::Index size() const { return target.cols(); }
};

/// Normalized 7 x B prediction. Throws DimensionMismatch when the batch
/// does not match the config.
Eigen::MatrixXd forward(const Model& model, const Batch& batch);

/// Mean squared error over all 7 x B entries against normalized labels,
/// with its gradient with respect to model.params written to `grad` when
/// non-null.
double loss_and_gradient(const Model& model, const Batch& batch, const Eigen::MatrixXd& labels,
                         Eigen::VectorXd* grad);

}  // namespace hlik::fista
