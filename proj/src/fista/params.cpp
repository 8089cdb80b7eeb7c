// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "hlik/errors.hpp"
#include "hlik/fista/model.hpp"

namespace hlik::fista {

std::string_view to_string(Architecture a) { return a == Architecture::Mlp ? "mlp" : "fista"; }

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoSpatial: return "no_spatial";
    case Ablation::NoTemporal: return "no_temporal";
    case Ablation::NoFilm: return "no_film";
  }
  return "?";
}

Architecture parse_architecture(std::string_view s) {
  if (s == "fista") return Architecture::Fista;
  if (s == "mlp") return Architecture::Mlp;
  throw ValidationError("unknown architecture '" + std::string(s) + "' (expected fista or mlp)");
}

Ablation parse_ablation(std::string_view s) {
  for (Ablation a : {Ablation::None, Ablation::NoSpatial, Ablation::NoTemporal, Ablation::NoFilm}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown ablation '" + std::string(s) +
                        "' (expected none, no_spatial, no_temporal or no_film)");
}

void ModelConfig::validate() const {
  if (history < 1) throw ValidationError("history length must be at least 1");
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ValidationError(std::string(what) + " must be at least 1");
  };
  if (arch == Architecture::Fista) {
    positive(embed, "embedding width");
    positive(gru_hidden, "GRU width");
    positive(attn_dim, "attention width");
    positive(film_hidden, "FiLM width");
    for (int w : head_hidden) positive(w, "head width");
  } else {
    if (ablate != Ablation::None) throw ValidationError("ablations apply to the FiSTA architecture only");
    for (int w : mlp_hidden) positive(w, "MLP width");
  }
}

int ModelConfig::head_input_dim() const {
  int d = feature_dim();
  if (!film()) d += film_hidden;
  if (spatial()) d += attn_dim;
  return d;
}

ModelConfig ModelConfig::mlp_baseline(int history) {
  ModelConfig c;
  c.arch = Architecture::Mlp;
  c.history = history;
  return c;
}

void ParamLayout::add(std::string name, int rows, int cols) {
  ParamGroup g{std::move(name), rows, cols, size_};
  size_ += g.size();
  groups_.push_back(std::move(g));
}

ParamLayout::ParamLayout(const ModelConfig& c) {
  c.validate();
  auto dense_stack = [&](const std::string& prefix, int in, const std::vector<int>& hidden) {
    for (size_t i = 0; i < hidden.size(); ++i) {
      add(prefix + ".W" + std::to_string(i), hidden[i], in);
      add(prefix + ".b" + std::to_string(i), hidden[i], 1);
      in = hidden[i];
    }
    add(prefix + ".W_out", 7, in);
    add(prefix + ".b_out", 7, 1);
  };

  if (c.arch == Architecture::Mlp) {
    dense_stack("mlp", 14 * c.history + 7, c.mlp_hidden);
    return;
  }
  const int e = c.embed, h = c.gru_hidden, a = c.attn_dim, f = c.film_hidden;
  add("embed.W", e, 14);
  add("embed.b", e, 1);
  if (c.temporal()) {
    // Gate rows ordered (reset, update, candidate).
    add("gru.W_i", 3 * h, e);
    add("gru.b_i", 3 * h, 1);
    add("gru.W_h", 3 * h, h);
    add("gru.b_h", 3 * h, 1);
  }
  if (c.spatial()) {
    add("attn.W_ee", a, 7);
    add("attn.b_ee", a, 1);
    add("attn.W_el", a, 7);
    add("attn.b_el", a, 1);
    add("attn.W_q", a, a);
    add("attn.W_k", a, a);
    add("attn.W_v", a, a);
    add("attn.W_o", a, a);
    add("attn.b_o", a, 1);
  }
  add("film.W_g", f, 7);
  add("film.b_g", f, 1);
  if (c.film()) {
    add("film.W_gamma", c.feature_dim(), f);
    add("film.b_gamma", c.feature_dim(), 1);
    add("film.W_beta", c.feature_dim(), f);
    add("film.b_beta", c.feature_dim(), 1);
  }
  dense_stack("head", c.head_input_dim(), c.head_hidden);
}

const ParamGroup& ParamLayout::at(std::string_view name) const {
  for (const ParamGroup& g : groups_) {
    if (g.name == name) return g;
  }
  throw ValidationError("no parameter group '" + std::string(name) + "'");
}

FrameVector Normalizer::normalize_frame(const FrameVector& v) const {
  return (v - frame_mean).cwiseQuotient(frame_std);
}
Vec7 Normalizer::normalize_target(const Vec7& v) const {
  return (v - target_mean).cwiseQuotient(target_std);
}
Vec7 Normalizer::normalize_label(const Vec7& v) const {
  return (v - label_mean).cwiseQuotient(label_std);
}
Vec7 Normalizer::denormalize_label(const Vec7& v) const {
  return v.cwiseProduct(label_std) + label_mean;
}

Model Model::zeros(const ModelConfig& config) {
  const ParamLayout layout(config);
  return {config, Eigen::VectorXd::Zero(layout.size()), Normalizer{}};
}

Model Model::random(const ModelConfig& config, uint64_t seed) {
  Model m = zeros(config);
  std::mt19937_64 gen(seed);
  const ParamLayout layout(config);
  for (const ParamGroup& g : layout.groups()) {
    if (g.cols == 1) continue;  // biases stay zero
    const double limit = std::sqrt(6.0 / (g.rows + g.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < g.size(); ++i) m.params[g.offset + i] = u(gen);
  }
  return m;
}

}  // namespace hlik::fista
