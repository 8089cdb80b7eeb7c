// SPDX-License-Identifier: Apache-2.0
//
// Batched forward pass and hand-written backward pass. Columns are samples.
#include <cmath>
#include <string>

#include "hlik/errors.hpp"
#include "hlik/fista/model.hpp"

namespace hlik::fista {
namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMap = Eigen::Map<const Mat>;
using GMap = Eigen::Map<Mat>;

class Params {
 public:
  Params(const ParamLayout& layout, const double* data) : layout_(layout), data_(data) {}
  CMap operator()(std::string_view name) const {
    const ParamGroup& g = layout_.at(name);
    return CMap(data_ + g.offset, g.rows, g.cols);
  }

 private:
  const ParamLayout& layout_;
  const double* data_;
};

class Grads {
 public:
  Grads(const ParamLayout& layout, double* data) : layout_(layout), data_(data) {}
  GMap operator()(std::string_view name) const {
    const ParamGroup& g = layout_.at(name);
    return GMap(data_ + g.offset, g.rows, g.cols);
  }

 private:
  const ParamLayout& layout_;
  double* data_;
};

Mat affine(const CMap& w, const CMap& b, const Mat& x) {
  Mat out = w * x;
  out.colwise() += Vec(b.col(0));
  return out;
}

Mat tanh_of(const Mat& m) { return m.array().tanh().matrix(); }
Mat sigmoid_of(const Mat& m) { return (1.0 / (1.0 + (-m.array()).exp())).matrix(); }
// d tanh from the activation value.
Mat tanh_grad(const Mat& y) { return (1.0 - y.array().square()).matrix(); }
Eigen::RowVectorXd col_dot(const Mat& a, const Mat& b) { return a.cwiseProduct(b).colwise().sum(); }

struct DenseCache {
  std::vector<Mat> inputs;  // input to each layer
  Mat output;
};

Mat dense_forward(const Params& p, const std::string& prefix, int hidden_layers, const Mat& x,
                  DenseCache& cache) {
  Mat a = x;
  for (int i = 0; i < hidden_layers; ++i) {
    cache.inputs.push_back(a);
    const std::string k = std::to_string(i);
    a = tanh_of(affine(p(prefix + ".W" + k), p(prefix + ".b" + k), a));
  }
  cache.inputs.push_back(a);
  cache.output = affine(p(prefix + ".W_out"), p(prefix + ".b_out"), a);
  return cache.output;
}

// Returns the gradient with respect to the stack's input.
Mat dense_backward(const Params& p, const Grads& g, const std::string& prefix, int hidden_layers,
                   const DenseCache& cache, const Mat& dy) {
  Mat d = dy;
  g(prefix + ".W_out") += d * cache.inputs.back().transpose();
  g(prefix + ".b_out") += d.rowwise().sum();
  d = p(prefix + ".W_out").transpose() * d;
  for (int i = hidden_layers - 1; i >= 0; --i) {
    const std::string k = std::to_string(i);
    d = d.cwiseProduct(tanh_grad(cache.inputs[i + 1]));
    g(prefix + ".W" + k) += d * cache.inputs[i].transpose();
    g(prefix + ".b" + k) += d.rowwise().sum();
    d = p(prefix + ".W" + k).transpose() * d;
  }
  return d;
}

struct GruStep {
  Mat h_prev, r, z, n, hn_lin;
};

struct Cache {
  // embeddings
  std::vector<Mat> embed;
  // temporal
  std::vector<GruStep> gru;
  Mat feature;
  // spatial
  Mat x_ee, x_el, u[2], q[2], k[2], v[2], o[2], pooled;
  Eigen::RowVectorXd att[2][2];
  Mat spatial;
  // goal conditioning
  Mat g, gamma, beta, modulated;
  // head
  DenseCache head;
};

void check_batch(const ModelConfig& c, const Batch& b) {
  if (static_cast<int>(b.frames.size()) != c.history) {
    throw DimensionMismatch("batch has " + std::to_string(b.frames.size()) +
                            " history frames, model expects " + std::to_string(c.history));
  }
  if (b.target.rows() != 7 || b.size() < 1) throw DimensionMismatch("batch target must be 7 x B, B >= 1");
  for (const Mat& f : b.frames) {
    if (f.rows() != 14 || f.cols() != b.size()) throw DimensionMismatch("history frames must be 14 x B");
  }
}

Mat mlp_input(const Batch& b) {
  const int t_len = static_cast<int>(b.frames.size());
  Mat x(14 * t_len + 7, b.size());
  for (int t = 0; t < t_len; ++t) x.middleRows(14 * t, 14) = b.frames[t];
  x.bottomRows(7) = b.target;
  return x;
}

Mat fista_forward(const ModelConfig& c, const Params& p, const Batch& b, Cache& cache) {
  const int t_len = c.history;
  const int h = c.gru_hidden;

  const int first = c.temporal() ? 0 : t_len - 1;
  cache.embed.assign(t_len, Mat());
  for (int t = first; t < t_len; ++t) cache.embed[t] = tanh_of(affine(p("embed.W"), p("embed.b"), b.frames[t]));

  if (c.temporal()) {
    const CMap wi = p("gru.W_i"), bi = p("gru.b_i"), wh = p("gru.W_h"), bh = p("gru.b_h");
    Mat hidden = Mat::Zero(h, b.size());
    cache.gru.clear();
    for (int t = 0; t < t_len; ++t) {
      GruStep s;
      s.h_prev = hidden;
      const Mat ai = affine(wi, bi, cache.embed[t]);
      const Mat ah = affine(wh, bh, hidden);
      s.r = sigmoid_of(ai.topRows(h) + ah.topRows(h));
      s.z = sigmoid_of(ai.middleRows(h, h) + ah.middleRows(h, h));
      s.hn_lin = ah.bottomRows(h);
      s.n = tanh_of(ai.bottomRows(h) + s.r.cwiseProduct(s.hn_lin));
      hidden = (1.0 - s.z.array()).matrix().cwiseProduct(s.n) + s.z.cwiseProduct(s.h_prev);
      cache.gru.push_back(std::move(s));
    }
    cache.feature = hidden;
  } else {
    cache.feature = cache.embed[t_len - 1];
  }

  Mat head_in(c.head_input_dim(), b.size());
  int row = 0;

  cache.g = tanh_of(affine(p("film.W_g"), p("film.b_g"), b.target));
  if (c.film()) {
    cache.gamma = affine(p("film.W_gamma"), p("film.b_gamma"), cache.g);
    cache.beta = affine(p("film.W_beta"), p("film.b_beta"), cache.g);
    cache.modulated = (1.0 + cache.gamma.array()).matrix().cwiseProduct(cache.feature) + cache.beta;
    head_in.topRows(c.feature_dim()) = cache.modulated;
    row = c.feature_dim();
  } else {
    head_in.topRows(c.feature_dim()) = cache.feature;
    head_in.middleRows(c.feature_dim(), c.film_hidden) = cache.g;
    row = c.feature_dim() + c.film_hidden;
  }

  if (c.spatial()) {
    const Mat& last = b.frames[t_len - 1];
    cache.x_ee = last.topRows(7);
    cache.x_el = last.bottomRows(7);
    cache.u[0] = affine(p("attn.W_ee"), p("attn.b_ee"), cache.x_ee);
    cache.u[1] = affine(p("attn.W_el"), p("attn.b_el"), cache.x_el);
    const CMap wq = p("attn.W_q"), wk = p("attn.W_k"), wv = p("attn.W_v");
    for (int i = 0; i < 2; ++i) {
      cache.q[i] = wq * cache.u[i];
      cache.k[i] = wk * cache.u[i];
      cache.v[i] = wv * cache.u[i];
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.attn_dim));
    for (int i = 0; i < 2; ++i) {
      const Eigen::RowVectorXd s0 = scale * col_dot(cache.q[i], cache.k[0]);
      const Eigen::RowVectorXd s1 = scale * col_dot(cache.q[i], cache.k[1]);
      const Eigen::RowVectorXd m = s0.cwiseMax(s1);
      const Eigen::RowVectorXd e0 = (s0 - m).array().exp(), e1 = (s1 - m).array().exp();
      const Eigen::RowVectorXd sum = e0 + e1;
      cache.att[i][0] = e0.cwiseQuotient(sum);
      cache.att[i][1] = e1.cwiseQuotient(sum);
      cache.o[i] = cache.v[0] * cache.att[i][0].asDiagonal();
      cache.o[i] += cache.v[1] * cache.att[i][1].asDiagonal();
    }
    cache.pooled = 0.5 * (cache.o[0] + cache.o[1]);
    cache.spatial = affine(p("attn.W_o"), p("attn.b_o"), cache.pooled);
    head_in.middleRows(row, c.attn_dim) = cache.spatial;
  }

  return dense_forward(p, "head", static_cast<int>(c.head_hidden.size()), head_in, cache.head);
}

void fista_backward(const ModelConfig& c, const Params& p, const Grads& g, const Batch& b,
                    const Cache& cache, const Mat& dy) {
  const int t_len = c.history;
  const int h = c.gru_hidden;
  const Mat d_in = dense_backward(p, g, "head", static_cast<int>(c.head_hidden.size()), cache.head, dy);

  Mat d_feature;
  Mat d_g;
  int row = 0;
  if (c.film()) {
    const Mat d_mod = d_in.topRows(c.feature_dim());
    const Mat d_gamma = d_mod.cwiseProduct(cache.feature);
    const Mat& d_beta = d_mod;
    d_feature = d_mod.cwiseProduct((1.0 + cache.gamma.array()).matrix());
    g("film.W_gamma") += d_gamma * cache.g.transpose();
    g("film.b_gamma") += d_gamma.rowwise().sum();
    g("film.W_beta") += d_beta * cache.g.transpose();
    g("film.b_beta") += d_beta.rowwise().sum();
    d_g = p("film.W_gamma").transpose() * d_gamma + p("film.W_beta").transpose() * d_beta;
    row = c.feature_dim();
  } else {
    d_feature = d_in.topRows(c.feature_dim());
    d_g = d_in.middleRows(c.feature_dim(), c.film_hidden);
    row = c.feature_dim() + c.film_hidden;
  }
  const Mat d_ga = d_g.cwiseProduct(tanh_grad(cache.g));
  g("film.W_g") += d_ga * b.target.transpose();
  g("film.b_g") += d_ga.rowwise().sum();

  if (c.spatial()) {
    const Mat d_sp = d_in.middleRows(row, c.attn_dim);
    g("attn.W_o") += d_sp * cache.pooled.transpose();
    g("attn.b_o") += d_sp.rowwise().sum();
    const Mat d_o = 0.5 * (p("attn.W_o").transpose() * d_sp);  // same for both tokens
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.attn_dim));
    Mat d_q[2], d_k[2], d_v[2];
    for (int j = 0; j < 2; ++j) {
      d_k[j] = Mat::Zero(c.attn_dim, b.size());
      d_v[j] = d_o * (cache.att[0][j] + cache.att[1][j]).asDiagonal();
    }
    for (int i = 0; i < 2; ++i) {
      const Eigen::RowVectorXd da0 = col_dot(d_o, cache.v[0]);
      const Eigen::RowVectorXd da1 = col_dot(d_o, cache.v[1]);
      const Eigen::RowVectorXd mean = cache.att[i][0].cwiseProduct(da0) + cache.att[i][1].cwiseProduct(da1);
      const Eigen::RowVectorXd ds0 = scale * cache.att[i][0].cwiseProduct(da0 - mean);
      const Eigen::RowVectorXd ds1 = scale * cache.att[i][1].cwiseProduct(da1 - mean);
      d_q[i] = cache.k[0] * ds0.asDiagonal();
      d_q[i] += cache.k[1] * ds1.asDiagonal();
      d_k[0] += cache.q[i] * ds0.asDiagonal();
      d_k[1] += cache.q[i] * ds1.asDiagonal();
    }
    const CMap wq = p("attn.W_q"), wk = p("attn.W_k"), wv = p("attn.W_v");
    Mat d_u[2];
    for (int i = 0; i < 2; ++i) {
      g("attn.W_q") += d_q[i] * cache.u[i].transpose();
      g("attn.W_k") += d_k[i] * cache.u[i].transpose();
      g("attn.W_v") += d_v[i] * cache.u[i].transpose();
      d_u[i] = wq.transpose() * d_q[i] + wk.transpose() * d_k[i] + wv.transpose() * d_v[i];
    }
    g("attn.W_ee") += d_u[0] * cache.x_ee.transpose();
    g("attn.b_ee") += d_u[0].rowwise().sum();
    g("attn.W_el") += d_u[1] * cache.x_el.transpose();
    g("attn.b_el") += d_u[1].rowwise().sum();
  }

  std::vector<Mat> d_embed(t_len);
  if (c.temporal()) {
    const CMap wi = p("gru.W_i"), wh = p("gru.W_h");
    GMap gwi = g("gru.W_i"), gbi = g("gru.b_i"), gwh = g("gru.W_h"), gbh = g("gru.b_h");
    Mat dh = d_feature;
    Mat da_i(3 * h, b.size()), da_h(3 * h, b.size());
    for (int t = t_len - 1; t >= 0; --t) {
      const GruStep& s = cache.gru[t];
      const Mat dn = dh.cwiseProduct((1.0 - s.z.array()).matrix());
      const Mat dz = dh.cwiseProduct(s.h_prev - s.n);
      const Mat dan = dn.cwiseProduct(tanh_grad(s.n));
      const Mat dr = dan.cwiseProduct(s.hn_lin);
      const Mat daz = dz.array() * s.z.array() * (1.0 - s.z.array());
      const Mat dar = dr.array() * s.r.array() * (1.0 - s.r.array());
      da_i << dar, daz, dan;
      da_h << dar, daz, dan.cwiseProduct(s.r);
      gwi += da_i * cache.embed[t].transpose();
      gbi += da_i.rowwise().sum();
      gwh += da_h * s.h_prev.transpose();
      gbh += da_h.rowwise().sum();
      d_embed[t] = wi.transpose() * da_i;
      dh = dh.cwiseProduct(s.z) + wh.transpose() * da_h;
    }
  } else {
    d_embed[t_len - 1] = d_feature;
  }

  GMap gwe = g("embed.W"), gbe = g("embed.b");
  for (int t = 0; t < t_len; ++t) {
    if (d_embed[t].size() == 0) continue;
    const Mat da = d_embed[t].cwiseProduct(tanh_grad(cache.embed[t]));
    gwe += da * b.frames[t].transpose();
    gbe += da.rowwise().sum();
  }
}

}  // namespace

Eigen::MatrixXd forward(const Model& model, const Batch& batch) {
  const ModelConfig& c = model.config;
  check_batch(c, batch);
  const ParamLayout layout(c);
  if (model.params.size() != layout.size()) throw DimensionMismatch("parameter vector does not match config");
  const Params p(layout, model.params.data());
  if (c.arch == Architecture::Mlp) {
    DenseCache cache;
    return dense_forward(p, "mlp", static_cast<int>(c.mlp_hidden.size()), mlp_input(batch), cache);
  }
  Cache cache;
  return fista_forward(c, p, batch, cache);
}

double loss_and_gradient(const Model& model, const Batch& batch, const Eigen::MatrixXd& labels,
                         Eigen::VectorXd* grad) {
  const ModelConfig& c = model.config;
  check_batch(c, batch);
  if (labels.rows() != 7 || labels.cols() != batch.size()) throw DimensionMismatch("labels must be 7 x B");
  const ParamLayout layout(c);
  if (model.params.size() != layout.size()) throw DimensionMismatch("parameter vector does not match config");
  const Params p(layout, model.params.data());

  const double count = 7.0 * static_cast<double>(batch.size());
  Mat y;
  Cache cache;
  DenseCache mlp_cache;
  const Mat x_mlp = c.arch == Architecture::Mlp ? mlp_input(batch) : Mat();
  if (c.arch == Architecture::Mlp) {
    y = dense_forward(p, "mlp", static_cast<int>(c.mlp_hidden.size()), x_mlp, mlp_cache);
  } else {
    y = fista_forward(c, p, batch, cache);
  }
  const Mat residual = y - labels;
  const double loss = residual.squaredNorm() / count;
  if (!grad) return loss;

  grad->setZero(layout.size());
  const Grads g(layout, grad->data());
  const Mat dy = (2.0 / count) * residual;
  if (c.arch == Architecture::Mlp) {
    dense_backward(p, g, "mlp", static_cast<int>(c.mlp_hidden.size()), mlp_cache, dy);
  } else {
    fista_backward(c, p, g, batch, cache, dy);
  }
  return loss;
}

}  // namespace hlik::fista
