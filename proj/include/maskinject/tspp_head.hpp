#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/params.hpp"
#include "maskinject/tspp.hpp"

namespace maskinject {

/// Per-class score maps, K x h x w, row-major with the class axis slowest.
struct CostMap {
  int classes = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  CostMap() = default;
  CostMap(int k, int h, int w)
      : classes(k), height(h), width(w), values(static_cast<std::size_t>(k) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double at(int k, int y, int x) const { return values[k * plane() + static_cast<std::size_t>(y) * width + x]; }
  double& at(int k, int y, int x) { return values[k * plane() + static_cast<std::size_t>(y) * width + x]; }
};

/// Weights of the prompter head:
///   3x3 cost patch --MLP--> C-dim class embedding
///   single-head self-attention across the class axis (residual)
///   probability head: logsumexp over classes of a linear readout
///   mask head: per-class linear readout
/// Weights are shared across classes, so K only constrains the inputs.
struct TsppHeadParams {
  enum Block : std::size_t { kW1, kB1, kW2, kB2, kWq, kWk, kWv, kWp, kBp, kWm, kBm };
  static constexpr int kPatch = 9;

  int classes = 0;
  int channels = 16;
  int grid_h = 32;
  int grid_w = 32;
  ParamVector weights;

  static TsppHeadParams zeros(int classes, int channels = 16, int grid_h = 32, int grid_w = 32) {
    if (classes < 1 || channels < 1) throw Error("TsppHeadParams: classes and channels must be >= 1");
    TsppHeadParams p;
    p.classes = classes;
    p.channels = channels;
    p.grid_h = grid_h;
    p.grid_w = grid_w;
    const std::size_t c = channels;
    p.weights.add("embed.w1", c * kPatch);
    p.weights.add("embed.b1", c);
    p.weights.add("embed.w2", c * c);
    p.weights.add("embed.b2", c);
    p.weights.add("attn.q", c * c);
    p.weights.add("attn.k", c * c);
    p.weights.add("attn.v", c * c);
    p.weights.add("prob.w", c);
    p.weights.add("prob.b", 1);
    p.weights.add("mask.w", c);
    p.weights.add("mask.b", 1);
    return p;
  }

  static TsppHeadParams init(int classes, int channels, int grid_h, int grid_w, std::uint64_t seed) {
    auto p = zeros(classes, channels, grid_h, grid_w);
    Rng rng(seed);
    const std::size_t c = channels;
    xavier_fill(p.weights.block(kW1), kPatch, c, rng);
    xavier_fill(p.weights.block(kW2), c, c, rng);
    xavier_fill(p.weights.block(kWq), c, c, rng);
    xavier_fill(p.weights.block(kWk), c, c, rng);
    xavier_fill(p.weights.block(kWv), c, c, rng);
    xavier_fill(p.weights.block(kWp), c, 1, rng);
    xavier_fill(p.weights.block(kWm), c, 1, rng);
    return p;
  }

  std::span<const double> operator[](Block b) const { return weights.block(b); }
};

/// Intermediates of one forward pass, kept for the backward pass. Arrays
/// are indexed [cell][class][channel].
struct HeadTrace {
  int classes = 0, channels = 0, h = 0, w = 0;
  std::vector<double> patch;   // cells x K x 9
  std::vector<double> hidden;  // cells x K x C (post-tanh)
  std::vector<double> embed;   // cells x K x C
  std::vector<double> q, k, v; // cells x K x C
  std::vector<double> attn;    // cells x K x K
  std::vector<double> enriched;  // cells x K x C
  std::vector<double> class_score;  // cells x K
  std::vector<double> class_weight; // cells x K, softmax of class_score
  std::vector<double> prob_logit;   // cells
  std::vector<double> pred;         // cells
  std::vector<double> mask_logits;  // K x cells (class-major, like CostMap)
};

struct HeadOutput {
  ProbabilityGrid pred;
  int classes = 0;
  std::vector<double> mask_logits;  // K x h x w
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void check_head_shapes(const CostMap& s, const TsppHeadParams& p) {
  if (s.classes != p.classes || s.height != p.grid_h || s.width != p.grid_w)
    throw Error("head_forward: cost map is " + std::to_string(s.classes) + "x" + std::to_string(s.height) +
                "x" + std::to_string(s.width) + ", head expects " + std::to_string(p.classes) + "x" +
                std::to_string(p.grid_h) + "x" + std::to_string(p.grid_w));
  if (s.values.size() != static_cast<std::size_t>(s.classes) * s.plane())
    throw Error("head_forward: cost map storage size mismatch");
}

}  // namespace detail

inline HeadTrace head_forward_trace(const CostMap& s, const TsppHeadParams& p) {
  detail::check_head_shapes(s, p);
  using B = TsppHeadParams;
  const int K = s.classes, C = p.channels, h = s.height, w = s.width;
  const std::size_t cells = s.plane();
  const auto w1 = p[B::kW1], b1 = p[B::kB1], w2 = p[B::kW2], b2 = p[B::kB2];
  const auto wq = p[B::kWq], wk = p[B::kWk], wv = p[B::kWv];
  const auto wp = p[B::kWp], wm = p[B::kWm];
  const double bp = p[B::kBp][0], bm = p[B::kBm][0];
  const double scale = 1.0 / std::sqrt(static_cast<double>(C));
  const double log_k = std::log(static_cast<double>(K));

  HeadTrace t;
  t.classes = K;
  t.channels = C;
  t.h = h;
  t.w = w;
  const std::size_t kc = static_cast<std::size_t>(K) * C;
  t.patch.assign(cells * K * B::kPatch, 0.0);
  t.hidden.assign(cells * kc, 0.0);
  t.embed.assign(cells * kc, 0.0);
  t.q.assign(cells * kc, 0.0);
  t.k.assign(cells * kc, 0.0);
  t.v.assign(cells * kc, 0.0);
  t.attn.assign(cells * K * K, 0.0);
  t.enriched.assign(cells * kc, 0.0);
  t.class_score.assign(cells * K, 0.0);
  t.class_weight.assign(cells * K, 0.0);
  t.prob_logit.assign(cells, 0.0);
  t.pred.assign(cells, 0.0);
  t.mask_logits.assign(static_cast<std::size_t>(K) * cells, 0.0);

  std::vector<double> row(K);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t cell = static_cast<std::size_t>(y) * w + x;
      double* patch = &t.patch[cell * K * B::kPatch];
      double* hid = &t.hidden[cell * kc];
      double* emb = &t.embed[cell * kc];
      double* q = &t.q[cell * kc];
      double* kk = &t.k[cell * kc];
      double* v = &t.v[cell * kc];
      double* att = &t.attn[cell * K * K];
      double* en = &t.enriched[cell * kc];

      for (int c = 0; c < K; ++c) {
        double* pc = patch + c * B::kPatch;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            pc[(dy + 1) * 3 + (dx + 1)] = (yy >= 0 && yy < h && xx >= 0 && xx < w) ? s.at(c, yy, xx) : 0.0;
          }
        for (int o = 0; o < C; ++o) {
          double a = b1[o];
          for (int i = 0; i < B::kPatch; ++i) a += w1[o * B::kPatch + i] * pc[i];
          hid[c * C + o] = std::tanh(a);
        }
        for (int o = 0; o < C; ++o) {
          double a = b2[o];
          for (int i = 0; i < C; ++i) a += w2[o * C + i] * hid[c * C + i];
          emb[c * C + o] = a;
        }
        for (int o = 0; o < C; ++o) {
          double aq = 0, ak = 0, av = 0;
          for (int i = 0; i < C; ++i) {
            const double e = emb[c * C + i];
            aq += wq[o * C + i] * e;
            ak += wk[o * C + i] * e;
            av += wv[o * C + i] * e;
          }
          q[c * C + o] = aq;
          kk[c * C + o] = ak;
          v[c * C + o] = av;
        }
      }
      for (int a = 0; a < K; ++a) {
        double mx = -INFINITY;
        for (int b = 0; b < K; ++b) {
          double d = 0;
          for (int i = 0; i < C; ++i) d += q[a * C + i] * kk[b * C + i];
          row[b] = d * scale;
          mx = std::max(mx, row[b]);
        }
        double z = 0;
        for (int b = 0; b < K; ++b) {
          row[b] = std::exp(row[b] - mx);
          z += row[b];
        }
        for (int b = 0; b < K; ++b) att[a * K + b] = row[b] / z;
        for (int i = 0; i < C; ++i) {
          double acc = emb[a * C + i];
          for (int b = 0; b < K; ++b) acc += att[a * K + b] * v[b * C + i];
          en[a * C + i] = acc;
        }
      }
      double* score = &t.class_score[cell * K];
      double* weight = &t.class_weight[cell * K];
      double mx = -INFINITY;
      for (int a = 0; a < K; ++a) {
        double u = 0, l = bm;
        for (int i = 0; i < C; ++i) {
          u += wp[i] * en[a * C + i];
          l += wm[i] * en[a * C + i];
        }
        score[a] = u;
        t.mask_logits[a * cells + cell] = l;
        mx = std::max(mx, u);
      }
      double z = 0;
      for (int a = 0; a < K; ++a) {
        weight[a] = std::exp(score[a] - mx);
        z += weight[a];
      }
      for (int a = 0; a < K; ++a) weight[a] /= z;
      t.prob_logit[cell] = mx + std::log(z) - log_k + bp;
      t.pred[cell] = detail::sigmoid(t.prob_logit[cell]);
    }
  }
  return t;
}

inline HeadOutput head_output(const HeadTrace& t) {
  HeadOutput out;
  out.classes = t.classes;
  out.pred = ProbabilityGrid(t.h, t.w);
  out.pred.probs = t.pred;
  out.pred.raw = t.pred;
  out.mask_logits = t.mask_logits;
  return out;
}

/// Predicted sampling probabilities and per-class mask logits.
inline HeadOutput head_forward(const CostMap& s, const TsppHeadParams& p) {
  return head_output(head_forward_trace(s, p));
}

struct LossOutput {
  double loss = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  bool background_only = false;     // no foreground cell: ce term is 0
  std::vector<double> d_prob_logit;  // dL / d(pre-sigmoid probability), per cell
  std::vector<double> d_mask_logits; // dL / d mask logits, K x cells
};

/// L = CE(mask logits, labels over foreground cells) + lambda * MSE(pred, target).
/// Labels are 0 for background and k+1 for class k.
inline LossOutput tspp_loss(const HeadOutput& out, const ProbabilityGrid& target, const LabelMap& labels,
                            double lambda_mse) {
  const std::size_t cells = out.pred.cells();
  const int K = out.classes;
  if (lambda_mse < 0) throw Error("tspp_loss: lambda_mse must be >= 0");
  if (target.cells() != cells || target.grid_h != out.pred.grid_h || target.grid_w != out.pred.grid_w)
    throw Error("tspp_loss: target grid shape mismatch");
  if (labels.width != out.pred.grid_w || labels.height != out.pred.grid_h)
    throw Error("tspp_loss: label map shape mismatch");
  if (out.mask_logits.size() != static_cast<std::size_t>(K) * cells)
    throw Error("tspp_loss: mask logit shape mismatch");

  LossOutput r;
  r.d_prob_logit.assign(cells, 0.0);
  r.d_mask_logits.assign(static_cast<std::size_t>(K) * cells, 0.0);

  const double inv_n = 1.0 / static_cast<double>(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const double p = out.pred.probs[c];
    const double diff = p - target.probs[c];
    r.mse += diff * diff * inv_n;
    r.d_prob_logit[c] = lambda_mse * 2.0 * diff * inv_n * p * (1.0 - p);
  }

  std::size_t fg = 0;
  for (auto l : labels.labels) {
    if (l > static_cast<std::uint32_t>(K)) throw Error("tspp_loss: label exceeds class count");
    fg += l != 0;
  }
  r.background_only = fg == 0;
  if (fg > 0) {
    const double inv_fg = 1.0 / static_cast<double>(fg);
    std::vector<double> prob(K);
    for (std::size_t c = 0; c < cells; ++c) {
      const auto l = labels.labels[c];
      if (l == 0) continue;
      double mx = -INFINITY;
      for (int k = 0; k < K; ++k) mx = std::max(mx, out.mask_logits[k * cells + c]);
      double z = 0;
      for (int k = 0; k < K; ++k) {
        prob[k] = std::exp(out.mask_logits[k * cells + c] - mx);
        z += prob[k];
      }
      const int y = static_cast<int>(l) - 1;
      r.ce += (std::log(z) + mx - out.mask_logits[y * cells + c]) * inv_fg;
      for (int k = 0; k < K; ++k)
        r.d_mask_logits[k * cells + c] = (prob[k] / z - (k == y ? 1.0 : 0.0)) * inv_fg;
    }
  }
  r.loss = r.ce + lambda_mse * r.mse;
  return r;
}

struct HeadGradients {
  ParamVector params;
  std::vector<double> cost;  // same layout as CostMap::values
};

/// Backpropagates per-cell output gradients into the head weights and the
/// input cost map.
inline HeadGradients head_backward(const CostMap& s, const TsppHeadParams& p, const HeadTrace& t,
                                   std::span<const double> d_prob_logit, std::span<const double> d_mask_logits) {
  using B = TsppHeadParams;
  const int K = t.classes, C = t.channels, h = t.h, w = t.w;
  const std::size_t cells = static_cast<std::size_t>(h) * w;
  const std::size_t kc = static_cast<std::size_t>(K) * C;
  const double scale = 1.0 / std::sqrt(static_cast<double>(C));
  const auto w1 = p[B::kW1], w2 = p[B::kW2], wq = p[B::kWq], wk = p[B::kWk], wv = p[B::kWv];
  const auto wp = p[B::kWp], wm = p[B::kWm];

  HeadGradients g{p.weights.zeros_like(), std::vector<double>(s.values.size(), 0.0)};
  auto gw1 = g.params.block(B::kW1), gb1 = g.params.block(B::kB1), gw2 = g.params.block(B::kW2),
       gb2 = g.params.block(B::kB2), gwq = g.params.block(B::kWq), gwk = g.params.block(B::kWk),
       gwv = g.params.block(B::kWv), gwp = g.params.block(B::kWp), gbp = g.params.block(B::kBp),
       gwm = g.params.block(B::kWm), gbm = g.params.block(B::kBm);

  std::vector<double> den(kc), dq(kc), dk(kc), dv(kc), de(kc), datt(static_cast<std::size_t>(K) * K), dh(C);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t cell = static_cast<std::size_t>(y) * w + x;
      const double* patch = &t.patch[cell * K * B::kPatch];
      const double* hid = &t.hidden[cell * kc];
      const double* emb = &t.embed[cell * kc];
      const double* q = &t.q[cell * kc];
      const double* kk = &t.k[cell * kc];
      const double* v = &t.v[cell * kc];
      const double* att = &t.attn[cell * K * K];
      const double* en = &t.enriched[cell * kc];
      const double* weight = &t.class_weight[cell * K];
      const double dz = d_prob_logit[cell];

      gbp[0] += dz;
      for (int a = 0; a < K; ++a) {
        const double dl = d_mask_logits[a * cells + cell];
        const double du = dz * weight[a];
        gbm[0] += dl;
        for (int i = 0; i < C; ++i) {
          gwm[i] += dl * en[a * C + i];
          gwp[i] += du * en[a * C + i];
          den[a * C + i] = dl * wm[i] + du * wp[i];
        }
      }
      // Attention: en_a = e_a + sum_b att_ab v_b
      std::fill(dv.begin(), dv.end(), 0.0);
      std::fill(dq.begin(), dq.end(), 0.0);
      std::fill(dk.begin(), dk.end(), 0.0);
      for (int a = 0; a < K; ++a) {
        double dot = 0;
        for (int b = 0; b < K; ++b) {
          double d = 0;
          for (int i = 0; i < C; ++i) {
            d += den[a * C + i] * v[b * C + i];
            dv[b * C + i] += att[a * K + b] * den[a * C + i];
          }
          datt[a * K + b] = d;
          dot += att[a * K + b] * d;
        }
        for (int b = 0; b < K; ++b) {
          const double ds = att[a * K + b] * (datt[a * K + b] - dot) * scale;
          for (int i = 0; i < C; ++i) {
            dq[a * C + i] += ds * kk[b * C + i];
            dk[b * C + i] += ds * q[a * C + i];
          }
        }
      }
      for (int a = 0; a < K; ++a) {
        for (int i = 0; i < C; ++i) de[a * C + i] = den[a * C + i];
        for (int o = 0; o < C; ++o) {
          const double gq = dq[a * C + o], gk = dk[a * C + o], gv = dv[a * C + o];
          for (int i = 0; i < C; ++i) {
            const double e = emb[a * C + i];
            gwq[o * C + i] += gq * e;
            gwk[o * C + i] += gk * e;
            gwv[o * C + i] += gv * e;
            de[a * C + i] += wq[o * C + i] * gq + wk[o * C + i] * gk + wv[o * C + i] * gv;
          }
        }
      }
      // Embedding MLP.
      for (int a = 0; a < K; ++a) {
        std::fill(dh.begin(), dh.end(), 0.0);
        for (int o = 0; o < C; ++o) {
          const double g2 = de[a * C + o];
          gb2[o] += g2;
          for (int i = 0; i < C; ++i) {
            gw2[o * C + i] += g2 * hid[a * C + i];
            dh[i] += w2[o * C + i] * g2;
          }
        }
        const double* pc = patch + a * B::kPatch;
        double dpatch[B::kPatch] = {};
        for (int o = 0; o < C; ++o) {
          const double hv = hid[a * C + o];
          const double da = dh[o] * (1.0 - hv * hv);
          gb1[o] += da;
          for (int i = 0; i < B::kPatch; ++i) {
            gw1[o * B::kPatch + i] += da * pc[i];
            dpatch[i] += w1[o * B::kPatch + i] * da;
          }
        }
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < h && xx >= 0 && xx < w)
              g.cost[a * cells + static_cast<std::size_t>(yy) * w + xx] += dpatch[(dy + 1) * 3 + (dx + 1)];
          }
      }
    }
  }
  return g;
}

struct Objective {
  double loss = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  bool background_only = false;
  HeadGradients grad;
};

/// Loss of the head on one item together with its gradients.
inline Objective tspp_objective(const CostMap& s, const TsppHeadParams& p, const ProbabilityGrid& target,
                                const LabelMap& labels, double lambda_mse) {
  const auto trace = head_forward_trace(s, p);
  const auto loss = tspp_loss(head_output(trace), target, labels, lambda_mse);
  Objective o;
  o.loss = loss.loss;
  o.ce = loss.ce;
  o.mse = loss.mse;
  o.background_only = loss.background_only;
  o.grad = head_backward(s, p, trace, loss.d_prob_logit, loss.d_mask_logits);
  return o;
}

struct TrainingItem {
  CostMap cost;
  LabelMap labels;         // grid resolution; 0 = background, k+1 = class k
  ProbabilityGrid target;  // sampling target
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int steps = 200;
  double learning_rate = 0.01;
  double lambda_mse = 0.5;
  Optimizer optimizer = Optimizer::adam;
};

struct TrainResult {
  TsppHeadParams params;
  std::vector<double> loss;  // mean objective before each step, plus the final value
  std::vector<double> ce;
  std::vector<double> mse;
};

/// Full-batch descent on the mean objective over the dataset with a fixed
/// step size. Only the head weights are updated.
inline TrainResult train_head(const std::vector<TrainingItem>& data, TsppHeadParams params, const TrainConfig& cfg) {
  if (data.empty()) throw Error("train_head: empty dataset");
  TrainResult r;
  Adam adam(params.weights.size(), cfg.learning_rate);
  const double inv = 1.0 / static_cast<double>(data.size());
  std::vector<double> grad(params.weights.size());
  for (int step = 0; step <= cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0, ce = 0, mse = 0;
    for (const auto& item : data) {
      const auto o = tspp_objective(item.cost, params, item.target, item.labels, cfg.lambda_mse);
      loss += o.loss * inv;
      ce += o.ce * inv;
      mse += o.mse * inv;
      const auto& gd = o.grad.params.data();
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gd[i] * inv;
    }
    if (!std::isfinite(loss)) throw Error("train_head: loss became non-finite at step " + std::to_string(step));
    r.loss.push_back(loss);
    r.ce.push_back(ce);
    r.mse.push_back(mse);
    if (step == cfg.steps) break;
    auto& w = params.weights.data();
    if (cfg.optimizer == Optimizer::adam) {
      adam.step(w, grad);
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * grad[i];
    }
    if (!params.weights.all_finite())
      throw Error("train_head: parameters became non-finite at step " + std::to_string(step));
  }
  r.params = std::move(params);
  return r;
}

}  // namespace maskinject
