#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maskinject/dmi.hpp"
#include "maskinject/error.hpp"
#include "maskinject/params.hpp"
#include "maskinject/random.hpp"
#include "maskinject/tspp_head.hpp"

namespace maskinject {

struct BlockReport {
  std::string name;
  std::size_t size = 0;
  double max_abs_error = 0.0;
  double rel_error = 0.0;  // max_abs_error / max(|analytic|_inf, |numeric|_inf, floor)
};

struct GradReport {
  std::string op;
  double tolerance = 0.0;
  std::vector<BlockReport> blocks;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.rel_error);
    return m;
  }
  bool passed() const { return max_rel_error() < tolerance; }
};

/// Scale below which a block's gradient is treated as zero when forming the
/// relative error; keeps round-off in near-zero blocks from dominating.
inline constexpr double kGradScaleFloor = 1e-6;

/// Central differences of `loss` around `x`, compared blockwise against
/// `analytic`.
inline GradReport finite_difference_check(const std::function<double(std::span<const double>)>& loss,
                                          std::vector<double> x, std::span<const double> analytic,
                                          const std::vector<ParamBlock>& blocks, double step, double tol,
                                          std::string op = {}) {
  if (analytic.size() != x.size()) throw Error("gradcheck: analytic gradient size mismatch");
  GradReport rep{std::move(op), tol, {}};
  for (const auto& b : blocks) {
    BlockReport br{b.name, b.size, 0.0, 0.0};
    double scale_a = 0.0, scale_n = 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (!std::isfinite(analytic[i])) throw Error("gradcheck: non-finite analytic gradient in block " + b.name);
      const double saved = x[i];
      x[i] = saved + step;
      const double up = loss(x);
      x[i] = saved - step;
      const double down = loss(x);
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      if (!std::isfinite(numeric)) throw Error("gradcheck: non-finite numeric gradient in block " + b.name);
      br.max_abs_error = std::max(br.max_abs_error, std::abs(numeric - analytic[i]));
      scale_a = std::max(scale_a, std::abs(analytic[i]));
      scale_n = std::max(scale_n, std::abs(numeric));
    }
    br.rel_error = br.max_abs_error / std::max({scale_a, scale_n, kGradScaleFloor});
    rep.blocks.push_back(br);
  }
  return rep;
}

enum class GradOp { linear, cross_attention, low_freq, high_freq, tspp };

inline GradOp parse_grad_op(const std::string& s) {
  if (s == "linear") return GradOp::linear;
  if (s == "cross-attention") return GradOp::cross_attention;
  if (s == "low-freq") return GradOp::low_freq;
  if (s == "high-freq") return GradOp::high_freq;
  if (s == "tspp") return GradOp::tspp;
  throw Error("unknown gradcheck op '" + s + "' (linear, cross-attention, low-freq, high-freq, tspp)");
}

inline std::string grad_op_name(GradOp op) {
  switch (op) {
    case GradOp::linear: return "linear";
    case GradOp::cross_attention: return "cross-attention";
    case GradOp::low_freq: return "low-freq";
    case GradOp::high_freq: return "high-freq";
    case GradOp::tspp: return "tspp";
  }
  return "?";
}

namespace detail {

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Random non-empty masks (axis-aligned boxes) over an h x w grid.
inline MaskSet random_box_masks(int n, int h, int w, Rng& rng) {
  MaskSet ms(w, h, false);
  for (int k = 0; k < n; ++k) {
    BinaryMask m(w, h);
    const int x0 = static_cast<int>(rng.uniform_int(0, w - 1)), y0 = static_cast<int>(rng.uniform_int(0, h - 1));
    const int x1 = static_cast<int>(rng.uniform_int(x0, w - 1)), y1 = static_cast<int>(rng.uniform_int(y0, h - 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) m.set(x, y);
    ms.push_back(std::move(m));
  }
  ms.disjoint = ms.verify_disjoint();
  return ms;
}

inline double weighted_sum(const FeatureMap& f, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * r[i];
  return s;
}

}  // namespace detail

/// Builds a random instance of `op` from `seed` and compares analytic
/// gradients of a scalar readout against central differences in double
/// precision.
inline GradReport gradcheck(GradOp op, std::uint64_t seed, double tol = 1e-4, double step = 1e-5) {
  Rng rng(seed);
  const std::string name = grad_op_name(op);
  switch (op) {
    case GradOp::linear: {
      const int n = 6, m = 4;
      const auto a = detail::random_vector(static_cast<std::size_t>(n) * m, rng);
      const auto r = detail::random_vector(m, rng);
      const auto x = detail::random_vector(n, rng);
      std::vector<double> grad(n, 0.0);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) grad[j] += a[i * n + j] * r[i];
      auto loss = [&](std::span<const double> v) {
        double s = 0.0;
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) s += r[i] * a[i * n + j] * v[j];
        return s;
      };
      return finite_difference_check(loss, x, grad, {{"x", 0, static_cast<std::size_t>(n)}}, step, tol, name);
    }
    case GradOp::cross_attention: {
      const int D = 4, h = 5, w = 5, N = 3;
      FeatureMap q(D, h, w);
      q.values = detail::random_vector(q.values.size(), rng);
      MaskEmbeddings e{N, D, detail::random_vector(static_cast<std::size_t>(N) * D, rng), {}};
      const auto r = detail::random_vector(q.values.size(), rng);
      FeatureMap dout(D, h, w);
      dout.values = r;
      const auto g = cross_attention_backward(q, e, dout);
      std::vector<double> x = q.values, grad = g.query.values;
      x.insert(x.end(), e.values.begin(), e.values.end());
      grad.insert(grad.end(), g.emb.begin(), g.emb.end());
      const std::size_t nq = q.values.size();
      auto loss = [&](std::span<const double> v) {
        FeatureMap qq(D, h, w);
        std::copy(v.begin(), v.begin() + nq, qq.values.begin());
        MaskEmbeddings ee{N, D, std::vector<double>(v.begin() + nq, v.end()), {}};
        return detail::weighted_sum(cross_attention(qq, ee), r);
      };
      return finite_difference_check(loss, x, grad, {{"query", 0, nq}, {"embeddings", nq, e.values.size()}}, step,
                                     tol, name);
    }
    case GradOp::low_freq: {
      const int D = 4, h = 6, w = 6;
      FeatureMap f(D, h, w);
      f.values = detail::random_vector(f.values.size(), rng);
      const auto masks = detail::random_box_masks(3, h, w, rng);
      FeatureMap dout(D, h, w);
      dout.values = detail::random_vector(f.values.size(), rng);
      const auto df = low_freq_backward(f, masks, dout);
      auto loss = [&](std::span<const double> v) {
        FeatureMap ff(D, h, w);
        std::copy(v.begin(), v.end(), ff.values.begin());
        return detail::weighted_sum(low_freq_inject(ff, masks), dout.values);
      };
      return finite_difference_check(loss, f.values, df.values, {{"features", 0, f.values.size()}}, step, tol,
                                     name);
    }
    case GradOp::high_freq: {
      const int D = 4, h = 8, w = 8;
      FeatureMap f(D, h, w);
      f.values = detail::random_vector(f.values.size(), rng);
      const auto masks = detail::random_box_masks(2, h, w, rng);
      auto params = HighFreqParams::init(D, rng.next());
      for (auto& gm : params.weights.block(HighFreqParams::kGamma)) gm = rng.uniform(0.5, 1.5);
      for (auto& b : params.weights.block(HighFreqParams::kB1)) b = rng.uniform(-0.5, 0.5);
      for (auto& b : params.weights.block(HighFreqParams::kB2)) b = rng.uniform(-0.5, 0.5);
      for (auto& b : params.weights.block(HighFreqParams::kProjB)) b = rng.uniform(-0.5, 0.5);
      FeatureMap dout(D, h, w);
      dout.values = detail::random_vector(f.values.size(), rng);
      const auto g = high_freq_backward(f, masks, params, dout);
      std::vector<double> x = f.values, grad = g.features.values;
      x.insert(x.end(), params.weights.data().begin(), params.weights.data().end());
      grad.insert(grad.end(), g.params.data().begin(), g.params.data().end());
      const std::size_t nf = f.values.size();
      std::vector<ParamBlock> blocks{{"features", 0, nf}};
      for (auto b : params.weights.blocks()) {
        b.offset += nf;
        blocks.push_back(b);
      }
      auto loss = [&](std::span<const double> v) {
        FeatureMap ff(D, h, w);
        std::copy(v.begin(), v.begin() + nf, ff.values.begin());
        auto pp = params;
        pp.weights.assign(v.subspan(nf));
        return detail::weighted_sum(high_freq_inject(ff, masks, pp), dout.values);
      };
      return finite_difference_check(loss, x, grad, blocks, step, tol, name);
    }
    case GradOp::tspp: {
      const int K = 3, C = 8, h = 6, w = 6;
      CostMap s(K, h, w);
      s.values = detail::random_vector(s.values.size(), rng);
      auto params = TsppHeadParams::init(K, C, h, w, rng.next());
      for (auto& b : params.weights.block(TsppHeadParams::kB1)) b = rng.uniform(-0.3, 0.3);
      for (auto& b : params.weights.block(TsppHeadParams::kB2)) b = rng.uniform(-0.3, 0.3);
      params.weights.block(TsppHeadParams::kBp)[0] = rng.uniform(-0.5, 0.5);
      params.weights.block(TsppHeadParams::kBm)[0] = rng.uniform(-0.5, 0.5);
      ProbabilityGrid target(h, w);
      for (auto& p : target.probs) p = rng.uniform();
      target.raw = target.probs;
      LabelMap labels(w, h);
      for (auto& l : labels.labels) l = static_cast<std::uint32_t>(rng.uniform_int(0, K));
      const double lambda = 0.5;
      const auto obj = tspp_objective(s, params, target, labels, lambda);
      std::vector<double> x = s.values, grad = obj.grad.cost;
      x.insert(x.end(), params.weights.data().begin(), params.weights.data().end());
      grad.insert(grad.end(), obj.grad.params.data().begin(), obj.grad.params.data().end());
      const std::size_t ns = s.values.size();
      std::vector<ParamBlock> blocks{{"cost", 0, ns}};
      for (auto b : params.weights.blocks()) {
        b.offset += ns;
        blocks.push_back(b);
      }
      auto loss = [&](std::span<const double> v) {
        CostMap ss(K, h, w);
        std::copy(v.begin(), v.begin() + ns, ss.values.begin());
        auto pp = params;
        pp.weights.assign(v.subspan(ns));
        return tspp_loss(head_forward(ss, pp), target, labels, lambda).loss;
      };
      return finite_difference_check(loss, x, grad, blocks, step, tol, name);
    }
  }
  throw Error("gradcheck: unhandled op");
}

}  // namespace maskinject
