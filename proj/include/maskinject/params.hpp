#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/random.hpp"

namespace maskinject {

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat parameter storage with named contiguous blocks. Gradients use the
/// same layout so optimizers and gradient checks can treat both as plain
/// vectors.
class ParamVector {
 public:
  ParamVector() = default;

  std::size_t add(std::string name, std::size_t size) {
    blocks_.push_back({std::move(name), data_.size(), size});
    data_.resize(data_.size() + size, 0.0);
    return blocks_.size() - 1;
  }

  std::span<double> block(std::size_t i) { return {data_.data() + blocks_[i].offset, blocks_[i].size}; }
  std::span<const double> block(std::size_t i) const {
    return {data_.data() + blocks_[i].offset, blocks_[i].size};
  }

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  /// Same layout, all zeros.
  ParamVector zeros_like() const {
    ParamVector z = *this;
    std::fill(z.data_.begin(), z.data_.end(), 0.0);
    return z;
  }

  void assign(std::span<const double> values) {
    if (values.size() != data_.size()) throw Error("ParamVector: size mismatch on assign");
    std::copy(values.begin(), values.end(), data_.begin());
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<ParamBlock> blocks_;
  std::vector<double> data_;
};

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
inline void xavier_fill(std::span<double> w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w) v = rng.uniform(-limit, limit);
}

/// Adam with a constant learning rate.
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace maskinject
