#pragma once

#include <cmath>
#include <map>
#include <string>

#include "vcrn/numerics/graph.hpp"

namespace vcrn::training {

using numerics::Matrix;
using numerics::ParameterStore;

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // 0 disables clipping
};

/// Adam with bias correction. Gradients are rescaled to `clip_norm` by their
/// global L2 norm before the moment update.
template <class Real>
class Adam {
 public:
  explicit Adam(AdamOptions opt) : opt_(opt) {}

  /// Applies one update from the gradients held in `store` and returns the
  /// pre-clip global gradient norm.
  double step(ParameterStore<Real>& store) {
    double sq = 0;
    for (auto& [name, p] : store) {
      for (Real g : p.grad().data()) {
        if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter " + name);
        sq += static_cast<double>(g) * g;
      }
    }
    const double norm = std::sqrt(sq);
    const double factor = (opt_.clip_norm > 0 && norm > opt_.clip_norm) ? opt_.clip_norm / norm : 1;

    ++t_;
    const double c1 = 1 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : store) {
      auto [mit, fresh] = m_.try_emplace(name, p.rows(), p.cols());
      if (fresh) v_.emplace(name, Matrix<Real>(p.rows(), p.cols()));
      Matrix<Real>& m = mit->second;
      Matrix<Real>& v = v_.at(name);
      Matrix<Real>& w = p.mutable_value();
      const Matrix<Real>& grad = p.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = grad[i] * factor;
        m[i] = static_cast<Real>(opt_.beta1 * m[i] + (1 - opt_.beta1) * g);
        v[i] = static_cast<Real>(opt_.beta2 * v[i] + (1 - opt_.beta2) * g * g);
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        w[i] = static_cast<Real>(w[i] - opt_.learning_rate * mhat / (std::sqrt(vhat) + opt_.eps));
      }
    }
    return norm;
  }

  std::size_t steps() const { return t_; }

 private:
  AdamOptions opt_;
  std::size_t t_ = 0;
  std::map<std::string, Matrix<Real>> m_, v_;
};

}  // namespace vcrn::training
