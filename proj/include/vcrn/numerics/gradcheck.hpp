#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vcrn/numerics/graph.hpp"

namespace vcrn::numerics {

/// Central-difference gradient of a scalar function of the store, entry by
/// entry. Every parameter is restored to its original value afterwards.
template <class Real>
std::map<std::string, Matrix<Real>> finite_difference_grad(
    const std::function<Real()>& f, ParameterStore<Real>& store, Real h) {
  if (!(h > Real(0))) throw ConfigError("finite difference step must be positive");
  std::map<std::string, Matrix<Real>> out;
  for (auto& [name, param] : store) {
    Matrix<Real>& theta = param.mutable_value();
    Matrix<Real> g(theta.rows(), theta.cols());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const Real saved = theta[i];
      theta[i] = saved + h;
      const Real up = f();
      theta[i] = saved - h;
      const Real down = f();
      theta[i] = saved;
      g[i] = (up - down) / (Real(2) * h);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

/// ‖a − b‖ / max(‖a‖, ‖b‖), taken per parameter tensor; 0 when both vanish.
template <class Real>
Real relative_error(const Matrix<Real>& a, const Matrix<Real>& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("relative_error shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
  Real diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const Real denom = std::sqrt(std::max(na, nb));
  if (denom == Real(0)) return Real(0);
  return std::sqrt(diff) / denom;
}

struct ParameterGradError {
  std::string name;
  std::size_t entries = 0;
  double relative_error = 0;
  double max_abs_error = 0;
};

struct GradCheckReport {
  std::vector<ParameterGradError> parameters;  // name order
  double max_relative_error = 0;
  std::string worst_parameter;
};

/// Compares reverse accumulation against central differences for every
/// registered parameter. `loss_fn` must build a fresh graph on each call.
template <class Real>
GradCheckReport check_gradients(const std::function<Var<Real>()>& loss_fn,
                                ParameterStore<Real>& store, Real h) {
  store.zero_grad();
  backward(loss_fn());
  std::map<std::string, Matrix<Real>> analytic;
  for (auto& [name, p] : store) analytic.emplace(name, p.grad());

  const auto numeric = finite_difference_grad<Real>([&] { return loss_fn().scalar(); }, store, h);

  GradCheckReport report;
  for (const auto& [name, a] : analytic) {
    const Matrix<Real>& n = numeric.at(name);
    ParameterGradError e;
    e.name = name;
    e.entries = a.size();
    e.relative_error = static_cast<double>(relative_error(a, n));
    e.max_abs_error = static_cast<double>(max_abs_diff(a, n));
    if (e.relative_error >= report.max_relative_error) {
      if (e.relative_error > report.max_relative_error || report.worst_parameter.empty()) {
        report.worst_parameter = name;
      }
      report.max_relative_error = e.relative_error;
    }
    report.parameters.push_back(std::move(e));
  }
  return report;
}

}  // namespace vcrn::numerics
