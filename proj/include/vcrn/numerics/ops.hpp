#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vcrn/numerics/graph.hpp"

namespace vcrn::numerics {

using Rng = std::mt19937_64;

namespace detail {

template <class Real>
void require_same_shape(const char* op, const Matrix<Real>& a, const Matrix<Real>& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() +
                         " vs " + b.shape_string());
  }
}

// out += A·B
template <class Real>
void gemm_acc(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    Real* o = out.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = a(i, p);
      if (av == Real(0)) continue;
      const Real* br = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

// out += A·Bᵀ
template <class Real>
void gemm_bt_acc(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ar = a.data().data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* br = b.data().data() + j * k;
      Real s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) += s;
    }
  }
}

// out += Aᵀ·B
template <class Real>
void gemm_at_acc(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const Real* ar = a.data().data() + p * m;
    const Real* br = b.data().data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Real av = ar[i];
      if (av == Real(0)) continue;
      Real* o = out.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Products

template <class Real>
Matrix<Real> matmul(const Matrix<Real>& a, const Matrix<Real>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents disagree, " + a.shape_string() + " · " +
                         b.shape_string());
  }
  Matrix<Real> out(a.rows(), b.cols());
  detail::gemm_acc(a, b, out);
  return out;
}

template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  return make_node<Real>(matmul(a.value(), b.value()), {a, b}, [](Node<Real>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) detail::gemm_bt_acc(n.grad, pb.value, pa.ensure_grad());
    if (pb.requires_grad) detail::gemm_at_acc(pa.value, n.grad, pb.ensure_grad());
  });
}

/// A·Bᵀ. Linear layers store weights as out×in and use this form.
template <class Real>
Var<Real> matmul_bt(const Var<Real>& a, const Var<Real>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_bt: inner extents disagree, " + a.value().shape_string() +
                         " · " + b.value().shape_string() + "^T");
  }
  Matrix<Real> out(a.rows(), b.rows());
  detail::gemm_bt_acc(a.value(), b.value(), out);
  return make_node<Real>(std::move(out), {a, b}, [](Node<Real>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) detail::gemm_acc(n.grad, pb.value, pa.ensure_grad());
    // d(B) = dOutᵀ · A
    if (pb.requires_grad) detail::gemm_at_acc(n.grad, pa.value, pb.ensure_grad());
  });
}

template <class Real>
Var<Real> transpose(const Var<Real>& x) {
  Matrix<Real> out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x.value()(i, j);
  return make_node<Real>(std::move(out), {x}, [](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += n.grad(j, i);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape("add", a.value(), b.value());
  Matrix<Real> out = a.value();
  out += b.value();
  return make_node<Real>(std::move(out), {a, b}, [](Node<Real>& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->ensure_grad() += n.grad;
  });
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape("sub", a.value(), b.value());
  Matrix<Real> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_node<Real>(std::move(out), {a, b}, [](Node<Real>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
    if (n.parents[1]->requires_grad) {
      auto& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <class Real>
Var<Real> hadamard(const Var<Real>& a, const Var<Real>& b) {
  detail::require_same_shape("hadamard", a.value(), b.value());
  Matrix<Real> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node<Real>(std::move(out), {a, b}, [](Node<Real>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa.value[i];
    }
  });
}

/// scale·x + shift
template <class Real>
Var<Real> affine(const Var<Real>& x, Real scale, Real shift = Real(0)) {
  Matrix<Real> out = x.value();
  for (auto& v : out.data()) v = scale * v + shift;
  return make_node<Real>(std::move(out), {x}, [scale](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
  });
}

template <class Real>
Var<Real> scale(const Var<Real>& x, Real s) {
  return affine(x, s);
}

/// x (m×n) plus the row vector b (1×n) on every row.
template <class Real>
Var<Real> add_row(const Var<Real>& x, const Var<Real>& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError("add_row: " + x.value().shape_string() + " + row " +
                         b.value().shape_string());
  }
  Matrix<Real> out = x.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b.value()[j];
  return make_node<Real>(std::move(out), {x, b}, [](Node<Real>& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
    if (n.parents[1]->requires_grad) {
      auto& g = n.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < n.grad.rows(); ++i)
        for (std::size_t j = 0; j < n.grad.cols(); ++j) g[j] += n.grad(i, j);
    }
  });
}

template <class Real>
Var<Real> sigmoid(const Var<Real>& x) {
  Matrix<Real> out = x.value();
  for (auto& v : out.data()) v = Real(1) / (Real(1) + std::exp(-v));
  Matrix<Real> y = out;
  return make_node<Real>(std::move(out), {x}, [y = std::move(y)](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y[i] * (Real(1) - y[i]);
  });
}

template <class Real>
Var<Real> tanh(const Var<Real>& x) {
  Matrix<Real> out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  Matrix<Real> y = out;
  return make_node<Real>(std::move(out), {x}, [y = std::move(y)](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (Real(1) - y[i] * y[i]);
  });
}

/// log(max(x, floor)); entries below the floor receive no gradient.
template <class Real>
Var<Real> log_clamped(const Var<Real>& x, Real floor) {
  Matrix<Real> out = x.value();
  for (auto& v : out.data()) v = std::log(std::max(v, floor));
  return make_node<Real>(std::move(out), {x}, [floor](Node<Real>& n) {
    auto& p = *n.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.value[i] > floor) g[i] += n.grad[i] / p.value[i];
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

/// Concatenation along the last axis; all parts share the row count.
template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().value().shape_string() +
                           " vs " + p.value().shape_string());
    }
    cols += p.cols();
  }
  Matrix<Real> out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p.value()(i, j);
    off += p.cols();
  }
  return make_node<Real>(std::move(out), parts, [](Node<Real>& n) {
    std::size_t off = 0;
    for (auto& p : n.parents) {
      const std::size_t c = p->value.cols();
      if (p->requires_grad) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) g(i, j) += n.grad(i, off + j);
      }
      off += c;
    }
  });
}

template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " +
                           parts.front().value().shape_string() + " vs " +
                           p.value().shape_string());
    }
    rows += p.rows();
  }
  std::vector<Real> values;
  values.reserve(rows * cols);
  for (const auto& p : parts)
    values.insert(values.end(), p.value().data().begin(), p.value().data().end());
  return make_node<Real>(Matrix<Real>(rows, cols, std::move(values)), parts,
                         [](Node<Real>& n) {
                           std::size_t off = 0;
                           for (auto& p : n.parents) {
                             const std::size_t sz = p->value.size();
                             if (p->requires_grad) {
                               auto& g = p->ensure_grad();
                               for (std::size_t i = 0; i < sz; ++i) g[i] += n.grad[off + i];
                             }
                             off += sz;
                           }
                         });
}

template <class Real>
Var<Real> slice_cols(const Var<Real>& x, std::size_t begin, std::size_t count) {
  if (begin + count > x.cols() || count == 0) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " +
                         x.value().shape_string());
  }
  Matrix<Real> out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, begin + j);
  return make_node<Real>(std::move(out), {x}, [begin, count](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) g(i, begin + j) += n.grad(i, j);
  });
}

/// Row r of x as a 1×n vector (embedding lookup).
template <class Real>
Var<Real> pick_row(const Var<Real>& x, std::size_t r) {
  if (r >= x.rows()) {
    throw ContractError("pick_row: row " + std::to_string(r) + " outside " +
                        x.value().shape_string());
  }
  auto row = x.value().row(r);
  return make_node<Real>(Matrix<Real>(1, x.cols(), std::vector<Real>(row.begin(), row.end())),
                         {x}, [r](Node<Real>& n) {
                           auto& g = n.parents[0]->ensure_grad();
                           for (std::size_t j = 0; j < n.grad.cols(); ++j) g(r, j) += n.grad[j];
                         });
}

/// Single entry as a 1×1 tensor.
template <class Real>
Var<Real> pick(const Var<Real>& x, std::size_t r, std::size_t c) {
  if (r >= x.rows() || c >= x.cols()) {
    throw ContractError("pick: (" + std::to_string(r) + ", " + std::to_string(c) +
                        ") outside " + x.value().shape_string());
  }
  return make_node<Real>(Matrix<Real>(1, 1, x.value()(r, c)), {x}, [r, c](Node<Real>& n) {
    n.parents[0]->ensure_grad()(r, c) += n.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <class Real>
Var<Real> mean_rows(const Var<Real>& x) {
  const std::size_t rows = x.rows();
  Matrix<Real> out(1, x.cols());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out[j] += x.value()(i, j);
  for (auto& v : out.data()) v /= static_cast<Real>(rows);
  return make_node<Real>(std::move(out), {x}, [rows](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    const Real inv = Real(1) / static_cast<Real>(rows);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += n.grad[j] * inv;
  });
}

template <class Real>
Var<Real> sum_all(const Var<Real>& x) {
  Real s = 0;
  for (Real v : x.value().data()) s += v;
  return make_node<Real>(Matrix<Real>(1, 1, s), {x}, [](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (auto& v : g.data()) v += n.grad[0];
  });
}

/// Sum of equally shaped terms, recorded as one node.
template <class Real>
Var<Real> add_n(const std::vector<Var<Real>>& terms) {
  if (terms.empty()) throw DimensionError("add_n: no operands");
  Matrix<Real> out = terms.front().value();
  for (std::size_t t = 1; t < terms.size(); ++t) {
    detail::require_same_shape("add_n", out, terms[t].value());
    out += terms[t].value();
  }
  return make_node<Real>(std::move(out), terms, [](Node<Real>& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->ensure_grad() += n.grad;
  });
}

// ---------------------------------------------------------------------------
// Normalisation

template <class Real>
Matrix<Real> softmax_rows(const Matrix<Real>& x) {
  Matrix<Real> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    Real mx = -std::numeric_limits<Real>::infinity();
    for (Real v : in) {
      if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
      mx = std::max(mx, v);
    }
    if (!std::isfinite(mx)) throw NumericError("softmax_rows: non-finite row maximum");
    Real sum = 0;
    auto o = out.row(i);
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (auto& v : o) v /= sum;
  }
  return out;
}

template <class Real>
Var<Real> softmax_rows(const Var<Real>& x) {
  Matrix<Real> out = softmax_rows(x.value());
  Matrix<Real> y = out;
  return make_node<Real>(std::move(out), {x}, [y = std::move(y)](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += n.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) += y(i, j) * (n.grad(i, j) - dot);
    }
  });
}

/// Per-row layer normalisation: (x − mean) / sqrt(var + eps) ⊙ gain + bias,
/// with the biased (1/d) variance.
template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias,
                     Real eps = Real(1e-5)) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (d < 2) throw DimensionError("layer_norm: needs at least 2 features per row");
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw DimensionError("layer_norm: gain " + gain.value().shape_string() + " / bias " +
                         bias.value().shape_string() + " do not match " +
                         x.value().shape_string());
  }
  Matrix<Real> xhat(rows, d);
  std::vector<Real> inv_std(rows);
  Matrix<Real> out(rows, d);
  for (std::size_t i = 0; i < rows; ++i) {
    auto in = x.value().row(i);
    Real mean = 0;
    for (Real v : in) mean += v;
    mean /= static_cast<Real>(d);
    Real var = 0;
    for (Real v : in) var += (v - mean) * (v - mean);
    var /= static_cast<Real>(d);
    inv_std[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (in[j] - mean) * inv_std[i];
      out(i, j) = xhat(i, j) * gain.value()[j] + bias.value()[j];
    }
  }
  return make_node<Real>(
      std::move(out), {x, gain, bias},
      [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<Real>& n) {
        auto& px = *n.parents[0];
        auto& pg = *n.parents[1];
        auto& pb = *n.parents[2];
        const std::size_t rows = xhat.rows(), d = xhat.cols();
        if (pg.requires_grad) {
          auto& g = pg.ensure_grad();
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < d; ++j) g[j] += n.grad(i, j) * xhat(i, j);
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < d; ++j) g[j] += n.grad(i, j);
        }
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          for (std::size_t i = 0; i < rows; ++i) {
            Real sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const Real dy = n.grad(i, j) * pg.value[j];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat(i, j);
            }
            const Real inv_d = Real(1) / static_cast<Real>(d);
            for (std::size_t j = 0; j < d; ++j) {
              const Real dy = n.grad(i, j) * pg.value[j];
              g(i, j) += inv_std[i] * (dy - inv_d * sum_dy - xhat(i, j) * inv_d * sum_dy_xhat);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Regularisation

/// Inverted dropout. Identity when not training or when p == 0.
template <class Real>
Var<Real> dropout(const Var<Real>& x, Real p, bool train, Rng& rng) {
  if (!(p >= Real(0) && p < Real(1))) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == Real(0)) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Real scale = Real(1) / (Real(1) - p);
  Matrix<Real> mask(x.rows(), x.cols());
  for (auto& m : mask.data()) m = keep(rng) ? scale : Real(0);
  Matrix<Real> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_node<Real>(std::move(out), {x}, [mask = std::move(mask)](Node<Real>& n) {
    auto& g = n.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * mask[i];
  });
}

}  // namespace vcrn::numerics
