#pragma once

#include <cstdint>
#include <vector>

#include "vcrn/corpus/vocabulary.hpp"
#include "vcrn/numerics/ops.hpp"

namespace vcrn::training {

using numerics::Var;

inline constexpr double kProbabilityFloor = 1e-12;

/// −Σ_t log p_t[w*_t] over non-pad targets. `probs[t]` is 1 × |vocab|.
template <class Real>
Var<Real> sequence_nll(const std::vector<Var<Real>>& probs,
                       const std::vector<std::int32_t>& targets,
                       std::int32_t pad_id = corpus::kPadId) {
  if (probs.size() != targets.size()) {
    throw DimensionError("sequence_nll: " + std::to_string(probs.size()) + " distributions for " +
                         std::to_string(targets.size()) + " targets");
  }
  std::vector<Var<Real>> terms;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (targets[t] == pad_id) continue;
    if (targets[t] < 0 || static_cast<std::size_t>(targets[t]) >= probs[t].cols()) {
      throw ContractError("target id " + std::to_string(targets[t]) + " outside vocabulary");
    }
    terms.push_back(numerics::log_clamped(
        numerics::pick(probs[t], 0, static_cast<std::size_t>(targets[t])),
        static_cast<Real>(kProbabilityFloor)));
  }
  if (terms.empty()) return Var<Real>::constant(numerics::Matrix<Real>(1, 1));
  return numerics::scale(numerics::add_n(terms), Real(-1));
}

/// Batch mean of per-sequence sums.
template <class Real>
Var<Real> cross_entropy_loss(const std::vector<std::vector<Var<Real>>>& probs,
                             const std::vector<std::vector<std::int32_t>>& targets,
                             std::int32_t pad_id = corpus::kPadId) {
  if (probs.empty() || probs.size() != targets.size()) {
    throw DimensionError("cross_entropy_loss: batch of " + std::to_string(probs.size()) +
                         " predictions and " + std::to_string(targets.size()) + " targets");
  }
  std::vector<Var<Real>> seqs;
  for (std::size_t i = 0; i < probs.size(); ++i)
    seqs.push_back(sequence_nll(probs[i], targets[i], pad_id));
  return numerics::scale(numerics::add_n(seqs), Real(1) / static_cast<Real>(seqs.size()));
}

struct TokenCounts {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

/// Argmax (lowest id on ties) against non-pad targets.
template <class Real>
TokenCounts count_correct(const std::vector<Var<Real>>& probs,
                          const std::vector<std::int32_t>& targets,
                          std::int32_t pad_id = corpus::kPadId) {
  TokenCounts c;
  for (std::size_t t = 0; t < probs.size() && t < targets.size(); ++t) {
    if (targets[t] == pad_id) continue;
    const auto& p = probs[t].value();
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.cols(); ++j)
      if (p[j] > p[best]) best = j;
    c.correct += static_cast<std::int32_t>(best) == targets[t];
    ++c.total;
  }
  return c;
}

}  // namespace vcrn::training
