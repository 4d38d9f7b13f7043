#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vcrn/inference/beam_search.hpp"

namespace vcrn::inference::toy {

// Tokens 0, 1 and eos = 2. Next-token probabilities depend on the whole
// prefix through a lookup table filled from a seed (or by hand).
struct ToyModel {
  using State = std::vector<std::int32_t>;
  std::map<State, std::vector<double>> table;
  std::function<std::vector<double>(const State&)> fallback;

  State initial_state() const { return {}; }
  std::int32_t start_token() const { return -1; }
  std::pair<State, std::vector<double>> advance(const State& s, std::int32_t tok) const {
    State next = s;
    if (tok >= 0) next.push_back(tok);
    auto it = table.find(next);
    std::vector<double> p = it != table.end() ? it->second : fallback(next);
    for (auto& v : p) v = std::log(v);
    return {next, p};
  }
};

static_assert(StepModel<ToyModel>);

inline ToyModel hand_toy() {
  ToyModel m;
  m.table[{}] = {0.5, 0.45, 0.05};
  m.table[{0}] = {0.35, 0.35, 0.3};
  m.table[{1}] = {0.05, 0.05, 0.9};
  m.fallback = [](const auto&) { return std::vector<double>{0.3, 0.3, 0.4}; };
  return m;
}

inline ToyModel random_toy(std::uint64_t seed) {
  ToyModel m;
  m.fallback = [seed](const ToyModel::State& s) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(s.size()),
                      static_cast<std::uint64_t>(std::hash<std::string>{}(std::string(s.begin(), s.end())))};
    std::mt19937_64 rng(seq);
    std::gamma_distribution<double> g(0.7, 1.0);
    std::vector<double> p(3);
    double z = 0;
    for (auto& v : p) z += (v = g(rng) + 1e-6);
    for (auto& v : p) v /= z;
    return p;
  };
  return m;
}

inline DecodeOptions toy_options(std::size_t max_len = 4) {
  return DecodeOptions{.max_len = max_len, .eos_id = 2, .banned = {}, .length_alpha = 0};
}

// Best eos-terminated sequence of at most `max_len` tokens (eos included).
inline Hypothesis exhaustive(const ToyModel& m, std::size_t max_len) {
  Hypothesis best;
  best.score = -INFINITY;
  std::function<void(const ToyModel::State&, std::int32_t, Hypothesis)> walk =
      [&](const ToyModel::State& s, std::int32_t last, Hypothesis h) {
        if (h.tokens.size() + 1 > max_len) return;
        auto [next, logp] = m.advance(s, last);
        Hypothesis done = h;
        done.score += logp[2];
        done.finished = true;
        if (done.score > best.score) best = done;
        for (std::int32_t t = 0; t < 2; ++t) {
          Hypothesis grown = h;
          grown.tokens.push_back(t);
          grown.score += logp[static_cast<std::size_t>(t)];
          walk(next, t, grown);
        }
      };
  walk(m.initial_state(), m.start_token(), Hypothesis{});
  return best;
}

}  // namespace vcrn::inference::toy
