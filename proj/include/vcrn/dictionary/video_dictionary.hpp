#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vcrn/binary_io.hpp"
#include "vcrn/corpus/video.hpp"

namespace vcrn::dictionary {

using numerics::Matrix;

/// K-means codebook over frame features. Each row of `centers` is one concept.
struct VideoDictionary {
  Matrix<float> centers;  // M × d
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double objective = 0;                   // sum of squared distances
  std::vector<double> objective_history;  // one entry per assignment pass (not persisted)

  std::size_t size() const { return centers.rows(); }
  std::size_t dim() const { return centers.cols(); }
};

struct KMeansOptions {
  std::size_t max_iter = 100;
  double tol = 1e-4;  // on the largest Euclidean center displacement
  std::uint64_t seed = 0;
  std::size_t restarts = 3;  // independent k-means++ seedings; the lowest objective wins
  bool l2_normalize = false;
};

/// Row-stacks every frame of every video, in corpus order.
inline Matrix<double> pool_frames(const std::vector<corpus::Video>& videos,
                                  bool l2_normalize = false) {
  if (videos.empty()) throw ConfigError("pool_frames: no videos");
  const std::size_t d = videos.front().dim();
  std::size_t rows = 0;
  for (const auto& v : videos) {
    if (v.dim() != d || v.features.cols() != d) {
      throw ConfigError("pool_frames: video " + v.id + " has dim " + std::to_string(v.dim()) +
                        ", expected " + std::to_string(d));
    }
    rows += v.frames();
  }
  Matrix<double> pool(rows, d);
  std::size_t r = 0;
  for (const auto& v : videos) {
    for (std::size_t f = 0; f < v.frames(); ++f, ++r) {
      double norm = 0;
      for (std::size_t j = 0; j < d; ++j) {
        pool(r, j) = v.features(f, j);
        norm += pool(r, j) * pool(r, j);
      }
      if (l2_normalize && norm > 0) {
        const double inv = 1.0 / std::sqrt(norm);
        for (std::size_t j = 0; j < d; ++j) pool(r, j) *= inv;
      }
    }
  }
  return pool;
}

namespace detail {

template <class A, class B>
double squared_distance(const A& x, const B& c) {
  double s = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = static_cast<double>(x[j]) - static_cast<double>(c[j]);
    s += diff * diff;
  }
  return s;
}

struct Assignment {
  std::vector<std::size_t> label;
  std::vector<double> dist2;
  double objective = 0;
};

inline Assignment assign(const Matrix<double>& pool, const Matrix<double>& centers) {
  Assignment a;
  a.label.resize(pool.rows());
  a.dist2.resize(pool.rows());
  for (std::size_t i = 0; i < pool.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < centers.rows(); ++k) {
      const double dd = squared_distance(pool.row(i), centers.row(k));
      if (dd < best) {
        best = dd;
        arg = k;
      }
    }
    a.label[i] = arg;
    a.dist2[i] = best;
    a.objective += best;
  }
  return a;
}

inline Matrix<double> plus_plus_seeding(const Matrix<double>& pool, std::size_t m,
                                        std::mt19937_64& rng) {
  const std::size_t n = pool.rows(), d = pool.cols();
  Matrix<double> centers(m, d);
  std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
  auto copy_row = [&](std::size_t k, std::size_t i) {
    for (std::size_t j = 0; j < d; ++j) centers(k, j) = pool(i, j);
  };
  copy_row(0, uniform(rng));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(pool.row(i), centers.row(0));
  for (std::size_t k = 1; k < m; ++k) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total <= 0) {
      chosen = uniform(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    }
    copy_row(k, chosen);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(pool.row(i), centers.row(k)));
  }
  return centers;
}

// Means of the assigned points. An empty cluster takes over the point that is
// farthest from its own center; the assignment is updated to match.
inline Matrix<double> update_centers(const Matrix<double>& pool, Assignment& a, std::size_t m) {
  const std::size_t n = pool.rows(), d = pool.cols();
  std::vector<std::size_t> count(m, 0);
  for (auto l : a.label) ++count[l];
  for (std::size_t k = 0; k < m; ++k) {
    if (count[k] != 0) continue;
    std::size_t far = n;
    double far_d = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (count[a.label[i]] > 1 && a.dist2[i] > far_d) {
        far_d = a.dist2[i];
        far = i;
      }
    }
    if (far == n) break;  // fewer distinct donors than clusters; cannot repair
    --count[a.label[far]];
    a.label[far] = k;
    a.dist2[far] = 0;
    count[k] = 1;
  }
  Matrix<double> centers(m, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centers(a.label[i], j) += pool(i, j);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t j = 0; j < d; ++j) centers(k, j) /= static_cast<double>(std::max<std::size_t>(count[k], 1));
  return centers;
}

struct LloydResult {
  Matrix<double> centers;
  std::vector<std::size_t> labels;
  std::size_t iterations = 0;
  std::vector<double> history;
};

inline LloydResult lloyd(const Matrix<double>& pool, Matrix<double> centers,
                         std::size_t max_iter, double tol) {
  const std::size_t m = centers.rows();
  LloydResult res;
  Assignment a = assign(pool, centers);
  res.history.push_back(a.objective);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Matrix<double> next = update_centers(pool, a, m);
    double shift = 0;
    for (std::size_t k = 0; k < m; ++k)
      shift = std::max(shift, std::sqrt(squared_distance(next.row(k), centers.row(k))));
    centers = std::move(next);
    Assignment b = assign(pool, centers);
    res.history.push_back(b.objective);
    res.iterations = it;
    const bool stable = b.label == a.label;
    a = std::move(b);
    if (stable) break;
    if (shift < tol) {
      // Leave every center at the mean of the points assigned to it.
      centers = update_centers(pool, a, m);
      double j = 0;
      for (std::size_t i = 0; i < pool.rows(); ++i)
        j += squared_distance(pool.row(i), centers.row(a.label[i]));
      res.history.push_back(j);
      break;
    }
  }
  res.centers = std::move(centers);
  res.labels = std::move(a.label);
  return res;
}

inline VideoDictionary finish(LloydResult r, std::uint64_t seed) {
  VideoDictionary dict;
  dict.centers = r.centers.cast<float>();
  dict.seed = seed;
  dict.iterations = r.iterations;
  dict.objective = r.history.back();
  dict.objective_history = std::move(r.history);
  return dict;
}

inline void check_fit_args(const Matrix<double>& pool, std::size_t m) {
  if (m < 1) throw ConfigError("k-means needs M >= 1");
  if (m > pool.rows()) {
    throw ConfigError("k-means: M = " + std::to_string(m) + " exceeds the " +
                      std::to_string(pool.rows()) + " pooled frames");
  }
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeds; best of `restarts` runs.
inline VideoDictionary kmeans_fit(const Matrix<double>& pool, std::size_t m,
                                  const KMeansOptions& opt = {}) {
  detail::check_fit_args(pool, m);
  std::mt19937_64 seeder(opt.seed);
  std::optional<detail::LloydResult> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(opt.restarts, 1); ++r) {
    std::mt19937_64 rng(seeder());
    auto res = detail::lloyd(pool, detail::plus_plus_seeding(pool, m, rng), opt.max_iter, opt.tol);
    if (!best || res.history.back() < best->history.back()) best = std::move(res);
  }
  return detail::finish(std::move(*best), opt.seed);
}

/// Lloyd iterations from caller-supplied initial centers.
inline VideoDictionary kmeans_fit_from(const Matrix<double>& pool, Matrix<double> initial,
                                       const KMeansOptions& opt = {}) {
  detail::check_fit_args(pool, initial.rows());
  if (initial.cols() != pool.cols()) throw DimensionError("kmeans_fit_from: dim mismatch");
  return detail::finish(detail::lloyd(pool, std::move(initial), opt.max_iter, opt.tol), opt.seed);
}

/// Index of the closest center; ties go to the lowest index.
template <class Range>
std::size_t nearest_center(const Range& x, const VideoDictionary& dict) {
  if (x.size() != dict.dim()) {
    throw DimensionError("nearest_center: vector of dim " + std::to_string(x.size()) +
                         " vs dictionary dim " + std::to_string(dict.dim()));
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t k = 0; k < dict.size(); ++k) {
    const double dd = detail::squared_distance(x, dict.centers.row(k));
    if (dd < best) {
      best = dd;
      arg = k;
    }
  }
  return arg;
}

inline constexpr char kDictionaryMagic[] = "VCRNDICT";
inline constexpr std::uint32_t kDictionaryVersion = 1;

inline std::vector<char> encode_dictionary(const VideoDictionary& dict) {
  io::Writer w;
  w.put_raw(kDictionaryMagic);
  w.put_u32(kDictionaryVersion);
  w.put_u32(static_cast<std::uint32_t>(dict.size()));
  w.put_u32(static_cast<std::uint32_t>(dict.dim()));
  w.put_u64(dict.seed);
  w.put_f64(dict.objective);
  for (float v : dict.centers.data()) w.put_f32(v);
  return w.bytes();
}

inline VideoDictionary decode_dictionary(const std::vector<char>& bytes, const std::string& what) {
  io::Reader r(bytes, what);
  r.expect_magic(kDictionaryMagic);
  r.expect_version(kDictionaryVersion);
  const std::uint64_t m = r.get_u32();
  const std::uint64_t d = r.get_u32();
  VideoDictionary dict;
  dict.seed = r.get_u64();
  dict.objective = r.get_f64();
  r.expect_remaining(m * d * 4);
  if (m == 0 || d == 0) throw ParseError(ParseError::Reason::kMalformed, what + ": empty dictionary");
  std::vector<float> values(m * d);
  for (auto& v : values) v = r.get_f32();
  dict.centers = Matrix<float>(m, d, std::move(values));
  if (!dict.centers.all_finite())
    throw ParseError(ParseError::Reason::kMalformed, what + ": non-finite center");
  return dict;
}

inline void save_dictionary(const VideoDictionary& dict, const std::string& path) {
  io::write_file(path, encode_dictionary(dict));
}

inline VideoDictionary load_dictionary(const std::string& path) {
  return decode_dictionary(io::read_file(path), path);
}

}  // namespace vcrn::dictionary
