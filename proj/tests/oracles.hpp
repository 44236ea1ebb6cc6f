#pragma once

// Straight-line reference implementations used as test oracles. They share
// no code with the library: plain nested vectors, scalar loops, no anchoring
// or max-subtraction tricks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double cosine(const Vec& a, const Vec& b) {
  return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
}

inline Mat similarity(const Mat& f) {
  const std::size_t n = f.size();
  Mat s(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s[i][j] = cosine(f[i], f[j]);
  return s;
}

inline Vec sff_weights(const Mat& f, double scale) {
  const Mat s = similarity(f);
  const std::size_t n = f.size();
  Vec w(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = 0;
    for (std::size_t j = 0; j < n; ++j) a += (s[i][j] + 1.0) / 2.0;
    w[i] = 1.0 / std::pow(a, scale);
    total += w[i];
  }
  for (auto& x : w) x /= total;
  return w;
}

inline Vec sff_fuse(const Mat& f, double scale) {
  const Vec w = sff_weights(f, scale);
  Vec out(f[0].size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w[i] * f[i][k];
  return out;
}

inline Vec mean(const Mat& f) {
  Vec out(f[0].size(), 0.0);
  for (const auto& r : f)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += r[k];
  for (auto& x : out) x /= static_cast<double>(f.size());
  return out;
}

// -log softmax of the diagonal, averaged; symmetric averages both directions.
inline double info_nce(const Mat& q, const Mat& r, double tau, bool symmetric) {
  const std::size_t b = q.size();
  auto one_way = [&](const Mat& x, const Mat& y) {
    double loss = 0;
    for (std::size_t i = 0; i < b; ++i) {
      double denom = 0;
      for (std::size_t j = 0; j < b; ++j) denom += std::exp(cosine(x[i], y[j]) / tau);
      loss += -(cosine(x[i], y[i]) / tau - std::log(denom));
    }
    return loss / static_cast<double>(b);
  };
  if (!symmetric) return one_way(q, r);
  return 0.5 * (one_way(q, r) + one_way(r, q));
}

inline double cross_entropy(const Vec& logits, int label) {
  double denom = 0;
  for (double z : logits) denom += std::exp(z);
  return std::log(denom) - logits[static_cast<std::size_t>(label)];
}

// Linear head over the concatenation [x ; s].
inline Vec head_logits(const Mat& w, const Vec& bias, const Vec& x, const Vec& s) {
  Vec z(bias);
  const std::size_t c = x.size();
  for (std::size_t k = 0; k < z.size(); ++k) {
    for (std::size_t t = 0; t < c; ++t) z[k] += w[k][t] * x[t];
    for (std::size_t t = 0; t < c; ++t) z[k] += w[k][c + t] * s[t];
  }
  return z;
}

// Average precision of one ranked list given relevance flags.
inline double average_precision(const std::vector<bool>& relevant) {
  std::size_t hits = 0, total = 0;
  double sum = 0;
  for (bool r : relevant) total += r ? 1 : 0;
  for (std::size_t pos = 0; pos < relevant.size(); ++pos) {
    if (!relevant[pos]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
  }
  return total == 0 ? 0.0 : sum / static_cast<double>(total);
}

struct NaiveReport {
  std::vector<double> recall;  // one per requested k
  std::size_t k_1pct = 0;
  double recall_1pct = 0;
  double ap = 0;
};

// Expands every rank into a full relevance list of length M and counts.
inline NaiveReport naive_evaluate(const std::vector<std::size_t>& ranks,
                                  const std::vector<std::size_t>& ks, std::size_t m) {
  std::vector<std::vector<bool>> lists;
  for (std::size_t r : ranks) {
    std::vector<bool> rel(m, false);
    rel[r - 1] = true;
    lists.push_back(rel);
  }
  auto recall = [&](std::size_t k) {
    std::size_t hits = 0;
    for (const auto& rel : lists) {
      bool found = false;
      for (std::size_t pos = 0; pos < k && pos < m; ++pos) found = found || rel[pos];
      hits += found ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(lists.size());
  };
  NaiveReport out;
  for (std::size_t k : ks) out.recall.push_back(recall(k));
  out.k_1pct = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(m / 100.0)));
  out.recall_1pct = recall(out.k_1pct);
  Vec aps;
  for (const auto& rel : lists) aps.push_back(average_precision(rel));
  std::sort(aps.begin(), aps.end(), std::greater<>());
  double sum = 0;
  for (double a : aps) sum += a;
  out.ap = sum / static_cast<double>(aps.size());
  return out;
}

inline Mat random_mat(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, Vec(cols));
  for (auto& r : m)
    for (auto& x : r) x = nd(gen);
  return m;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace oracle
