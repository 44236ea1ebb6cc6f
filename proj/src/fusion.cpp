#include "setgeo/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "setgeo/error.hpp"

namespace setgeo::fusion {
namespace {

void check_nonempty(const Matrix& features) {
  require(features.rows() >= 1 && features.cols() >= 1, ErrorCode::kArgument,
          "feature set must contain at least one non-empty feature");
}

std::vector<double> row_norms(const Matrix& features) {
  std::vector<double> norms(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto r = features.row(i);
    for (double v : r) {
      require(std::isfinite(v), ErrorCode::kDegenerateInput,
              "feature " + std::to_string(i) + " has a non-finite entry");
    }
    norms[i] = norm(r);
    require(norms[i] > 0.0, ErrorCode::kDegenerateInput,
            "feature " + std::to_string(i) + " has zero norm");
  }
  return norms;
}

void check_scale(double scale) {
  require(std::isfinite(scale) && scale >= 0.0, ErrorCode::kConfig,
          "fusion scale must be a finite non-negative number");
}

// Sum of w_i * f_i written as f_0 + sum w_i (f_i - f_0), which equals the
// plain weighted sum whenever the weights sum to one and reproduces f_0
// exactly when all rows coincide.
std::vector<double> anchored_combination(const Matrix& features,
                                         std::span<const double> weights) {
  const std::size_t c = features.cols();
  const auto anchor = features.row(0);
  std::vector<double> delta(c, 0.0);
  for (std::size_t i = 1; i < features.rows(); ++i) {
    const auto f = features.row(i);
    for (std::size_t k = 0; k < c; ++k) delta[k] += weights[i] * (f[k] - anchor[k]);
  }
  std::vector<double> out(anchor.begin(), anchor.end());
  for (std::size_t k = 0; k < c; ++k) out[k] += delta[k];
  return out;
}

}  // namespace

Matrix cosine_similarity_matrix(const Matrix& features) {
  check_nonempty(features);
  const auto norms = row_norms(features);
  const std::size_t n = features.rows();
  Matrix sim(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sim(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = std::clamp(
          dot(features.row(i), features.row(j)) / (norms[i] * norms[j]), -1.0, 1.0);
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }
  return sim;
}

Matrix adjacency(const Matrix& similarity) {
  require(similarity.rows() == similarity.cols(), ErrorCode::kArgument,
          "similarity matrix must be square");
  Matrix adj(similarity.rows(), similarity.cols());
  for (std::size_t i = 0; i < adj.rows(); ++i) {
    for (std::size_t j = 0; j < adj.cols(); ++j) adj(i, j) = (similarity(i, j) + 1.0) / 2.0;
  }
  return adj;
}

FusionWeights sff_weights(const Matrix& adjacency, double scale) {
  check_scale(scale);
  require(adjacency.rows() >= 1 && adjacency.rows() == adjacency.cols(),
          ErrorCode::kArgument, "adjacency matrix must be square and non-empty");
  const std::size_t n = adjacency.rows();
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row_sum[i] += adjacency(i, j);
    require(row_sum[i] > 0.0, ErrorCode::kDegenerateInput,
            "adjacency row " + std::to_string(i) + " sums to zero");
  }

  FusionWeights w;
  w.raw.resize(n);
  w.normalized.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.raw[i] = std::pow(row_sum[i], -scale);

  // Normalize relative to the smallest row sum so large scales cannot
  // underflow every weight to zero.
  const double min_sum = *std::min_element(row_sum.begin(), row_sum.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w.normalized[i] = std::pow(row_sum[i] / min_sum, -scale);
    total += w.normalized[i];
  }
  for (double& v : w.normalized) v /= total;
  return w;
}

std::vector<double> sff_fuse(const Matrix& features, double scale) {
  check_scale(scale);
  const auto weights = sff_weights(adjacency(cosine_similarity_matrix(features)), scale);
  return anchored_combination(features, weights.normalized);
}

std::vector<double> sff_fuse(const FeatureSet& set, double scale) {
  return sff_fuse(set.features, scale);
}

std::vector<double> avg_fuse(const Matrix& features) {
  check_nonempty(features);
  const std::vector<double> uniform(features.rows(),
                                    1.0 / static_cast<double>(features.rows()));
  return anchored_combination(features, uniform);
}

Matrix sff_fuse_backward(const Matrix& features, double scale,
                         std::span<const double> upstream) {
  check_scale(scale);
  require(upstream.size() == features.cols(), ErrorCode::kArgument,
          "upstream gradient dimension does not match features");
  const auto norms = row_norms(features);
  const Matrix sim = cosine_similarity_matrix(features);
  const Matrix adj = adjacency(sim);
  const auto weights = sff_weights(adj, scale);
  const std::size_t n = features.rows();
  const std::size_t c = features.cols();

  Matrix grad(n, c);
  // Direct path: fused = sum_i w_i f_i.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) grad(i, k) = weights.normalized[i] * upstream[k];
  }
  if (n == 1 || scale == 0.0) return grad;

  // Weight path. p_i = <u, f_i>; dL/dr_i = (p_i - sum_k w_k p_k) / R and
  // dr_i/dA_i = -scale * r_i / A_i. With normalized weights w_i = r_i / R this
  // gives dL/dA_i = -scale * w_i * (p_i - pbar) / A_i.
  std::vector<double> p(n);
  double pbar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = dot(upstream, features.row(i));
    pbar += weights.normalized[i] * p[i];
  }
  std::vector<double> d_rowsum(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) a_sum += adj(i, j);
    d_rowsum[i] = -scale * weights.normalized[i] * (p[i] - pbar) / a_sum;
  }

  // Off-diagonal S_ij enters rows i and j with coefficient 1/2 each.
  // d cos(f_i, f_j) / d f_i = (f_j / |f_j| - S_ij f_i / |f_i|) / |f_i|.
  for (std::size_t i = 0; i < n; ++i) {
    const auto fi = features.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double coeff = 0.5 * (d_rowsum[i] + d_rowsum[j]);
      if (coeff == 0.0) continue;
      const auto fj = features.row(j);
      const double s = sim(i, j);
      for (std::size_t k = 0; k < c; ++k) {
        grad(i, k) += coeff * (fj[k] / norms[j] - s * fi[k] / norms[i]) / norms[i];
      }
    }
  }
  return grad;
}

std::vector<double> fuse(const Matrix& features, Fuser fuser, double scale) {
  return fuser == Fuser::kSff ? sff_fuse(features, scale) : avg_fuse(features);
}

}  // namespace setgeo::fusion
