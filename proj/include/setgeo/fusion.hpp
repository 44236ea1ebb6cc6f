#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "setgeo/matrix.hpp"

namespace setgeo::fusion {

inline constexpr double kDefaultScale = 2.0;

/// An unordered set of N ground features (rows) for one scene.
struct FeatureSet {
  Matrix features;
  std::int64_t scene_id = 0;
};

struct FusionWeights {
  std::vector<double> raw;         // 1 / A_sum^scale
  std::vector<double> normalized;  // raw / sum(raw)
};

/// Pairwise cosine similarities; symmetric with an exact unit diagonal.
/// Throws kDegenerateInput on a zero-norm row.
Matrix cosine_similarity_matrix(const Matrix& features);

/// Maps similarities affinely onto [0, 1]: (sim + 1) / 2.
Matrix adjacency(const Matrix& similarity);

/// Distinctiveness weights from adjacency row sums (self-connection included).
FusionWeights sff_weights(const Matrix& adjacency, double scale);

/// Similarity-guided fusion; output is a convex combination of the rows and is
/// not renormalized.
std::vector<double> sff_fuse(const Matrix& features, double scale = kDefaultScale);
std::vector<double> sff_fuse(const FeatureSet& set, double scale = kDefaultScale);

/// Unweighted mean of the rows.
std::vector<double> avg_fuse(const Matrix& features);

/// Gradient of <upstream, sff_fuse(features)> with respect to every row,
/// propagated through the similarity-dependent weights.
Matrix sff_fuse_backward(const Matrix& features, double scale,
                         std::span<const double> upstream);

enum class Fuser { kSff, kAverage };

std::vector<double> fuse(const Matrix& features, Fuser fuser, double scale);

}  // namespace setgeo::fusion
