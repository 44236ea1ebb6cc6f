#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "setgeo/fusion.hpp"
#include "setgeo/matrix.hpp"

namespace setgeo::retrieval {

struct ScoredId {
  std::int64_t id = 0;
  double score = 0.0;
  bool operator==(const ScoredId&) const = default;
};

struct RankedResult {
  std::int64_t scene_id = 0;
  std::vector<ScoredId> top;  // descending score, ascending id on ties
  // 1-based rank of the ground-truth cell over the full database; 0 when no
  // ground truth was supplied.
  std::size_t rank_of_truth = 0;
  double truth_score = 0.0;
  bool operator==(const RankedResult&) const = default;
};

/// Exhaustive cosine-similarity index over unit-normalized references.
class ReferenceIndex {
 public:
  static ReferenceIndex build(const Matrix& features, std::span<const std::int64_t> ids);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::span<const std::int64_t> ids() const noexcept { return ids_; }
  bool contains(std::int64_t id) const;

  /// Top-k by cosine similarity. `truth`, when given, must be an indexed id.
  RankedResult retrieve(std::span<const double> query, std::size_t k,
                        std::optional<std::int64_t> truth = std::nullopt) const;

 private:
  Matrix vectors_;
  std::vector<std::int64_t> ids_;
  std::vector<std::int64_t> sorted_ids_;
};

/// Fuses each set, then retrieves with each set's scene_id as ground truth.
/// Results keep input order regardless of `threads`.
std::vector<RankedResult> batch_retrieve(const std::vector<fusion::FeatureSet>& sets,
                                         const ReferenceIndex& index, fusion::Fuser fuser,
                                         double scale, std::size_t k,
                                         std::size_t threads = 1);

/// Same fan-out for already-fused queries; row i pairs with truths[i].
std::vector<RankedResult> retrieve_all(const Matrix& queries,
                                       std::span<const std::int64_t> truths,
                                       const ReferenceIndex& index, std::size_t k,
                                       std::size_t threads = 1);

/// CSV rows `scene_id,rank,cell_id,score`. Each query contributes its top-k
/// rows followed by the ground-truth row when its rank exceeds k, so every
/// block starts at rank 1.
std::string rankings_to_csv(const std::vector<RankedResult>& results);

/// Recovers rank_of_truth per block written by rankings_to_csv.
std::vector<RankedResult> rankings_from_csv(const std::string& text);

}  // namespace setgeo::retrieval
