#include "setgeo/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "setgeo/error.hpp"

namespace setgeo::retrieval {
namespace {

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ReferenceIndex ReferenceIndex::build(const Matrix& features,
                                     std::span<const std::int64_t> ids) {
  require(features.rows() >= 1 && features.cols() >= 1, ErrorCode::kArgument,
          "reference index needs at least one feature");
  require(ids.size() == features.rows(), ErrorCode::kArgument,
          "reference id count does not match feature count");
  ReferenceIndex index;
  index.vectors_ = features;
  index.ids_.assign(ids.begin(), ids.end());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto row = index.vectors_.row(i);
    const double n = norm(row);
    require(n > 0.0 && std::isfinite(n), ErrorCode::kDegenerateInput,
            "reference " + std::to_string(ids[i]) + " has zero or non-finite norm");
    for (double& v : row) v /= n;
  }
  index.sorted_ids_ = index.ids_;
  std::sort(index.sorted_ids_.begin(), index.sorted_ids_.end());
  const auto dup = std::adjacent_find(index.sorted_ids_.begin(), index.sorted_ids_.end());
  require(dup == index.sorted_ids_.end(), ErrorCode::kData,
          dup == index.sorted_ids_.end() ? "" : "duplicate reference id " + std::to_string(*dup));
  return index;
}

bool ReferenceIndex::contains(std::int64_t id) const {
  return std::binary_search(sorted_ids_.begin(), sorted_ids_.end(), id);
}

RankedResult ReferenceIndex::retrieve(std::span<const double> query, std::size_t k,
                                      std::optional<std::int64_t> truth) const {
  require(k >= 1 && k <= size(), ErrorCode::kArgument,
          "k must be in [1, " + std::to_string(size()) + "], got " + std::to_string(k));
  require(query.size() == dim(), ErrorCode::kArgument, "query dimension does not match index");
  const double qn = norm(query);
  require(qn > 0.0 && std::isfinite(qn), ErrorCode::kDegenerateInput,
          "query has zero or non-finite norm");
  std::vector<double> unit(query.begin(), query.end());
  for (double& v : unit) v /= qn;

  std::vector<ScoredId> scored(size());
  for (std::size_t i = 0; i < size(); ++i) scored[i] = {ids_[i], dot(unit, vectors_.row(i))};

  RankedResult result;
  result.scene_id = truth.value_or(0);
  if (truth) {
    require(contains(*truth), ErrorCode::kData,
            "ground-truth id " + std::to_string(*truth) + " is not in the index");
    const auto it = std::find_if(scored.begin(), scored.end(),
                                 [&](const ScoredId& s) { return s.id == *truth; });
    const ScoredId target = *it;
    result.truth_score = target.score;
    result.rank_of_truth =
        1 + static_cast<std::size_t>(std::count_if(
                scored.begin(), scored.end(),
                [&](const ScoredId& s) { return ranks_before(s, target); }));
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), ranks_before);
  scored.resize(k);
  result.top = std::move(scored);
  return result;
}

std::vector<RankedResult> retrieve_all(const Matrix& queries,
                                       std::span<const std::int64_t> truths,
                                       const ReferenceIndex& index, std::size_t k,
                                       std::size_t threads) {
  require(truths.size() == queries.rows(), ErrorCode::kArgument,
          "one ground-truth id is required per query");
  std::vector<RankedResult> out(queries.rows());
  parallel_for(queries.rows(), threads,
               [&](std::size_t i) { out[i] = index.retrieve(queries.row(i), k, truths[i]); });
  return out;
}

std::vector<RankedResult> batch_retrieve(const std::vector<fusion::FeatureSet>& sets,
                                         const ReferenceIndex& index, fusion::Fuser fuser,
                                         double scale, std::size_t k, std::size_t threads) {
  std::vector<RankedResult> out(sets.size());
  parallel_for(sets.size(), threads, [&](std::size_t i) {
    const auto fused = fusion::fuse(sets[i].features, fuser, scale);
    out[i] = index.retrieve(fused, k, sets[i].scene_id);
  });
  return out;
}

std::string rankings_to_csv(const std::vector<RankedResult>& results) {
  std::string out = "scene_id,rank,cell_id,score\n";
  char line[128];
  auto emit = [&](std::int64_t scene, std::size_t rank, std::int64_t cell, double score) {
    std::snprintf(line, sizeof line, "%lld,%zu,%lld,%.17g\n", static_cast<long long>(scene),
                  rank, static_cast<long long>(cell), score);
    out += line;
  };
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.top.size(); ++i) emit(r.scene_id, i + 1, r.top[i].id, r.top[i].score);
    if (r.rank_of_truth > r.top.size()) emit(r.scene_id, r.rank_of_truth, r.scene_id, r.truth_score);
  }
  return out;
}

std::vector<RankedResult> rankings_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<RankedResult> out;
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::kFormat, "rankings CSV line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "scene_id,rank,cell_id,score") bad("unexpected header '" + line + "'");
      continue;
    }
    long long scene = 0, cell = 0;
    std::size_t rank = 0;
    double score = 0.0;
    char score_buf[64] = {0};
    if (std::sscanf(line.c_str(), "%lld,%zu,%lld,%63s", &scene, &rank, &cell, score_buf) != 4)
      bad("expected 4 comma-separated fields");
    score = std::strtod(score_buf, nullptr);
    if (rank == 0) bad("rank must be >= 1");
    if (rank == 1) {
      out.push_back({scene, {}, 0, 0.0});
    } else if (out.empty() || out.back().scene_id != scene) {
      bad("block does not start at rank 1");
    }
    RankedResult& r = out.back();
    if (rank <= r.top.size() || (rank != r.top.size() + 1 && cell != scene))
      bad("ranks within a block must be consecutive");
    if (rank == r.top.size() + 1) r.top.push_back({cell, score});
    if (cell == scene) {
      r.rank_of_truth = rank;
      r.truth_score = score;
    }
  }
  if (line_no == 0) fail(ErrorCode::kFormat, "rankings CSV is empty");
  for (const auto& r : out) {
    if (r.rank_of_truth == 0)
      fail(ErrorCode::kFormat,
           "rankings CSV block for scene " + std::to_string(r.scene_id) + " has no truth row");
  }
  return out;
}

}  // namespace setgeo::retrieval
