#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "setgeo/objective.hpp"

namespace setgeo::gradcheck {

struct FdOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor), so
  // components whose true value is below the floor are judged on an
  // absolute scale.
  double denominator_floor = 1e-3;
  // 0 checks every coordinate; otherwise a seeded random subsample.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct FdReport {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

using LossFunction = std::function<double(std::span<const double>)>;

/// Central differences of `loss` around `params` compared with `analytic`.
FdReport finite_diff_check(const LossFunction& loss, std::span<const double> params,
                           std::span<const double> analytic, const FdOptions& options);

/// Runs the checker over every ground, satellite and head parameter of the
/// total loss.
FdReport check_total_loss(const objective::Batch& batch, const objective::Heads& heads,
                          const objective::LossConfig& cfg, const FdOptions& options);

}  // namespace setgeo::gradcheck
