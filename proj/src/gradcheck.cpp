#include "setgeo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "setgeo/error.hpp"
#include "setgeo/random.hpp"

namespace setgeo::gradcheck {

FdReport finite_diff_check(const LossFunction& loss, std::span<const double> params,
                           std::span<const double> analytic, const FdOptions& options) {
  require(options.step > 0.0, ErrorCode::kConfig, "finite-difference step must be positive");
  require(params.size() == analytic.size(), ErrorCode::kArgument,
          "analytic gradient size does not match parameter count");

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates != 0 && coords.size() > options.max_coordinates) {
    Rng rng(options.seed);
    rng.shuffle(coords);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  std::vector<double> x(params.begin(), params.end());
  FdReport report;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + options.step;
    const double plus = loss(x);
    x[i] = saved - options.step;
    const double minus = loss(x);
    x[i] = saved;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]),
                                   options.denominator_floor});
    const double rel_err = abs_err / denom;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
      report.max_rel_error = rel_err;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < options.tolerance;
  return report;
}

FdReport check_total_loss(const objective::Batch& batch, const objective::Heads& heads,
                          const objective::LossConfig& cfg, const FdOptions& options) {
  objective::Gradients grads;
  objective::grad_total_loss(batch, heads, cfg, grads);
  const auto analytic = objective::pack_gradients(grads);
  const auto params = objective::pack_parameters(batch, heads);

  objective::Batch work_batch = batch;
  objective::Heads work_heads = heads;
  auto loss = [&](std::span<const double> x) {
    objective::unpack_parameters(x, work_batch, work_heads);
    return objective::total_loss(work_batch, work_heads, cfg).total;
  };
  return finite_diff_check(loss, params, analytic, options);
}

}  // namespace setgeo::gradcheck
