#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "setgeo/geodesy.hpp"
#include "setgeo/matrix.hpp"

namespace setgeo::objective {

/// One scene in a training batch: N ground features, the paired satellite
/// feature and per-ground-image attribute labels.
struct SceneEntry {
  Matrix ground;
  std::vector<double> satellite;
  std::vector<geo::GeoAttributes> attributes;
};

struct Batch {
  std::vector<SceneEntry> scenes;

  std::size_t size() const { return scenes.size(); }
  std::size_t set_size() const { return scenes.empty() ? 0 : scenes.front().ground.rows(); }
  std::size_t dim() const { return scenes.empty() ? 0 : scenes.front().satellite.size(); }
};

/// Checks uniform N and C, label arrays, and finiteness.
void validate(const Batch& batch);

enum class Task { kCity, kPos, kOri };

/// Single linear classifier over [ground ; satellite] (2C inputs).
struct LinearHead {
  Matrix weight;  // num_classes x 2C
  std::vector<double> bias;

  std::size_t num_classes() const { return bias.size(); }
  /// Seeded uniform init in [-1/sqrt(2C), 1/sqrt(2C)]; bias starts at zero.
  static LinearHead init(std::size_t num_classes, std::size_t dim, std::uint64_t seed);
  static LinearHead zeros(std::size_t num_classes, std::size_t dim);
};

struct Heads {
  LinearHead city;
  LinearHead pos;
  LinearHead ori;

  static Heads init(std::size_t num_cities, std::size_t dim, std::uint64_t seed);
  const LinearHead& get(Task t) const;
  LinearHead& get(Task t);
};

enum class NceDirection { kSymmetric, kQueryToReference };

struct LossConfig {
  double scale = 2.0;
  double temperature = 0.07;
  double lambda_city = 0.1;
  double lambda_pos = 0.2;
  double lambda_ori = 0.2;
  double lambda = 1.0;
  NceDirection direction = NceDirection::kSymmetric;
  // Ablation switches; a disabled task contributes with weight zero.
  bool use_city = true;
  bool use_pos = true;
  bool use_ori = true;

  void validate() const;
  double effective_lambda(Task t) const;
};

struct LossReport {
  double l_set = 0.0;
  double l_single = 0.0;
  double l_city = 0.0;
  double l_pos = 0.0;
  double l_ori = 0.0;
  double l_ial = 0.0;
  double total = 0.0;
  double lambda_city = 0.0;
  double lambda_pos = 0.0;
  double lambda_ori = 0.0;
  double lambda = 0.0;
};

/// Applies the IAL and total-loss weighting to precomputed components.
LossReport combine(double l_set, double l_single, double l_city, double l_pos,
                   double l_ori, const LossConfig& cfg);

/// InfoNCE over cosine similarities; row i of `queries` pairs with row i of
/// `references`. Optional gradient outputs are overwritten.
double info_nce(const Matrix& queries, const Matrix& references, double temperature,
                NceDirection direction = NceDirection::kSymmetric,
                Matrix* grad_queries = nullptr, Matrix* grad_references = nullptr);

double set_loss(const Batch& batch, double scale, double temperature,
                NceDirection direction = NceDirection::kSymmetric);
double single_loss(const Batch& batch, double temperature,
                   NceDirection direction = NceDirection::kSymmetric);
double head_loss(const Batch& batch, const LinearHead& head, Task task);

/// Fills l_single, the three head losses and l_ial.
LossReport ial_loss(const Batch& batch, const Heads& heads, const LossConfig& cfg);
LossReport total_loss(const Batch& batch, const Heads& heads, const LossConfig& cfg);

struct HeadGradient {
  Matrix weight;
  std::vector<double> bias;
};

struct Gradients {
  std::vector<Matrix> ground;  // per scene, N x C
  Matrix satellite;            // B x C
  HeadGradient city;
  HeadGradient pos;
  HeadGradient ori;
};

LossReport grad_total_loss(const Batch& batch, const Heads& heads, const LossConfig& cfg,
                           Gradients& grads);

/// Flat parameter layout shared by pack/unpack: ground, satellite, then each
/// head's weight followed by its bias in city/pos/ori order.
std::vector<double> pack_parameters(const Batch& batch, const Heads& heads);
void unpack_parameters(std::span<const double> flat, Batch& batch, Heads& heads);
std::vector<double> pack_gradients(const Gradients& grads);

struct RandomBatchSpec {
  std::size_t scenes = 4;
  std::size_t set_size = 3;
  std::size_t dim = 8;
  std::size_t num_cities = 6;
};

/// Gaussian features and uniformly random labels.
Batch random_batch(const RandomBatchSpec& spec, std::uint64_t seed);

}  // namespace setgeo::objective
