#include "setgeo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "setgeo/error.hpp"
#include "setgeo/fusion.hpp"
#include "setgeo/random.hpp"

namespace setgeo::objective {
namespace {

int label_for(const geo::GeoAttributes& a, Task t) {
  switch (t) {
    case Task::kCity: return a.city;
    case Task::kPos: return a.quadrant;
    case Task::kOri: return a.orientation;
  }
  return 0;
}

const char* task_name(Task t) {
  switch (t) {
    case Task::kCity: return "city";
    case Task::kPos: return "pos";
    case Task::kOri: return "ori";
  }
  return "?";
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Softmax of v written into out; returns log-sum-exp.
double softmax(std::span<const double> v, std::span<double> out) {
  const double lse = log_sum_exp(v);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - lse);
  return lse;
}

struct Normalized {
  Matrix unit;
  std::vector<double> norms;
};

Normalized normalize_rows(const Matrix& m, const char* what) {
  Normalized out{m, std::vector<double>(m.rows())};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm(m.row(i));
    require(n > 0.0 && std::isfinite(n), ErrorCode::kDegenerateInput,
            std::string(what) + " " + std::to_string(i) + " has zero or non-finite norm");
    out.norms[i] = n;
    for (double& v : out.unit.row(i)) v /= n;
  }
  return out;
}

Matrix satellites(const Batch& batch) {
  Matrix m;
  for (const auto& s : batch.scenes) m.push_row(s.satellite);
  return m;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end());
  x.insert(x.end(), b.begin(), b.end());
  return x;
}

// Cross-entropy over every ground image; accumulates gradients when given.
double head_loss_impl(const Batch& batch, const LinearHead& head, Task task,
                      HeadGradient* head_grad, Gradients* feat_grads, double weight) {
  const std::size_t k = head.num_classes();
  const std::size_t c = batch.dim();
  require(head.weight.rows() == k && head.weight.cols() == 2 * c, ErrorCode::kArgument,
          std::string(task_name(task)) + " head does not match feature dimension");
  const double count = static_cast<double>(batch.size() * batch.set_size());
  std::vector<double> logits(k), prob(k);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& scene = batch.scenes[b];
    for (std::size_t n = 0; n < scene.ground.rows(); ++n) {
      const int label = label_for(scene.attributes[n], task);
      require(label >= 0 && static_cast<std::size_t>(label) < k, ErrorCode::kData,
              std::string(task_name(task)) + " label " + std::to_string(label) +
                  " out of range [0, " + std::to_string(k) + ")");
      const auto x = concat(scene.ground.row(n), scene.satellite);
      for (std::size_t j = 0; j < k; ++j) logits[j] = head.bias[j] + dot(head.weight.row(j), x);
      const double lse = softmax(logits, prob);
      total += lse - logits[label];
      if (head_grad == nullptr) continue;
      prob[label] -= 1.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double g = weight * prob[j] / count;
        head_grad->bias[j] += g;
        auto w_row = head_grad->weight.row(j);
        const auto h_row = head.weight.row(j);
        auto g_ground = feat_grads->ground[b].row(n);
        auto g_sat = feat_grads->satellite.row(b);
        for (std::size_t i = 0; i < 2 * c; ++i) w_row[i] += g * x[i];
        for (std::size_t i = 0; i < c; ++i) {
          g_ground[i] += g * h_row[i];
          g_sat[i] += g * h_row[c + i];
        }
      }
    }
  }
  return total / count;
}

void add_scaled(Matrix& dst, const Matrix& src, double w) {
  auto d = dst.flat();
  const auto s = src.flat();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += w * s[i];
}

}  // namespace

void validate(const Batch& batch) {
  require(!batch.scenes.empty(), ErrorCode::kArgument, "batch is empty");
  const std::size_t n = batch.set_size();
  const std::size_t c = batch.dim();
  require(n >= 1 && c >= 1, ErrorCode::kArgument, "batch has empty sets or features");
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = batch.scenes[b];
    const std::string where = "scene " + std::to_string(b);
    require(s.ground.rows() == n, ErrorCode::kArgument, where + ": set size differs");
    require(s.ground.cols() == c && s.satellite.size() == c, ErrorCode::kArgument,
            where + ": feature dimension differs");
    require(s.attributes.size() == n, ErrorCode::kArgument,
            where + ": expected one attribute record per ground image");
    for (double v : s.ground.flat())
      require(std::isfinite(v), ErrorCode::kDegenerateInput, where + ": non-finite ground");
    for (double v : s.satellite)
      require(std::isfinite(v), ErrorCode::kDegenerateInput, where + ": non-finite satellite");
  }
}

LinearHead LinearHead::init(std::size_t num_classes, std::size_t dim, std::uint64_t seed) {
  LinearHead h = zeros(num_classes, dim);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
  for (double& w : h.weight.flat()) w = rng.uniform(-bound, bound);
  return h;
}

LinearHead LinearHead::zeros(std::size_t num_classes, std::size_t dim) {
  return {Matrix(num_classes, 2 * dim), std::vector<double>(num_classes, 0.0)};
}

Heads Heads::init(std::size_t num_cities, std::size_t dim, std::uint64_t seed) {
  return {LinearHead::init(num_cities, dim, mix_seed(seed, 1)),
          LinearHead::init(4, dim, mix_seed(seed, 2)),
          LinearHead::init(4, dim, mix_seed(seed, 3))};
}

const LinearHead& Heads::get(Task t) const {
  return t == Task::kCity ? city : (t == Task::kPos ? pos : ori);
}

LinearHead& Heads::get(Task t) {
  return t == Task::kCity ? city : (t == Task::kPos ? pos : ori);
}

void LossConfig::validate() const {
  require(std::isfinite(scale) && scale >= 0.0, ErrorCode::kConfig, "scale must be >= 0");
  require(std::isfinite(temperature) && temperature > 0.0, ErrorCode::kConfig,
          "temperature must be positive");
  for (double l : {lambda_city, lambda_pos, lambda_ori, lambda}) {
    require(std::isfinite(l) && l >= 0.0, ErrorCode::kConfig,
            "loss weights must be non-negative");
  }
}

double LossConfig::effective_lambda(Task t) const {
  switch (t) {
    case Task::kCity: return use_city ? lambda_city : 0.0;
    case Task::kPos: return use_pos ? lambda_pos : 0.0;
    case Task::kOri: return use_ori ? lambda_ori : 0.0;
  }
  return 0.0;
}

LossReport combine(double l_set, double l_single, double l_city, double l_pos,
                   double l_ori, const LossConfig& cfg) {
  cfg.validate();
  LossReport r;
  r.l_set = l_set;
  r.l_single = l_single;
  r.l_city = l_city;
  r.l_pos = l_pos;
  r.l_ori = l_ori;
  r.lambda_city = cfg.effective_lambda(Task::kCity);
  r.lambda_pos = cfg.effective_lambda(Task::kPos);
  r.lambda_ori = cfg.effective_lambda(Task::kOri);
  r.lambda = cfg.lambda;
  r.l_ial = l_single + r.lambda_city * l_city + r.lambda_pos * l_pos + r.lambda_ori * l_ori;
  r.total = l_set + r.lambda * r.l_ial;
  return r;
}

double info_nce(const Matrix& queries, const Matrix& references, double temperature,
                NceDirection direction, Matrix* grad_queries, Matrix* grad_references) {
  require(std::isfinite(temperature) && temperature > 0.0, ErrorCode::kConfig,
          "temperature must be positive");
  const std::size_t b = queries.rows();
  require(references.rows() == b, ErrorCode::kArgument,
          "query and reference counts differ");
  require(b >= 2, ErrorCode::kDegenerateInput, "InfoNCE needs a batch of at least 2");
  require(queries.cols() == references.cols(), ErrorCode::kArgument,
          "query and reference dimensions differ");
  const auto q = normalize_rows(queries, "query");
  const auto r = normalize_rows(references, "reference");

  Matrix sim(b, b), logits(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      sim(i, j) = dot(q.unit.row(i), r.unit.row(j));
      logits(i, j) = sim(i, j) / temperature;
    }
  }

  const bool symmetric = direction == NceDirection::kSymmetric;
  const double dir_weight = symmetric ? 0.5 : 1.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  Matrix d_logits(b, b);  // d loss / d logits
  std::vector<double> prob(b), column(b);

  double row_loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    row_loss += softmax(logits.row(i), prob) - logits(i, i);
    for (std::size_t j = 0; j < b; ++j)
      d_logits(i, j) += dir_weight * inv_b * (prob[j] - (i == j ? 1.0 : 0.0));
  }
  double loss = row_loss * inv_b;
  if (symmetric) {
    double col_loss = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t i = 0; i < b; ++i) column[i] = logits(i, j);
      col_loss += softmax(column, prob) - logits(j, j);
      for (std::size_t i = 0; i < b; ++i)
        d_logits(i, j) += dir_weight * inv_b * (prob[i] - (i == j ? 1.0 : 0.0));
    }
    loss = 0.5 * (loss + col_loss * inv_b);
  }

  if (grad_queries == nullptr && grad_references == nullptr) return loss;
  const std::size_t c = queries.cols();
  Matrix gq(b, c), gr(b, c);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double g = d_logits(i, j) / temperature;
      const double s = sim(i, j);
      const auto qi = q.unit.row(i);
      const auto rj = r.unit.row(j);
      auto gqi = gq.row(i);
      auto grj = gr.row(j);
      for (std::size_t k = 0; k < c; ++k) {
        gqi[k] += g * (rj[k] - s * qi[k]) / q.norms[i];
        grj[k] += g * (qi[k] - s * rj[k]) / r.norms[j];
      }
    }
  }
  if (grad_queries) *grad_queries = std::move(gq);
  if (grad_references) *grad_references = std::move(gr);
  return loss;
}

double set_loss(const Batch& batch, double scale, double temperature,
                NceDirection direction) {
  validate(batch);
  Matrix fused;
  for (const auto& s : batch.scenes) fused.push_row(fusion::sff_fuse(s.ground, scale));
  return info_nce(fused, satellites(batch), temperature, direction);
}

double single_loss(const Batch& batch, double temperature, NceDirection direction) {
  validate(batch);
  const Matrix sat = satellites(batch);
  double total = 0.0;
  for (std::size_t n = 0; n < batch.set_size(); ++n) {
    Matrix q;
    for (const auto& s : batch.scenes) q.push_row(s.ground.row(n));
    total += info_nce(q, sat, temperature, direction);
  }
  return total / static_cast<double>(batch.set_size());
}

double head_loss(const Batch& batch, const LinearHead& head, Task task) {
  validate(batch);
  return head_loss_impl(batch, head, task, nullptr, nullptr, 0.0);
}

LossReport ial_loss(const Batch& batch, const Heads& heads, const LossConfig& cfg) {
  cfg.validate();
  return combine(0.0, single_loss(batch, cfg.temperature, cfg.direction),
                 head_loss(batch, heads.city, Task::kCity),
                 head_loss(batch, heads.pos, Task::kPos),
                 head_loss(batch, heads.ori, Task::kOri), cfg);
}

LossReport total_loss(const Batch& batch, const Heads& heads, const LossConfig& cfg) {
  cfg.validate();
  const LossReport ial = ial_loss(batch, heads, cfg);
  return combine(set_loss(batch, cfg.scale, cfg.temperature, cfg.direction), ial.l_single,
                 ial.l_city, ial.l_pos, ial.l_ori, cfg);
}

LossReport grad_total_loss(const Batch& batch, const Heads& heads, const LossConfig& cfg,
                           Gradients& grads) {
  cfg.validate();
  validate(batch);
  const std::size_t b = batch.size();
  const std::size_t n = batch.set_size();
  const std::size_t c = batch.dim();

  grads.ground.assign(b, Matrix(n, c));
  grads.satellite = Matrix(b, c);
  for (Task t : {Task::kCity, Task::kPos, Task::kOri}) {
    HeadGradient& hg = t == Task::kCity ? grads.city : (t == Task::kPos ? grads.pos : grads.ori);
    const LinearHead& h = heads.get(t);
    hg.weight = Matrix(h.weight.rows(), h.weight.cols());
    hg.bias.assign(h.num_classes(), 0.0);
  }
  const Matrix sat = satellites(batch);

  // Set-level term: InfoNCE over fused features, then back through SFF.
  Matrix fused;
  for (const auto& s : batch.scenes) fused.push_row(fusion::sff_fuse(s.ground, cfg.scale));
  Matrix g_fused, g_sat;
  const double l_set =
      info_nce(fused, sat, cfg.temperature, cfg.direction, &g_fused, &g_sat);
  add_scaled(grads.satellite, g_sat, 1.0);
  for (std::size_t i = 0; i < b; ++i) {
    add_scaled(grads.ground[i],
               fusion::sff_fuse_backward(batch.scenes[i].ground, cfg.scale, g_fused.row(i)),
               1.0);
  }

  // Individual-level term, averaged over set positions.
  const double w_ial = cfg.lambda;
  double l_single = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    Matrix q;
    for (const auto& s : batch.scenes) q.push_row(s.ground.row(k));
    Matrix gq, gs;
    l_single += info_nce(q, sat, cfg.temperature, cfg.direction, &gq, &gs);
    const double w = w_ial / static_cast<double>(n);
    add_scaled(grads.satellite, gs, w);
    for (std::size_t i = 0; i < b; ++i) {
      auto dst = grads.ground[i].row(k);
      const auto src = gq.row(i);
      for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
    }
  }
  l_single /= static_cast<double>(n);

  double head_losses[3];
  int idx = 0;
  for (Task t : {Task::kCity, Task::kPos, Task::kOri}) {
    HeadGradient& hg = t == Task::kCity ? grads.city : (t == Task::kPos ? grads.pos : grads.ori);
    head_losses[idx++] =
        head_loss_impl(batch, heads.get(t), t, &hg, &grads, w_ial * cfg.effective_lambda(t));
  }
  return combine(l_set, l_single, head_losses[0], head_losses[1], head_losses[2], cfg);
}

std::vector<double> pack_parameters(const Batch& batch, const Heads& heads) {
  std::vector<double> flat;
  for (const auto& s : batch.scenes)
    flat.insert(flat.end(), s.ground.flat().begin(), s.ground.flat().end());
  for (const auto& s : batch.scenes) flat.insert(flat.end(), s.satellite.begin(), s.satellite.end());
  for (Task t : {Task::kCity, Task::kPos, Task::kOri}) {
    const LinearHead& h = heads.get(t);
    flat.insert(flat.end(), h.weight.flat().begin(), h.weight.flat().end());
    flat.insert(flat.end(), h.bias.begin(), h.bias.end());
  }
  return flat;
}

void unpack_parameters(std::span<const double> flat, Batch& batch, Heads& heads) {
  std::size_t pos = 0;
  auto take = [&](std::span<double> dst) {
    require(pos + dst.size() <= flat.size(), ErrorCode::kArgument,
            "parameter vector is too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
    pos += dst.size();
  };
  for (auto& s : batch.scenes) take(s.ground.flat());
  for (auto& s : batch.scenes) take(s.satellite);
  for (Task t : {Task::kCity, Task::kPos, Task::kOri}) {
    LinearHead& h = heads.get(t);
    take(h.weight.flat());
    take(h.bias);
  }
  require(pos == flat.size(), ErrorCode::kArgument, "parameter vector is too long");
}

std::vector<double> pack_gradients(const Gradients& grads) {
  std::vector<double> flat;
  for (const auto& g : grads.ground) flat.insert(flat.end(), g.flat().begin(), g.flat().end());
  flat.insert(flat.end(), grads.satellite.flat().begin(), grads.satellite.flat().end());
  for (const HeadGradient* hg : {&grads.city, &grads.pos, &grads.ori}) {
    flat.insert(flat.end(), hg->weight.flat().begin(), hg->weight.flat().end());
    flat.insert(flat.end(), hg->bias.begin(), hg->bias.end());
  }
  return flat;
}

Batch random_batch(const RandomBatchSpec& spec, std::uint64_t seed) {
  require(spec.scenes >= 2 && spec.set_size >= 1 && spec.dim >= 1 && spec.num_cities >= 1,
          ErrorCode::kArgument, "random batch needs B >= 2, N >= 1, C >= 1");
  Rng rng(seed);
  Batch batch;
  for (std::size_t b = 0; b < spec.scenes; ++b) {
    SceneEntry s;
    s.ground = Matrix(spec.set_size, spec.dim);
    for (double& v : s.ground.flat()) v = rng.gaussian();
    s.satellite.resize(spec.dim);
    for (double& v : s.satellite) v = rng.gaussian();
    for (std::size_t n = 0; n < spec.set_size; ++n) {
      s.attributes.push_back({static_cast<int>(rng.below(spec.num_cities)),
                              static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))});
    }
    batch.scenes.push_back(std::move(s));
  }
  return batch;
}

}  // namespace setgeo::objective
