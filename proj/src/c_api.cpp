#include "setgeo/setgeo.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "setgeo/datamodel.hpp"
#include "setgeo/error.hpp"
#include "setgeo/experiment.hpp"
#include "setgeo/fusion.hpp"
#include "setgeo/geodesy.hpp"
#include "setgeo/gradcheck.hpp"
#include "setgeo/metrics.hpp"
#include "setgeo/objective.hpp"
#include "setgeo/random.hpp"
#include "setgeo/retrieval.hpp"

struct sg_grid {
  setgeo::geo::GridBuild build;
};

struct sg_heads {
  setgeo::objective::Heads heads;
};

struct sg_index {
  setgeo::retrieval::ReferenceIndex index;
};

struct sg_dataset {
  setgeo::data::Dataset dataset;
};

namespace {

using namespace setgeo;

thread_local std::string g_last_error;

sg_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kArgument: return SG_ERR_ARGUMENT;
    case ErrorCode::kConfig: return SG_ERR_CONFIG;
    case ErrorCode::kDegenerateInput: return SG_ERR_DEGENERATE;
    case ErrorCode::kDomain: return SG_ERR_DOMAIN;
    case ErrorCode::kOutOfCoverage: return SG_ERR_OUT_OF_COVERAGE;
    case ErrorCode::kData: return SG_ERR_DATA;
    case ErrorCode::kFormat: return SG_ERR_FORMAT;
    case ErrorCode::kIo: return SG_ERR_IO;
    case ErrorCode::kInvariant: return SG_ERR_INVARIANT;
  }
  return SG_ERR_INTERNAL;
}

template <typename Fn>
sg_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SG_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return SG_ERR_INTERNAL;
  }
}

template <typename T>
T& deref(T* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kArgument, std::string(what) + " is null");
  return *p;
}

void check_ptr(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Matrix view_matrix(const double* data, std::size_t rows, std::size_t cols, const char* what) {
  check_ptr(data, what);
  return Matrix(rows, cols, std::vector<double>(data, data + rows * cols));
}

void copy_out(const std::vector<double>& v, double* out) { std::copy(v.begin(), v.end(), out); }

objective::LossConfig to_config(const sg_loss_config& c) {
  objective::LossConfig cfg;
  cfg.scale = c.scale;
  cfg.temperature = c.temperature;
  cfg.lambda_city = c.lambda_city;
  cfg.lambda_pos = c.lambda_pos;
  cfg.lambda_ori = c.lambda_ori;
  cfg.lambda = c.lambda;
  cfg.direction = c.symmetric ? objective::NceDirection::kSymmetric
                              : objective::NceDirection::kQueryToReference;
  cfg.use_city = c.use_city != 0;
  cfg.use_pos = c.use_pos != 0;
  cfg.use_ori = c.use_ori != 0;
  return cfg;
}

sg_loss_report to_report(const objective::LossReport& r) {
  return {r.l_set, r.l_single, r.l_city, r.l_pos, r.l_ori, r.l_ial, r.total};
}

data::Split to_split(sg_split s) {
  switch (s) {
    case SG_SPLIT_TRAIN: return data::Split::kTrain;
    case SG_SPLIT_TEST: return data::Split::kTest;
    case SG_SPLIT_ALL: break;
  }
  return data::Split::kUnassigned;
}

std::vector<double> head_params(const objective::Heads& heads) {
  objective::Batch empty;
  return objective::pack_parameters(empty, heads);
}

}  // namespace

extern "C" {

const char* sg_version(void) { return "0.1.0"; }

const char* sg_status_string(sg_status status) {
  switch (status) {
    case SG_OK: return "ok";
    case SG_ERR_ARGUMENT: return "argument error";
    case SG_ERR_CONFIG: return "configuration error";
    case SG_ERR_DEGENERATE: return "degenerate input";
    case SG_ERR_DOMAIN: return "domain error";
    case SG_ERR_OUT_OF_COVERAGE: return "out of coverage";
    case SG_ERR_DATA: return "data error";
    case SG_ERR_FORMAT: return "format error";
    case SG_ERR_IO: return "i/o error";
    case SG_ERR_INVARIANT: return "invariant violation";
    case SG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sg_last_error(void) { return g_last_error.c_str(); }

void sg_string_free(char* str) { std::free(str); }

sg_status sg_haversine(double lat1, double lon1, double lat2, double lon2, double* out_meters) {
  return guarded([&] {
    deref(out_meters, "out_meters") =
        geo::haversine(geo::GeoPoint::make(lat1, lon1), geo::GeoPoint::make(lat2, lon2));
  });
}

sg_status sg_ground_resolution(double lat, int zoom, double* out_m_per_px) {
  return guarded([&] { deref(out_m_per_px, "out_m_per_px") = geo::ground_resolution(lat, zoom); });
}

sg_status sg_orientation_label(double heading_deg, int* out_class) {
  return guarded([&] { deref(out_class, "out_class") = geo::orientation_label(heading_deg); });
}

sg_status sg_validate_set_radius(const double* lat_lon, size_t count, double radius_m,
                                 int* out_within) {
  return guarded([&] {
    check_ptr(out_within, "out_within");
    if (count > 0) check_ptr(lat_lon, "lat_lon");
    std::vector<geo::GeoPoint> pts;
    for (size_t i = 0; i < count; ++i)
      pts.push_back(geo::GeoPoint::make(lat_lon[2 * i], lat_lon[2 * i + 1]));
    *out_within = geo::validate_set_radius(pts, radius_m) ? 1 : 0;
  });
}

sg_status sg_grid_build(double lat1, double lon1, double lat2, double lon2, int zoom,
                        int tile_px, double overlap, int city_label, sg_grid** out) {
  return guarded([&] {
    check_ptr(out, "out");
    *out = nullptr;
    auto build = geo::build_grid({{lat1, lon1}, {lat2, lon2}}, zoom, tile_px, overlap, city_label);
    *out = new sg_grid{std::move(build)};
  });
}

void sg_grid_destroy(sg_grid* grid) { delete grid; }

sg_status sg_grid_get_info(const sg_grid* grid, sg_grid_info* out) {
  return guarded([&] {
    const auto& g = deref(grid, "grid").build.grid;
    deref(out, "out") = {g.zoom, g.tile_px, g.overlap, g.stride_px(),
                         {g.origin_px[0], g.origin_px[1]}, g.rows, g.cols};
  });
}

sg_status sg_grid_cell(const sg_grid* grid, int64_t id, double* out_center, double* out_bounds) {
  return guarded([&] {
    const auto& cells = deref(grid, "grid").build.cells;
    require(id >= 0 && static_cast<size_t>(id) < cells.size(), ErrorCode::kArgument,
            "cell id " + std::to_string(id) + " not in grid");
    const auto& c = cells[static_cast<size_t>(id)];
    if (out_center) {
      out_center[0] = c.center.lat;
      out_center[1] = c.center.lon;
    }
    if (out_bounds) {
      out_bounds[0] = c.pixel_bounds.x0;
      out_bounds[1] = c.pixel_bounds.y0;
      out_bounds[2] = c.pixel_bounds.x1;
      out_bounds[3] = c.pixel_bounds.y1;
    }
  });
}

sg_status sg_grid_assign(const sg_grid* grid, double lat, double lon, int64_t* out_id) {
  return guarded([&] {
    deref(out_id, "out_id") =
        geo::assign_to_cell(geo::GeoPoint{lat, lon}, deref(grid, "grid").build.grid);
  });
}

sg_status sg_grid_quadrant_label(const sg_grid* grid, int64_t cell_id, double lat, double lon,
                                 int* out_class) {
  return guarded([&] {
    const auto& cells = deref(grid, "grid").build.cells;
    require(cell_id >= 0 && static_cast<size_t>(cell_id) < cells.size(), ErrorCode::kArgument,
            "cell id " + std::to_string(cell_id) + " not in grid");
    deref(out_class, "out_class") =
        geo::quadrant_label(geo::GeoPoint::make(lat, lon), cells[static_cast<size_t>(cell_id)]);
  });
}

sg_status sg_grid_to_json(const sg_grid* grid, char** out_json) {
  return guarded([&] {
    deref(out_json, "out_json") = dup_string(geo::grid_to_json(deref(grid, "grid").build));
  });
}

sg_status sg_sff_weights(const double* features, size_t n, size_t c, double scale,
                         double* out_weights) {
  return guarded([&] {
    check_ptr(out_weights, "out_weights");
    const Matrix f = view_matrix(features, n, c, "features");
    copy_out(fusion::sff_weights(fusion::adjacency(fusion::cosine_similarity_matrix(f)), scale)
                 .normalized,
             out_weights);
  });
}

sg_status sg_sff_fuse(const double* features, size_t n, size_t c, double scale, double* out_fused) {
  return guarded([&] {
    check_ptr(out_fused, "out_fused");
    copy_out(fusion::sff_fuse(view_matrix(features, n, c, "features"), scale), out_fused);
  });
}

sg_status sg_avg_fuse(const double* features, size_t n, size_t c, double* out_fused) {
  return guarded([&] {
    check_ptr(out_fused, "out_fused");
    copy_out(fusion::avg_fuse(view_matrix(features, n, c, "features")), out_fused);
  });
}

sg_status sg_sff_fuse_backward(const double* features, size_t n, size_t c, double scale,
                               const double* upstream, double* out_grad) {
  return guarded([&] {
    check_ptr(upstream, "upstream");
    check_ptr(out_grad, "out_grad");
    const Matrix g = fusion::sff_fuse_backward(view_matrix(features, n, c, "features"), scale,
                                               std::span<const double>(upstream, c));
    copy_out(g.data(), out_grad);
  });
}

void sg_loss_config_default(sg_loss_config* cfg) {
  if (cfg == nullptr) return;
  const objective::LossConfig d;
  *cfg = {d.scale, d.temperature, d.lambda_city, d.lambda_pos, d.lambda_ori, d.lambda, 1, 1, 1, 1};
}

sg_status sg_info_nce(const double* queries, const double* references, size_t b, size_t c,
                      double temperature, int symmetric, double* out_loss) {
  return guarded([&] {
    deref(out_loss, "out_loss") = objective::info_nce(
        view_matrix(queries, b, c, "queries"), view_matrix(references, b, c, "references"),
        temperature,
        symmetric ? objective::NceDirection::kSymmetric : objective::NceDirection::kQueryToReference);
  });
}

sg_status sg_heads_create(size_t num_cities, size_t dim, uint64_t seed, sg_heads** out) {
  return guarded([&] {
    check_ptr(out, "out");
    *out = nullptr;
    require(num_cities >= 1 && dim >= 1, ErrorCode::kArgument, "heads need num_cities >= 1 and dim >= 1");
    *out = new sg_heads{objective::Heads::init(num_cities, dim, seed)};
  });
}

void sg_heads_destroy(sg_heads* heads) { delete heads; }

sg_status sg_heads_param_count(const sg_heads* heads, size_t* out_count) {
  return guarded([&] { deref(out_count, "out_count") = head_params(deref(heads, "heads").heads).size(); });
}

sg_status sg_heads_get_params(const sg_heads* heads, double* out_params) {
  return guarded([&] {
    check_ptr(out_params, "out_params");
    copy_out(head_params(deref(heads, "heads").heads), out_params);
  });
}

sg_status sg_heads_set_params(sg_heads* heads, const double* params) {
  return guarded([&] {
    auto& h = deref(heads, "heads").heads;
    check_ptr(params, "params");
    objective::Batch empty;
    const size_t count = head_params(h).size();
    objective::unpack_parameters(std::span<const double>(params, count), empty, h);
  });
}

sg_status sg_total_loss(const sg_batch_view* batch, const sg_heads* heads,
                        const sg_loss_config* cfg, sg_loss_report* out_report,
                        double* grad_ground, double* grad_satellite, double* grad_heads) {
  return guarded([&] {
    const auto& bv = deref(batch, "batch");
    const auto& h = deref(heads, "heads").heads;
    const auto config = to_config(deref(cfg, "cfg"));
    check_ptr(out_report, "out_report");
    check_ptr(bv.ground, "batch.ground");
    check_ptr(bv.satellite, "batch.satellite");
    check_ptr(bv.city, "batch.city");
    check_ptr(bv.quadrant, "batch.quadrant");
    check_ptr(bv.orientation, "batch.orientation");

    objective::Batch b;
    for (size_t i = 0; i < bv.b; ++i) {
      objective::SceneEntry s;
      s.ground = Matrix(bv.n, bv.c, std::vector<double>(bv.ground + i * bv.n * bv.c,
                                                         bv.ground + (i + 1) * bv.n * bv.c));
      s.satellite.assign(bv.satellite + i * bv.c, bv.satellite + (i + 1) * bv.c);
      for (size_t k = 0; k < bv.n; ++k) {
        const size_t j = i * bv.n + k;
        s.attributes.push_back({bv.city[j], bv.quadrant[j], bv.orientation[j]});
      }
      b.scenes.push_back(std::move(s));
    }

    const bool want_grad = grad_ground || grad_satellite || grad_heads;
    if (!want_grad) {
      *out_report = to_report(objective::total_loss(b, h, config));
      return;
    }
    objective::Gradients g;
    *out_report = to_report(objective::grad_total_loss(b, h, config, g));
    if (grad_ground) {
      for (size_t i = 0; i < g.ground.size(); ++i)
        std::copy(g.ground[i].flat().begin(), g.ground[i].flat().end(),
                  grad_ground + i * bv.n * bv.c);
    }
    if (grad_satellite) copy_out(g.satellite.data(), grad_satellite);
    if (grad_heads) {
      objective::Gradients only_heads;
      only_heads.satellite = Matrix();
      only_heads.city = g.city;
      only_heads.pos = g.pos;
      only_heads.ori = g.ori;
      copy_out(objective::pack_gradients(only_heads), grad_heads);
    }
  });
}

void sg_gradcheck_config_default(sg_gradcheck_config* cfg) {
  if (cfg == nullptr) return;
  cfg->instances = 50;
  cfg->b = 4;
  cfg->n = 3;
  cfg->c = 8;
  cfg->num_cities = 6;
  cfg->step = 1e-4;
  cfg->tolerance = 1e-4;
  cfg->seed = 0;
  sg_loss_config_default(&cfg->loss);
}

sg_status sg_gradcheck_run(const sg_gradcheck_config* cfg, sg_gradcheck_report* out) {
  return guarded([&] {
    const auto& c = deref(cfg, "cfg");
    check_ptr(out, "out");
    require(c.instances >= 1, ErrorCode::kArgument, "instances must be >= 1");
    const auto loss_cfg = to_config(c.loss);
    gradcheck::FdOptions fd;
    fd.step = c.step;
    fd.tolerance = c.tolerance;
    sg_gradcheck_report rep{};
    rep.passed = 1;
    for (size_t i = 0; i < c.instances; ++i) {
      const auto seed = mix_seed(c.seed, i);
      const auto batch = objective::random_batch({c.b, c.n, c.c, c.num_cities}, seed);
      const auto heads = objective::Heads::init(c.num_cities, c.c, mix_seed(seed, 7));
      const auto r = gradcheck::check_total_loss(batch, heads, loss_cfg, fd);
      rep.max_abs_error = std::max(rep.max_abs_error, r.max_abs_error);
      rep.max_rel_error = std::max(rep.max_rel_error, r.max_rel_error);
      rep.coordinates_checked += r.checked;
      rep.passed = rep.passed && r.passed;
      rep.last_loss = to_report(objective::total_loss(batch, heads, loss_cfg));
      ++rep.instances;
    }
    *out = rep;
  });
}

sg_status sg_index_build(const double* features, const int64_t* ids, size_t m, size_t c,
                         sg_index** out) {
  return guarded([&] {
    check_ptr(out, "out");
    *out = nullptr;
    check_ptr(ids, "ids");
    auto index = retrieval::ReferenceIndex::build(view_matrix(features, m, c, "features"),
                                                  std::span<const int64_t>(ids, m));
    *out = new sg_index{std::move(index)};
  });
}

void sg_index_destroy(sg_index* index) { delete index; }

sg_status sg_index_size(const sg_index* index, size_t* out_m) {
  return guarded([&] { deref(out_m, "out_m") = deref(index, "index").index.size(); });
}

sg_status sg_index_retrieve(const sg_index* index, const double* query, size_t k, int64_t truth,
                            int64_t* out_ids, double* out_scores, size_t* out_rank_of_truth) {
  return guarded([&] {
    const auto& idx = deref(index, "index").index;
    check_ptr(query, "query");
    std::optional<int64_t> t;
    if (truth != SG_NO_TRUTH) t = truth;
    const auto r = idx.retrieve(std::span<const double>(query, idx.dim()), k, t);
    for (size_t i = 0; i < r.top.size(); ++i) {
      if (out_ids) out_ids[i] = r.top[i].id;
      if (out_scores) out_scores[i] = r.top[i].score;
    }
    if (out_rank_of_truth) *out_rank_of_truth = r.rank_of_truth;
  });
}

namespace {

void fill_eval(const metrics::EvalReport& r, double* out_recall, sg_eval_report* out_report) {
  if (out_recall) {
    size_t i = 0;
    for (const auto& [k, v] : r.recall_at) out_recall[i++] = v;
  }
  if (out_report)
    *out_report = {r.set_size, r.database_size, r.num_sets, r.k_1pct, r.recall_at_1pct, r.ap};
}

std::vector<size_t> ks_of(const size_t* ks, size_t num_ks) {
  if (num_ks == 0) return metrics::kDefaultKs;
  check_ptr(ks, "ks");
  std::vector<size_t> v(ks, ks + num_ks);
  for (size_t i = 1; i < v.size(); ++i)
    require(v[i] > v[i - 1], ErrorCode::kArgument, "ks must be strictly increasing");
  return v;
}

}  // namespace

sg_status sg_evaluate_ranks(const size_t* ranks, size_t count, const size_t* ks, size_t num_ks,
                            size_t database_size, size_t set_size, double* out_recall,
                            sg_eval_report* out_report) {
  return guarded([&] {
    if (count > 0) check_ptr(ranks, "ranks");
    const auto k = ks_of(ks, num_ks);
    const auto r = metrics::evaluate(std::span<const size_t>(ranks, count), k, database_size, set_size);
    fill_eval(r, out_recall, out_report);
  });
}

sg_status sg_evaluate_rankings_file(const char* csv_path, const size_t* ks, size_t num_ks,
                                    size_t database_size, size_t set_size, double* out_recall,
                                    sg_eval_report* out_report, char** out_json,
                                    char** out_table) {
  return guarded([&] {
    check_ptr(csv_path, "csv_path");
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, std::string("cannot open ") + csv_path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::vector<retrieval::RankedResult> results;
    try {
      results = retrieval::rankings_from_csv(ss.str());
    } catch (const Error& e) {
      fail(e.code(), std::string(csv_path) + ": " + e.what());
    }
    const auto r = metrics::evaluate(results, ks_of(ks, num_ks), database_size, set_size);
    fill_eval(r, out_recall, out_report);
    if (out_json) *out_json = dup_string(metrics::report_to_json(r));
    if (out_table) *out_table = dup_string(metrics::report_to_table(r));
  });
}

void sg_synth_config_default(sg_synth_config* cfg) {
  if (cfg == nullptr) return;
  const data::SynthConfig d;
  *cfg = {d.num_scenes, d.queries_per_scene, d.dim, d.sigma_sat, d.sigma_ground,
          d.orientation_effect, d.num_cities, d.seed};
}

sg_status sg_synth_generate(const sg_synth_config* cfg, const char* out_dir) {
  return guarded([&] {
    const auto& c = deref(cfg, "cfg");
    check_ptr(out_dir, "out_dir");
    data::SynthConfig sc;
    sc.num_scenes = c.num_scenes;
    sc.queries_per_scene = c.queries_per_scene;
    sc.dim = c.dim;
    sc.sigma_sat = c.sigma_sat;
    sc.sigma_ground = c.sigma_ground;
    sc.orientation_effect = c.orientation_effect;
    sc.num_cities = c.num_cities;
    sc.seed = c.seed;
    geo::GridBuild grid;
    const auto ds = data::synth_generate(sc, &grid);
    data::save_dataset(ds, out_dir);
    std::ofstream g(std::filesystem::path(out_dir) / "grid.json", std::ios::trunc);
    if (!g) fail(ErrorCode::kIo, std::string("cannot write grid.json in ") + out_dir);
    g << geo::grid_to_json(grid) << '\n';
  });
}

sg_status sg_dataset_load(const char* dir, sg_dataset** out) {
  return guarded([&] {
    check_ptr(out, "out");
    *out = nullptr;
    check_ptr(dir, "dir");
    *out = new sg_dataset{data::load_dataset(dir)};
  });
}

void sg_dataset_destroy(sg_dataset* dataset) { delete dataset; }

sg_status sg_dataset_counts(const sg_dataset* dataset, size_t* out_scenes, size_t* out_ground,
                            size_t* out_dim) {
  return guarded([&] {
    const auto& ds = deref(dataset, "dataset").dataset;
    if (out_scenes) *out_scenes = ds.satellite.count();
    if (out_ground) *out_ground = ds.ground.count();
    if (out_dim) *out_dim = ds.satellite.dim;
  });
}

sg_status sg_dataset_database_size(const sg_dataset* dataset, sg_split split, size_t* out_m) {
  return guarded([&] {
    const auto& ds = deref(dataset, "dataset").dataset;
    check_ptr(out_m, "out_m");
    *out_m = experiment::select_scenes(ds.manifest, {to_split(split), 0}).size();
  });
}

sg_status sg_manifest_split(const char* in_path, uint64_t seed, const char* out_path) {
  return guarded([&] {
    check_ptr(in_path, "in_path");
    check_ptr(out_path, "out_path");
    data::write_manifest(data::split_scenes(data::read_manifest(in_path), seed), out_path);
  });
}

sg_status sg_store_inspect(const char* path, size_t* out_count, size_t* out_dim) {
  return guarded([&] {
    check_ptr(path, "path");
    const auto store = data::load_store(path);
    if (out_count) *out_count = store.count();
    if (out_dim) *out_dim = store.dim;
  });
}

void sg_fuse_options_default(sg_fuse_options* opts) {
  if (opts == nullptr) return;
  *opts = {4, SG_FUSER_SFF, 2.0, 0, 0, SG_SPLIT_ALL};
}

sg_status sg_fuse_sets(const sg_dataset* dataset, const sg_fuse_options* opts,
                       const char* out_store, size_t* out_num_sets, size_t* out_skipped_scenes) {
  return guarded([&] {
    const auto& ds = deref(dataset, "dataset").dataset;
    const auto& o = deref(opts, "opts");
    check_ptr(out_store, "out_store");
    require(o.set_size >= 1, ErrorCode::kArgument, "set size must be >= 1");
    const auto scenes = experiment::select_scenes(ds.manifest, {to_split(o.split), 0});
    const auto standardized =
        data::standardized_sets(ds.manifest, o.set_size, o.seed, std::span<const int64_t>(scenes));
    const auto sets = experiment::build_sets(ds, scenes, o.set_size, o.seed, o.redundant != 0);
    const auto fuser = o.fuser == SG_FUSER_AVERAGE ? fusion::Fuser::kAverage : fusion::Fuser::kSff;
    require(sets.size() > 0, ErrorCode::kData,
            "no scene has at least " + std::to_string(o.set_size) + " query images");
    data::save_store(experiment::fuse_to_store(sets, fuser, o.scale), out_store);
    if (out_num_sets) *out_num_sets = sets.size();
    if (out_skipped_scenes) *out_skipped_scenes = standardized.skipped_scenes.size();
  });
}

sg_status sg_retrieve_to_csv(const sg_dataset* dataset, const char* query_store, size_t k,
                             sg_split split, size_t threads, const char* out_csv,
                             size_t* out_database_size) {
  return guarded([&] {
    const auto& ds = deref(dataset, "dataset").dataset;
    check_ptr(query_store, "query_store");
    check_ptr(out_csv, "out_csv");
    const auto scenes = experiment::select_scenes(ds.manifest, {to_split(split), 0});
    const auto index = experiment::satellite_index(ds, scenes);
    const auto queries = data::load_store(query_store);
    const auto results = experiment::retrieve_store(queries, index, k, threads == 0 ? 1 : threads);
    std::ofstream out(out_csv, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, std::string("cannot write ") + out_csv);
    out << retrieval::rankings_to_csv(results);
    if (out_database_size) *out_database_size = index.size();
  });
}

sg_status sg_n_sweep(const sg_dataset* dataset, const sg_sweep_options* opts, const char* out_csv,
                     char** out_csv_text) {
  return guarded([&] {
    const auto& ds = deref(dataset, "dataset").dataset;
    const auto& o = deref(opts, "opts");
    experiment::SweepOptions so;
    if (o.num_set_sizes > 0) {
      check_ptr(o.set_sizes, "set_sizes");
      so.set_sizes.assign(o.set_sizes, o.set_sizes + o.num_set_sizes);
    }
    if (o.num_scales > 0) {
      check_ptr(o.scales, "scales");
      so.scales.assign(o.scales, o.scales + o.num_scales);
    }
    so.ks = ks_of(o.ks, o.num_ks);
    so.redundant = o.redundant != 0;
    so.split = to_split(o.split);
    so.seed = o.seed;
    so.threads = o.threads == 0 ? 1 : o.threads;
    const std::string csv = experiment::sweep_to_csv(experiment::n_sweep(ds, so));
    if (out_csv) {
      std::ofstream out(out_csv, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::kIo, std::string("cannot write ") + out_csv);
      out << csv;
    }
    if (out_csv_text) *out_csv_text = dup_string(csv);
  });
}

}  // extern "C"
