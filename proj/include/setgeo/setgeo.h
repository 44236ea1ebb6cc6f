/*
 * setgeo C API.
 *
 * Every function returns an sg_status. On failure a description of the most
 * recent error on the calling thread is available from sg_last_error().
 * Objects are opaque handles released with the matching *_destroy function;
 * strings returned through char** out-parameters are released with
 * sg_string_free().
 */
#ifndef SETGEO_SETGEO_H_
#define SETGEO_SETGEO_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SETGEO_BUILDING_LIBRARY)
#define SG_API __attribute__((visibility("default")))
#else
#define SG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sg_status {
  SG_OK = 0,
  SG_ERR_ARGUMENT = 1,
  SG_ERR_CONFIG = 2,
  SG_ERR_DEGENERATE = 3,
  SG_ERR_DOMAIN = 4,
  SG_ERR_OUT_OF_COVERAGE = 5,
  SG_ERR_DATA = 6,
  SG_ERR_FORMAT = 7,
  SG_ERR_IO = 8,
  SG_ERR_INVARIANT = 9,
  SG_ERR_INTERNAL = 10
} sg_status;

/* Sentinel for "no ground truth" in sg_index_retrieve. */
#define SG_NO_TRUTH INT64_MIN

typedef enum sg_fuser { SG_FUSER_SFF = 0, SG_FUSER_AVERAGE = 1 } sg_fuser;
typedef enum sg_split { SG_SPLIT_ALL = 0, SG_SPLIT_TRAIN = 1, SG_SPLIT_TEST = 2 } sg_split;

SG_API const char* sg_version(void);
SG_API const char* sg_status_string(sg_status status);
SG_API const char* sg_last_error(void);
SG_API void sg_string_free(char* str);

/* ---- geodesy ------------------------------------------------------------ */

SG_API sg_status sg_haversine(double lat1, double lon1, double lat2, double lon2,
                              double* out_meters);
SG_API sg_status sg_ground_resolution(double lat, int zoom, double* out_m_per_px);
SG_API sg_status sg_orientation_label(double heading_deg, int* out_class);
/* lat_lon holds count (lat, lon) pairs. */
SG_API sg_status sg_validate_set_radius(const double* lat_lon, size_t count, double radius_m,
                                        int* out_within);

typedef struct sg_grid sg_grid;

typedef struct sg_grid_info {
  int zoom;
  int tile_px;
  double overlap;
  int stride_px;
  double origin_px[2];
  int rows;
  int cols;
} sg_grid_info;

SG_API sg_status sg_grid_build(double lat1, double lon1, double lat2, double lon2, int zoom,
                               int tile_px, double overlap, int city_label, sg_grid** out);
SG_API void sg_grid_destroy(sg_grid* grid);
SG_API sg_status sg_grid_get_info(const sg_grid* grid, sg_grid_info* out);
/* center = (lat, lon); bounds = (x0, y0, x1, y1) in global pixels. Either may be NULL. */
SG_API sg_status sg_grid_cell(const sg_grid* grid, int64_t id, double* out_center,
                              double* out_bounds);
SG_API sg_status sg_grid_assign(const sg_grid* grid, double lat, double lon, int64_t* out_id);
SG_API sg_status sg_grid_quadrant_label(const sg_grid* grid, int64_t cell_id, double lat,
                                        double lon, int* out_class);
SG_API sg_status sg_grid_to_json(const sg_grid* grid, char** out_json);

/* ---- fusion (features are n x c row-major) ------------------------------ */

/* out_weights receives n normalized weights. */
SG_API sg_status sg_sff_weights(const double* features, size_t n, size_t c, double scale,
                                double* out_weights);
SG_API sg_status sg_sff_fuse(const double* features, size_t n, size_t c, double scale,
                             double* out_fused);
SG_API sg_status sg_avg_fuse(const double* features, size_t n, size_t c, double* out_fused);
/* out_grad is n x c: d<upstream, fused>/d features. */
SG_API sg_status sg_sff_fuse_backward(const double* features, size_t n, size_t c, double scale,
                                      const double* upstream, double* out_grad);

/* ---- objective ---------------------------------------------------------- */

typedef struct sg_loss_config {
  double scale;
  double temperature;
  double lambda_city;
  double lambda_pos;
  double lambda_ori;
  double lambda;
  int symmetric;
  int use_city;
  int use_pos;
  int use_ori;
} sg_loss_config;

typedef struct sg_loss_report {
  double l_set;
  double l_single;
  double l_city;
  double l_pos;
  double l_ori;
  double l_ial;
  double total;
} sg_loss_report;

/* Defaults: scale 2, temperature 0.07, lambdas 0.1/0.2/0.2, lambda 1, symmetric. */
SG_API void sg_loss_config_default(sg_loss_config* cfg);

/* queries/references are b x c row-major; row i of each forms the positive pair. */
SG_API sg_status sg_info_nce(const double* queries, const double* references, size_t b,
                             size_t c, double temperature, int symmetric, double* out_loss);

typedef struct sg_heads sg_heads;

SG_API sg_status sg_heads_create(size_t num_cities, size_t dim, uint64_t seed, sg_heads** out);
SG_API void sg_heads_destroy(sg_heads* heads);
/* Number of doubles in the flattened head parameters (weights then bias per head). */
SG_API sg_status sg_heads_param_count(const sg_heads* heads, size_t* out_count);
SG_API sg_status sg_heads_get_params(const sg_heads* heads, double* out_params);
SG_API sg_status sg_heads_set_params(sg_heads* heads, const double* params);

/*
 * Batch layout: ground is b x n x c, satellite is b x c, labels are b x n.
 * Gradient buffers may be NULL (loss only) or sized like their inputs;
 * grad_heads follows sg_heads_get_params layout.
 */
typedef struct sg_batch_view {
  const double* ground;
  const double* satellite;
  const int* city;
  const int* quadrant;
  const int* orientation;
  size_t b;
  size_t n;
  size_t c;
} sg_batch_view;

SG_API sg_status sg_total_loss(const sg_batch_view* batch, const sg_heads* heads,
                               const sg_loss_config* cfg, sg_loss_report* out_report,
                               double* grad_ground, double* grad_satellite, double* grad_heads);

typedef struct sg_gradcheck_config {
  size_t instances;
  size_t b;
  size_t n;
  size_t c;
  size_t num_cities;
  double step;
  double tolerance;
  uint64_t seed;
  sg_loss_config loss;
} sg_gradcheck_config;

typedef struct sg_gradcheck_report {
  double max_abs_error;
  double max_rel_error;
  size_t coordinates_checked;
  size_t instances;
  int passed;
  sg_loss_report last_loss;
} sg_gradcheck_report;

SG_API void sg_gradcheck_config_default(sg_gradcheck_config* cfg);
/* Random instances compared against central differences on every parameter. */
SG_API sg_status sg_gradcheck_run(const sg_gradcheck_config* cfg, sg_gradcheck_report* out);

/* ---- retrieval ---------------------------------------------------------- */

typedef struct sg_index sg_index;

SG_API sg_status sg_index_build(const double* features, const int64_t* ids, size_t m, size_t c,
                                sg_index** out);
SG_API void sg_index_destroy(sg_index* index);
SG_API sg_status sg_index_size(const sg_index* index, size_t* out_m);
/* Writes k ids and scores. out_rank_of_truth is 0 when truth == SG_NO_TRUTH. */
SG_API sg_status sg_index_retrieve(const sg_index* index, const double* query, size_t k,
                                   int64_t truth, int64_t* out_ids, double* out_scores,
                                   size_t* out_rank_of_truth);

/* ---- metrics ------------------------------------------------------------ */

typedef struct sg_eval_report {
  size_t set_size;
  size_t database_size;
  size_t num_sets;
  size_t k_1pct;
  double recall_at_1pct;
  double ap;
} sg_eval_report;

/* out_recall receives one value per entry of ks. */
SG_API sg_status sg_evaluate_ranks(const size_t* ranks, size_t count, const size_t* ks,
                                   size_t num_ks, size_t database_size, size_t set_size,
                                   double* out_recall, sg_eval_report* out_report);
/* Evaluates a rankings CSV; JSON and table outputs may be NULL. */
SG_API sg_status sg_evaluate_rankings_file(const char* csv_path, const size_t* ks, size_t num_ks,
                                           size_t database_size, size_t set_size,
                                           double* out_recall, sg_eval_report* out_report,
                                           char** out_json, char** out_table);

/* ---- datasets and experiments ------------------------------------------- */

typedef struct sg_synth_config {
  size_t num_scenes;
  size_t queries_per_scene;
  size_t dim;
  double sigma_sat;
  double sigma_ground;
  double orientation_effect;
  size_t num_cities;
  uint64_t seed;
} sg_synth_config;

SG_API void sg_synth_config_default(sg_synth_config* cfg);
/* Writes manifest.jsonl, ground.sgf, satellite.sgf (+ .ids) and grid.json. */
SG_API sg_status sg_synth_generate(const sg_synth_config* cfg, const char* out_dir);

typedef struct sg_dataset sg_dataset;

SG_API sg_status sg_dataset_load(const char* dir, sg_dataset** out);
SG_API void sg_dataset_destroy(sg_dataset* dataset);
SG_API sg_status sg_dataset_counts(const sg_dataset* dataset, size_t* out_scenes,
                                   size_t* out_ground, size_t* out_dim);
/* Number of reference scenes retrieval uses for a split. */
SG_API sg_status sg_dataset_database_size(const sg_dataset* dataset, sg_split split,
                                          size_t* out_m);

/* Assigns a seeded 1:1 scene-level train/test split and writes a new manifest. */
SG_API sg_status sg_manifest_split(const char* in_path, uint64_t seed, const char* out_path);
/* Loads and validates a feature store (and its .ids sidecar). */
SG_API sg_status sg_store_inspect(const char* path, size_t* out_count, size_t* out_dim);

typedef struct sg_fuse_options {
  size_t set_size;
  sg_fuser fuser;
  double scale;
  uint64_t seed;
  int redundant;
  sg_split split;
} sg_fuse_options;

SG_API void sg_fuse_options_default(sg_fuse_options* opts);
/* Builds standardized query sets, fuses them and saves a feature store. */
SG_API sg_status sg_fuse_sets(const sg_dataset* dataset, const sg_fuse_options* opts,
                              const char* out_store, size_t* out_num_sets,
                              size_t* out_skipped_scenes);

/* Ranks every query of a fused store against the dataset's satellites. */
SG_API sg_status sg_retrieve_to_csv(const sg_dataset* dataset, const char* query_store,
                                    size_t k, sg_split split, size_t threads,
                                    const char* out_csv, size_t* out_database_size);

typedef struct sg_sweep_options {
  const size_t* set_sizes;
  size_t num_set_sizes;
  const double* scales;
  size_t num_scales;
  const size_t* ks;
  size_t num_ks;
  int redundant;
  sg_split split;
  uint64_t seed;
  size_t threads;
} sg_sweep_options;

/* Writes the sweep CSV; out_csv_text (optional) receives the same text. */
SG_API sg_status sg_n_sweep(const sg_dataset* dataset, const sg_sweep_options* opts,
                            const char* out_csv, char** out_csv_text);

#ifdef __cplusplus
}
#endif

#endif /* SETGEO_SETGEO_H_ */
