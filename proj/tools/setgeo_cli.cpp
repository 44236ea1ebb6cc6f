// setgeo command-line driver. Every operation goes through the C API in
// setgeo/setgeo.h.
//
// Exit codes: 0 success, 2 usage or input error, 3 invariant violation
// (including a failed gradient check).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "setgeo/setgeo.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;

int report_failure(sg_status status, const std::string& context) {
  std::cerr << "error: " << context << ": " << sg_status_string(status) << ": "
            << sg_last_error() << "\n";
  return status == SG_ERR_INVARIANT || status == SG_ERR_INTERNAL ? kExitInvariant : kExitUsage;
}

struct StatusError {
  int exit_code;
};

void check(sg_status status, const std::string& context) {
  if (status != SG_OK) throw StatusError{report_failure(status, context)};
}

struct CString {
  char* ptr = nullptr;
  ~CString() { sg_string_free(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* ptr = nullptr;
  ~Handle() { Destroy(ptr); }
};

using DatasetHandle = Handle<sg_dataset, sg_dataset_destroy>;
using GridHandle = Handle<sg_grid, sg_grid_destroy>;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw StatusError{kExitUsage};
  }
  out << text;
}

sg_split parse_split(const std::string& s) {
  if (s == "train") return SG_SPLIT_TRAIN;
  if (s == "test") return SG_SPLIT_TEST;
  return SG_SPLIT_ALL;
}

std::size_t default_threads() {
  if (const char* env = std::getenv("SETGEO_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// Small values print as 1e-4 rather than 0.0001 or 1e-04.
std::string compact_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  std::string s = buf;
  if (v > 0 && v < 1e-3) {
    char sci[32];
    std::snprintf(sci, sizeof sci, "%e", v);
    std::string m = sci;
    auto e = m.find('e');
    std::string mant = m.substr(0, e);
    while (mant.size() > 1 && mant.back() == '0') mant.pop_back();
    if (mant.back() == '.') mant.pop_back();
    int exp = std::stoi(m.substr(e + 1));
    s = mant + "e" + std::to_string(exp);
  }
  return s;
}

nlohmann::ordered_json loss_json(const sg_loss_report& r, const sg_loss_config& cfg) {
  nlohmann::ordered_json j;
  j["l_set"] = r.l_set;
  j["l_single"] = r.l_single;
  j["l_city"] = r.l_city;
  j["l_pos"] = r.l_pos;
  j["l_ori"] = r.l_ori;
  j["l_ial"] = r.l_ial;
  j["total"] = r.total;
  j["lambdas"] = {cfg.use_city ? cfg.lambda_city : 0.0, cfg.use_pos ? cfg.lambda_pos : 0.0,
                  cfg.use_ori ? cfg.lambda_ori : 0.0, cfg.lambda};
  return j;
}

// Flags given on the command line win over config-file values, which win
// over built-in defaults. Config values are injected as extra arguments for
// options the user did not pass.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args) {
  std::string config_path;
  std::string command;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    if (command.empty() && !args[i].empty() && args[i][0] != '-' &&
        app.get_subcommand_no_throw(args[i]) != nullptr) {
      command = args[i];
    }
  }
  if (config_path.empty() || command.empty()) return args;

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config file " << config_path << "\n";
    throw StatusError{kExitUsage};
  }
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << config_path << ": invalid JSON: " << e.what() << "\n";
    throw StatusError{kExitUsage};
  }
  if (!cfg.is_object()) {
    std::cerr << "error: " << config_path << ": config must be a JSON object\n";
    throw StatusError{kExitUsage};
  }
  CLI::App* sub = app.get_subcommand(command);
  std::map<std::string, nlohmann::json> values;
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (!it.value().is_object()) values[it.key()] = it.value();
  }
  // Command-specific section overrides top-level keys.
  if (cfg.contains(command) && cfg[command].is_object()) {
    for (auto it = cfg[command].begin(); it != cfg[command].end(); ++it) values[it.key()] = it.value();
  }
  auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto scalar = [](const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  for (const auto& [key, value] : values) {
    const std::string flag = "--" + key;
    CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || given(flag)) continue;
    if (opt->get_expected_max() == 0) {
      if (value.is_boolean() && value.get<bool>()) args.push_back(flag);
      continue;
    }
    args.push_back(flag);
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(scalar(v));
    } else {
      args.push_back(scalar(value));
    }
  }
  return args;
}

struct LossFlags {
  double scale = 2.0;
  double temperature = 0.07;
  double lambda1 = 0.1;
  double lambda2 = 0.2;
  double lambda3 = 0.2;
  double lambda = 1.0;
  bool one_way = false;
  std::vector<std::string> disable;

  void attach(CLI::App* cmd) {
    cmd->add_option("--scale", scale, "SFF scale hyperparameter")->capture_default_str();
    cmd->add_option("--temperature", temperature, "InfoNCE temperature")->capture_default_str();
    cmd->add_option("--lambda1", lambda1, "city head weight")->capture_default_str();
    cmd->add_option("--lambda2", lambda2, "position head weight")->capture_default_str();
    cmd->add_option("--lambda3", lambda3, "orientation head weight")->capture_default_str();
    cmd->add_option("--lambda", lambda, "IAL weight in the total loss")->capture_default_str();
    cmd->add_flag("--one-way", one_way, "query-to-reference InfoNCE only");
    cmd->add_option("--disable-task", disable, "ablate a head: city, pos or ori")
        ->check(CLI::IsMember({"city", "pos", "ori"}));
  }

  sg_loss_config config() const {
    sg_loss_config c;
    sg_loss_config_default(&c);
    c.scale = scale;
    c.temperature = temperature;
    c.lambda_city = lambda1;
    c.lambda_pos = lambda2;
    c.lambda_ori = lambda3;
    c.lambda = lambda;
    c.symmetric = one_way ? 0 : 1;
    for (const auto& t : disable) {
      if (t == "city") c.use_city = 0;
      if (t == "pos") c.use_pos = 0;
      if (t == "ori") c.use_ori = 0;
    }
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-based cross-view geo-localization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sg_version()));
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags take precedence");

  const std::size_t env_threads = default_threads();

  // build-grid
  auto* grid_cmd = app.add_subcommand("build-grid", "tile a bounding box with reference cells");
  std::vector<double> bbox;
  int zoom = 18, tile_px = 400, city = 0;
  double overlap = 0.125;
  std::string grid_out;
  grid_cmd->add_option("--bbox", bbox, "lat1 lon1 lat2 lon2")->expected(4)->required();
  grid_cmd->add_option("--zoom", zoom, "Web-Mercator zoom level")->capture_default_str();
  grid_cmd->add_option("--tile-px", tile_px, "cell side in pixels")->capture_default_str();
  grid_cmd->add_option("--overlap", overlap, "overlap fraction in [0, 1)")->capture_default_str();
  grid_cmd->add_option("--city", city, "city label for every cell")->capture_default_str();
  grid_cmd->add_option("--out", grid_out, "output JSON (stdout when omitted)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-embedding dataset");
  sg_synth_config synth;
  sg_synth_config_default(&synth);
  std::string synth_out;
  synth_cmd->add_option("--scenes", synth.num_scenes, "number of scenes M")->capture_default_str();
  synth_cmd->add_option("--queries", synth.queries_per_scene, "ground images per scene")->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "feature dimension C")->capture_default_str();
  synth_cmd->add_option("--sigma-sat", synth.sigma_sat, "satellite noise scale")->capture_default_str();
  synth_cmd->add_option("--sigma-ground", synth.sigma_ground, "ground noise scale")->capture_default_str();
  synth_cmd->add_option("--orientation-effect", synth.orientation_effect, "orientation offset")->capture_default_str();
  synth_cmd->add_option("--cities", synth.num_cities, "number of city labels")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  // split
  auto* split_cmd = app.add_subcommand("split", "assign a seeded 1:1 scene-level train/test split");
  std::string split_in, split_out;
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--manifest", split_in, "input manifest.jsonl")->required();
  split_cmd->add_option("--seed", split_seed, "random seed")->capture_default_str();
  split_cmd->add_option("--out", split_out, "output manifest path")->required();

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse standardized query sets into a feature store");
  sg_fuse_options fuse;
  sg_fuse_options_default(&fuse);
  std::string fuse_data, fuse_out, fuse_fuser = "sff", fuse_split = "all";
  bool fuse_redundant = false;
  fuse_cmd->add_option("--data", fuse_data, "dataset directory")->required();
  fuse_cmd->add_option("--n", fuse.set_size, "query images per set")->capture_default_str();
  fuse_cmd->add_option("--scale", fuse.scale, "SFF scale")->capture_default_str();
  fuse_cmd->add_option("--fuser", fuse_fuser, "sff or avg")
      ->check(CLI::IsMember({"sff", "avg"}))->capture_default_str();
  fuse_cmd->add_option("--split", fuse_split, "all, train or test")
      ->check(CLI::IsMember({"all", "train", "test"}))->capture_default_str();
  fuse_cmd->add_flag("--redundant", fuse_redundant, "duplicate half of every set");
  fuse_cmd->add_option("--seed", fuse.seed, "set sampling seed")->capture_default_str();
  fuse_cmd->add_option("--out", fuse_out, "output feature store")->required();

  // retrieve
  auto* ret_cmd = app.add_subcommand("retrieve", "rank satellite references for fused queries");
  std::string ret_data, ret_queries, ret_out, ret_split = "all";
  std::size_t ret_k = 10, ret_threads = env_threads;
  ret_cmd->add_option("--data", ret_data, "dataset directory")->required();
  ret_cmd->add_option("--queries", ret_queries, "fused query store")->required();
  ret_cmd->add_option("--k", ret_k, "rows per query")->capture_default_str();
  ret_cmd->add_option("--split", ret_split, "all, train or test")
      ->check(CLI::IsMember({"all", "train", "test"}))->capture_default_str();
  ret_cmd->add_option("--threads", ret_threads, "worker threads (env SETGEO_THREADS)");
  ret_cmd->add_option("--out", ret_out, "rankings CSV")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "compute Recall@K-N, R@1%-N and AP-N");
  std::string eval_rankings, eval_data, eval_out, eval_split = "all";
  std::size_t eval_m = 0, eval_n = 0;
  std::vector<std::size_t> eval_ks = {1, 5, 10};
  eval_cmd->add_option("--rankings", eval_rankings, "rankings CSV")->required();
  eval_cmd->add_option("--m", eval_m, "database size M");
  eval_cmd->add_option("--data", eval_data, "dataset directory (derives M)");
  eval_cmd->add_option("--split", eval_split, "split used for M with --data")
      ->check(CLI::IsMember({"all", "train", "test"}))->capture_default_str();
  eval_cmd->add_option("--n", eval_n, "set size N (label only)");
  eval_cmd->add_option("--k", eval_ks, "recall cutoffs")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "JSON report path");

  // ablate-n
  auto* sweep_cmd = app.add_subcommand("ablate-n", "sweep the query set size N");
  std::string sweep_data, sweep_out, sweep_split = "all";
  std::vector<std::size_t> sweep_n = {1, 2, 4, 8, 16, 40};
  std::vector<double> sweep_scales = {2.0};
  std::vector<std::size_t> sweep_ks = {1, 5, 10};
  bool sweep_redundant = false;
  std::uint64_t sweep_seed = 0;
  std::size_t sweep_threads = env_threads;
  sweep_cmd->add_option("--data", sweep_data, "dataset directory")->required();
  sweep_cmd->add_option("--n", sweep_n, "set sizes")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--scale", sweep_scales,
                        "one value: SFF vs average pooling; several: SFF scale ablation")
      ->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--k", sweep_ks, "recall cutoffs")->delimiter(',')->capture_default_str();
  sweep_cmd->add_flag("--redundant", sweep_redundant, "duplicate half of every set");
  sweep_cmd->add_option("--split", sweep_split, "all, train or test")
      ->check(CLI::IsMember({"all", "train", "test"}))->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_seed, "set sampling seed")->capture_default_str();
  sweep_cmd->add_option("--threads", sweep_threads, "worker threads (env SETGEO_THREADS)");
  sweep_cmd->add_option("--out", sweep_out, "CSV output (stdout when omitted)");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "verify analytic loss gradients");
  sg_gradcheck_config gc;
  sg_gradcheck_config_default(&gc);
  LossFlags gc_loss;
  std::string gc_out;
  gc_cmd->add_option("--instances", gc.instances, "random instances")->capture_default_str();
  gc_cmd->add_option("--batch", gc.b, "scenes per batch B")->capture_default_str();
  gc_cmd->add_option("--n", gc.n, "images per set N")->capture_default_str();
  gc_cmd->add_option("--dim", gc.c, "feature dimension C")->capture_default_str();
  gc_cmd->add_option("--cities", gc.num_cities, "city classes")->capture_default_str();
  gc_cmd->add_option("--step", gc.step, "finite-difference step")->capture_default_str();
  gc_cmd->add_option("--tol", gc.tolerance, "max relative error")->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "random seed")->capture_default_str();
  gc_cmd->add_option("--out", gc_out, "JSON report path");
  gc_loss.attach(gc_cmd);

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    std::vector<std::string> forward(args.rbegin(), args.rend());
    forward = apply_config(app, forward);
    args.assign(forward.rbegin(), forward.rend());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const StatusError& e) {
    return e.exit_code;
  }

  try {
    if (*grid_cmd) {
      GridHandle grid;
      check(sg_grid_build(bbox[0], bbox[1], bbox[2], bbox[3], zoom, tile_px, overlap, city,
                          &grid.ptr),
            "build-grid");
      CString json;
      check(sg_grid_to_json(grid.ptr, &json.ptr), "build-grid");
      write_text(grid_out, json.str() + "\n");
      sg_grid_info info;
      check(sg_grid_get_info(grid.ptr, &info), "build-grid");
      std::cerr << "grid " << info.rows << "x" << info.cols << " cells, stride " << info.stride_px
                << " px\n";
    } else if (*synth_cmd) {
      check(sg_synth_generate(&synth, synth_out.c_str()), "synth");
      std::cerr << "wrote " << synth.num_scenes << " scenes x " << synth.queries_per_scene
                << " queries to " << synth_out << "\n";
    } else if (*split_cmd) {
      check(sg_manifest_split(split_in.c_str(), split_seed, split_out.c_str()), "split");
    } else if (*fuse_cmd) {
      DatasetHandle ds;
      check(sg_dataset_load(fuse_data.c_str(), &ds.ptr), "fuse");
      fuse.fuser = fuse_fuser == "avg" ? SG_FUSER_AVERAGE : SG_FUSER_SFF;
      fuse.redundant = fuse_redundant ? 1 : 0;
      fuse.split = parse_split(fuse_split);
      std::size_t sets = 0, skipped = 0;
      check(sg_fuse_sets(ds.ptr, &fuse, fuse_out.c_str(), &sets, &skipped), "fuse");
      std::cerr << "fused " << sets << " sets of " << fuse.set_size << " (" << skipped
                << " scenes skipped)\n";
    } else if (*ret_cmd) {
      DatasetHandle ds;
      check(sg_dataset_load(ret_data.c_str(), &ds.ptr), "retrieve");
      std::size_t m = 0;
      check(sg_retrieve_to_csv(ds.ptr, ret_queries.c_str(), ret_k, parse_split(ret_split),
                               ret_threads, ret_out.c_str(), &m),
            "retrieve");
    } else if (*eval_cmd) {
      std::size_t m = eval_m;
      if (m == 0) {
        if (eval_data.empty()) {
          std::cerr << "error: evaluate needs --m or --data\n";
          return kExitUsage;
        }
        DatasetHandle ds;
        check(sg_dataset_load(eval_data.c_str(), &ds.ptr), "evaluate");
        check(sg_dataset_database_size(ds.ptr, parse_split(eval_split), &m), "evaluate");
      }
      std::vector<double> recall(eval_ks.size());
      sg_eval_report rep;
      CString json, table;
      check(sg_evaluate_rankings_file(eval_rankings.c_str(), eval_ks.data(), eval_ks.size(), m,
                                      eval_n, recall.data(), &rep, &json.ptr, &table.ptr),
            "evaluate");
      std::cout << table.str();
      if (!eval_out.empty()) write_text(eval_out, json.str() + "\n");
    } else if (*sweep_cmd) {
      DatasetHandle ds;
      check(sg_dataset_load(sweep_data.c_str(), &ds.ptr), "ablate-n");
      sg_sweep_options so{sweep_n.data(),  sweep_n.size(), sweep_scales.data(),
                          sweep_scales.size(), sweep_ks.data(), sweep_ks.size(),
                          sweep_redundant ? 1 : 0, parse_split(sweep_split), sweep_seed,
                          sweep_threads};
      CString csv;
      check(sg_n_sweep(ds.ptr, &so, nullptr, &csv.ptr), "ablate-n");
      write_text(sweep_out, csv.str());
    } else if (*gc_cmd) {
      gc.loss = gc_loss.config();
      sg_gradcheck_report rep;
      check(sg_gradcheck_run(&gc, &rep), "gradcheck");
      nlohmann::ordered_json j;
      j["passed"] = rep.passed != 0;
      j["instances"] = rep.instances;
      j["coordinates_checked"] = rep.coordinates_checked;
      j["max_abs_error"] = rep.max_abs_error;
      j["max_rel_error"] = rep.max_rel_error;
      j["tolerance"] = gc.tolerance;
      j["step"] = gc.step;
      j["loss"] = loss_json(rep.last_loss, gc.loss);
      if (!gc_out.empty()) write_text(gc_out, j.dump(2) + "\n");
      char line[160];
      std::snprintf(line, sizeof line, "%s max_rel_err<%s (observed %.3e over %zu coordinates)\n",
                    rep.passed ? "PASS" : "FAIL", compact_number(gc.tolerance).c_str(),
                    rep.max_rel_error, rep.coordinates_checked);
      std::cout << line;
      if (!rep.passed) return kExitInvariant;
    }
  } catch (const StatusError& e) {
    return e.exit_code;
  }
  return kExitOk;
}
