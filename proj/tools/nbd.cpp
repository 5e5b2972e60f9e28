#include "nbd/experiment.hpp"
#include "nbd/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef NBD_CONFIG_DIR
#define NBD_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace nbd;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string task;
  bool desk_scale = true;
  CLI::Option* desk_flag = nullptr;
};

void add_common(CLI::App* app, CommonOptions& o, const std::string& default_out) {
  o.out = default_out;
  app->add_option("--config", o.config, "Experiment config (JSON)");
  app->add_option("--seed", o.seed, "Seed; overrides the config");
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
  app->add_option("--task", o.task, "cluster, rank, regress, colearn or shortest-path");
  o.desk_flag = app->add_flag("--desk-scale,!--full-scale", o.desk_scale, "Desk-scale sizes (default on)");
}

ConfigOverrides overrides_of(const CommonOptions& o) {
  ConfigOverrides ov;
  if (!o.task.empty()) ov.task = parse_task(o.task);
  if (o.desk_flag->count() > 0) ov.desk_scale = o.desk_scale;
  ov.seed = o.seed;
  return ov;
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  const ConfigOverrides ov = overrides_of(o);
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw UsageError("config not found: " + o.config);
    return load_config(o.config, ov);
  }
  if (!ov.task) throw UsageError("either --config or --task is required");
  return config_from_json(json::object(), ov);
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string format_row(const MetricsRow& r) {
  std::ostringstream s;
  s.precision(6);
  s << r.dataset << ' ' << r.model << " seed=" << r.seed;
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v) s << ' ' << name << '=' << *v;
  };
  put("map", r.map);
  put("auc", r.auc);
  put("purity", r.purity);
  put("rand", r.rand);
  put("mae", r.mae);
  put("mse", r.mse);
  return s.str();
}

std::string metrics_text(const std::vector<MetricsRow>& rows) {
  std::ostringstream s;
  write_metrics_csv(s, rows);
  return s.str();
}

std::string loss_text(const TrainResult& r) {
  std::ostringstream s;
  write_loss_csv(s, r);
  return s.str();
}

// ------------------------------------------------------------ generate

int cmd_generate(const CommonOptions& o) {
  const ExperimentConfig config = resolve_config(o);
  const Dataset data = generate_dataset(config, config.seed);
  write_dataset(o.out, data, config, config.seed);
  std::cout << "generated " << data.name << " (" << to_string(data.task) << ", seed " << config.seed << ") in "
            << o.out << '\n';
  return 0;
}

// ------------------------------------------------------------ train

int cmd_train(const CommonOptions& o, const std::string& data_dir, const std::string& only) {
  require_dir(data_dir, "--data");
  ExperimentConfig config = resolve_config(o);
  const Dataset data = read_dataset(data_dir);
  if (is_pair_task(data.task) != is_pair_task(config.task)) {
    throw UsageError("dataset task '" + std::string(to_string(data.task)) + "' does not fit config task '" +
                     std::string(to_string(config.task)) + "'");
  }
  make_dir(o.out);
  bool any = false;
  for (const auto& spec : config.models) {
    if (!only.empty() && spec.name != only) continue;
    any = true;
    AnyModel model = init_model(spec, data.input_dim(), config.seed);
    TrainConfig tc = config.train;
    tc.seed = config.seed;
    const TrainResult result = train_model(model, spec, data, tc);
    const json meta = {{"model", spec.name},
                       {"kind", to_string(spec.kind)},
                       {"task", to_string(data.task)},
                       {"dataset", data.name},
                       {"seed", config.seed},
                       {"batch", tc.batch},
                       {"margin", tc.margin},
                       {"final_train_loss", result.final_train_loss},
                       {"config", config_to_json(config)}};
    save_checkpoint(fs::path(o.out) / (spec.name + ".ckpt.json"), model, meta);
    write_text(fs::path(o.out) / (spec.name + ".loss.csv"), loss_text(result));
    std::cout.precision(10);
    std::cout << "trained " << spec.name << " on " << data.name << ": " << result.steps
              << " steps, final train loss " << result.final_train_loss << '\n';
  }
  if (!any) throw UsageError("no model named '" + only + "' in the config");
  return 0;
}

// ------------------------------------------------------------ eval

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& data_dir) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (!fs::is_regular_file(checkpoint)) throw UsageError("checkpoint not found: " + checkpoint);
  require_dir(data_dir, "--data");
  json meta;
  const AnyModel model = load_checkpoint(checkpoint, &meta);
  Dataset data = read_dataset(data_dir);
  if (!o.task.empty()) {
    const Task t = parse_task(o.task);
    if (is_pair_task(t) != is_pair_task(data.task)) {
      throw UsageError("task '" + o.task + "' does not fit dataset task '" + std::string(to_string(data.task)) + "'");
    }
    data.task = t;
  }
  EvalOptions options;
  options.clusters = data.classes;
  options.seed = o.seed.value_or(meta.value("seed", std::uint64_t{0}));
  if (!o.config.empty()) {
    const ExperimentConfig config = resolve_config(o);
    options.kmeans_restarts = config.kmeans_restarts;
    options.kmeans_max_iter = config.kmeans_max_iter;
  }
  MetricsRow row = evaluate(model, data, options);
  row.model = meta.value("model", std::string("model"));
  row.seed = options.seed;
  make_dir(o.out);
  write_text(fs::path(o.out) / "metrics.csv", metrics_text({row}));
  std::cout << format_row(row) << '\n';
  return 0;
}

// ------------------------------------------------------------ bench

int cmd_bench(const CommonOptions& o, const std::vector<int>& sizes, int dim) {
  if (sizes.empty()) throw UsageError("--sizes needs at least one size");
  for (int s : sizes) {
    if (s < 1) throw UsageError("--sizes must be positive");
  }
  if (dim < 1) throw UsageError("--dim must be positive");
  const std::uint64_t seed = o.seed.value_or(0);
  ModelConfig mc;
  mc.input_dim = dim;
  const DivergenceModel model = make_model(mc, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal;
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

  std::ostringstream csv;
  csv.precision(9);
  csv << "size,single_s,batched_s,pairwise_s,pairwise_max_abs_diff\n";
  for (int n : sizes) {
    Matrix x(n, dim), y(n, dim);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = normal(rng);
    for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = normal(rng);

    auto t0 = clock::now();
    Matrix single(n, 1);
    for (int i = 0; i < n; ++i) single(i, 0) = learned_divergence(model, x.row(i), y.row(i))(0, 0);
    auto t1 = clock::now();
    const Matrix batched = learned_divergence(model, x, y);
    auto t2 = clock::now();
    const Matrix pairwise = learned_pairwise(model, x, y);
    auto t3 = clock::now();

    double diff = 0.0;
    const int check = std::min(n, 100);
    for (int i = 0; i < check; ++i) {
      for (int j = 0; j < check; ++j) {
        diff = std::max(diff, std::abs(pairwise(i, j) - learned_divergence(model, x.row(i), y.row(j))(0, 0)));
      }
    }
    diff = std::max(diff, (single - batched).cwiseAbs().maxCoeff());
    csv << n << ',' << seconds(t0, t1) << ',' << seconds(t1, t2) << ',' << seconds(t2, t3) << ',' << diff << '\n';
    std::cout << "size " << n << ": single " << seconds(t0, t1) << " s, batched " << seconds(t1, t2)
              << " s, pairwise " << seconds(t2, t3) << " s, max |diff| " << diff << '\n';
  }
  make_dir(o.out);
  write_text(fs::path(o.out) / "bench.csv", csv.str());
  return 0;
}

// ------------------------------------------------------------ reproduce

std::vector<std::string> stored_names(const fs::path& dir) {
  std::vector<std::string> names;
  if (!fs::is_directory(dir)) return names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

int cmd_reproduce(const CommonOptions& o, const std::vector<std::string>& names, const std::string& configs, bool list) {
  const auto available = stored_names(configs);
  if (list) {
    for (const auto& n : available) std::cout << n << '\n';
    return 0;
  }
  if (names.empty()) throw UsageError("name an experiment (see --list)");
  for (const auto& name : names) {
    if (std::find(available.begin(), available.end(), name) == available.end()) {
      throw UsageError("no stored experiment '" + name + "' in " + configs);
    }
  }
  for (const auto& name : names) {
    CommonOptions local = o;
    local.config = (fs::path(configs) / (name + ".json")).string();
    ExperimentConfig config = resolve_config(local);
    const fs::path dir = fs::path(o.out) / name;
    make_dir(dir);
    write_text(dir / "config.json", config_to_json(config).dump(1) + "\n");
    const RunOutput run = run_experiment(config, &std::cerr);
    for (const auto& [label, trace] : run.traces) write_text(dir / (label + ".loss.csv"), loss_text(trace));
    write_text(dir / "metrics.csv", metrics_text(run.metrics));
    for (const auto& row : run.metrics) std::cout << name << ": " << format_row(row) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned Bregman divergences: data generation, training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "nbd 1.0");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default NBD_THREADS or 1)");

  CommonOptions gen_o, train_o, eval_o, bench_o, repro_o;
  auto* gen = app.add_subcommand("generate", "Write a seeded dataset and manifest");
  add_common(gen, gen_o, "data");

  auto* train = app.add_subcommand("train", "Train the configured models on a dataset");
  add_common(train, train_o, "run");
  std::string train_data, train_model_name;
  train->add_option("--data", train_data, "Dataset directory (from generate)");
  train->add_option("--model", train_model_name, "Train only this model of the config");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(eval, eval_o, "eval");
  std::string eval_ckpt, eval_data;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file (from train)");
  eval->add_option("--data", eval_data, "Dataset directory");

  auto* bench = app.add_subcommand("bench", "Time single, batched and pairwise divergence evaluation");
  add_common(bench, bench_o, "bench");
  std::vector<int> sizes;
  int dim = 10;
  bench->add_option("--sizes", sizes, "Problem sizes, comma separated")->delimiter(',');
  bench->add_option("--dim", dim, "Input dimension")->capture_default_str();

  auto* repro = app.add_subcommand("reproduce", "Run stored desk-scale experiments end to end");
  add_common(repro, repro_o, "reproduce");
  std::vector<std::string> names;
  std::string configs = NBD_CONFIG_DIR;
  bool list = false;
  repro->add_option("names", names, "Stored experiment names");
  repro->add_option("--configs", configs, "Directory of stored configs")->capture_default_str();
  repro->add_flag("--list", list, "List stored experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    if (*gen) return cmd_generate(gen_o);
    if (*train) return cmd_train(train_o, train_data, train_model_name);
    if (*eval) return cmd_eval(eval_o, eval_ckpt, eval_data);
    if (*bench) return cmd_bench(bench_o, sizes, dim);
    if (*repro) return cmd_reproduce(repro_o, names, configs, list);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
