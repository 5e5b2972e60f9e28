#pragma once

#include "nbd/datagen.hpp"
#include "nbd/eval.hpp"
#include "nbd/io.hpp"
#include "nbd/train.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbd {

enum class Task { cluster, rank, regress, colearn, shortest_path };

std::string_view to_string(Task t);
Task parse_task(std::string_view name);
/// Pair tasks train by regression; point tasks by triplet mining.
bool is_pair_task(Task t);

/// Invalid configuration or usage.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ModelKind { nbd, mahalanobis, euclidean };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  std::string name = "nbd";
  ModelKind kind = ModelKind::nbd;
  Variant variant = Variant::plain;
  bool encoder = false;
  std::vector<int> encoder_hidden = {256, 256};
  int embed_dim = 128;
  std::vector<int> phi_hidden = {128, 128};
  double strictness = 1e-3;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Task task = Task::cluster;
  std::uint64_t seed = 0;
  /// Seeds swept by run_experiment; defaults to {seed}.
  std::vector<std::uint64_t> seeds;
  bool desk_scale = true;

  MixtureSpec mixture;
  /// Held-out points drawn from the same mixture for clustering / queries.
  int test_points = 1000;
  RegressionSpec regression;
  GraphSpec graph;
  ColearnSpec colearn;

  std::vector<ModelSpec> models = {ModelSpec{}};
  TrainConfig train;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 100;

  /// Task defaults; desk scale shrinks pair counts and graph sizes.
  static ExperimentConfig defaults(Task task, bool desk_scale = true);
  std::vector<std::uint64_t> run_seeds() const;
  void validate() const;
};

/// Overrides on top of defaults(task, desk_scale); `task` and `desk_scale`
/// come from the overrides, then the document, then the defaults. Unknown
/// keys are rejected.
struct ConfigOverrides {
  std::optional<Task> task;
  std::optional<bool> desk_scale;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig config_from_json(const json& doc, const ConfigOverrides& overrides = {});
json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

struct Dataset {
  Task task = Task::cluster;
  std::string name;
  LabeledPoints train_points;
  LabeledPoints test_points;
  PairSet train_pairs;
  PairSet test_pairs;
  int classes = 0;

  int input_dim() const;
};

Dataset generate_dataset(const ExperimentConfig& config, std::uint64_t seed);

/// train.jsonl, test.jsonl and manifest.json (spec, seed, per-file record
/// count and FNV-1a hash).
void write_dataset(const std::filesystem::path& dir, const Dataset& data, const ExperimentConfig& config,
                   std::uint64_t seed);
Dataset read_dataset(const std::filesystem::path& dir);

AnyModel init_model(const ModelSpec& spec, int input_dim, std::uint64_t seed);

/// Regression for pair tasks (tracking test loss), triplet mining for point
/// tasks. The euclidean baseline is not trained.
TrainResult train_model(AnyModel& model, const ModelSpec& spec, const Dataset& data, const TrainConfig& config);

struct EvalOptions {
  int kmeans_restarts = 10;
  int kmeans_max_iter = 100;
  int clusters = 0;
  std::uint64_t seed = 0;
};

/// Task metrics on the test split: MAE/MSE for pair tasks, purity and Rand
/// index for clustering, MAP/AUC for ranking (test queries, train corpus).
MetricsRow evaluate(const AnyModel& model, const Dataset& data, const EvalOptions& options);

struct RunOutput {
  std::vector<MetricsRow> metrics;
  /// One per (seed, model), in run order.
  std::vector<std::pair<std::string, TrainResult>> traces;
};

/// Every seed x model: generate, initialise, train, evaluate. Progress lines
/// go to `log` when given.
RunOutput run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

}  // namespace nbd
