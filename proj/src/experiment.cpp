#include "nbd/experiment.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <sstream>

namespace nbd {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::cluster: return "cluster";
    case Task::rank: return "rank";
    case Task::regress: return "regress";
    case Task::colearn: return "colearn";
    case Task::shortest_path: return "shortest-path";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  for (Task t : {Task::cluster, Task::rank, Task::regress, Task::colearn, Task::shortest_path}) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

bool is_pair_task(Task t) { return t == Task::regress || t == Task::colearn || t == Task::shortest_path; }

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::nbd: return "nbd";
    case ModelKind::mahalanobis: return "mahalanobis";
    case ModelKind::euclidean: return "euclidean";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::nbd, ModelKind::mahalanobis, ModelKind::euclidean}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

// ------------------------------------------------------------ config

ExperimentConfig ExperimentConfig::defaults(Task task, bool desk_scale) {
  ExperimentConfig c;
  c.task = task;
  c.desk_scale = desk_scale;
  c.regression.pairs = desk_scale ? 20000 : 50000;
  c.regression.test_pairs = desk_scale ? 4000 : 10000;
  c.graph.train_pairs = desk_scale ? 20000 : 50000;
  c.graph.test_pairs = desk_scale ? 4000 : 10000;
  c.train.epochs = desk_scale ? 100 : 200;
  if (task == Task::shortest_path) {
    c.train.lr = 5e-5;
    c.train.switch_epoch = c.train.epochs / 2;
    c.train.lr_after = 5e-6;
  }
  if (task == Task::colearn) c.models.front().encoder = true;
  return c;
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

void ExperimentConfig::validate() const {
  try {
    mixture.validate();
    regression.validate();
    graph.validate();
    colearn.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (test_points < 1) throw ConfigError("data.test_points must be positive");
  if (models.empty()) throw ConfigError("at least one model is required");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (m.name.empty()) throw ConfigError("model names must be non-empty");
    if (!names.insert(m.name).second) throw ConfigError("duplicate model name '" + m.name + "'");
  }
  if (kmeans_restarts < 1 || kmeans_max_iter < 1) throw ConfigError("eval: k-means restarts and max_iter must be positive");
}

namespace {

// Reads known keys of one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return false;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
    return true;
  }

  template <class E, class Parse>
  void get_enum(const char* key, E& out, Parse parse) {
    std::string s;
    if (!get(key, s)) return;
    try {
      out = parse(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_data(const json& j, ExperimentConfig& c) {
  Fields f(j, "data");
  switch (c.task) {
    case Task::cluster:
    case Task::rank:
      f.get_enum("family", c.mixture.family, parse_mixture_family);
      f.get("n", c.mixture.n);
      f.get("d", c.mixture.d);
      f.get("k", c.mixture.k);
      f.get("test_points", c.test_points);
      break;
    case Task::regress:
      f.get("pairs", c.regression.pairs);
      f.get("test_pairs", c.regression.test_pairs);
      f.get("informative", c.regression.informative);
      f.get("distractors", c.regression.distractors);
      f.get_enum("target", c.regression.target, parse_generator_kind);
      f.get_enum("correlation", c.regression.correlation, parse_correlation);
      break;
    case Task::shortest_path:
      f.get_enum("dataset", c.graph.dataset, parse_graph_kind);
      f.get("side", c.graph.side);
      f.get("unit_weights", c.graph.unit_weights);
      f.get("landmarks", c.graph.landmarks);
      f.get("distractors", c.graph.distractors);
      f.get("noise", c.graph.noise);
      f.get("train_pairs", c.graph.train_pairs);
      f.get("test_pairs", c.graph.test_pairs);
      break;
    case Task::colearn:
      f.get("classes", c.colearn.classes);
      f.get("dim", c.colearn.dim);
      f.get("noise", c.colearn.noise);
      f.get("train_per_class", c.colearn.train_per_class);
      f.get("test_per_class", c.colearn.test_per_class);
      f.get("train_pairs", c.colearn.train_pairs);
      f.get("test_pairs", c.colearn.test_pairs);
      f.get_enum("target", c.colearn.target, parse_colearn_target);
      break;
  }
  f.finish();
}

json data_to_json(const ExperimentConfig& c) {
  switch (c.task) {
    case Task::cluster:
    case Task::rank:
      return {{"family", to_string(c.mixture.family)},
              {"n", c.mixture.n},
              {"d", c.mixture.d},
              {"k", c.mixture.k},
              {"test_points", c.test_points}};
    case Task::regress:
      return {{"pairs", c.regression.pairs},
              {"test_pairs", c.regression.test_pairs},
              {"informative", c.regression.informative},
              {"distractors", c.regression.distractors},
              {"target", to_string(c.regression.target)},
              {"correlation", to_string(c.regression.correlation)}};
    case Task::shortest_path:
      return {{"dataset", to_string(c.graph.dataset)},
              {"side", c.graph.side},
              {"unit_weights", c.graph.unit_weights},
              {"landmarks", c.graph.landmarks},
              {"distractors", c.graph.distractors},
              {"noise", c.graph.noise},
              {"train_pairs", c.graph.train_pairs},
              {"test_pairs", c.graph.test_pairs}};
    case Task::colearn:
      return {{"classes", c.colearn.classes},
              {"dim", c.colearn.dim},
              {"noise", c.colearn.noise},
              {"train_per_class", c.colearn.train_per_class},
              {"test_per_class", c.colearn.test_per_class},
              {"train_pairs", c.colearn.train_pairs},
              {"test_pairs", c.colearn.test_pairs},
              {"target", to_string(c.colearn.target)}};
  }
  return json::object();
}

ModelSpec read_model(const json& j, std::size_t index, Task task) {
  ModelSpec m;
  if (task == Task::colearn) m.encoder = true;
  Fields f(j, "models[" + std::to_string(index) + "]");
  f.get_enum("kind", m.kind, parse_model_kind);
  m.name = std::string(to_string(m.kind));
  f.get("name", m.name);
  f.get_enum("variant", m.variant, [](std::string_view s) { return parse_variant(s); });
  f.get("encoder", m.encoder);
  f.get("encoder_hidden", m.encoder_hidden);
  f.get("embed_dim", m.embed_dim);
  f.get("phi_hidden", m.phi_hidden);
  f.get("strictness", m.strictness);
  f.finish();
  return m;
}

json model_to_json(const ModelSpec& m) {
  return {{"name", m.name},
          {"kind", to_string(m.kind)},
          {"variant", to_string(m.variant)},
          {"encoder", m.encoder},
          {"encoder_hidden", m.encoder_hidden},
          {"embed_dim", m.embed_dim},
          {"phi_hidden", m.phi_hidden},
          {"strictness", m.strictness}};
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, const ConfigOverrides& overrides) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  Task task = Task::cluster;
  if (overrides.task) {
    task = *overrides.task;
  } else if (doc.contains("task")) {
    if (!doc.at("task").is_string()) throw ConfigError("task: wrong type");
    task = parse_task(doc.at("task").get<std::string>());
  }
  bool desk = true;
  if (overrides.desk_scale) {
    desk = *overrides.desk_scale;
  } else if (doc.contains("desk_scale")) {
    if (!doc.at("desk_scale").is_boolean()) throw ConfigError("desk_scale: wrong type");
    desk = doc.at("desk_scale").get<bool>();
  }

  ExperimentConfig c = ExperimentConfig::defaults(task, desk);
  Fields f(doc, "config");
  std::string ignored_task;
  bool ignored_desk = desk;
  f.get("task", ignored_task);
  f.get("desk_scale", ignored_desk);
  f.get("name", c.name);
  f.get("seed", c.seed);
  f.get("seeds", c.seeds);
  if (const json* data = f.child("data")) read_data(*data, c);
  if (const json* models = f.child("models")) {
    if (!models->is_array()) throw ConfigError("models: expected an array");
    c.models.clear();
    for (std::size_t i = 0; i < models->size(); ++i) c.models.push_back(read_model(models->at(i), i, task));
  }
  if (const json* train = f.child("train")) {
    Fields t(*train, "train");
    t.get("epochs", c.train.epochs);
    t.get("batch", c.train.batch);
    t.get("lr", c.train.lr);
    t.get("margin", c.train.margin);
    int switch_epoch = 0;
    if (t.get("switch_epoch", switch_epoch)) c.train.switch_epoch = switch_epoch;
    if (train->contains("switch_epoch") && train->at("switch_epoch").is_null()) c.train.switch_epoch.reset();
    t.get("lr_after", c.train.lr_after);
    t.finish();
  }
  if (const json* eval = f.child("eval")) {
    Fields e(*eval, "eval");
    e.get("kmeans_restarts", c.kmeans_restarts);
    e.get("kmeans_max_iter", c.kmeans_max_iter);
    e.finish();
  }
  f.finish();
  if (overrides.seed) {
    c.seed = *overrides.seed;
    c.seeds.clear();
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_to_json(m));
  json train = {{"epochs", c.train.epochs},
                {"batch", c.train.batch},
                {"lr", c.train.lr},
                {"margin", c.train.margin},
                {"switch_epoch", c.train.switch_epoch ? json(*c.train.switch_epoch) : json(nullptr)},
                {"lr_after", c.train.lr_after}};
  return {{"name", c.name},
          {"task", to_string(c.task)},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"desk_scale", c.desk_scale},
          {"data", data_to_json(c)},
          {"models", models},
          {"train", train},
          {"eval", {{"kmeans_restarts", c.kmeans_restarts}, {"kmeans_max_iter", c.kmeans_max_iter}}}};
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(doc, overrides);
}

// ------------------------------------------------------------ datasets

int Dataset::input_dim() const {
  return static_cast<int>(is_pair_task(task) ? train_pairs.a.cols() : train_points.x.cols());
}

namespace {

int full_scale_side(GraphKind k) {
  switch (k) {
    case GraphKind::grid3d:
    case GraphKind::grid3d_directed: return 50;
    case GraphKind::taxi: return 25;
    case GraphKind::traffic:
    case GraphKind::octagon: return 100;
  }
  return 50;
}

std::string dataset_name(const ExperimentConfig& c) {
  switch (c.task) {
    case Task::cluster:
    case Task::rank: return std::string(to_string(c.mixture.family));
    case Task::regress:
      return "regress-" + std::string(to_string(c.regression.target)) + "-" +
             std::string(to_string(c.regression.correlation));
    case Task::shortest_path: return std::string(to_string(c.graph.dataset));
    case Task::colearn: return "colearn-" + std::string(to_string(c.colearn.target));
  }
  return "unknown";
}

LabeledPoints take_points(const LabeledPoints& p, Eigen::Index start, Eigen::Index count) {
  LabeledPoints out;
  out.x = p.x.middleRows(start, count);
  out.labels.assign(p.labels.begin() + start, p.labels.begin() + start + count);
  return out;
}

}  // namespace

Dataset generate_dataset(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset d;
  d.task = config.task;
  d.name = dataset_name(config);
  try {
    switch (config.task) {
      case Task::cluster:
      case Task::rank: {
        MixtureSpec spec = config.mixture;
        spec.n = config.mixture.n + config.test_points;
        spec.seed = seed;
        const Mixture m = gen_mixture(spec);
        d.train_points = take_points(m.points, 0, config.mixture.n);
        d.test_points = take_points(m.points, config.mixture.n, config.test_points);
        d.classes = spec.k;
        break;
      }
      case Task::regress: {
        RegressionSpec spec = config.regression;
        spec.seed = seed;
        auto r = gen_regression_pairs(spec);
        d.train_pairs = std::move(r.train);
        d.test_pairs = std::move(r.test);
        break;
      }
      case Task::shortest_path: {
        GraphSpec spec = config.graph;
        spec.seed = seed;
        if (spec.side == 0 && !config.desk_scale) spec.side = full_scale_side(spec.dataset);
        auto g = gen_graph_task(spec);
        d.train_pairs = std::move(g.train);
        d.test_pairs = std::move(g.test);
        break;
      }
      case Task::colearn: {
        ColearnSpec spec = config.colearn;
        spec.seed = seed;
        auto c = gen_colearn(spec);
        d.train_pairs = std::move(c.train);
        d.test_pairs = std::move(c.test);
        d.classes = spec.classes;
        break;
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data, const ExperimentConfig& config,
                   std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json files = json::object();
  auto emit = [&](const char* name, const std::string& text, Eigen::Index records) {
    write_text(dir / name, text);
    files[name] = {{"records", records}, {"fnv1a", fnv1a_hex(text)}};
  };
  std::ostringstream train, test;
  if (is_pair_task(data.task)) {
    write_pairs_jsonl(train, data.train_pairs);
    write_pairs_jsonl(test, data.test_pairs);
    emit("train.jsonl", train.str(), data.train_pairs.size());
    emit("test.jsonl", test.str(), data.test_pairs.size());
  } else {
    write_points_jsonl(train, data.train_points);
    write_points_jsonl(test, data.test_points);
    emit("train.jsonl", train.str(), data.train_points.size());
    emit("test.jsonl", test.str(), data.test_points.size());
  }
  const json manifest = {{"format", "nbd-dataset"},
                         {"task", to_string(data.task)},
                         {"name", data.name},
                         {"seed", seed},
                         {"desk_scale", config.desk_scale},
                         {"classes", data.classes},
                         {"spec", data_to_json(config)},
                         {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  Dataset d;
  try {
    if (manifest.value("format", "") != "nbd-dataset") throw IoError(dir.string() + ": not a dataset manifest");
    d.task = parse_task(manifest.at("task").get<std::string>());
    d.name = manifest.at("name").get<std::string>();
    d.classes = manifest.at("classes").get<int>();
    for (const char* name : {"train.jsonl", "test.jsonl"}) {
      const std::string text = read_text(dir / name);
      const json& entry = manifest.at("files").at(name);
      if (fnv1a_hex(text) != entry.at("fnv1a").get<std::string>()) {
        throw IoError((dir / name).string() + ": content hash does not match the manifest");
      }
      std::istringstream in(text);
      const bool train = std::string(name) == "train.jsonl";
      if (is_pair_task(d.task)) {
        (train ? d.train_pairs : d.test_pairs) = read_pairs_jsonl(in);
      } else {
        (train ? d.train_points : d.test_points) = read_points_jsonl(in);
      }
    }
  } catch (const json::exception& e) {
    throw IoError(dir.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return d;
}

// ------------------------------------------------------------ models

AnyModel init_model(const ModelSpec& spec, int input_dim, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::nbd: {
      ModelConfig mc;
      mc.input_dim = input_dim;
      mc.variant = spec.variant;
      mc.use_encoder = spec.encoder;
      mc.encoder_hidden = spec.encoder_hidden;
      mc.embed_dim = spec.embed_dim;
      mc.phi_hidden = spec.phi_hidden;
      mc.strictness = spec.strictness;
      try {
        return make_model(mc, seed);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    case ModelKind::mahalanobis:
    case ModelKind::euclidean: return euclidean_model(input_dim);
  }
  throw ConfigError("unknown model kind");
}

TrainResult train_model(AnyModel& model, const ModelSpec& spec, const Dataset& data, const TrainConfig& config) {
  DivergenceLearner& m = learner(model);
  if (spec.kind == ModelKind::euclidean) {
    TrainResult r;
    r.final_train_loss = is_pair_task(data.task)
                             ? regression_loss(m, data.train_pairs)
                             : blockwise_triplet_loss(m, data.train_points, config.batch, config.margin);
    return r;
  }
  if (is_pair_task(data.task)) {
    return train_regression(m, data.train_pairs, config, data.test_pairs.size() > 0 ? &data.test_pairs : nullptr);
  }
  return train_triplet(m, data.train_points, config);
}

MetricsRow evaluate(const AnyModel& model, const Dataset& data, const EvalOptions& options) {
  const DivergenceLearner& m = learner(model);
  MetricsRow row;
  row.dataset = data.name;
  switch (data.task) {
    case Task::regress:
    case Task::colearn:
    case Task::shortest_path: {
      const Matrix pred = learned_divergence(m, data.test_pairs.a, data.test_pairs.b);
      row.mae = (pred - data.test_pairs.target).cwiseAbs().mean();
      row.mse = mse_loss(pred, data.test_pairs.target);
      break;
    }
    case Task::cluster: {
      const int k = options.clusters > 0 ? options.clusters : data.classes;
      const Matrix e = embed(m, data.test_points.x);
      const auto result =
          bregman_kmeans_restarts(e, k, divergence_fn(m), options.seed, options.kmeans_restarts, options.kmeans_max_iter);
      row.purity = purity(result.assignments, data.test_points.labels);
      row.rand = rand_index(result.assignments, data.test_points.labels);
      break;
    }
    case Task::rank: {
      const Matrix d = learned_pairwise(m, data.test_points.x, data.train_points.x);
      const RankMetrics r = rank_map_auc(d, data.test_points.labels, data.train_points.labels);
      row.map = r.map;
      row.auc = r.auc;
      break;
    }
  }
  return row;
}

RunOutput run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  RunOutput out;
  for (std::uint64_t seed : config.run_seeds()) {
    const Dataset data = generate_dataset(config, seed);
    for (const auto& spec : config.models) {
      AnyModel model = init_model(spec, data.input_dim(), seed);
      TrainConfig tc = config.train;
      tc.seed = seed;
      TrainResult trained = train_model(model, spec, data, tc);
      MetricsRow row = evaluate(model, data, {config.kmeans_restarts, config.kmeans_max_iter, data.classes, seed});
      row.model = spec.name;
      row.seed = seed;
      if (log) {
        *log << config.name << " seed=" << seed << " model=" << spec.name
             << " final_train_loss=" << trained.final_train_loss << '\n';
      }
      out.metrics.push_back(std::move(row));
      out.traces.emplace_back(spec.name + "-seed" + std::to_string(seed), std::move(trained));
    }
  }
  return out;
}

}  // namespace nbd
