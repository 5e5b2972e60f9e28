#include "nbd/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace nbd {

namespace {

json row_to_json(const Matrix& m, Eigen::Index r) {
  json row = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(r, j));
  return row;
}

void fill_row(Matrix& m, Eigen::Index r, const json& row, const char* field, std::size_t line) {
  if (!row.is_array()) throw IoError("line " + std::to_string(line) + ": '" + field + "' must be an array");
  if (m.cols() == 0 && r == 0) m.conservativeResize(m.rows(), static_cast<Eigen::Index>(row.size()));
  if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
    throw IoError("line " + std::to_string(line) + ": '" + field + "' has " + std::to_string(row.size()) +
                  " entries, expected " + std::to_string(m.cols()));
  }
  for (Eigen::Index j = 0; j < m.cols(); ++j) m(r, j) = row[static_cast<std::size_t>(j)].get<double>();
}

std::vector<json> read_records(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

const json& field(const json& record, const char* name, std::size_t line) {
  if (!record.is_object() || !record.contains(name)) {
    throw IoError("record " + std::to_string(line) + ": missing field '" + name + "'");
  }
  return record.at(name);
}

}  // namespace

void write_points_jsonl(std::ostream& out, const LabeledPoints& points) {
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    out << json{{"x", row_to_json(points.x, i)}, {"label", points.labels[static_cast<std::size_t>(i)]}}.dump()
        << '\n';
  }
}

LabeledPoints read_points_jsonl(std::istream& in) {
  const auto records = read_records(in);
  LabeledPoints p;
  p.x.resize(static_cast<Eigen::Index>(records.size()), 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    try {
      fill_row(p.x, r, field(records[i], "x", i + 1), "x", i + 1);
      p.labels.push_back(field(records[i], "label", i + 1).get<int>());
    } catch (const json::exception& e) {
      throw IoError("record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return p;
}

void write_pairs_jsonl(std::ostream& out, const PairSet& pairs) {
  for (Eigen::Index i = 0; i < pairs.size(); ++i) {
    out << json{{"a", row_to_json(pairs.a, i)}, {"b", row_to_json(pairs.b, i)}, {"target", pairs.target(i, 0)}}.dump()
        << '\n';
  }
}

PairSet read_pairs_jsonl(std::istream& in) {
  const auto records = read_records(in);
  const auto n = static_cast<Eigen::Index>(records.size());
  PairSet p{Matrix(n, 0), Matrix(n, 0), Matrix(n, 1)};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    try {
      fill_row(p.a, r, field(records[i], "a", i + 1), "a", i + 1);
      fill_row(p.b, r, field(records[i], "b", i + 1), "b", i + 1);
      p.target(r, 0) = field(records[i], "target", i + 1).get<double>();
    } catch (const json::exception& e) {
      throw IoError("record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (p.a.cols() != p.b.cols()) throw IoError("pairs: a and b have different dimensions");
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(row_to_json(m, i));
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw IoError("matrix: expected an array of rows");
  if (j.empty()) return Matrix();
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw IoError("matrix: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

// ------------------------------------------------------------ checkpoints

DivergenceLearner& learner(AnyModel& model) {
  return std::visit([](auto& m) -> DivergenceLearner& { return m; }, model);
}

const DivergenceLearner& learner(const AnyModel& model) {
  return std::visit([](const auto& m) -> const DivergenceLearner& { return m; }, model);
}

namespace {

json icnn_to_json(const IcnnParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) {
    layers.push_back({{"w", matrix_to_json(l.raw_w)}, {"u", matrix_to_json(l.u)}, {"b", matrix_to_json(l.b)}});
  }
  return {{"input_dim", p.config.input_dim},
          {"hidden", p.config.hidden},
          {"strictness", p.config.strictness},
          {"layers", layers}};
}

IcnnParams icnn_from_json(const json& j) {
  IcnnParams p;
  p.config.input_dim = j.at("input_dim").get<int>();
  p.config.hidden = j.at("hidden").get<std::vector<int>>();
  p.config.strictness = j.at("strictness").get<double>();
  p.config.validate();
  for (const auto& l : j.at("layers")) {
    p.layers.push_back({matrix_from_json(l.at("w")), matrix_from_json(l.at("u")), matrix_from_json(l.at("b"))});
  }
  if (p.layers.size() != p.config.hidden.size() + 1) throw IoError("checkpoint: phi layer count mismatch");
  return p;
}

json encoder_to_json(const EncoderParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) layers.push_back({{"w", matrix_to_json(l.w)}, {"b", matrix_to_json(l.b)}});
  return {{"input_dim", p.config.input_dim},
          {"hidden", p.config.hidden},
          {"embed_dim", p.config.embed_dim},
          {"layers", layers}};
}

EncoderParams encoder_from_json(const json& j) {
  EncoderParams p;
  p.config.input_dim = j.at("input_dim").get<int>();
  p.config.hidden = j.at("hidden").get<std::vector<int>>();
  p.config.embed_dim = j.at("embed_dim").get<int>();
  p.config.validate();
  for (const auto& l : j.at("layers")) p.layers.push_back({matrix_from_json(l.at("w")), matrix_from_json(l.at("b"))});
  return p;
}

}  // namespace

json checkpoint_to_json(const AnyModel& model, const json& meta) {
  json m;
  if (const auto* nbd = std::get_if<DivergenceModel>(&model)) {
    m = {{"type", "nbd"}, {"variant", std::string(to_string(nbd->variant))}, {"phi", icnn_to_json(nbd->phi)}};
    m["encoder"] = nbd->encoder ? encoder_to_json(*nbd->encoder) : json(nullptr);
  } else {
    m = {{"type", "mahalanobis"}, {"l", matrix_to_json(std::get<MahalanobisModel>(model).l)}};
  }
  return {{"format", "nbd-checkpoint"}, {"version", 1}, {"model", m}, {"meta", meta}};
}

AnyModel checkpoint_from_json(const json& doc, json* meta) {
  try {
    if (doc.value("format", "") != "nbd-checkpoint") throw IoError("checkpoint: unrecognised format");
    if (doc.value("version", 0) != 1) throw IoError("checkpoint: unsupported version");
    if (meta != nullptr) *meta = doc.value("meta", json::object());
    const json& m = doc.at("model");
    const std::string type = m.at("type").get<std::string>();
    if (type == "mahalanobis") {
      MahalanobisModel out;
      out.l = matrix_from_json(m.at("l"));
      return out;
    }
    if (type != "nbd") throw IoError("checkpoint: unknown model type '" + type + "'");
    DivergenceModel out;
    out.variant = parse_variant(m.at("variant").get<std::string>());
    out.phi = icnn_from_json(m.at("phi"));
    if (!m.at("encoder").is_null()) out.encoder = encoder_from_json(m.at("encoder"));
    return out;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const AnyModel& model, const json& meta) {
  write_text(path, checkpoint_to_json(model, meta).dump(1) + "\n");
}

AnyModel load_checkpoint(const std::filesystem::path& path, json* meta) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(doc, meta);
}

}  // namespace nbd
