#pragma once

#include "nbd/data.hpp"
#include "nbd/divergence.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>

namespace nbd {

using json = nlohmann::json;

// ------------------------------------------------------------ datasets

/// One {"x": [...], "label": c} record per line.
void write_points_jsonl(std::ostream& out, const LabeledPoints& points);
LabeledPoints read_points_jsonl(std::istream& in);

/// One {"a": [...], "b": [...], "target": t} record per line.
void write_pairs_jsonl(std::ostream& out, const PairSet& pairs);
PairSet read_pairs_jsonl(std::istream& in);

/// Thrown for unreadable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

// ------------------------------------------------------------ checkpoints

using AnyModel = std::variant<DivergenceModel, MahalanobisModel>;

DivergenceLearner& learner(AnyModel& model);
const DivergenceLearner& learner(const AnyModel& model);

/// {"format": "nbd-checkpoint", "version": 1, "model": {...}, "meta": {...}}.
json checkpoint_to_json(const AnyModel& model, const json& meta = json::object());
AnyModel checkpoint_from_json(const json& doc, json* meta = nullptr);

void save_checkpoint(const std::filesystem::path& path, const AnyModel& model, const json& meta = json::object());
AnyModel load_checkpoint(const std::filesystem::path& path, json* meta = nullptr);

}  // namespace nbd
