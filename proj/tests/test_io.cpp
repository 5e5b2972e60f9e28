#include "nbd/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace nbd;
using nbd::testing::gaussian;

TEST_SUITE("io") {
  TEST_CASE("labeled points survive a jsonl round trip bit for bit") {
    std::mt19937_64 rng(1);
    LabeledPoints p{gaussian(rng, 7, 3), {0, 1, 2, 0, 1, 2, 5}};
    p.x(0, 0) = 1.0 / 3.0;
    std::stringstream s;
    write_points_jsonl(s, p);
    const LabeledPoints q = read_points_jsonl(s);
    CHECK(q.x == p.x);
    CHECK(q.labels == p.labels);
  }

  TEST_CASE("pairs survive a jsonl round trip bit for bit") {
    std::mt19937_64 rng(2);
    PairSet p{gaussian(rng, 5, 4), gaussian(rng, 5, 4), gaussian(rng, 5, 1)};
    std::stringstream s;
    write_pairs_jsonl(s, p);
    const PairSet q = read_pairs_jsonl(s);
    CHECK(q.a == p.a);
    CHECK(q.b == p.b);
    CHECK(q.target == p.target);
  }

  TEST_CASE("malformed jsonl is rejected with the line number") {
    std::stringstream bad("{\"x\": [1, 2], \"label\": 0}\n{\"x\": [1], \"label\": 1}\n");
    CHECK_THROWS_WITH_AS(read_points_jsonl(bad), doctest::Contains("line 2"), IoError);
    std::stringstream broken("{\"a\": [1]\nnot json\n");
    CHECK_THROWS_AS(read_pairs_jsonl(broken), IoError);
    std::stringstream missing("{\"a\": [1], \"b\": [2]}\n");
    CHECK_THROWS_WITH_AS(read_pairs_jsonl(missing), doctest::Contains("target"), IoError);
  }

  TEST_CASE("fnv1a matches reference vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
  }

  TEST_CASE("checkpoints restore identical divergences") {
    ModelConfig cfg;
    cfg.input_dim = 6;
    cfg.phi_hidden = {8, 8};
    cfg.variant = Variant::gsb;
    cfg.use_encoder = true;
    cfg.encoder_hidden = {10};
    cfg.embed_dim = 4;
    AnyModel model = make_model(cfg, 3);

    const auto path = std::filesystem::temp_directory_path() / "nbd_io_checkpoint.json";
    save_checkpoint(path, model, {{"seed", 3}});
    json meta;
    AnyModel back = load_checkpoint(path, &meta);
    std::filesystem::remove(path);
    CHECK(meta.at("seed") == 3);

    std::mt19937_64 rng(4);
    const Matrix x = gaussian(rng, 9, 6), y = gaussian(rng, 9, 6);
    CHECK(learned_divergence(learner(model), x, y) == learned_divergence(learner(back), x, y));
    CHECK(checkpoint_to_json(back).dump() == checkpoint_to_json(model).dump());

    AnyModel maha = euclidean_model(6);
    std::get<MahalanobisModel>(maha).l = gaussian(rng, 6, 6);
    AnyModel maha_back = checkpoint_from_json(checkpoint_to_json(maha));
    CHECK(std::get<MahalanobisModel>(maha_back).l == std::get<MahalanobisModel>(maha).l);
  }

  TEST_CASE("foreign documents are not accepted as checkpoints") {
    CHECK_THROWS_AS(checkpoint_from_json(json{{"format", "other"}}), IoError);
    json doc = checkpoint_to_json(AnyModel{euclidean_model(2)});
    doc["model"]["type"] = "mystery";
    CHECK_THROWS_AS(checkpoint_from_json(doc), IoError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.json"), IoError);
  }
}
