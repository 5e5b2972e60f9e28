#include "nbd/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace nbd;
using nbd::testing::auc_oracle;
using nbd::testing::ap_oracle;
using nbd::testing::gaussian;
using nbd::testing::lloyd_oracle;
using nbd::testing::uniform;

namespace {

Matrix blobs(std::mt19937_64& rng, int per, int k, std::vector<int>* labels) {
  Matrix x = gaussian(rng, per * k, 2, 0.3);
  for (int i = 0; i < per * k; ++i) {
    x(i, 0) += 4.0 * (i % k);
    if (labels) labels->push_back(i % k);
  }
  return x;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("squared euclidean bregman k-means matches plain Lloyd step by step") {
    std::mt19937_64 rng(1);
    const Matrix x = gaussian(rng, 200, 3);
    const auto d = divergence_fn(closed_form_generator(GeneratorKind::sq_euclidean));
    std::mt19937_64 seed_rng(7);
    const Matrix init = kmeanspp_init(x, 4, d, seed_rng);
    const auto result = bregman_kmeans(x, init, d, 100);
    const auto oracle = lloyd_oracle(x, init, 100);
    REQUIRE(oracle);
    CHECK(result.history == *oracle);
    CHECK(result.assignments == oracle->back());
  }

  TEST_CASE("objective never increases across iterations") {
    for (auto kind : {GeneratorKind::sq_euclidean, GeneratorKind::xlogx, GeneratorKind::kl_positive}) {
      CAPTURE(to_string(kind));
      std::mt19937_64 rng(2);
      Matrix x = uniform(rng, 150, 4, 0.05, 3.0);
      if (kind == GeneratorKind::kl_positive) x = x.array().colwise() / x.rowwise().sum().array();
      const auto result = bregman_kmeans(x, 5, divergence_fn(closed_form_generator(kind)), 11);
      REQUIRE(result.objective_trace.size() >= 2);
      for (std::size_t i = 1; i < result.objective_trace.size(); ++i) {
        CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] + 1e-9);
      }
      CHECK(result.objective == doctest::Approx(clustering_objective(x, result.centroids, result.assignments,
                                                                     divergence_fn(closed_form_generator(kind)))));
    }
  }

  TEST_CASE("well separated blobs are recovered") {
    std::mt19937_64 rng(3);
    std::vector<int> labels;
    const Matrix x = blobs(rng, 40, 3, &labels);
    const auto result = bregman_kmeans(x, 3, divergence_fn(closed_form_generator(GeneratorKind::sq_euclidean)), 5);
    CHECK(purity(result.assignments, labels) == 1.0);
    CHECK(rand_index(result.assignments, labels) == 1.0);
  }

  TEST_CASE("empty clusters are re-seeded at the farthest point") {
    Matrix x(4, 1);
    x << 0.0, 0.1, 0.2, 10.0;
    Matrix init(2, 1);
    init << 0.0, -100.0;
    const auto result = bregman_kmeans(x, init, divergence_fn(closed_form_generator(GeneratorKind::sq_euclidean)), 10);
    CHECK(result.history.front() == std::vector<int>{0, 0, 0, 0});
    CHECK(result.assignments == std::vector<int>{0, 0, 0, 1});
    CHECK(result.centroids(1, 0) == 10.0);
  }

  TEST_CASE("max_iter bounds the number of updates") {
    std::mt19937_64 rng(4);
    const Matrix x = gaussian(rng, 300, 2);
    const auto d = divergence_fn(closed_form_generator(GeneratorKind::sq_euclidean));
    const auto result = bregman_kmeans(x, 8, d, 9, 1);
    CHECK(result.iterations == 1);
    CHECK(result.history.size() == 2);
    CHECK_THROWS(bregman_kmeans(x, 0, d, 9));
  }

  TEST_CASE("purity and rand index match hand values") {
    const std::vector<int> a{0, 0, 0, 1, 1, 1}, l{0, 0, 1, 1, 1, 2};
    CHECK(purity(a, l) == doctest::Approx(4.0 / 6.0));
    // Agreeing pairs out of 15: same-same {01, 34}, diff-diff 7.
    CHECK(rand_index(a, l) == doctest::Approx(9.0 / 15.0));
    CHECK(purity({5, 5, 9}, {1, 1, 1}) == 1.0);
    CHECK(rand_index({3, 7}, {0, 0}) == 0.0);
    CHECK_THROWS(purity({0}, {0, 1}));
  }

  TEST_CASE("rank metrics match hand values") {
    Matrix d(2, 4);
    d << 0.1, 0.5, 0.3, 0.9,
         0.2, 0.2, 0.2, 0.2;
    const auto m = rank_map_auc(d, {1, 0}, {1, 0, 1, 0});
    // Query 0: ranking 0,2,1,3 -> AP 1, AUC 1. Query 1: ties keep index order
    // 0,1,2,3 with relevant at ranks 2 and 4 -> AP (1/2 + 2/4)/2, AUC 1/4.
    CHECK(m.map == doctest::Approx((1.0 + 0.5) / 2.0));
    CHECK(m.auc == doctest::Approx((1.0 + 0.25) / 2.0));
    CHECK(m.skipped == 0);
  }

  TEST_CASE("rank metrics match brute-force oracles") {
    std::mt19937_64 rng(5);
    const int q = 25, c = 60;
    Matrix d = uniform(rng, q, c, 0.0, 1.0);
    d = (d * 10).array().round() / 10;  // force ties
    std::uniform_int_distribution<int> cls(0, 3);
    std::vector<int> ql(q), cl(c);
    for (auto& v : ql) v = cls(rng);
    for (auto& v : cl) v = cls(rng);
    ql[0] = 7;  // absent from the corpus
    const auto m = rank_map_auc(d, ql, cl);
    double ap = 0.0, auc = 0.0;
    for (int i = 1; i < q; ++i) {
      std::vector<double> r(static_cast<std::size_t>(c));
      for (int j = 0; j < c; ++j) r[static_cast<std::size_t>(j)] = d(i, j);
      ap += ap_oracle(r, cl, ql[static_cast<std::size_t>(i)]);
      auc += auc_oracle(r, cl, ql[static_cast<std::size_t>(i)]);
    }
    CHECK(m.skipped == 1);
    CHECK(m.map == doctest::Approx(ap / (q - 1)).epsilon(1e-12));
    CHECK(m.auc == doctest::Approx(auc / (q - 1)).epsilon(1e-12));
  }

  TEST_CASE("queries with an all-relevant corpus count for MAP only") {
    Matrix d(2, 2);
    d << 0.1, 0.2, 0.3, 0.1;
    const auto m = rank_map_auc(d, {0, 1}, {0, 1});
    CHECK(m.auc_undefined == 0);
    const auto single = rank_map_auc(Matrix::Constant(1, 3, 1.0), {2}, {2, 2, 2});
    CHECK(single.auc_undefined == 1);
    CHECK(single.map == 1.0);
  }

  TEST_CASE("small degenerate cases") {
    CHECK(purity({0, 0, 0, 0, 0}, {0, 1, 2, 3, 4}) == doctest::Approx(0.2));
    // {12|34} vs {13|24}: only the pairs 14 and 23 agree.
    CHECK(rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(1.0 / 3.0));
    Matrix d(1, 2);
    d << 0.1, 0.2;
    const auto m = rank_map_auc(d, {1}, {0, 1});
    CHECK(m.map == doctest::Approx(0.5));
    CHECK(m.auc == 0.0);
  }

  TEST_CASE("rank metrics are invariant to monotone maps and corpus order") {
    std::mt19937_64 rng(8);
    Matrix d = uniform(rng, 10, 40, 0.0, 1.0);
    std::vector<int> ql(10), cl(40);
    for (std::size_t i = 0; i < ql.size(); ++i) ql[i] = static_cast<int>(i % 3);
    for (std::size_t j = 0; j < cl.size(); ++j) cl[j] = static_cast<int>((j * 7) % 3);
    const auto base = rank_map_auc(d, ql, cl);
    const auto mapped = rank_map_auc((d.array().exp() * 3.0 + 1.0).matrix(), ql, cl);
    CHECK(mapped.map == base.map);
    CHECK(mapped.auc == base.auc);
    std::vector<int> perm(40);
    for (int j = 0; j < 40; ++j) perm[static_cast<std::size_t>(j)] = j;
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix dp(10, 40);
    std::vector<int> clp(40);
    for (int j = 0; j < 40; ++j) {
      dp.col(j) = d.col(perm[static_cast<std::size_t>(j)]);
      clp[static_cast<std::size_t>(j)] = cl[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
    }
    const auto shuffled = rank_map_auc(dp, ql, clp);
    CHECK(shuffled.map == doctest::Approx(base.map).epsilon(1e-12));
    CHECK(shuffled.auc == doctest::Approx(base.auc).epsilon(1e-12));
  }

  TEST_CASE("purity and rand index match brute force over all labelings") {
    const std::vector<int> truth{0, 0, 1, 1, 2, 2, 2, 0};
    for (int mask = 0; mask < 256; ++mask) {
      std::vector<int> a(8);
      for (int i = 0; i < 8; ++i) a[static_cast<std::size_t>(i)] = (mask >> i) & 1;
      int agree = 0;
      for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j)
          agree += (a[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(j)]) ==
                   (truth[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(j)]);
      int majority = 0;
      for (int c = 0; c < 2; ++c) {
        int best = 0;
        for (int l = 0; l < 3; ++l) {
          int n = 0;
          for (int i = 0; i < 8; ++i) n += a[static_cast<std::size_t>(i)] == c && truth[static_cast<std::size_t>(i)] == l;
          best = std::max(best, n);
        }
        majority += best;
      }
      CHECK(rand_index(a, truth) == doctest::Approx(agree / 28.0).epsilon(1e-12));
      CHECK(purity(a, truth) == doctest::Approx(majority / 8.0).epsilon(1e-12));
    }
  }

  TEST_CASE("metrics csv leaves absent values empty") {
    std::ostringstream s;
    write_metrics_csv(s, {{"gauss", "nbd", 0.5, 0.75, std::nullopt, std::nullopt, 3, std::nullopt, std::nullopt},
                          {"gauss", "euclidean", std::nullopt, std::nullopt, 0.25, 1.0, 3, std::nullopt, std::nullopt},
                          {"regress", "nbd", std::nullopt, std::nullopt, std::nullopt, std::nullopt, 0, 0.125, 2.0}});
    CHECK(s.str() ==
          "dataset,model,map,auc,purity,rand,seed,mae,mse\n"
          "gauss,nbd,0.5,0.75,,,3,,\n"
          "gauss,euclidean,,,0.25,1,3,,\n"
          "regress,nbd,,,,,0,0.125,2\n");
  }
}
