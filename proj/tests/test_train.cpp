#include "nbd/train.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

using namespace nbd;
using nbd::testing::gaussian;

namespace {

ModelConfig tiny(int d) {
  ModelConfig cfg;
  cfg.input_dim = d;
  cfg.phi_hidden = {16, 16};
  return cfg;
}

LabeledPoints two_blobs(std::mt19937_64& rng, int per_class, double sep) {
  LabeledPoints out;
  out.x = gaussian(rng, 2 * per_class, 2, 0.5);
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    out.x.row(i).array() += label * sep;
    out.labels.push_back(label);
  }
  return out;
}

double mean_divergence(const DivergenceLearner& m, const LabeledPoints& p, bool same) {
  const Matrix d = learned_pairwise(m, p.x, p.x);
  double total = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      if (i == j || (p.labels[i] == p.labels[j]) != same) continue;
      total += d(i, j);
      ++count;
    }
  }
  return total / count;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("mse hand examples and loop oracle") {
    Matrix a(2, 1), b(1, 1), c(1, 1);
    a << 1, 2;
    CHECK(mse_loss(a, a) == 0.0);
    b << 0;
    c << 2;
    CHECK(mse_loss(b, c) == 4.0);
    CHECK_THROWS_AS(mse_loss(Matrix(0, 1), Matrix(0, 1)), std::invalid_argument);
    CHECK_THROWS_AS(mse_loss(a, b), std::invalid_argument);

    std::mt19937_64 rng(51);
    const Matrix p = gaussian(rng, 37, 1), t = gaussian(rng, 37, 1);
    double naive = 0.0;
    for (int i = 0; i < 37; ++i) naive += (p(i) - t(i)) * (p(i) - t(i));
    naive /= 37;
    CHECK(std::abs(mse_loss(p, t) - naive) < 1e-12);
    ad::Tape tape;
    CHECK(std::abs(mse_loss(tape.constant(p), tape.constant(t)).scalar() - naive) < 1e-12);
  }

  TEST_CASE("mining hand examples") {
    const std::vector<int> labels{0, 0, 1, 1};
    Matrix d(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) d(i, j) = labels[i] == labels[j] ? 0.0 : 1.0;
    }
    CHECK(mine_triplets(d, labels, 0.2).empty());
    const auto all = mine_triplets(Matrix::Constant(4, 4, 0.7), labels, 0.2);
    CHECK(all.triplets.size() == 8);  // 4 anchors x 1 positive x 2 negatives
    CHECK(triplet_loss(all, Matrix::Constant(4, 4, 0.7)) == doctest::Approx(0.2));
    CHECK(mine_triplets(Matrix::Zero(3, 3), {1, 1, 1}, 0.2).empty());
    CHECK_THROWS_AS(mine_triplets(Matrix::Zero(3, 3), {1, 1}, 0.2), std::invalid_argument);
  }

  TEST_CASE("mining equals brute-force enumeration and ignores batch order") {
    std::mt19937_64 rng(52);
    std::uniform_int_distribution<int> label(0, 3);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 16;
      std::vector<int> labels(n);
      for (auto& l : labels) l = label(rng);
      const Matrix d = gaussian(rng, n, n).cwiseAbs();
      std::set<Triplet> oracle;
      for (int a = 0; a < n; ++a) {
        for (int p = 0; p < n; ++p) {
          for (int q = 0; q < n; ++q) {
            const bool valid = labels[a] == labels[p] && labels[a] != labels[q] && a != p;
            if (valid && d(a, p) - d(a, q) + 0.2 > 0) oracle.insert({a, p, q});
          }
        }
      }
      const auto mined = mine_triplets(d, labels, 0.2);
      CHECK(std::set<Triplet>(mined.triplets.begin(), mined.triplets.end()) == oracle);
      CHECK(mined.triplets.size() == oracle.size());

      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix dp(n, n);
      std::vector<int> lp(n);
      for (int i = 0; i < n; ++i) {
        lp[i] = labels[perm[i]];
        for (int j = 0; j < n; ++j) dp(i, j) = d(perm[i], perm[j]);
      }
      std::set<Triplet> mapped;
      for (const auto& t : mine_triplets(dp, lp, 0.2).triplets) mapped.insert({perm[t.anchor], perm[t.positive], perm[t.negative]});
      CHECK(mapped == oracle);
    }
  }

  TEST_CASE("triplet loss hand examples and loop oracle") {
    TripletBatch one{{{0, 1, 2}}, 0.2};
    Matrix d = Matrix::Zero(3, 3);
    d(0, 2) = 1.0;
    CHECK(triplet_loss(one, d) == 0.0);
    d(0, 1) = 1.0;
    d(0, 2) = 0.0;
    CHECK(triplet_loss(one, d) == doctest::Approx(1.2).epsilon(1e-15));

    ad::Tape tape;
    Var dv = tape.variable(Matrix::Ones(3, 3));
    Var empty = triplet_loss(TripletBatch{}, dv);
    tape.backward(empty);
    CHECK(empty.scalar() == 0.0);
    CHECK(dv.grad().cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(53);
    const Matrix r = gaussian(rng, 10, 10);
    std::vector<int> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    const auto batch = mine_triplets(r, labels, 0.2);
    double naive = 0.0;
    for (const auto& t : batch.triplets) naive += std::max(0.0, r(t.anchor, t.positive) - r(t.anchor, t.negative) + 0.2);
    naive /= static_cast<double>(batch.triplets.size());
    CHECK(std::abs(triplet_loss(batch, r) - naive) < 1e-12);
    ad::Tape t2;
    CHECK(std::abs(triplet_loss(batch, t2.constant(r)).scalar() - naive) < 1e-12);
  }

  TEST_CASE("adam step examples") {
    Matrix w = Matrix::Constant(2, 2, 1.5);
    std::vector<NamedParam> params{{"w", &w}};
    AdamState s;
    s.lr = 0.1;
    adam_step(s, params, {Matrix::Zero(2, 2)});
    CHECK((w.array() == 1.5).all());

    Matrix x = Matrix::Constant(1, 1, 0.0);
    std::vector<NamedParam> px{{"x", &x}};
    AdamState s1;
    s1.lr = 0.1;
    adam_step(s1, px, {Matrix::Constant(1, 1, 1.0)});
    CHECK(x(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

    Matrix v = Matrix::Zero(1, 1);
    std::vector<NamedParam> pv{{"v", &v}};
    AdamState s2;
    s2.lr = 0.1;
    for (int i = 0; i < 100; ++i) adam_step(s2, pv, {Matrix::Constant(1, 1, 2.0 * (v(0, 0) - 3.0))});
    CHECK(std::abs(v(0, 0) - 3.0) < 0.05);
    CHECK(s2.step == 100);

    Matrix bad = Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
    try {
      adam_step(s2, pv, {bad});
      FAIL("expected a TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("v") != std::string::npos);
    }
  }

  TEST_CASE("zero target needs no learning") {
    std::mt19937_64 rng(54);
    PairSet data;
    data.a = gaussian(rng, 200, 3);
    data.b = data.a;
    data.target = Matrix::Zero(200, 1);
    auto model = make_model(tiny(3), 1);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 50;
    const auto r = train_regression(model, data, cfg);
    CHECK(r.final_train_loss < 1e-6);
  }

  TEST_CASE("regression fits a squared euclidean target") {
    std::mt19937_64 rng(55);
    PairSet data;
    data.a = gaussian(rng, 1000, 3);
    data.b = gaussian(rng, 1000, 3);
    data.target = (data.a - data.b).rowwise().squaredNorm();
    auto model = make_model(tiny(3), 2);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch = 50;
    cfg.lr = 3e-3;
    const auto r = train_regression(model, data, cfg, &data);
    const auto train = r.losses("train");
    REQUIRE(train.size() == 30);
    for (double l : train) CHECK(std::isfinite(l));
    CHECK(train.back() < 0.1 * train.front());
    CHECK(r.losses("test").size() == 30);
    CHECK(std::abs(r.final_train_loss - regression_loss(model, data)) < 1e-12);
  }

  TEST_CASE("training is bit-reproducible") {
    std::mt19937_64 rng(56);
    PairSet data;
    data.a = gaussian(rng, 300, 4);
    data.b = gaussian(rng, 300, 4);
    data.target = (data.a - data.b).cwiseAbs().rowwise().sum();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 64;
    auto m1 = make_model(tiny(4), 3), m2 = make_model(tiny(4), 3);
    train_regression(m1, data, cfg);
    train_regression(m2, data, cfg);
    auto p1 = m1.parameters(), p2 = m2.parameters();
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(std::memcmp(p1[i].value->data(), p2[i].value->data(), sizeof(double) * p1[i].value->size()) == 0);
    }
  }

  TEST_CASE("non-finite loss aborts") {
    PairSet data;
    data.a = Matrix::Ones(10, 2);
    data.b = Matrix::Zero(10, 2);
    data.target = Matrix::Constant(10, 1, std::numeric_limits<double>::quiet_NaN());
    auto model = make_model(tiny(2), 4);
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train_regression(model, data, cfg), TrainingError);
    cfg.batch = 0;
    CHECK_THROWS_AS(train_regression(model, data, cfg), std::invalid_argument);
  }

  TEST_CASE("triplet training separates two classes") {
    std::mt19937_64 rng(57);
    const auto data = two_blobs(rng, 60, 1.5);
    auto model = make_model(tiny(2), 5);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch = 40;
    cfg.lr = 3e-3;
    const auto r = train_triplet(model, data, cfg);
    CHECK(mean_divergence(model, data, true) < mean_divergence(model, data, false));
  }

  TEST_CASE("single class triplet training is a no-op") {
    std::mt19937_64 rng(58);
    LabeledPoints data{gaussian(rng, 30, 2), std::vector<int>(30, 3)};
    auto model = make_model(tiny(2), 6);
    const auto before = model.phi.layers[1].u;
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch = 10;
    const auto r = train_triplet(model, data, cfg);
    for (double l : r.losses("train")) CHECK(l == 0.0);
    CHECK(r.steps == 0);
    CHECK((model.phi.layers[1].u - before).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("loss csv") {
    TrainResult r;
    r.trace = {{0, "train", 0.5}, {0, "test", 0.25}};
    r.final_train_loss = 0.125;
    std::ostringstream out;
    write_loss_csv(out, r);
    CHECK(out.str() == "epoch,split,loss\n0,train,0.5\n0,test,0.25\nfinal,train,0.125\n");
  }

  TEST_CASE("two-phase schedule") {
    TrainConfig cfg;
    cfg.lr = 5e-5;
    cfg.switch_epoch = 50;
    cfg.lr_after = 5e-6;
    CHECK(cfg.lr_at(49) == 5e-5);
    CHECK(cfg.lr_at(50) == 5e-6);
  }
}
