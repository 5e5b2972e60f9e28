#include "nbd/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace nbd {

// ------------------------------------------------------------ Adam

void adam_step(AdamState& state, const std::vector<NamedParam>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = *params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols()) {
      throw std::invalid_argument("adam_step: gradient shape differs for " + params[i].name);
    }
    if (!grads[i].allFinite()) throw TrainingError("adam_step: non-finite gradient for parameter " + params[i].name);
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      state.v.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: parameter set changed between steps");

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    const auto m_hat = state.m[i].array() / c1;
    const auto v_hat = state.v[i].array() / c2;
    params[i].value->array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

// ------------------------------------------------------------ losses

double mse_loss(const Matrix& predicted, const Matrix& target) {
  if (predicted.size() == 0) throw std::invalid_argument("mse_loss: empty batch");
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
    throw std::invalid_argument("mse_loss: prediction and target lengths differ");
  }
  return (predicted - target).squaredNorm() / static_cast<double>(predicted.size());
}

Var mse_loss(Var predicted, Var target) {
  if (predicted.value().size() == 0) throw std::invalid_argument("mse_loss: empty batch");
  return ad::mean(ad::square(ad::sub(predicted, target)));
}

TripletBatch mine_triplets(const Matrix& d, const std::vector<int>& labels, double margin) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (d.rows() != n || d.cols() != n) throw std::invalid_argument("mine_triplets: divergence matrix must be n x n");
  TripletBatch out;
  out.margin = margin;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p == a || labels[a] != labels[p]) continue;
      const double dap = d(a, p);
      for (Eigen::Index q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        if (dap - d(a, q) + margin > 0.0) out.triplets.push_back({a, p, q});
      }
    }
  }
  return out;
}

double triplet_loss(const TripletBatch& batch, const Matrix& d) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : batch.triplets) {
    total += std::max(0.0, d(t.anchor, t.positive) - d(t.anchor, t.negative) + batch.margin);
  }
  return total / static_cast<double>(batch.triplets.size());
}

Var triplet_loss(const TripletBatch& batch, Var d) {
  if (batch.empty()) return ad::scale(ad::sum(d), 0.0);
  std::vector<Eigen::Index> anchors, positives, negatives;
  anchors.reserve(batch.triplets.size());
  positives.reserve(batch.triplets.size());
  negatives.reserve(batch.triplets.size());
  for (const auto& t : batch.triplets) {
    anchors.push_back(t.anchor);
    positives.push_back(t.positive);
    negatives.push_back(t.negative);
  }
  Var dap = ad::gather(d, anchors, std::move(positives));
  Var dan = ad::gather(d, std::move(anchors), std::move(negatives));
  return ad::mean(ad::max_const(ad::shift(ad::sub(dap, dan), batch.margin), 0.0));
}

// ------------------------------------------------------------ training

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");
  if (batch <= 0) throw std::invalid_argument("train: batch size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: learning rate must be positive");
  if (switch_epoch && (!(lr_after > 0.0) || !std::isfinite(lr_after))) {
    throw std::invalid_argument("train: second-phase learning rate must be positive");
  }
}

double TrainConfig::lr_at(int epoch) const { return switch_epoch && epoch >= *switch_epoch ? lr_after : lr; }

std::vector<double> TrainResult::losses(const std::string& split) const {
  std::vector<double> out;
  for (const auto& e : trace) {
    if (e.split == split) out.push_back(e.loss);
  }
  return out;
}

namespace {

std::vector<Eigen::Index> shuffled(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void require_finite(double loss, const char* what, int epoch, std::int64_t step) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                        std::to_string(step));
  }
}

Var predict(const BoundDivergence& bound, ad::Tape& tape, const PairSet& batch) {
  Var x = bound.embed(tape.constant(batch.a));
  Var y = bound.embed(tape.constant(batch.b));
  return bound.pairs(x, y);
}

}  // namespace

double regression_loss(const DivergenceLearner& model, const PairSet& data) {
  if (data.size() == 0) throw std::invalid_argument("regression_loss: empty data");
  return mse_loss(learned_divergence(model, data.a, data.b), data.target);
}

double regression_mae(const DivergenceLearner& model, const PairSet& data) {
  if (data.size() == 0) throw std::invalid_argument("regression_mae: empty data");
  return (learned_divergence(model, data.a, data.b) - data.target).cwiseAbs().mean();
}

TrainResult train_regression(DivergenceLearner& model, const PairSet& train, const TrainConfig& config,
                             const PairSet* test) {
  config.validate();
  if (train.size() == 0) throw std::invalid_argument("train_regression: no training pairs");
  if (train.target.rows() != train.size() || train.b.rows() != train.size()) {
    throw std::invalid_argument("train_regression: pair set has inconsistent row counts");
  }
  std::mt19937_64 rng(config.seed);
  AdamState adam;
  auto params = model.parameters();
  TrainResult result;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    adam.lr = config.lr_at(epoch);
    const auto order = shuffled(train.size(), rng);
    double total = 0.0;
    for (Eigen::Index start = 0; start < train.size(); start += config.batch) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch, train.size() - start);
      const PairSet batch =
          train.rows(std::vector<Eigen::Index>(order.begin() + start, order.begin() + start + len));
      ad::Tape tape;
      auto bound = model.bind(tape, true);
      Var loss = mse_loss(predict(*bound, tape, batch), tape.constant(batch.target));
      require_finite(loss.scalar(), "train_regression", epoch, result.steps);
      const auto grads = ad::parameter_gradients(loss, bound->leaves());
      adam_step(adam, params, grads);
      ++result.steps;
      total += loss.scalar() * static_cast<double>(len);
    }
    result.trace.push_back({epoch, "train", total / static_cast<double>(train.size())});
    if (test != nullptr && test->size() > 0) {
      const double t = regression_loss(model, *test);
      require_finite(t, "train_regression (test)", epoch, result.steps);
      result.trace.push_back({epoch, "test", t});
    }
  }
  result.final_train_loss = regression_loss(model, train);
  return result;
}

double blockwise_triplet_loss(const DivergenceLearner& model, const LabeledPoints& data, int batch, double margin) {
  if (batch <= 0) throw std::invalid_argument("blockwise_triplet_loss: batch must be positive");
  if (data.size() == 0) return 0.0;
  const Matrix e = embed(model, data.x);
  double total = 0.0;
  int blocks = 0;
  for (Eigen::Index start = 0; start < data.size(); start += batch) {
    const Eigen::Index len = std::min<Eigen::Index>(batch, data.size() - start);
    const Matrix block = e.middleRows(start, len);
    const Matrix d = embedded_pairwise(model, block, block);
    const std::vector<int> labels(data.labels.begin() + start, data.labels.begin() + start + len);
    total += triplet_loss(mine_triplets(d, labels, margin), d);
    ++blocks;
  }
  return total / blocks;
}

TrainResult train_triplet(DivergenceLearner& model, const LabeledPoints& train, const TrainConfig& config) {
  config.validate();
  if (train.size() == 0) throw std::invalid_argument("train_triplet: no training points");
  if (static_cast<Eigen::Index>(train.labels.size()) != train.size()) {
    throw std::invalid_argument("train_triplet: label count differs from point count");
  }
  std::mt19937_64 rng(config.seed);
  AdamState adam;
  auto params = model.parameters();
  TrainResult result;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    adam.lr = config.lr_at(epoch);
    const auto order = shuffled(train.size(), rng);
    double total = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < train.size(); start += config.batch) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch, train.size() - start);
      const LabeledPoints batch =
          train.rows(std::vector<Eigen::Index>(order.begin() + start, order.begin() + start + len));
      ++batches;
      ad::Tape tape;
      auto bound = model.bind(tape, true);
      Var x = bound->embed(tape.constant(batch.x));
      Var d = bound->pairwise(x, x);
      const TripletBatch mined = mine_triplets(d.value(), batch.labels, config.margin);
      if (mined.empty()) continue;
      Var loss = triplet_loss(mined, d);
      require_finite(loss.scalar(), "train_triplet", epoch, result.steps);
      const auto grads = ad::parameter_gradients(loss, bound->leaves());
      adam_step(adam, params, grads);
      ++result.steps;
      total += loss.scalar();
    }
    result.trace.push_back({epoch, "train", total / batches});
  }
  result.final_train_loss = blockwise_triplet_loss(model, train, config.batch, config.margin);
  return result;
}

void write_loss_csv(std::ostream& out, const TrainResult& result) {
  const auto old = out.precision(17);
  out << "epoch,split,loss\n";
  for (const auto& e : result.trace) out << e.epoch << ',' << e.split << ',' << e.loss << '\n';
  out << "final,train," << result.final_train_loss << '\n';
  out.precision(old);
}

}  // namespace nbd
