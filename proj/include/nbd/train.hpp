#pragma once

#include "nbd/data.hpp"
#include "nbd/divergence.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbd {

/// Raised when a loss or gradient stops being finite.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------ Adam

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One bias-corrected Adam update in place. Throws TrainingError naming the
/// first parameter whose gradient has a non-finite entry; nothing is updated
/// in that case.
void adam_step(AdamState& state, const std::vector<NamedParam>& params, const std::vector<Matrix>& grads);

// ------------------------------------------------------------ losses

/// Mean squared difference; throws std::invalid_argument on empty or
/// mismatched input.
double mse_loss(const Matrix& predicted, const Matrix& target);
Var mse_loss(Var predicted, Var target);

struct Triplet {
  Eigen::Index anchor;
  Eigen::Index positive;
  Eigen::Index negative;
  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TripletBatch {
  std::vector<Triplet> triplets;
  double margin = 0.2;
  bool empty() const { return triplets.empty(); }
};

/// Batch-all mining over a pairwise divergence matrix d(i, j) = D(x_i, x_j):
/// every (a, p, n) with label(a) = label(p) != label(n), a != p and
/// d(a, p) - d(a, n) + margin > 0, in lexicographic order.
TripletBatch mine_triplets(const Matrix& d, const std::vector<int>& labels, double margin = 0.2);

/// Mean hinge max(0, d(a, p) - d(a, n) + margin); 0 for an empty batch.
double triplet_loss(const TripletBatch& batch, const Matrix& d);
Var triplet_loss(const TripletBatch& batch, Var d);

// ------------------------------------------------------------ training

struct TrainConfig {
  int epochs = 100;
  int batch = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double margin = 0.2;
  /// Two-phase constant schedule: from this epoch on, use lr_after.
  std::optional<int> switch_epoch;
  double lr_after = 0.0;

  void validate() const;
  double lr_at(int epoch) const;
};

struct EpochLoss {
  int epoch;
  std::string split;  // "train" or "test"
  double loss;
};

struct TrainResult {
  std::vector<EpochLoss> trace;
  /// Loss over the full training set with the final parameters.
  double final_train_loss = 0.0;
  std::int64_t steps = 0;

  std::vector<double> losses(const std::string& split) const;
};

/// Regression on (a, b, target) pairs with mean squared error. When `test`
/// is given, its loss is recorded after every epoch.
TrainResult train_regression(DivergenceLearner& model, const PairSet& train, const TrainConfig& config,
                             const PairSet* test = nullptr);

/// Triplet training with batch-all mining inside each minibatch. Batches
/// with no violating triplet contribute 0 and skip the optimizer.
TrainResult train_triplet(DivergenceLearner& model, const LabeledPoints& train, const TrainConfig& config);

double regression_loss(const DivergenceLearner& model, const PairSet& data);
double regression_mae(const DivergenceLearner& model, const PairSet& data);
/// Triplet loss averaged over consecutive, unshuffled blocks of `batch`
/// points, mining within each block.
double blockwise_triplet_loss(const DivergenceLearner& model, const LabeledPoints& data, int batch, double margin);

/// CSV with header "epoch,split,loss".
void write_loss_csv(std::ostream& out, const TrainResult& result);

}  // namespace nbd
