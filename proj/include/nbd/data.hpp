#pragma once

#include <Eigen/Dense>

#include <vector>

namespace nbd {

using Matrix = Eigen::MatrixXd;

/// Supervised pairs: row i of a and b with scalar target(i).
struct PairSet {
  Matrix a;
  Matrix b;
  Matrix target;  // n x 1

  Eigen::Index size() const { return a.rows(); }
  PairSet rows(const std::vector<Eigen::Index>& idx) const;
  PairSet slice(Eigen::Index start, Eigen::Index count) const;
};

struct LabeledPoints {
  Matrix x;
  std::vector<int> labels;

  Eigen::Index size() const { return x.rows(); }
  LabeledPoints rows(const std::vector<Eigen::Index>& idx) const;
  LabeledPoints slice(Eigen::Index start, Eigen::Index count) const;
};

}  // namespace nbd
