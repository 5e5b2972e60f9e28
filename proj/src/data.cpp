#include "nbd/data.hpp"

namespace nbd {

namespace {

Matrix take(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace

PairSet PairSet::rows(const std::vector<Eigen::Index>& idx) const { return {take(a, idx), take(b, idx), take(target, idx)}; }

PairSet PairSet::slice(Eigen::Index start, Eigen::Index count) const {
  return {a.middleRows(start, count), b.middleRows(start, count), target.middleRows(start, count)};
}

LabeledPoints LabeledPoints::rows(const std::vector<Eigen::Index>& idx) const {
  LabeledPoints out{take(x, idx), {}};
  out.labels.reserve(idx.size());
  for (Eigen::Index i : idx) out.labels.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

LabeledPoints LabeledPoints::slice(Eigen::Index start, Eigen::Index count) const {
  return {x.middleRows(start, count),
          std::vector<int>(labels.begin() + start, labels.begin() + start + count)};
}

}  // namespace nbd
