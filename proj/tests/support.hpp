#pragma once

#include "nbd/autodiff.hpp"
#include "nbd/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace nbd::testing {

using Matrix = Eigen::MatrixXd;

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

inline Matrix uniform(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

// Central differences of a scalar function of one matrix.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, Matrix at, double h = 1e-5) {
  Matrix g(at.rows(), at.cols());
  for (Eigen::Index k = 0; k < at.size(); ++k) {
    const double keep = at.data()[k];
    at.data()[k] = keep + h;
    const double up = f(at);
    at.data()[k] = keep - h;
    const double down = f(at);
    at.data()[k] = keep;
    g.data()[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) worst = std::max(worst, relative_error(a.data()[k], b.data()[k], floor));
  return worst;
}

struct GradcheckReport {
  double worst = 0.0;
  std::size_t checked = 0;
};

// Every parameter gradient of sum_i D_phi(x_i, y_i) against central
// differences. `stride` > 1 checks every stride-th entry of each matrix.
inline GradcheckReport bregman_param_gradcheck(IcnnParams params, const Matrix& x, const Matrix& y,
                                               std::size_t stride = 1, double h = 1e-5) {
  ad::Tape tape;
  IcnnGraph graph(tape, params, true);
  Var loss = ad::sum(bregman(graph, tape.constant(x), tape.constant(y)));
  const auto grads = ad::parameter_gradients(loss, graph.leaves());

  auto named = params.parameters();
  auto eval = [&] { return bregman(bind(params), x, y).sum(); };
  GradcheckReport report;
  for (std::size_t p = 0; p < named.size(); ++p) {
    Matrix& m = *named[p].value;
    for (Eigen::Index k = 0; k < m.size(); k += static_cast<Eigen::Index>(stride)) {
      const double keep = m.data()[k];
      m.data()[k] = keep + h;
      const double up = eval();
      m.data()[k] = keep - h;
      const double down = eval();
      m.data()[k] = keep;
      const double fd = (up - down) / (2.0 * h);
      report.worst = std::max(report.worst, relative_error(grads[p].data()[k], fd));
      ++report.checked;
    }
  }
  return report;
}

}  // namespace nbd::testing
