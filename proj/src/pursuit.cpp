#include "dcs/pursuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcs {

namespace {

struct Fit {
  bool fits = false;
  bool unique = true;
  Vector coeffs;
};

Fit fit_support(const Matrix& a, const Vector& y, const std::vector<int>& support, double tol) {
  Fit fit;
  if (support.empty()) {
    fit.fits = y.norm() <= tol;
    fit.coeffs = Vector(0);
    return fit;
  }
  const Matrix sub = select_columns(a, support);
  Eigen::ColPivHouseholderQR<Matrix> qr(sub);
  qr.setThreshold(kRankTolerance);
  fit.coeffs = qr.solve(y);
  fit.unique = qr.rank() == static_cast<Eigen::Index>(support.size());
  fit.fits = (sub * fit.coeffs - y).norm() <= tol;
  return fit;
}

Vector scatter(int n, const std::vector<int>& support, const Vector& coeffs) {
  Vector x = Vector::Zero(n);
  for (std::size_t i = 0; i < support.size(); ++i) x[support[i]] = coeffs[static_cast<Eigen::Index>(i)];
  return x;
}

// Advances `idx` to the next k-combination of {0..n-1} in lexicographic order.
bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

}  // namespace

L0Result l0_oracle(const Matrix& a, const Vector& y, int k_max) {
  const int n = static_cast<int>(a.cols());
  if (n > kL0MaxColumns) throw std::invalid_argument("l0_oracle: too many columns for exhaustive search");
  if (a.rows() != y.size()) throw std::invalid_argument("l0_oracle: dimension mismatch");
  const double tol = 1e-8 * y.norm();
  L0Result result;
  for (int k = 0; k <= std::min(k_max, n); ++k) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    bool found = false;
    Vector first;
    do {
      Fit fit = fit_support(a, y, idx, tol);
      if (!fit.fits) continue;
      Vector candidate = scatter(n, idx, fit.coeffs);
      if (!fit.unique) return {L0Status::Ambiguous, {}, Vector::Zero(n)};
      if (!found) {
        found = true;
        first = candidate;
        result.support = idx;
      } else if ((candidate - first).norm() > 1e-6) {
        return {L0Status::Ambiguous, {}, Vector::Zero(n)};
      }
    } while (next_combination(idx, n));
    if (found) {
      result.status = L0Status::Unique;
      result.x = first;
      return result;
    }
  }
  result.x = Vector::Zero(n);
  return result;
}

OmpResult omp(const Matrix& a, const Vector& y, int k) {
  const auto n = a.cols();
  if (a.rows() != y.size()) throw std::invalid_argument("omp: dimension mismatch");
  if (k < 0 || k > a.rows()) throw std::invalid_argument("omp: k must lie in [0, rows]");
  OmpResult out;
  out.residual = y;
  out.x = Vector::Zero(n);
  const Vector norms = a.colwise().norm().transpose();
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  const double stop = 1e-13 * y.norm();
  Vector coeffs;
  for (int it = 0; it < k; ++it) {
    if (out.residual.norm() <= stop) break;
    const Vector corr = a.transpose() * out.residual;
    Eigen::Index best = -1;
    double best_score = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (chosen[static_cast<std::size_t>(i)] || norms[i] == 0.0) continue;
      const double score = std::abs(corr[i]) / norms[i];
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (best < 0) break;
    chosen[static_cast<std::size_t>(best)] = 1;
    out.support.push_back(static_cast<int>(best));
    const Matrix sub = select_columns(a, out.support);
    Eigen::ColPivHouseholderQR<Matrix> qr(sub);
    coeffs = qr.solve(y);
    out.residual = y - sub * coeffs;
  }
  if (!out.support.empty()) out.x = scatter(static_cast<int>(n), out.support, coeffs);
  return out;
}

}  // namespace dcs
