#include "dcs/linalg.hpp"

#include <cmath>

#include "dcs/random.hpp"

namespace dcs {

Matrix gaussian_matrix(int rows, int cols, double sigma, std::uint64_t seed) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("gaussian_matrix: negative dimension");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_matrix: sigma must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

namespace {

void require_full_rank(const Eigen::ColPivHouseholderQR<Matrix>& qr, Eigen::Index cols,
                       const char* who) {
  if (qr.rank() < cols) throw RankError(std::string(who) + ": matrix is rank deficient");
}

}  // namespace

Vector least_squares(const Matrix& a, const Vector& y) {
  if (a.rows() != y.size()) throw std::invalid_argument("least_squares: dimension mismatch");
  if (a.cols() == 0) return Vector(0);
  if (a.rows() < a.cols()) throw RankError("least_squares: fewer rows than columns");
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(kRankTolerance);
  require_full_rank(qr, a.cols(), "least_squares");
  return qr.solve(y);
}

QrFactors qr_factorize(const Matrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index k = a.cols();
  if (m < k) throw RankError("qr_factorize: fewer rows than columns");
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  Matrix q = qr.householderQ() * Matrix::Identity(m, k);
  double largest = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) largest = std::max(largest, std::abs(r(i, i)));
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(r(i, i)) <= kRankTolerance * largest || largest == 0.0)
      throw RankError("qr_factorize: matrix is rank deficient");
    if (r(i, i) < 0.0) {
      r.row(i) *= -1.0;
      q.col(i) *= -1.0;
    }
  }
  return {std::move(q), std::move(r)};
}

Matrix orthogonal_complement(const Matrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index k = a.cols();
  if (k >= m) throw std::invalid_argument("orthogonal_complement: needs fewer columns than rows");
  if (k == 0) return Matrix::Identity(m, m);
  Eigen::ColPivHouseholderQR<Matrix> check(a);
  check.setThreshold(kRankTolerance);
  require_full_rank(check, k, "orthogonal_complement");
  // The trailing m-k columns of the full Householder Q span range(A)^perp.
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix full = qr.householderQ();
  return full.rightCols(m - k);
}

Matrix select_columns(const Matrix& a, std::span<const int> cols) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = a.col(cols[i]);
  return out;
}

}  // namespace dcs
