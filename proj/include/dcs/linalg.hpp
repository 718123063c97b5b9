#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dcs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a factorization meets a numerically rank-deficient operand.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative threshold on R's diagonal (or pivots) below which a column is
/// treated as linearly dependent.
inline constexpr double kRankTolerance = 1e-10;

/// m x n matrix of i.i.d. N(0, sigma^2) entries. Entries are drawn in row-major
/// order, so the first rows of a taller draw with the same seed coincide with a
/// shorter one.
Matrix gaussian_matrix(int rows, int cols, double sigma, std::uint64_t seed);

/// Least-squares solution (A^T A)^{-1} A^T y by column-pivoted QR.
/// Throws RankError when A lacks full column rank.
Vector least_squares(const Matrix& a, const Vector& y);

struct QrFactors {
  Matrix q;  ///< m x k, orthonormal columns
  Matrix r;  ///< k x k, upper triangular with nonnegative diagonal
};

/// Thin QR factorization A = Q R. Throws RankError on rank deficiency.
QrFactors qr_factorize(const Matrix& a);

/// Orthonormal basis Q (m x (m-k)) of the orthogonal complement of span(A).
/// An m x 0 input yields the identity. Throws std::invalid_argument when
/// k >= m and RankError when A is rank deficient.
Matrix orthogonal_complement(const Matrix& a);

/// Columns of `a` listed in `cols`, in that order.
Matrix select_columns(const Matrix& a, std::span<const int> cols);

}  // namespace dcs
