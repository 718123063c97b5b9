#include "dcs/l1_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dcs {

namespace {

constexpr double kReducedCostTol = 1e-10;
constexpr double kPivotTol = 1e-9;
constexpr double kHarrisTol = 1e-11;
constexpr int kRefactorEvery = 40;
constexpr int kStallLimit = 60;

// Variables: [0, n) are u, [n, 2n) are v (column -a_k), [2n, 2n+m) artificials
// (column sign_i * e_i, chosen so the starting basis is primal feasible).
class Simplex {
 public:
  Simplex(const Matrix& a, const Vector& y, const Vector& w)
      : a_(a), y_(y), w_(w), m_(a.rows()), n_(a.cols()), sign_(m_), basis_(m_), xb_(m_),
        is_basic_(2 * n_ + m_, -1) {
    for (Eigen::Index i = 0; i < m_; ++i) {
      sign_[i] = y_[i] >= 0.0 ? 1.0 : -1.0;
      basis_[i] = 2 * n_ + i;
      is_basic_[basis_[i]] = static_cast<int>(i);
      xb_[i] = std::abs(y_[i]);
    }
    binv_ = Matrix::Zero(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) binv_(i, i) = sign_[i];
  }

  L1Solution run() {
    L1Solution out;
    const double yscale = 1.0 + (m_ > 0 ? y_.cwiseAbs().maxCoeff() : 0.0);
    const auto limit = static_cast<int>(50 * (m_ + 2 * n_) + 1000);

    phase_ = 1;
    if (!iterate(limit, out.iterations)) {
      out.status = LpStatus::IterationLimit;
      return out;
    }
    refactor();
    double infeasibility = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i)
      if (is_artificial(basis_[i])) infeasibility += std::abs(xb_[i]);
    if (infeasibility > 1e-9 * yscale) {
      out.status = LpStatus::Infeasible;
      return out;
    }
    drive_out_artificials();

    phase_ = 2;
    if (!iterate(limit, out.iterations)) {
      out.status = LpStatus::IterationLimit;
      return out;
    }
    refactor();

    out.x = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index k = basis_[i];
      if (k < n_)
        out.x[k] += xb_[i];
      else if (k < 2 * n_)
        out.x[k - n_] -= xb_[i];
    }
    out.dual = duals();
    out.objective = w_.dot(out.x.cwiseAbs());
    out.status = LpStatus::Optimal;
    return out;
  }

 private:
  [[nodiscard]] bool is_artificial(Eigen::Index k) const { return k >= 2 * n_; }

  [[nodiscard]] double cost(Eigen::Index k) const {
    if (is_artificial(k)) return phase_ == 1 ? 1.0 : 0.0;
    return phase_ == 1 ? 0.0 : w_[k % n_];
  }

  [[nodiscard]] Vector column(Eigen::Index k) const {
    if (k < n_) return a_.col(k);
    if (k < 2 * n_) return -a_.col(k - n_);
    Vector e = Vector::Zero(m_);
    e[k - 2 * n_] = sign_[k - 2 * n_];
    return e;
  }

  [[nodiscard]] Vector duals() const {
    Vector cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost(basis_[i]);
    return binv_.transpose() * cb;
  }

  void refactor() {
    if (m_ == 0) return;
    Matrix b(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) b.col(i) = column(basis_[i]);
    Eigen::PartialPivLU<Matrix> lu(b);
    binv_ = lu.inverse();
    xb_ = lu.solve(y_);
    since_refactor_ = 0;
  }

  void pivot(Eigen::Index row, Eigen::Index entering, const Vector& alpha) {
    const double theta = xb_[row] / alpha[row];
    xb_ -= theta * alpha;
    xb_[row] = theta;
    is_basic_[basis_[row]] = -1;
    basis_[row] = entering;
    is_basic_[entering] = static_cast<int>(row);

    const Eigen::RowVectorXd pivot_row = binv_.row(row) / alpha[row];
    for (Eigen::Index i = 0; i < m_; ++i)
      if (i != row && alpha[i] != 0.0) binv_.row(i) -= alpha[i] * pivot_row;
    binv_.row(row) = pivot_row;

    if (++since_refactor_ >= kRefactorEvery) refactor();
  }

  // Returns the entering variable, or -1 at optimality.
  [[nodiscard]] Eigen::Index price(bool bland) const {
    const Vector pi = duals();
    const Vector g = a_.transpose() * pi;
    Eigen::Index best = -1;
    double best_d = -kReducedCostTol;
    auto consider = [&](Eigen::Index k, double d) {
      if (is_basic_[k] >= 0) return;
      if (bland) {
        if (best < 0 && d < -kReducedCostTol) best = k;
      } else if (d < best_d) {
        best_d = d;
        best = k;
      }
    };
    for (Eigen::Index k = 0; k < n_ && !(bland && best >= 0); ++k) consider(k, cost(k) - g[k]);
    for (Eigen::Index k = 0; k < n_ && !(bland && best >= 0); ++k)
      consider(n_ + k, cost(n_ + k) + g[k]);
    return best;
  }

  // Harris two-pass ratio test; returns -1 if the direction is unbounded.
  [[nodiscard]] Eigen::Index ratio_test(const Vector& alpha, bool bland) const {
    double bound = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m_; ++i)
      if (alpha[i] > kPivotTol) bound = std::min(bound, (std::max(xb_[i], 0.0) + kHarrisTol) / alpha[i]);
    if (!std::isfinite(bound)) return -1;
    Eigen::Index row = -1;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (alpha[i] <= kPivotTol) continue;
      if (std::max(xb_[i], 0.0) / alpha[i] > bound) continue;
      if (row < 0) {
        row = i;
      } else if (bland) {
        if (basis_[i] < basis_[row]) row = i;
      } else if (alpha[i] > alpha[row]) {
        row = i;
      }
    }
    return row;
  }

  [[nodiscard]] double objective() const {
    double obj = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) obj += cost(basis_[i]) * xb_[i];
    return obj;
  }

  bool iterate(int limit, int& iterations) {
    bool bland = false;
    int stalled = 0;
    double last = objective();
    while (iterations < limit) {
      const Eigen::Index entering = price(bland);
      if (entering < 0) return true;
      const Vector alpha = binv_ * column(entering);
      const Eigen::Index row = ratio_test(alpha, bland);
      if (row < 0) throw std::logic_error("solve_weighted_l1: unbounded direction");
      pivot(row, entering, alpha);
      ++iterations;
      const double now = objective();
      if (now < last - 1e-13 * (1.0 + std::abs(last))) {
        stalled = 0;
        bland = false;
      } else if (++stalled > kStallLimit) {
        bland = true;
      }
      last = now;
    }
    return false;
  }

  void drive_out_artificials() {
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (!is_artificial(basis_[r])) continue;
      const Eigen::RowVectorXd rho = binv_.row(r) * a_;
      Eigen::Index q = -1;
      double best = 1e-9;
      for (Eigen::Index k = 0; k < n_; ++k)
        if (std::abs(rho[k]) > best) {
          best = std::abs(rho[k]);
          q = k;
        }
      if (q < 0) continue;  // redundant row; the artificial stays basic at zero
      const Eigen::Index entering = rho[q] > 0.0 ? q : n_ + q;
      if (is_basic_[entering] >= 0) continue;
      const Vector alpha = binv_ * column(entering);
      pivot(r, entering, alpha);
    }
  }

  const Matrix& a_;
  const Vector& y_;
  const Vector& w_;
  Eigen::Index m_;
  Eigen::Index n_;
  Vector sign_;
  std::vector<Eigen::Index> basis_;
  Vector xb_;
  std::vector<int> is_basic_;
  Matrix binv_;
  int phase_ = 1;
  int since_refactor_ = 0;
};

}  // namespace

L1Solution solve_weighted_l1(const L1Problem& problem) {
  const Matrix& a = problem.a;
  if (a.rows() != problem.y.size()) throw std::invalid_argument("solve_weighted_l1: a and y disagree");
  Vector w = problem.weights.size() == 0 ? Vector::Ones(a.cols()) : problem.weights;
  if (w.size() != a.cols()) throw std::invalid_argument("solve_weighted_l1: weight count mismatch");
  if ((w.array() <= 0.0).any()) throw std::invalid_argument("solve_weighted_l1: weights must be positive");
  if (!a.allFinite() || !problem.y.allFinite()) throw std::invalid_argument("solve_weighted_l1: non-finite input");
  if (a.rows() == 0) {
    L1Solution out;
    out.x = Vector::Zero(a.cols());
    out.dual = Vector(0);
    return out;
  }
  Simplex simplex(a, problem.y, w);
  return simplex.run();
}

L1Solution basis_pursuit(const Matrix& a, const Vector& y) {
  return solve_weighted_l1({a, y, Vector()});
}

}  // namespace dcs
