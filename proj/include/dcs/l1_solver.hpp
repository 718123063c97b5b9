#pragma once

#include "dcs/linalg.hpp"

namespace dcs {

/// min sum_i weights_i |x_i|  subject to  a x = y.
struct L1Problem {
  Matrix a;
  Vector y;
  Vector weights;  ///< strictly positive; an empty vector means unit weights
};

enum class LpStatus { Optimal, Infeasible, IterationLimit };

struct L1Solution {
  LpStatus status = LpStatus::Optimal;
  Vector x;          ///< primal minimizer (valid when status == Optimal)
  Vector dual;       ///< multipliers of a x = y; |a^T dual| <= weights at optimum
  double objective = 0.0;
  int iterations = 0;

  [[nodiscard]] bool ok() const { return status == LpStatus::Optimal; }
};

/// Solves the weighted basis-pursuit problem as the linear program
///   min w^T (u + v)  s.t.  a (u - v) = y,  u, v >= 0
/// with a two-phase revised simplex (explicit basis inverse, periodic
/// refactorization, Dantzig pricing with a Bland fallback on stalls).
/// Deterministic for a given input.
L1Solution solve_weighted_l1(const L1Problem& problem);

/// Unit-weight convenience overload (plain basis pursuit).
L1Solution basis_pursuit(const Matrix& a, const Vector& y);

}  // namespace dcs
