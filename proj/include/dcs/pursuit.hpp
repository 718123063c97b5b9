#pragma once

#include <vector>

#include "dcs/linalg.hpp"

namespace dcs {

enum class L0Status { Unique, Ambiguous, None };

struct L0Result {
  L0Status status = L0Status::None;
  std::vector<int> support;  ///< ascending; meaningful for Unique
  Vector x;                  ///< length-n estimate (zero unless Unique)
};

/// Largest column count accepted by l0_oracle.
inline constexpr int kL0MaxColumns = 30;

/// Exhaustive l0 decoder. Supports are enumerated by increasing size and then
/// lexicographically; the first support whose least-squares fit leaves a
/// residual below 1e-8 ||y|| wins, unless another support of the same size also
/// fits with a different signal, which reports Ambiguous.
L0Result l0_oracle(const Matrix& a, const Vector& y, int k_max);

struct OmpResult {
  std::vector<int> support;  ///< in selection order
  Vector x;                  ///< length-n estimate
  Vector residual;
};

/// Orthogonal matching pursuit with k iterations (fewer when the residual
/// vanishes). Columns are scored by |<r, a_n>| / ||a_n||; ties go to the lowest
/// index.
OmpResult omp(const Matrix& a, const Vector& y, int k);

}  // namespace dcs
