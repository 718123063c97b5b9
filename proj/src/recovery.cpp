#include "dcs/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dcs/l1_solver.hpp"
#include "dcs/pursuit.hpp"
#include "dcs/random.hpp"

namespace dcs {

int MeasurementEnsemble::total_rows() const {
  int s = 0;
  for (const auto& p : phi) s += static_cast<int>(p.rows());
  return s;
}

namespace {

constexpr std::uint64_t kSharedBlockTag = 0x5348415245440000ULL;

double sigma_of(const std::vector<double>& sigma, int j) {
  if (sigma.size() == 1) return sigma.front();
  return sigma.at(static_cast<std::size_t>(j));
}

void check_ensemble(const MeasurementEnsemble& y, const char* who) {
  if (y.phi.empty() || y.phi.size() != y.y.size())
    throw std::invalid_argument(std::string(who) + ": malformed measurement ensemble");
  for (int j = 0; j < y.sensors(); ++j) {
    if (y.phi[static_cast<std::size_t>(j)].cols() != y.n() || y.phi[static_cast<std::size_t>(j)].rows() != y.y[static_cast<std::size_t>(j)].size())
      throw std::invalid_argument(std::string(who) + ": Phi_j and y_j disagree");
  }
}

Vector scatter(int n, const std::vector<int>& support, const Vector& coeffs) {
  Vector x = Vector::Zero(n);
  for (std::size_t i = 0; i < support.size(); ++i) x[support[i]] = coeffs[static_cast<Eigen::Index>(i)];
  return x;
}

bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[static_cast<std::size_t>(i)];
  for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j) - 1] + 1;
  return true;
}

// Calls `visit` on every k-subset of {0..n-1} in lexicographic order until it returns false.
void for_each_combination(int n, int k, const std::function<bool(const std::vector<int>&)>& visit) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  do {
    if (!visit(idx)) return;
  } while (next_combination(idx, n));
}

}  // namespace

MeasurementEnsemble measure(const SignalEnsemble& x, const MeasurementAllocation& alloc,
                            const std::vector<double>& sigma, std::uint64_t seed) {
  if (alloc.sensors() != x.sensors()) throw std::invalid_argument("measure: allocation length differs from J");
  if (sigma.size() != 1 && static_cast<int>(sigma.size()) != x.sensors())
    throw std::invalid_argument("measure: sigma list length must be 1 or J");
  MeasurementEnsemble out;
  out.seed = seed;
  for (int j = 0; j < x.sensors(); ++j) {
    const double s = sigma_of(sigma, j);
    out.phi.push_back(gaussian_matrix(alloc[j], x.n(), s, derive_seed(seed, {static_cast<std::uint64_t>(j)})));
    out.y.push_back(out.phi.back() * x.signal(j));
    out.sigma.push_back(s);
  }
  return out;
}

MeasurementEnsemble measure_two_stage(const SignalEnsemble& x, const TwoStageSplit& split, std::uint64_t seed) {
  if (x.sensors() != 2) throw std::invalid_argument("measure_two_stage: exactly two sensors required");
  if (split.shared < 0 || split.own_1 < 0 || split.own_2 < 0)
    throw std::invalid_argument("measure_two_stage: negative row count");
  const Matrix shared = gaussian_matrix(split.shared, x.n(), 1.0, derive_seed(seed, {kSharedBlockTag}));
  MeasurementEnsemble out;
  out.seed = seed;
  out.shared_rows = split.shared;
  const int own[2] = {split.own_1, split.own_2};
  for (int j = 0; j < 2; ++j) {
    Matrix phi(split.shared + own[j], x.n());
    phi.topRows(split.shared) = shared;
    phi.bottomRows(own[j]) = gaussian_matrix(own[j], x.n(), 1.0, derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    out.y.push_back(phi * x.signal(j));
    out.phi.push_back(std::move(phi));
    out.sigma.push_back(1.0);
  }
  return out;
}

double relative_error(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) return std::numeric_limits<double>::infinity();
  const double err = (estimate - truth).norm();
  const double ref = truth.norm();
  return ref > 0.0 ? err / ref : err;
}

void score(RecoveryResult& result, const SignalEnsemble& truth, double threshold) {
  result.per_signal_rel_error.clear();
  result.success = static_cast<int>(result.x_hat.size()) == truth.sensors();
  for (int j = 0; j < truth.sensors(); ++j) {
    const double e = j < static_cast<int>(result.x_hat.size())
                         ? relative_error(result.x_hat[static_cast<std::size_t>(j)], truth.signal(j))
                         : std::numeric_limits<double>::infinity();
    result.per_signal_rel_error.push_back(e);
    result.success = result.success && e < threshold;
  }
}

// ---------------------------------------------------------------------------
// Cross-validation decoder

namespace {

struct CrossValData {
  int n = 0;
  int sensors = 0;
  std::vector<Matrix> train;  // first M_j - 1 rows of Phi_j
  std::vector<Matrix> full;
  Matrix test_rows;           // J x N, last row of each Phi_j
  Vector train_y;
  Vector full_y;
  double test_y = 0.0;
};

// Enumerates the model's location matrices with exactly `d` columns in
// lexicographic slot order (common slots first, then each sensor's).
void for_each_location(JsmKind model, int n, int J, int d, const std::function<bool(const LocationMatrix&)>& visit) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  auto shared = [&](std::vector<int> common, int s) {
    for_each_combination(n, s, [&](const std::vector<int>& idx) {
      return visit(LocationMatrix(n, common, std::vector<std::vector<int>>(static_cast<std::size_t>(J), idx)));
    });
  };
  auto slots = [&](std::vector<int> fixed_common, int first_slot, int k) {
    const int total = (J + 1) * n - first_slot;
    for_each_combination(total, k, [&](const std::vector<int>& idx) {
      std::vector<int> common = fixed_common;
      std::vector<std::vector<int>> innov(static_cast<std::size_t>(J));
      for (int raw : idx) {
        const int slot = raw + first_slot;
        if (slot < n)
          common.push_back(slot);
        else
          innov[static_cast<std::size_t>(slot / n - 1)].push_back(slot % n);
      }
      return visit(LocationMatrix(n, std::move(common), std::move(innov)));
    });
  };
  switch (model) {
    case JsmKind::Jsm1: slots({}, 0, d); break;
    case JsmKind::Jsm2:
      if (d % J == 0) shared({}, d / J);
      break;
    case JsmKind::Jsm3:
      if (d >= n) slots(all, n, d - n);
      break;
    case JsmKind::Jsm3CommonSupport:
      if (d >= n && (d - n) % J == 0) shared(all, (d - n) / J);
      break;
  }
}

// Stacked block-diagonal operator restricted to the columns of P.
Matrix restrict(const std::vector<Matrix>& blocks, const LocationMatrix& p) {
  int rows = 0;
  for (const auto& b : blocks) rows += static_cast<int>(b.rows());
  Matrix out = Matrix::Zero(rows, p.columns());
  int col = 0;
  for (int c : p.common()) {
    int r = 0;
    for (const auto& b : blocks) {
      out.block(r, col, b.rows(), 1) = b.col(c);
      r += static_cast<int>(b.rows());
    }
    ++col;
  }
  int r = 0;
  for (int j = 0; j < p.sensors(); ++j) {
    const Matrix& b = blocks[static_cast<std::size_t>(j)];
    for (int c : p.innovation(j)) out.block(r, col++, b.rows(), 1) = b.col(c);
    r += static_cast<int>(b.rows());
  }
  return out;
}

int location_rank(const LocationMatrix& p) {
  int dependent = 0;
  for (int c : p.common()) {
    bool everywhere = true;
    for (int j = 0; j < p.sensors() && everywhere; ++j) everywhere = p.innovation_has(j, c);
    dependent += everywhere ? 1 : 0;
  }
  return p.columns() - dependent;
}

std::vector<Vector> expand(const LocationMatrix& p, const Vector& theta) {
  std::vector<Vector> x(static_cast<std::size_t>(p.sensors()), Vector::Zero(p.n()));
  Eigen::Index k = 0;
  for (int c : p.common()) {
    for (auto& xj : x) xj[c] += theta[k];
    ++k;
  }
  for (int j = 0; j < p.sensors(); ++j)
    for (int c : p.innovation(j)) x[static_cast<std::size_t>(j)][c] += theta[k++];
  return x;
}

bool consistent(const Matrix& a, const Vector& theta, const Vector& y) {
  return (a * theta - y).norm() <= 1e-8 * (1.0 + y.norm());
}

}  // namespace

RecoveryResult crossval_recover(const MeasurementEnsemble& y, JsmKind model, int bound) {
  check_ensemble(y, "crossval_recover");
  const int n = y.n();
  const int J = y.sensors();
  if (n * J > kCrossValMaxEntries) throw std::invalid_argument("crossval_recover: instance too large (J*N > 20)");
  if (bound < 0 || bound > kCrossValMaxColumns) throw std::invalid_argument("crossval_recover: bound must lie in [0, 12]");
  CrossValData data;
  data.n = n;
  data.sensors = J;
  data.test_rows = Matrix(J, n);
  std::vector<double> train_y;
  std::vector<double> full_y;
  for (int j = 0; j < J; ++j) {
    const Matrix& phi = y.phi[static_cast<std::size_t>(j)];
    const Vector& yj = y.y[static_cast<std::size_t>(j)];
    const auto m = phi.rows();
    if (m < 1) throw std::invalid_argument("crossval_recover: every sensor needs at least one measurement");
    data.train.push_back(phi.topRows(m - 1));
    data.full.push_back(phi);
    data.test_rows.row(j) = phi.row(m - 1);
    data.test_y += yj[m - 1];
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i + 1 < m) train_y.push_back(yj[i]);
      full_y.push_back(yj[i]);
    }
  }
  data.train_y = Eigen::Map<const Vector>(train_y.data(), static_cast<Eigen::Index>(train_y.size()));
  data.full_y = Eigen::Map<const Vector>(full_y.data(), static_cast<Eigen::Index>(full_y.size()));
  const double test_tol = 1e-8 * (1.0 + std::abs(data.test_y));

  RecoveryResult result;
  std::vector<Vector> accepted;
  bool ambiguous = false;
  int evaluated = 0;
  for (int d = 0; d <= bound && accepted.empty(); ++d) {
    for_each_location(model, n, J, d, [&](const LocationMatrix& p) {
      ++evaluated;
      const int rank_p = location_rank(p);
      std::vector<Vector> xp;
      if (d == 0) {
        if (data.train_y.norm() > 1e-8 * (1.0 + data.train_y.norm())) return true;
        xp = expand(p, Vector(0));
      } else {
        const Matrix a = restrict(data.train, p);
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
        cod.setThreshold(kRankTolerance);
        if (cod.rank() < rank_p) {
          // Fit not unique: check whether the ambiguity survives every measurement.
          const Matrix f = restrict(data.full, p);
          Eigen::CompleteOrthogonalDecomposition<Matrix> fcod(f);
          fcod.setThreshold(kRankTolerance);
          if (fcod.rank() < rank_p && consistent(f, fcod.solve(data.full_y), data.full_y)) ambiguous = true;
          return true;
        }
        const Vector theta = cod.solve(data.train_y);
        if (!consistent(a, theta, data.train_y)) return true;
        xp = expand(p, theta);
      }
      double predicted = 0.0;
      for (int j = 0; j < J; ++j) predicted += data.test_rows.row(j).dot(xp[static_cast<std::size_t>(j)]);
      if (std::abs(data.test_y - predicted) >= test_tol) return true;
      if (accepted.empty()) {
        accepted = std::move(xp);
        result.diagnostics.columns = d;
        result.diagnostics.supports.assign(1, p.common());
        for (const auto& s : p.innovations()) result.diagnostics.supports.push_back(s);
      } else {
        double diff = 0.0;
        for (int j = 0; j < J; ++j) diff += (xp[static_cast<std::size_t>(j)] - accepted[static_cast<std::size_t>(j)]).norm();
        if (diff > 1e-6) ambiguous = true;
      }
      return true;
    });
  }
  result.x_hat = std::move(accepted);
  result.diagnostics.ambiguous = ambiguous;
  result.diagnostics.iterations = evaluated;
  if (result.x_hat.empty()) result.diagnostics.note = "no location matrix within bound passed cross-validation";
  return result;
}

// ---------------------------------------------------------------------------
// JSM-1

RecoveryResult jsm1_gamma_recover(const MeasurementEnsemble& y, const std::vector<double>& gammas) {
  check_ensemble(y, "jsm1_gamma_recover");
  const int n = y.n();
  const int J = y.sensors();
  if (static_cast<int>(gammas.size()) != J + 1) throw std::invalid_argument("jsm1_gamma_recover: need J+1 weights");
  for (double g : gammas)
    if (!(g > 0.0)) throw std::invalid_argument("jsm1_gamma_recover: weights must be positive");
  const int rows = y.total_rows();
  L1Problem lp;
  lp.a = Matrix::Zero(rows, static_cast<Eigen::Index>(J + 1) * n);
  lp.y = Vector(rows);
  lp.weights = Vector((J + 1) * n);
  int r = 0;
  for (int j = 0; j < J; ++j) {
    const Matrix& phi = y.phi[static_cast<std::size_t>(j)];
    lp.a.block(r, 0, phi.rows(), n) = phi;
    lp.a.block(r, static_cast<Eigen::Index>(j + 1) * n, phi.rows(), n) = phi;
    lp.y.segment(r, phi.rows()) = y.y[static_cast<std::size_t>(j)];
    r += static_cast<int>(phi.rows());
  }
  for (int b = 0; b <= J; ++b) lp.weights.segment(static_cast<Eigen::Index>(b) * n, n).setConstant(gammas[static_cast<std::size_t>(b)]);
  const L1Solution sol = solve_weighted_l1(lp);
  RecoveryResult out;
  out.diagnostics.gammas = gammas;
  out.diagnostics.iterations = sol.iterations;
  if (!sol.ok()) {
    out.diagnostics.flagged = true;
    out.diagnostics.note = "linear program did not reach optimality";
    return out;
  }
  out.diagnostics.z_c = sol.x.head(n);
  for (int j = 0; j < J; ++j) out.x_hat.push_back(sol.x.head(n) + sol.x.segment(static_cast<Eigen::Index>(j + 1) * n, n));
  return out;
}

RecoveryResult jsm1_two_stage_recover(const MeasurementEnsemble& y) {
  check_ensemble(y, "jsm1_two_stage_recover");
  if (y.sensors() != 2) throw std::invalid_argument("jsm1_two_stage_recover: exactly two sensors required");
  const int s = y.shared_rows;
  const Matrix& phi1 = y.phi[0];
  const Matrix& phi2 = y.phi[1];
  if (s < 0 || s > phi1.rows() || s > phi2.rows()) throw std::invalid_argument("jsm1_two_stage_recover: bad shared row count");
  if (s > 0 && phi1.topRows(s) != phi2.topRows(s))
    throw std::invalid_argument("jsm1_two_stage_recover: leading rows are not shared");
  RecoveryResult out;
  const Matrix phi_d = phi1.topRows(s);
  const Vector yd = y.y[0].head(s) - y.y[1].head(s);

  const L1Solution diff = basis_pursuit(phi_d, yd);
  if (!diff.ok() || !consistent(phi_d, diff.x, yd)) {
    out.diagnostics.flagged = true;
    out.diagnostics.note = "stage-1 failure";
    return out;
  }
  const Vector& d = diff.x;
  const auto a1 = phi1.rows() - s;
  const auto a2 = phi2.rows() - s;
  Matrix stacked(s + a1 + a2, y.n());
  Vector rhs(s + a1 + a2);
  stacked.topRows(s) = phi_d;
  stacked.middleRows(s, a1) = phi1.bottomRows(a1);
  stacked.bottomRows(a2) = phi2.bottomRows(a2);
  rhs.head(s) = y.y[0].head(s) - 0.5 * (phi_d * d);
  rhs.segment(s, a1) = y.y[0].tail(a1) - 0.5 * (phi1.bottomRows(a1) * d);
  rhs.tail(a2) = y.y[1].tail(a2) + 0.5 * (phi2.bottomRows(a2) * d);
  const L1Solution avg = basis_pursuit(stacked, rhs);
  out.diagnostics.iterations = diff.iterations + avg.iterations;
  if (!avg.ok()) {
    out.diagnostics.flagged = true;
    out.diagnostics.note = "stage-2 failure";
    return out;
  }
  out.x_hat.push_back(avg.x + 0.5 * d);
  out.x_hat.push_back(avg.x - 0.5 * d);
  return out;
}

// ---------------------------------------------------------------------------
// JSM-2

Vector tp_statistics(const MeasurementEnsemble& y) {
  check_ensemble(y, "tp_statistics");
  Vector xi = Vector::Zero(y.n());
  for (int j = 0; j < y.sensors(); ++j)
    xi += (y.phi[static_cast<std::size_t>(j)].transpose() * y.y[static_cast<std::size_t>(j)]).array().square().matrix();
  return xi / static_cast<double>(y.sensors());
}

RecoveryResult tp_recover(const MeasurementEnsemble& y, int k) {
  const Vector xi = tp_statistics(y);
  if (k < 0 || k > y.n()) throw std::invalid_argument("tp_recover: k must lie in [0, N]");
  std::vector<int> order(static_cast<std::size_t>(y.n()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return xi[a] > xi[b]; });
  std::vector<int> support(order.begin(), order.begin() + k);
  std::sort(support.begin(), support.end());
  RecoveryResult out;
  out.diagnostics.supports.push_back(support);
  for (int j = 0; j < y.sensors(); ++j)
    if (y.rows(j) < k) {
      out.diagnostics.note = "fewer measurements than K: support only";
      return out;
    }
  for (int j = 0; j < y.sensors(); ++j) {
    const Matrix sub = select_columns(y.phi[static_cast<std::size_t>(j)], support);
    try {
      out.x_hat.push_back(scatter(y.n(), support, least_squares(sub, y.y[static_cast<std::size_t>(j)])));
    } catch (const RankError&) {
      out.diagnostics.flagged = true;
      out.x_hat.push_back(Vector::Zero(y.n()));
    }
  }
  return out;
}

RecoveryResult dcs_somp(const MeasurementEnsemble& y, const SompOptions& options) {
  check_ensemble(y, "dcs_somp");
  const int n = y.n();
  const int J = y.sensors();
  int cap = std::numeric_limits<int>::max();
  for (int j = 0; j < J; ++j) cap = std::min(cap, y.rows(j));
  if (options.max_iterations >= 0) cap = std::min(cap, options.max_iterations);
  cap = std::min(cap, n);

  struct Sensor {
    Vector r;
    std::vector<Vector> basis;  // orthogonalized columns gamma_t
    std::vector<double> basis_sq;
    Matrix coef;                // unit upper-triangular R
    std::vector<double> beta;
    Vector col_norms;
    double y_norm = 0.0;
  };
  std::vector<Sensor> s(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    auto& sj = s[static_cast<std::size_t>(j)];
    sj.r = y.y[static_cast<std::size_t>(j)];
    sj.y_norm = sj.r.norm();
    sj.col_norms = y.phi[static_cast<std::size_t>(j)].colwise().norm().transpose();
    sj.coef = Matrix::Zero(cap, cap);
  }
  auto converged = [&] {
    for (const auto& sj : s)
      if (sj.r.norm() > options.epsilon * sj.y_norm) return false;
    return true;
  };

  RecoveryResult out;
  std::vector<int> support;
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  while (static_cast<int>(support.size()) < cap && !converged()) {
    Vector score = Vector::Zero(n);
    for (int j = 0; j < J; ++j) {
      const auto& sj = s[static_cast<std::size_t>(j)];
      const Vector corr = y.phi[static_cast<std::size_t>(j)].transpose() * sj.r;
      for (int i = 0; i < n; ++i)
        if (sj.col_norms[i] > 0.0) score[i] += std::abs(corr[i]) / sj.col_norms[i];
    }
    int best = -1;
    double best_score = -1.0;
    for (int i = 0; i < n; ++i)
      if (!chosen[static_cast<std::size_t>(i)] && score[i] > best_score) {
        best_score = score[i];
        best = i;
      }
    if (best < 0) break;

    const auto l = static_cast<Eigen::Index>(support.size());
    std::vector<Vector> gamma(static_cast<std::size_t>(J));
    std::vector<Vector> rcol(static_cast<std::size_t>(J));
    bool degenerate = false;
    for (int j = 0; j < J && !degenerate; ++j) {
      auto& sj = s[static_cast<std::size_t>(j)];
      const Vector phi_col = y.phi[static_cast<std::size_t>(j)].col(best);
      Vector v = phi_col;
      rcol[static_cast<std::size_t>(j)] = Vector::Zero(l);
      for (Eigen::Index t = 0; t < l; ++t) {
        const double c = v.dot(sj.basis[static_cast<std::size_t>(t)]) / sj.basis_sq[static_cast<std::size_t>(t)];
        v -= c * sj.basis[static_cast<std::size_t>(t)];
        rcol[static_cast<std::size_t>(j)][t] = c;
      }
      degenerate = v.norm() < 1e-12 * std::max(1.0, phi_col.norm());
      gamma[static_cast<std::size_t>(j)] = std::move(v);
    }
    if (degenerate) {
      out.diagnostics.flagged = true;
      out.diagnostics.note = "orthogonalized column vanished";
      break;
    }
    for (int j = 0; j < J; ++j) {
      auto& sj = s[static_cast<std::size_t>(j)];
      Vector& g = gamma[static_cast<std::size_t>(j)];
      const double gsq = g.squaredNorm();
      const double beta = sj.r.dot(g) / gsq;
      sj.r -= beta * g;
      sj.coef.block(0, l, l, 1) = rcol[static_cast<std::size_t>(j)];
      sj.coef(l, l) = 1.0;
      sj.beta.push_back(beta);
      sj.basis_sq.push_back(gsq);
      sj.basis.push_back(std::move(g));
    }
    chosen[static_cast<std::size_t>(best)] = 1;
    support.push_back(best);
  }

  const auto l = static_cast<Eigen::Index>(support.size());
  for (int j = 0; j < J; ++j) {
    const auto& sj = s[static_cast<std::size_t>(j)];
    Vector beta = Eigen::Map<const Vector>(sj.beta.data(), l);
    const Vector coeffs = sj.coef.topLeftCorner(l, l).triangularView<Eigen::Upper>().solve(beta);
    out.x_hat.push_back(scatter(n, support, coeffs));
  }
  out.diagnostics.iterations = static_cast<int>(l);
  out.diagnostics.supports.push_back(support);
  return out;
}

// ---------------------------------------------------------------------------
// Separate recovery

RecoveryResult separate_recover(const MeasurementEnsemble& y, SeparateMethod method, int k) {
  check_ensemble(y, "separate_recover");
  RecoveryResult out;
  for (int j = 0; j < y.sensors(); ++j) {
    const Matrix& phi = y.phi[static_cast<std::size_t>(j)];
    const Vector& yj = y.y[static_cast<std::size_t>(j)];
    const int m = static_cast<int>(phi.rows());
    Vector x = Vector::Zero(y.n());
    std::vector<int> support;
    switch (method) {
      case SeparateMethod::L1: {
        const L1Solution sol = basis_pursuit(phi, yj);
        out.diagnostics.iterations += sol.iterations;
        if (sol.ok())
          x = sol.x;
        else
          out.diagnostics.flagged = true;
        for (int i = 0; i < y.n(); ++i)
          if (x[i] != 0.0) support.push_back(i);
        break;
      }
      case SeparateMethod::Omp: {
        const OmpResult r = omp(phi, yj, std::min(k < 0 ? m : k, std::min(m, y.n())));
        x = r.x;
        support = r.support;
        out.diagnostics.iterations += static_cast<int>(r.support.size());
        break;
      }
      case SeparateMethod::L0: {
        const L0Result r = l0_oracle(phi, yj, k < 0 ? m - 1 : k);
        if (r.status == L0Status::Unique) {
          x = r.x;
          support = r.support;
        } else if (r.status == L0Status::Ambiguous) {
          out.diagnostics.ambiguous = true;
        }
        break;
      }
    }
    out.x_hat.push_back(std::move(x));
    out.diagnostics.supports.push_back(std::move(support));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSM-3

namespace {

int per_sensor_k(const std::vector<int>& k_j, int j) {
  if (k_j.size() == 1) return k_j.front();
  return k_j.at(static_cast<std::size_t>(j));
}

// Size-k support minimizing the least-squares residual; ties to the
// lexicographically first support.
std::vector<int> best_fit_support(const Matrix& a, const Vector& y, int k) {
  if (a.cols() > kL0MaxColumns) throw std::invalid_argument("tecc: l0 inner solver limited to N <= 30");
  std::vector<int> best;
  double best_res = std::numeric_limits<double>::infinity();
  for_each_combination(static_cast<int>(a.cols()), k, [&](const std::vector<int>& idx) {
    const Matrix sub = select_columns(a, idx);
    Eigen::ColPivHouseholderQR<Matrix> qr(sub);
    const double res = (sub * qr.solve(y) - y).norm();
    if (res < best_res) {
      best_res = res;
      best = idx;
    }
    return true;
  });
  return best;
}

}  // namespace

RecoveryResult tecc(const MeasurementEnsemble& y, const std::vector<int>& k_j, InnerSolver inner) {
  check_ensemble(y, "tecc");
  const int J = y.sensors();
  const int n = y.n();
  if (k_j.size() != 1 && static_cast<int>(k_j.size()) != J) throw std::invalid_argument("tecc: k_j length must be 1 or J");
  if (static_cast<int>(y.sigma.size()) != J) throw std::invalid_argument("tecc: sigma_j missing");
  Vector z_c = Vector::Zero(n);
  for (int j = 0; j < J; ++j) {
    const int m = y.rows(j);
    if (m == 0) continue;
    const double scale = 1.0 / (m * y.sigma[static_cast<std::size_t>(j)] * y.sigma[static_cast<std::size_t>(j)]);
    z_c += scale * (y.phi[static_cast<std::size_t>(j)].transpose() * y.y[static_cast<std::size_t>(j)]);
  }
  z_c /= static_cast<double>(J);

  RecoveryResult out;
  out.diagnostics.z_c = z_c;
  for (int j = 0; j < J; ++j) {
    const Matrix& phi = y.phi[static_cast<std::size_t>(j)];
    const Vector residual = y.y[static_cast<std::size_t>(j)] - phi * z_c;
    const int k = std::min({per_sensor_k(k_j, j), static_cast<int>(phi.rows()), n});
    Vector z = Vector::Zero(n);
    std::vector<int> support;
    if (inner == InnerSolver::Omp) {
      const OmpResult r = omp(phi, residual, k);
      z = r.x;
      support = r.support;
    } else {
      support = best_fit_support(phi, residual, k);
      Eigen::ColPivHouseholderQR<Matrix> qr(select_columns(phi, support));
      if (!support.empty()) z = scatter(n, support, qr.solve(residual));
    }
    out.x_hat.push_back(z_c + z);
    out.diagnostics.supports.push_back(std::move(support));
  }
  return out;
}

RecoveryResult acie(const MeasurementEnsemble& y, const AcieOptions& options) {
  check_ensemble(y, "acie");
  const int J = y.sensors();
  const int n = y.n();
  if (options.k < 0) throw std::invalid_argument("acie: k must be nonnegative");
  if (options.iterations < 1) throw std::invalid_argument("acie: at least one iteration required");
  std::vector<std::vector<int>> omega(static_cast<std::size_t>(J));
  if (options.initial_supports) {
    if (static_cast<int>(options.initial_supports->size()) != J)
      throw std::invalid_argument("acie: one initial support per sensor required");
    omega = *options.initial_supports;
    for (auto& s : omega) std::sort(s.begin(), s.end());
  }

  RecoveryResult out;
  Vector z_c = Vector::Zero(n);
  for (int it = 0; it < options.iterations; ++it) {
    // Common component from measurements orthogonal to the innovation span.
    std::vector<Matrix> mod_phi;
    std::vector<Vector> mod_y;
    int rows = 0;
    for (int j = 0; j < J; ++j) {
      const Matrix& phi = y.phi[static_cast<std::size_t>(j)];
      const auto& om = omega[static_cast<std::size_t>(j)];
      if (static_cast<int>(om.size()) >= phi.rows()) continue;
      try {
        const Matrix q = orthogonal_complement(select_columns(phi, om));
        mod_phi.push_back(q.transpose() * phi);
        mod_y.push_back(q.transpose() * y.y[static_cast<std::size_t>(j)]);
        rows += static_cast<int>(q.cols());
      } catch (const RankError&) {
        out.diagnostics.flagged = true;
      }
    }
    Matrix stacked(rows, n);
    Vector rhs(rows);
    int r = 0;
    for (std::size_t b = 0; b < mod_phi.size(); ++b) {
      stacked.middleRows(r, mod_phi[b].rows()) = mod_phi[b];
      rhs.segment(r, mod_y[b].size()) = mod_y[b];
      r += static_cast<int>(mod_phi[b].rows());
    }
    // Indices in every support estimate are invisible after projection; the
    // innovations carry them, so z_C is solved on the remaining columns.
    std::vector<int> free_cols;
    for (int i = 0; i < n; ++i) {
      bool everywhere = true;
      for (const auto& om : omega) everywhere = everywhere && std::binary_search(om.begin(), om.end(), i);
      if (!everywhere) free_cols.push_back(i);
    }
    try {
      z_c = scatter(n, free_cols, least_squares(select_columns(stacked, free_cols), rhs));
    } catch (const RankError&) {
      out.diagnostics.flagged = true;
      out.diagnostics.note = "common-component pseudoinverse rank deficient";
    }

    // Innovation supports from the measurements with the common part removed.
    MeasurementEnsemble resid = y;
    for (int j = 0; j < J; ++j)
      resid.y[static_cast<std::size_t>(j)] = y.y[static_cast<std::size_t>(j)] - y.phi[static_cast<std::size_t>(j)] * z_c;
    if (options.support == SupportMethod::Somp) {
      SompOptions so;
      so.epsilon = 0.0;
      so.max_iterations = options.k;
      std::vector<int> s = dcs_somp(resid, so).diagnostics.supports.front();
      std::sort(s.begin(), s.end());
      omega.assign(static_cast<std::size_t>(J), s);
    } else {
      for (int j = 0; j < J; ++j) {
        const int k = std::min({options.k, y.rows(j), n});
        std::vector<int> s = omp(y.phi[static_cast<std::size_t>(j)], resid.y[static_cast<std::size_t>(j)], k).support;
        std::sort(s.begin(), s.end());
        omega[static_cast<std::size_t>(j)] = std::move(s);
      }
    }
    out.diagnostics.iterations = it + 1;
  }

  for (int j = 0; j < J; ++j) {
    const Matrix& phi = y.phi[static_cast<std::size_t>(j)];
    const auto& om = omega[static_cast<std::size_t>(j)];
    Vector z = Vector::Zero(n);
    try {
      z = scatter(n, om, least_squares(select_columns(phi, om), y.y[static_cast<std::size_t>(j)] - phi * z_c));
    } catch (const RankError&) {
      out.diagnostics.flagged = true;
    }
    out.x_hat.push_back(z_c + z);
  }
  out.diagnostics.z_c = z_c;
  out.diagnostics.supports = omega;
  return out;
}

}  // namespace dcs
