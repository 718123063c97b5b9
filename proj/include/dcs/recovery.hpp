#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcs/bounds.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/linalg.hpp"

namespace dcs {

/// Per-sensor measurements y_j = Phi_j x_j; the block-diagonal Phi is kept
/// as its J diagonal blocks.
struct MeasurementEnsemble {
  std::vector<Matrix> phi;
  std::vector<Vector> y;
  std::vector<double> sigma;
  std::uint64_t seed = 0;
  /// Leading rows shared by every Phi_j (two-stage designs); 0 otherwise.
  int shared_rows = 0;

  [[nodiscard]] int sensors() const { return static_cast<int>(phi.size()); }
  [[nodiscard]] int n() const { return phi.empty() ? 0 : static_cast<int>(phi.front().cols()); }
  [[nodiscard]] int rows(int j) const { return static_cast<int>(phi.at(static_cast<std::size_t>(j)).rows()); }
  [[nodiscard]] int total_rows() const;
};

/// Draws Phi_j with i.i.d. N(0, sigma_j^2) entries from substream j of `seed`.
/// `sigma` holds one value for every sensor or a single shared value.
MeasurementEnsemble measure(const SignalEnsemble& x, const MeasurementAllocation& alloc,
                            const std::vector<double>& sigma, std::uint64_t seed);

/// Two-sensor design Phi_j = [Phi_D; Phi_{A,j}] with a shared block Phi_D.
struct TwoStageSplit {
  int shared = 0;
  int own_1 = 0;
  int own_2 = 0;
};
MeasurementEnsemble measure_two_stage(const SignalEnsemble& x, const TwoStageSplit& split, std::uint64_t seed);

struct RecoveryDiagnostics {
  int iterations = 0;
  std::vector<std::vector<int>> supports;  ///< estimated supports (one per sensor, or one shared)
  Vector z_c;                              ///< estimated common component, when applicable
  std::vector<double> gammas;
  int columns = -1;        ///< column count of the accepted location matrix (cross-validation)
  bool ambiguous = false;  ///< another ensemble fits every measurement equally well
  bool flagged = false;    ///< a numerical step failed; the estimate is partial
  std::string note;
};

struct RecoveryResult {
  std::vector<Vector> x_hat;
  std::vector<double> per_signal_rel_error;
  bool success = false;
  RecoveryDiagnostics diagnostics;
};

inline constexpr double kSuccessThreshold = 1e-4;

/// ||est - truth|| / ||truth||, or the absolute error for a zero signal.
double relative_error(const Vector& estimate, const Vector& truth);
/// Fills per-signal errors and the success flag against the ground truth.
void score(RecoveryResult& result, const SignalEnsemble& truth, double threshold = kSuccessThreshold);

inline constexpr int kCrossValMaxEntries = 20;
inline constexpr int kCrossValMaxColumns = 12;

/// Exhaustive decoder that holds out the last measurement of every sensor,
/// sums them into one test measurement, and returns the first location matrix
/// (fewest columns, then lexicographic) whose fit to the remaining
/// measurements also predicts the test measurement. Location matrices whose
/// fit is not unique are skipped; if one of them with no more columns than
/// the accepted matrix is consistent with every measurement, the result is
/// marked ambiguous. An empty x_hat means nothing within `bound` columns
/// passed.
RecoveryResult crossval_recover(const MeasurementEnsemble& y, JsmKind model, int bound);

/// gamma-weighted l1 in the concatenated frame Z = [z_C; z_1; ...; z_J].
/// `gammas` = (gamma_C, gamma_1, ..., gamma_J).
RecoveryResult jsm1_gamma_recover(const MeasurementEnsemble& y, const std::vector<double>& gammas);

/// Difference-then-average decoder for two sensors sharing `y.shared_rows` rows.
RecoveryResult jsm1_two_stage_recover(const MeasurementEnsemble& y);

/// xi_n = (1/J) sum_j <y_j, phi_{j,n}>^2.
Vector tp_statistics(const MeasurementEnsemble& y);
/// Support from the k largest statistics (ties to the lowest index); per-sensor
/// coefficients by least squares when every M_j >= k, else support only
/// (x_hat empty).
RecoveryResult tp_recover(const MeasurementEnsemble& y, int k);

struct SompOptions {
  double epsilon = 1e-6;
  int max_iterations = -1;  ///< negative: min_j M_j
};
/// Simultaneous OMP with per-sensor Gram-Schmidt residual updates.
RecoveryResult dcs_somp(const MeasurementEnsemble& y, const SompOptions& options = {});

enum class SeparateMethod { L1, Omp, L0 };
/// Recovers each signal on its own. `k` is the OMP iteration count or the l0
/// search depth; a negative value means M_j for OMP and M_j - 1 for l0.
RecoveryResult separate_recover(const MeasurementEnsemble& y, SeparateMethod method, int k = -1);

enum class InnerSolver { Omp, L0 };
/// Transpose estimate of the common component followed by per-sensor
/// innovation recovery with k_j iterations (or search depth).
RecoveryResult tecc(const MeasurementEnsemble& y, const std::vector<int>& k_j, InnerSolver inner = InnerSolver::Omp);

enum class SupportMethod { Omp, Somp };
struct AcieOptions {
  int k = 0;           ///< innovation sparsity; support estimates use k pursuit iterations
  int iterations = 10;
  SupportMethod support = SupportMethod::Omp;
  std::optional<std::vector<std::vector<int>>> initial_supports;
};
/// Alternating common and innovation estimation.
RecoveryResult acie(const MeasurementEnsemble& y, const AcieOptions& options);

}  // namespace dcs
