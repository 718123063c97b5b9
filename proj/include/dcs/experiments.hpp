#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dcs/ensemble.hpp"
#include "dcs/recovery.hpp"

namespace dcs {

enum class Algorithm { CrossVal, GammaL1, TwoStage, Tp, DcsSomp, Tecc, Acie, SeparateL1, SeparateOmp, SeparateL0 };

std::string_view to_string(Algorithm algo);
/// crossval, gamma-l1, two-stage, tp, dcs-somp, tecc, acie, separate-l1,
/// separate-omp, separate-l0. Throws std::invalid_argument.
Algorithm parse_algorithm(std::string_view text);

/// Malformed or inconsistent experiment specification.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How trial seeds are derived. PerCell mixes the cell index into the seed;
/// Common reuses the same trial draws in every cell (common random numbers),
/// which makes neighbouring cells directly comparable.
enum class SeedMode { PerCell, Common };

struct ExperimentSpec {
  JsmKind model = JsmKind::Jsm1;
  Algorithm algorithm = Algorithm::GammaL1;
  int n = 50;
  std::vector<int> j_list{2};
  SparsityMode sparsity = SparsityMode::Fixed;
  int k_c = 0;
  int k_i = 0;
  double s_c = 0.0;
  double s_i = 0.0;
  double coefficient_std = 1.0;
  double sigma = 1.0;  ///< measurement entry standard deviation
  std::vector<int> m_grid;
  std::vector<double> alpha{1.0};  ///< sensors after the first take round(alpha * M1)
  int trials = 100;
  std::uint64_t seed = 0;
  double threshold = kSuccessThreshold;
  std::vector<double> gamma_c{1.0};
  double gamma_i = 1.0;
  int acie_iterations = 10;
  SupportMethod support = SupportMethod::Omp;
  double somp_epsilon = 1e-6;
  double shared_fraction = 0.5;  ///< two-stage: fraction of min(M1, M2) in the shared block
  int crossval_bound = kCrossValMaxColumns;
  SeedMode seed_mode = SeedMode::PerCell;
  bool record_time = false;  ///< fill the `sec` column with measured wall time
  int threads = 0;           ///< 0: one per hardware thread

  /// Throws SpecError.
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Integer grids accept
/// comma lists and `a:b` or `a:b:step` ranges. Throws SpecError.
ExperimentSpec parse_spec(std::istream& in);
ExperimentSpec parse_spec_file(const std::string& path);

struct CellParams {
  int j = 0;
  int m1 = 0;
  int m2 = 0;
  double alpha = 1.0;
  double gamma_c = 1.0;
};

struct CellReport {
  std::size_t index = 0;
  CellParams params;
  int trials = 0;
  int successes = 0;
  double probability = 0.0;
  double seconds = 0.0;
  int errors = 0;  ///< trials whose solver threw; counted as failures
};

struct SweepReport {
  std::vector<CellReport> cells;
  std::vector<std::string> log;
};

/// Cells in sweep order: J, then alpha, then gamma_C, then M1.
std::vector<CellParams> enumerate_cells(const ExperimentSpec& spec);

/// Seed of trial `trial` in cell `cell` under the spec's seed mode.
std::uint64_t trial_seed(const ExperimentSpec& spec, std::size_t cell, int trial);

/// One (ensemble, Phi) draw and recovery. Solver exceptions propagate.
RecoveryResult run_trial(const ExperimentSpec& spec, const CellParams& cell, std::uint64_t seed);

/// Runs one cell's trials in parallel and reduces them in trial order.
CellReport evaluate_cell(const ExperimentSpec& spec, std::size_t index, const CellParams& cell,
                         std::vector<std::string>* log = nullptr);

SweepReport run_sweep(const ExperimentSpec& spec);

/// Header model,algo,N,J,Kc,Ki,M1,M2,alpha,gammaC,trials,successes,prob,sec.
void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec, const SweepReport& report);

struct MinMeasurement {
  int j = 0;
  double alpha = 1.0;
  double gamma_c = 1.0;
  std::optional<int> m1;  ///< empty when the grid holds no M reaching the target
  double probability = 0.0;
};

/// For each (J, alpha, gamma_C) scans m_grid upward and stops at the first
/// M1 whose empirical success reaches `target`. Cells keep their sweep
/// indices, so results agree with run_sweep.
std::vector<MinMeasurement> min_measurements(const ExperimentSpec& spec, double target);

struct GammaSearch {
  double best = 1.0;
  std::vector<std::pair<double, double>> curve;  ///< (gamma_C, success probability over all other cells)
};
/// Success per gamma_C pooled over the remaining grid; ties go to the smaller gamma_C.
GammaSearch gamma_line_search(const ExperimentSpec& spec);

struct RateRegionRow {
  std::string kind;  ///< empirical, conjecture1, theorem6
  double alpha = 1.0;
  std::optional<int> m1;
  std::optional<int> m2;
  double r1 = 0.0;
  double r2 = 0.0;
};
/// Empirical minimal (M1, alpha M1) pairs with perfect recovery over every
/// trial, plus the two analytic boundaries along each ray R2 = alpha R1.
std::vector<RateRegionRow> rate_region_sweep(const ExperimentSpec& spec);
/// Header kind,alpha,M1,M2,R1,R2.
void write_rate_region_csv(std::ostream& out, const std::vector<RateRegionRow>& rows);

/// Shortest decimal that round-trips.
std::string format_double(double v);

}  // namespace dcs
