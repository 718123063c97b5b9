#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "dcs/ensemble.hpp"

namespace dcs {

/// Subset Gamma of the sensors {0..J-1}; bit j set means sensor j is in Gamma.
using SensorSet = std::uint64_t;

/// Largest J accepted by routines that enumerate all 2^J subsets.
inline constexpr int kMaxEnumeratedSensors = 20;

/// Lambda, the set of all J sensors.
SensorSet all_sensors(int sensors);
int subset_size(SensorSet gamma);

/// Measurements taken per sensor.
class MeasurementAllocation {
 public:
  explicit MeasurementAllocation(std::vector<int> m);

  [[nodiscard]] int sensors() const { return static_cast<int>(m_.size()); }
  [[nodiscard]] int operator[](int j) const { return m_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] const std::vector<int>& values() const { return m_; }
  [[nodiscard]] int total() const;
  /// Sum of M_j over j in gamma.
  [[nodiscard]] int total(SensorSet gamma) const;

 private:
  std::vector<int> m_;
};

/// K_C(Gamma, P): common columns whose index also appears in P_j for every j
/// outside Gamma. K_C(Lambda) = K_C and K_C(empty) = 0 by convention.
int overlap_size(const LocationMatrix& p, SensorSet gamma);
/// K_cond(Gamma, P) = sum_{j in Gamma} K_j + K_C(Gamma, P).
int conditional_sparsity(const LocationMatrix& p, SensorSet gamma);
/// K_joint(Gamma, P) = sum_{j in Gamma} K_j + K_C - K_C(Lambda \ Gamma, P).
int joint_sparsity_subset(const LocationMatrix& p, SensorSet gamma);

/// Bipartite graph between the D entries of Theta and the measurements.
struct DependencyGraph {
  int value_count = 0;
  /// (sensor, row) for each measurement vertex, grouped by sensor.
  std::vector<std::pair<int, int>> measurement_vertices;
  /// Measurement vertices adjacent to each value vertex, ascending.
  std::vector<std::vector<int>> adjacency;
};

/// Value vertex d < K_C is common column d and reaches every measurement of
/// sensor j unless P_j holds the same index; innovation vertices reach their
/// own sensor's measurements only.
DependencyGraph build_graph(const LocationMatrix& p, const MeasurementAllocation& alloc);

/// Maximum bipartite matching of all value vertices into measurements.
struct CommonAssignment {
  std::vector<int> sensor_of_common;     ///< mapping C: common column -> sensor
  std::vector<int> value_to_measurement;  ///< matched measurement vertex per value vertex
};
/// Value vertices Pi with fewer neighbours than members.
struct HallViolation {
  std::vector<int> values;
  std::vector<int> neighbors;
};
std::variant<CommonAssignment, HallViolation> find_common_assignment(const LocationMatrix& p,
                                                                     const MeasurementAllocation& alloc);

/// sum_{Gamma} M_j >= K_cond(Gamma) for every Gamma. Throws for J > 20.
bool check_theorem3(const LocationMatrix& p, const MeasurementAllocation& alloc);
/// sum_{Gamma} M_j >= K_cond(Gamma) + |Gamma| for every nonempty Gamma.
bool check_theorem4(const LocationMatrix& p, const MeasurementAllocation& alloc);
/// First Gamma (by bitmask) with sum_{Gamma} M_j < K_cond(Gamma), if any.
std::optional<SensorSet> check_converse(const LocationMatrix& p, const MeasurementAllocation& alloc);

/// K_R: indices where z_C and every z_j are nonzero.
int common_overlap(const SignalEnsemble& x);

/// Sufficient conditions for joint l0 recovery under JSM-1 or JSM-3:
///   sum_{Gamma} M_j >= sum_{Gamma} K_j + K_C(Gamma) + |Gamma|   for Gamma != Lambda
///   sum_j M_j >= K_C + sum_j K_j + J - K_R
/// with K_C = N for the JSM-3 models. K_C(Gamma) is taken on the reduced
/// representation. Throws std::invalid_argument for JSM-2.
bool corollary_bounds(JsmKind model, const SignalEnsemble& x, const MeasurementAllocation& alloc);

/// Overmeasuring rule of thumb c(S) = log2(1 + 1/S), for 0 < S <= 1.
double c_of_s(double s);
/// Measurement rate c'(S) = S c(S), with c'(0) = 0.
double c_prime(double s);

/// Minimum per-sensor and sum measurement rates for two JSM-1 signals.
struct RateBound {
  double individual = 0.0;
  double sum = 0.0;
};
RateBound conjecture1_region(double s_c, double s_i);
RateBound theorem6_region(double s_c, double s_i);

struct BoundsRow {
  SensorSet gamma = 0;
  int sum_m = 0;
  int k_cond = 0;
  bool thm3 = false;
  bool thm4 = false;
  bool thm5 = false;  ///< true when the converse does not apply at this Gamma
};
std::vector<BoundsRow> bounds_table(const LocationMatrix& p, const MeasurementAllocation& alloc);
/// CSV with header gamma_mask,sum_m,k_cond,thm3,thm4,thm5 and PASS/FAIL cells.
void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows);

}  // namespace dcs
