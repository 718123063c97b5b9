#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcs/linalg.hpp"

namespace dcs {

/// Joint sparsity models built from a common component plus per-sensor
/// innovations.
enum class JsmKind {
  Jsm1,               ///< sparse common + sparse innovations
  Jsm2,               ///< no common component, one shared innovation support
  Jsm3,               ///< dense common + sparse innovations
  Jsm3CommonSupport,  ///< dense common + innovations on one shared support
};

std::string_view to_string(JsmKind kind);
/// Accepts jsm1, jsm2, jsm3, jsm3cs (case-sensitive). Throws std::invalid_argument.
JsmKind parse_jsm_kind(std::string_view text);

/// Location matrix of a common/innovation model: the identity submatrix P_C
/// (columns `common()`) shared by every sensor plus one identity submatrix P_j
/// per sensor. Indices are 0-based and strictly increasing within each block,
/// which makes equality of location matrices structural.
class LocationMatrix {
 public:
  LocationMatrix(int n, std::vector<int> common, std::vector<std::vector<int>> innovations);

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int sensors() const { return static_cast<int>(innovations_.size()); }
  [[nodiscard]] const std::vector<int>& common() const { return common_; }
  [[nodiscard]] const std::vector<int>& innovation(int j) const { return innovations_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] const std::vector<std::vector<int>>& innovations() const { return innovations_; }
  [[nodiscard]] int common_count() const { return static_cast<int>(common_.size()); }
  [[nodiscard]] int innovation_count(int j) const { return static_cast<int>(innovation(j).size()); }
  /// D = K_C + sum_j K_j.
  [[nodiscard]] int columns() const;
  /// True when `index` is a column of P_j.
  [[nodiscard]] bool innovation_has(int j, int index) const;

  bool operator==(const LocationMatrix&) const = default;

 private:
  int n_;
  std::vector<int> common_;
  std::vector<std::vector<int>> innovations_;
};

/// Theta = [theta_C; theta_1; ...; theta_J].
struct ValueVector {
  Vector theta_c;
  std::vector<Vector> theta_j;

  [[nodiscard]] Vector concatenated() const;
  [[nodiscard]] Eigen::Index size() const;
};

struct Representation {
  LocationMatrix location;
  ValueVector values;
};

/// J signals x_j = z_C + z_j of length N together with their components.
/// Immutable once built.
class SignalEnsemble {
 public:
  /// Builds x_j = z_C + z_j. Supports are the nonzero entries of each component.
  static SignalEnsemble from_components(Vector z_c, std::vector<Vector> z_j,
                                        std::optional<Representation> generator = std::nullopt);

  [[nodiscard]] int n() const { return static_cast<int>(z_c_.size()); }
  [[nodiscard]] int sensors() const { return static_cast<int>(z_j_.size()); }
  [[nodiscard]] const Vector& signal(int j) const { return x_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] const std::vector<Vector>& signals() const { return x_; }
  [[nodiscard]] const Vector& common_component() const { return z_c_; }
  [[nodiscard]] const Vector& innovation(int j) const { return z_j_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] const std::vector<Vector>& innovations() const { return z_j_; }
  [[nodiscard]] const std::vector<int>& common_support() const { return common_support_; }
  [[nodiscard]] const std::vector<int>& innovation_support(int j) const {
    return innovation_supports_.at(static_cast<std::size_t>(j));
  }
  /// Generating (P, Theta) when the ensemble was synthesized or generated.
  [[nodiscard]] const std::optional<Representation>& generator() const { return generator_; }
  /// Stacked X = [x_1; ...; x_J].
  [[nodiscard]] Vector stacked() const;

 private:
  SignalEnsemble() = default;

  Vector z_c_;
  std::vector<Vector> z_j_;
  std::vector<Vector> x_;
  std::vector<int> common_support_;
  std::vector<std::vector<int>> innovation_supports_;
  std::optional<Representation> generator_;
};

enum class SparsityMode { Rate, Fixed };

/// Random ensemble parameters. Per-sensor lists of length one are broadcast
/// to every sensor.
struct StochasticModel {
  SparsityMode mode = SparsityMode::Rate;
  double s_c = 0.0;            ///< common Bernoulli rate (JSM1)
  std::vector<double> s_j{0.0};  ///< innovation Bernoulli rates
  int k_c = 0;                 ///< exact common sparsity (Fixed, JSM1)
  std::vector<int> k_j{0};     ///< exact innovation sparsities (Fixed)
  double coefficient_std = 1.0;
  std::uint64_t seed = 0;
};

/// Dense (J*N) x D 0/1 matrix laid out as [P_C P_1 0 ..; P_C 0 P_2 ..; ...].
Matrix realize_location_matrix(const LocationMatrix& p);

/// X = P Theta. Throws std::invalid_argument on dimension mismatch.
SignalEnsemble synthesize(const LocationMatrix& p, const ValueVector& theta);

/// Removes redundant columns until none remain: zero-valued entries are
/// dropped, and at an index present in P_C and in every P_j one column goes.
/// Either the innovations absorb the common value or the common column takes
/// the most frequent signal value, whichever leaves fewer columns (ties drop
/// the common column). The synthesized ensemble stays bitwise identical.
Representation sparsity_reduce(const LocationMatrix& p, const ValueVector& theta);

/// Largest J*N accepted by joint_sparsity without a generating representation.
inline constexpr int kJointSparsitySearchLimit = 24;

/// Minimum column count of a location matrix of `model` that reproduces X.
/// Uses the carried generator (after sparsity_reduce) when present; otherwise
/// searches exhaustively, which is limited to J*N <= 24.
int joint_sparsity(const SignalEnsemble& x, JsmKind model);

/// Draws a random ensemble of `model`. Deterministic in `stoch.seed`; the
/// common part and each sensor use separate substreams, so sensor j's draw
/// does not depend on how many sensors follow it.
SignalEnsemble generate(JsmKind model, const StochasticModel& stoch, int n, int sensors);

/// (P, Theta) read off the component supports. JSM-3 models keep P_C = I.
Representation representation_of(const SignalEnsemble& x, JsmKind model);

/// Plain-text format: `N J model`, then the common component row, then one
/// innovation row per sensor; decimals at 17 significant digits.
void write_ensemble(std::ostream& out, const SignalEnsemble& x, JsmKind model);

struct LoadedEnsemble {
  SignalEnsemble ensemble;
  JsmKind model;
};
/// Throws std::runtime_error on malformed input.
LoadedEnsemble read_ensemble(std::istream& in);

}  // namespace dcs
