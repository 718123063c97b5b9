#include "dcs/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dcs/random.hpp"

namespace dcs {

std::string_view to_string(JsmKind kind) {
  switch (kind) {
    case JsmKind::Jsm1: return "jsm1";
    case JsmKind::Jsm2: return "jsm2";
    case JsmKind::Jsm3: return "jsm3";
    case JsmKind::Jsm3CommonSupport: return "jsm3cs";
  }
  return "unknown";
}

JsmKind parse_jsm_kind(std::string_view text) {
  if (text == "jsm1") return JsmKind::Jsm1;
  if (text == "jsm2") return JsmKind::Jsm2;
  if (text == "jsm3") return JsmKind::Jsm3;
  if (text == "jsm3cs") return JsmKind::Jsm3CommonSupport;
  throw std::invalid_argument("unknown joint sparsity model '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// LocationMatrix

namespace {

void validate_block(const std::vector<int>& cols, int n, const char* what) {
  if (static_cast<int>(cols.size()) > n) throw std::invalid_argument(std::string(what) + ": more columns than N");
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || cols[i] >= n) throw std::invalid_argument(std::string(what) + ": column index out of range");
    if (i > 0 && cols[i] <= cols[i - 1])
      throw std::invalid_argument(std::string(what) + ": column indices must be strictly increasing");
  }
}

std::vector<int> nonzero_indices(const Vector& v) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace

LocationMatrix::LocationMatrix(int n, std::vector<int> common, std::vector<std::vector<int>> innovations)
    : n_(n), common_(std::move(common)), innovations_(std::move(innovations)) {
  if (n_ < 1) throw std::invalid_argument("LocationMatrix: N must be positive");
  if (innovations_.empty()) throw std::invalid_argument("LocationMatrix: at least one sensor required");
  validate_block(common_, n_, "LocationMatrix common block");
  for (const auto& block : innovations_) validate_block(block, n_, "LocationMatrix innovation block");
}

int LocationMatrix::columns() const {
  int d = common_count();
  for (const auto& block : innovations_) d += static_cast<int>(block.size());
  return d;
}

bool LocationMatrix::innovation_has(int j, int index) const {
  const auto& block = innovation(j);
  return std::binary_search(block.begin(), block.end(), index);
}

Vector ValueVector::concatenated() const {
  Vector out(size());
  Eigen::Index at = 0;
  out.segment(at, theta_c.size()) = theta_c;
  at += theta_c.size();
  for (const auto& t : theta_j) {
    out.segment(at, t.size()) = t;
    at += t.size();
  }
  return out;
}

Eigen::Index ValueVector::size() const {
  Eigen::Index s = theta_c.size();
  for (const auto& t : theta_j) s += t.size();
  return s;
}

// ---------------------------------------------------------------------------
// SignalEnsemble

SignalEnsemble SignalEnsemble::from_components(Vector z_c, std::vector<Vector> z_j,
                                               std::optional<Representation> generator) {
  if (z_j.empty()) throw std::invalid_argument("SignalEnsemble: at least one sensor required");
  for (const auto& z : z_j)
    if (z.size() != z_c.size()) throw std::invalid_argument("SignalEnsemble: component lengths differ");
  SignalEnsemble e;
  e.z_c_ = std::move(z_c);
  e.z_j_ = std::move(z_j);
  e.common_support_ = nonzero_indices(e.z_c_);
  for (const auto& z : e.z_j_) {
    e.x_.push_back(e.z_c_ + z);
    e.innovation_supports_.push_back(nonzero_indices(z));
  }
  e.generator_ = std::move(generator);
  return e;
}

Vector SignalEnsemble::stacked() const {
  Vector out(static_cast<Eigen::Index>(n()) * sensors());
  for (int j = 0; j < sensors(); ++j) out.segment(static_cast<Eigen::Index>(j) * n(), n()) = x_[static_cast<std::size_t>(j)];
  return out;
}

// ---------------------------------------------------------------------------
// Location-matrix algebra

Matrix realize_location_matrix(const LocationMatrix& p) {
  const int n = p.n();
  const int J = p.sensors();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(J) * n, p.columns());
  int col = 0;
  for (int c : p.common()) {
    for (int j = 0; j < J; ++j) out(static_cast<Eigen::Index>(j) * n + c, col) = 1.0;
    ++col;
  }
  for (int j = 0; j < J; ++j)
    for (int c : p.innovation(j)) out(static_cast<Eigen::Index>(j) * n + c, col++) = 1.0;
  return out;
}

namespace {

void check_dimensions(const LocationMatrix& p, const ValueVector& theta) {
  if (theta.theta_c.size() != p.common_count()) throw std::invalid_argument("theta_C length differs from K_C");
  if (static_cast<int>(theta.theta_j.size()) != p.sensors())
    throw std::invalid_argument("theta has the wrong number of sensors");
  for (int j = 0; j < p.sensors(); ++j)
    if (theta.theta_j[static_cast<std::size_t>(j)].size() != p.innovation_count(j))
      throw std::invalid_argument("theta_j length differs from K_j");
}

}  // namespace

SignalEnsemble synthesize(const LocationMatrix& p, const ValueVector& theta) {
  check_dimensions(p, theta);
  Vector z_c = Vector::Zero(p.n());
  for (int k = 0; k < p.common_count(); ++k) z_c[p.common()[static_cast<std::size_t>(k)]] = theta.theta_c[k];
  std::vector<Vector> z_j;
  for (int j = 0; j < p.sensors(); ++j) {
    Vector z = Vector::Zero(p.n());
    const auto& cols = p.innovation(j);
    for (std::size_t k = 0; k < cols.size(); ++k)
      z[cols[k]] = theta.theta_j[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(k)];
    z_j.push_back(std::move(z));
  }
  return SignalEnsemble::from_components(std::move(z_c), std::move(z_j), Representation{p, theta});
}

Representation sparsity_reduce(const LocationMatrix& p, const ValueVector& theta) {
  check_dimensions(p, theta);
  const int n = p.n();
  const int J = p.sensors();
  // Dense per-index views; NaN marks an absent column.
  const double absent = std::nan("");
  std::vector<double> common(static_cast<std::size_t>(n), absent);
  std::vector<std::vector<double>> innov(static_cast<std::size_t>(J), std::vector<double>(static_cast<std::size_t>(n), absent));
  for (int k = 0; k < p.common_count(); ++k) common[static_cast<std::size_t>(p.common()[static_cast<std::size_t>(k)])] = theta.theta_c[k];
  for (int j = 0; j < J; ++j) {
    const auto& cols = p.innovation(j);
    for (std::size_t k = 0; k < cols.size(); ++k)
      innov[static_cast<std::size_t>(j)][static_cast<std::size_t>(cols[k])] = theta.theta_j[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(k)];
  }

  for (int i = 0; i < n; ++i) {
    auto& c = common[static_cast<std::size_t>(i)];
    if (std::isnan(c)) continue;
    bool shared = true;
    for (int j = 0; j < J && shared; ++j) shared = !std::isnan(innov[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
    if (!shared) continue;
    // Signal values at this index, computed exactly as synthesize does.
    std::vector<double> x(static_cast<std::size_t>(J));
    std::map<double, int> counts;
    int nonzero = 0;
    for (int j = 0; j < J; ++j) {
      x[static_cast<std::size_t>(j)] = c + innov[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (x[static_cast<std::size_t>(j)] != 0.0) {
        ++nonzero;
        ++counts[x[static_cast<std::size_t>(j)]];
      }
    }
    // Either the innovations absorb the common value (`nonzero` columns), or
    // the common column takes the most frequent value v and only sensors
    // disagreeing with v keep an innovation (1 + J - count(v) columns).
    double v = 0.0;
    int agree = 0;
    for (const auto& [value, cnt] : counts)
      if (cnt > agree) {
        v = value;
        agree = cnt;
      }
    bool keep_common = agree > 0 && 1 + J - agree < nonzero;
    std::vector<double> rest(static_cast<std::size_t>(J));
    for (int j = 0; j < J && keep_common; ++j) {
      const double xj = x[static_cast<std::size_t>(j)];
      rest[static_cast<std::size_t>(j)] = xj == v ? 0.0 : xj - v;
      keep_common = v + rest[static_cast<std::size_t>(j)] == xj;
    }
    if (keep_common) {
      c = v;
      for (int j = 0; j < J; ++j) innov[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = rest[static_cast<std::size_t>(j)];
    } else {
      c = absent;
      for (int j = 0; j < J; ++j) innov[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(j)];
    }
  }

  // Drop zero-valued entries and rebuild canonical blocks.
  std::vector<int> common_cols;
  std::vector<double> common_vals;
  for (int i = 0; i < n; ++i) {
    const double v = common[static_cast<std::size_t>(i)];
    if (!std::isnan(v) && v != 0.0) {
      common_cols.push_back(i);
      common_vals.push_back(v);
    }
  }
  std::vector<std::vector<int>> innov_cols(static_cast<std::size_t>(J));
  ValueVector out;
  out.theta_c = Eigen::Map<const Vector>(common_vals.data(), static_cast<Eigen::Index>(common_vals.size()));
  for (int j = 0; j < J; ++j) {
    std::vector<double> vals;
    for (int i = 0; i < n; ++i) {
      const double v = innov[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      if (!std::isnan(v) && v != 0.0) {
        innov_cols[static_cast<std::size_t>(j)].push_back(i);
        vals.push_back(v);
      }
    }
    out.theta_j.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  return {LocationMatrix(n, std::move(common_cols), std::move(innov_cols)), std::move(out)};
}

// ---------------------------------------------------------------------------
// Joint sparsity

namespace {

// Fewest entries of `values` that differ from a single free constant.
int min_disagreements(const std::vector<double>& values, bool constant_may_be_zero) {
  std::map<double, int> counts;
  for (double v : values) ++counts[v];
  int best_agree = 0;
  for (const auto& [v, cnt] : counts)
    if (constant_may_be_zero || v != 0.0) best_agree = std::max(best_agree, cnt);
  return static_cast<int>(values.size()) - best_agree;
}

}  // namespace

int joint_sparsity(const SignalEnsemble& x, JsmKind model) {
  if (x.generator()) {
    const auto& g = *x.generator();
    return sparsity_reduce(g.location, g.values).location.columns();
  }
  const int n = x.n();
  const int J = x.sensors();
  if (n * J > kJointSparsitySearchLimit)
    throw std::invalid_argument("joint_sparsity: ensemble too large for exhaustive search (J*N > 24)");

  // Location matrices factor over signal indices: each index independently
  // chooses whether P_C and each P_j contain it. The minimum is therefore the
  // sum of per-index minima over all 2^(J+1) membership patterns, which this
  // evaluates in closed form per model.
  if (model == JsmKind::Jsm2) {
    int union_size = 0;
    for (int i = 0; i < n; ++i) {
      bool any = false;
      for (int j = 0; j < J; ++j) any = any || x.signal(j)[i] != 0.0;
      union_size += any ? 1 : 0;
    }
    return J * union_size;
  }
  int d = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(J));
    int nonzero = 0;
    for (int j = 0; j < J; ++j) {
      v[static_cast<std::size_t>(j)] = x.signal(j)[i];
      nonzero += v[static_cast<std::size_t>(j)] != 0.0 ? 1 : 0;
    }
    if (model == JsmKind::Jsm1) {
      const int without_common = nonzero;
      const int with_common = nonzero == 0 ? J + 1 : 1 + min_disagreements(v, false);
      d += std::min(without_common, with_common);
    } else {
      d += 1 + min_disagreements(v, true);
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

template <typename T>
T per_sensor(const std::vector<T>& values, int j, const char* what) {
  if (values.size() == 1) return values.front();
  if (j < static_cast<int>(values.size())) return values[static_cast<std::size_t>(j)];
  throw std::invalid_argument(std::string(what) + ": list length must be 1 or J");
}

std::vector<int> draw_support(Rng& rng, int n, SparsityMode mode, double rate, int k) {
  std::vector<int> support;
  if (mode == SparsityMode::Rate) {
    std::bernoulli_distribution coin(rate);
    for (int i = 0; i < n; ++i)
      if (coin(rng)) support.push_back(i);
  } else {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    support.assign(idx.begin(), idx.begin() + k);
    std::sort(support.begin(), support.end());
  }
  return support;
}

Vector fill(Rng& rng, int n, const std::vector<int>& support, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector z = Vector::Zero(n);
  for (int i : support) {
    double v = normal(rng);
    while (v == 0.0) v = normal(rng);
    z[i] = v;
  }
  return z;
}

void validate(const StochasticModel& s, int n, int sensors) {
  if (n < 1 || sensors < 1) throw std::invalid_argument("generate: N and J must be positive");
  if (!(s.coefficient_std > 0.0)) throw std::invalid_argument("generate: coefficient_std must be positive");
  if (s.s_j.empty() || s.k_j.empty()) throw std::invalid_argument("generate: empty per-sensor list");
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(s.s_c)) throw std::invalid_argument("generate: common rate outside [0,1]");
  for (double r : s.s_j)
    if (!rate_ok(r)) throw std::invalid_argument("generate: innovation rate outside [0,1]");
  if (s.k_c < 0 || s.k_c > n) throw std::invalid_argument("generate: K_C outside [0,N]");
  for (int k : s.k_j)
    if (k < 0 || k > n) throw std::invalid_argument("generate: K_j outside [0,N]");
  if (s.s_j.size() != 1 && static_cast<int>(s.s_j.size()) != sensors)
    throw std::invalid_argument("generate: rate list length must be 1 or J");
  if (s.k_j.size() != 1 && static_cast<int>(s.k_j.size()) != sensors)
    throw std::invalid_argument("generate: sparsity list length must be 1 or J");
}

}  // namespace

SignalEnsemble generate(JsmKind model, const StochasticModel& stoch, int n, int sensors) {
  validate(stoch, n, sensors);
  const double sd = stoch.coefficient_std;
  Rng common_rng(derive_seed(stoch.seed, {0}));

  Vector z_c = Vector::Zero(n);
  std::vector<int> shared;
  if (model == JsmKind::Jsm1) {
    z_c = fill(common_rng, n, draw_support(common_rng, n, stoch.mode, stoch.s_c, stoch.k_c), sd);
  } else if (model == JsmKind::Jsm3 || model == JsmKind::Jsm3CommonSupport) {
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    z_c = fill(common_rng, n, all, sd);
  }
  if (model == JsmKind::Jsm2 || model == JsmKind::Jsm3CommonSupport) {
    if (stoch.mode == SparsityMode::Fixed &&
        std::adjacent_find(stoch.k_j.begin(), stoch.k_j.end(), std::not_equal_to<>()) != stoch.k_j.end())
      throw std::invalid_argument("generate: shared-support models need one sparsity for all sensors");
    shared = draw_support(common_rng, n, stoch.mode, stoch.s_j.front(), stoch.k_j.front());
  }

  std::vector<Vector> z_j;
  for (int j = 0; j < sensors; ++j) {
    Rng rng(derive_seed(stoch.seed, {static_cast<std::uint64_t>(j) + 1}));
    const bool shared_support = model == JsmKind::Jsm2 || model == JsmKind::Jsm3CommonSupport;
    const std::vector<int> support =
        shared_support ? shared
                       : draw_support(rng, n, stoch.mode, per_sensor(stoch.s_j, j, "s_j"), per_sensor(stoch.k_j, j, "k_j"));
    z_j.push_back(fill(rng, n, support, sd));
  }
  SignalEnsemble draft = SignalEnsemble::from_components(z_c, z_j);
  Representation rep = representation_of(draft, model);
  return SignalEnsemble::from_components(std::move(z_c), std::move(z_j), std::move(rep));
}

Representation representation_of(const SignalEnsemble& x, JsmKind model) {
  const int n = x.n();
  std::vector<int> common = x.common_support();
  if (model == JsmKind::Jsm3 || model == JsmKind::Jsm3CommonSupport) {
    common.resize(static_cast<std::size_t>(n));
    std::iota(common.begin(), common.end(), 0);
  }
  ValueVector theta;
  theta.theta_c.resize(static_cast<Eigen::Index>(common.size()));
  for (std::size_t k = 0; k < common.size(); ++k)
    theta.theta_c[static_cast<Eigen::Index>(k)] = x.common_component()[common[k]];
  std::vector<std::vector<int>> innov;
  for (int j = 0; j < x.sensors(); ++j) {
    const auto& s = x.innovation_support(j);
    Vector t(static_cast<Eigen::Index>(s.size()));
    for (std::size_t k = 0; k < s.size(); ++k) t[static_cast<Eigen::Index>(k)] = x.innovation(j)[s[k]];
    theta.theta_j.push_back(std::move(t));
    innov.push_back(s);
  }
  return {LocationMatrix(n, std::move(common), std::move(innov)), std::move(theta)};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_row(std::ostream& out, const Vector& v) {
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v[i], std::chars_format::general, 17);
    if (ec != std::errc()) throw std::runtime_error("write_ensemble: formatting failed");
    if (i > 0) out << ' ';
    out.write(buf, end - buf);
  }
  out << '\n';
}

Vector read_row(std::istream& in, int n, int row) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_ensemble: missing row " + std::to_string(row));
  Vector v(n);
  std::istringstream ss(line);
  std::string tok;
  int count = 0;
  while (ss >> tok) {
    if (count >= n) throw std::runtime_error("read_ensemble: too many values in row " + std::to_string(row));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw std::runtime_error("read_ensemble: bad number '" + tok + "'");
    v[count++] = value;
  }
  if (count != n) throw std::runtime_error("read_ensemble: row " + std::to_string(row) + " has too few values");
  return v;
}

}  // namespace

void write_ensemble(std::ostream& out, const SignalEnsemble& x, JsmKind model) {
  out << x.n() << ' ' << x.sensors() << ' ' << to_string(model) << '\n';
  write_row(out, x.common_component());
  for (int j = 0; j < x.sensors(); ++j) write_row(out, x.innovation(j));
}

LoadedEnsemble read_ensemble(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("read_ensemble: empty input");
  std::istringstream hs(header);
  int n = 0;
  int J = 0;
  std::string model_text;
  if (!(hs >> n >> J >> model_text) || n < 1 || J < 1)
    throw std::runtime_error("read_ensemble: header must be 'N J model'");
  JsmKind model;
  try {
    model = parse_jsm_kind(model_text);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("read_ensemble: ") + e.what());
  }
  Vector z_c = read_row(in, n, 0);
  std::vector<Vector> z_j;
  for (int j = 0; j < J; ++j) z_j.push_back(read_row(in, n, j + 1));
  SignalEnsemble draft = SignalEnsemble::from_components(z_c, z_j);
  Representation rep = representation_of(draft, model);
  return {SignalEnsemble::from_components(std::move(z_c), std::move(z_j), std::move(rep)), model};
}

}  // namespace dcs
