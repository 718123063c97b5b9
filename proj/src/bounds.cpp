#include "dcs/bounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace dcs {

SensorSet all_sensors(int sensors) {
  if (sensors < 0 || sensors > 64) throw std::invalid_argument("all_sensors: J must be in [0, 64]");
  return sensors == 64 ? ~SensorSet{0} : (SensorSet{1} << sensors) - 1;
}

int subset_size(SensorSet gamma) { return std::popcount(gamma); }

MeasurementAllocation::MeasurementAllocation(std::vector<int> m) : m_(std::move(m)) {
  if (m_.empty()) throw std::invalid_argument("MeasurementAllocation: at least one sensor required");
  for (int v : m_)
    if (v < 0) throw std::invalid_argument("MeasurementAllocation: negative measurement count");
}

int MeasurementAllocation::total() const {
  int s = 0;
  for (int v : m_) s += v;
  return s;
}

int MeasurementAllocation::total(SensorSet gamma) const {
  int s = 0;
  for (int j = 0; j < sensors(); ++j)
    if (gamma >> j & 1U) s += m_[static_cast<std::size_t>(j)];
  return s;
}

namespace {

void check_subset(const LocationMatrix& p, SensorSet gamma) {
  if (p.sensors() > 64 || (gamma & ~all_sensors(p.sensors())) != 0)
    throw std::invalid_argument("sensor subset refers to a missing sensor");
}

void check_enumerable(const LocationMatrix& p, const MeasurementAllocation& alloc) {
  if (alloc.sensors() != p.sensors()) throw std::invalid_argument("allocation length differs from J");
  if (p.sensors() > kMaxEnumeratedSensors) throw std::invalid_argument("subset enumeration limited to J <= 20");
}

}  // namespace

int overlap_size(const LocationMatrix& p, SensorSet gamma) {
  check_subset(p, gamma);
  const SensorSet lambda = all_sensors(p.sensors());
  if (gamma == lambda) return p.common_count();
  if (gamma == 0) return 0;
  int count = 0;
  for (int c : p.common()) {
    bool overlapped = true;
    for (int j = 0; j < p.sensors() && overlapped; ++j)
      if (!(gamma >> j & 1U)) overlapped = p.innovation_has(j, c);
    count += overlapped ? 1 : 0;
  }
  return count;
}

int conditional_sparsity(const LocationMatrix& p, SensorSet gamma) {
  int k = overlap_size(p, gamma);
  for (int j = 0; j < p.sensors(); ++j)
    if (gamma >> j & 1U) k += p.innovation_count(j);
  return k;
}

int joint_sparsity_subset(const LocationMatrix& p, SensorSet gamma) {
  check_subset(p, gamma);
  const SensorSet rest = all_sensors(p.sensors()) & ~gamma;
  int k = p.common_count() - overlap_size(p, rest);
  for (int j = 0; j < p.sensors(); ++j)
    if (gamma >> j & 1U) k += p.innovation_count(j);
  return k;
}

DependencyGraph build_graph(const LocationMatrix& p, const MeasurementAllocation& alloc) {
  if (alloc.sensors() != p.sensors()) throw std::invalid_argument("build_graph: allocation length differs from J");
  DependencyGraph g;
  g.value_count = p.columns();
  std::vector<int> first(static_cast<std::size_t>(p.sensors()) + 1, 0);
  for (int j = 0; j < p.sensors(); ++j) {
    first[static_cast<std::size_t>(j) + 1] = first[static_cast<std::size_t>(j)] + alloc[j];
    for (int m = 0; m < alloc[j]; ++m) g.measurement_vertices.emplace_back(j, m);
  }
  auto connect_sensor = [&](std::vector<int>& adj, int j) {
    for (int v = first[static_cast<std::size_t>(j)]; v < first[static_cast<std::size_t>(j) + 1]; ++v) adj.push_back(v);
  };
  for (int c : p.common()) {
    std::vector<int> adj;
    for (int j = 0; j < p.sensors(); ++j)
      if (!p.innovation_has(j, c)) connect_sensor(adj, j);
    g.adjacency.push_back(std::move(adj));
  }
  for (int j = 0; j < p.sensors(); ++j)
    for (int k = 0; k < p.innovation_count(j); ++k) {
      std::vector<int> adj;
      connect_sensor(adj, j);
      g.adjacency.push_back(std::move(adj));
    }
  return g;
}

namespace {

class Matcher {
 public:
  explicit Matcher(const DependencyGraph& g)
      : g_(g),
        value_match_(static_cast<std::size_t>(g.value_count), -1),
        meas_match_(g.measurement_vertices.size(), -1) {}

  // Kuhn's augmenting paths; returns the first value vertex left unmatched.
  int run() {
    for (int v = 0; v < g_.value_count; ++v) {
      seen_.assign(meas_match_.size(), 0);
      if (!augment(v)) return v;
    }
    return -1;
  }

  [[nodiscard]] const std::vector<int>& value_match() const { return value_match_; }

  // Value vertices reachable from `root` by alternating paths, and their neighbours.
  [[nodiscard]] HallViolation witness(int root) const {
    std::vector<char> in_pi(static_cast<std::size_t>(g_.value_count), 0);
    std::vector<char> in_nb(meas_match_.size(), 0);
    std::vector<int> stack{root};
    in_pi[static_cast<std::size_t>(root)] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int m : g_.adjacency[static_cast<std::size_t>(v)]) {
        if (in_nb[static_cast<std::size_t>(m)]) continue;
        in_nb[static_cast<std::size_t>(m)] = 1;
        const int w = meas_match_[static_cast<std::size_t>(m)];
        if (w >= 0 && !in_pi[static_cast<std::size_t>(w)]) {
          in_pi[static_cast<std::size_t>(w)] = 1;
          stack.push_back(w);
        }
      }
    }
    HallViolation out;
    for (int v = 0; v < g_.value_count; ++v)
      if (in_pi[static_cast<std::size_t>(v)]) out.values.push_back(v);
    for (std::size_t m = 0; m < in_nb.size(); ++m)
      if (in_nb[m]) out.neighbors.push_back(static_cast<int>(m));
    return out;
  }

 private:
  bool augment(int v) {
    for (int m : g_.adjacency[static_cast<std::size_t>(v)]) {
      if (seen_[static_cast<std::size_t>(m)]) continue;
      seen_[static_cast<std::size_t>(m)] = 1;
      const int w = meas_match_[static_cast<std::size_t>(m)];
      if (w < 0 || augment(w)) {
        meas_match_[static_cast<std::size_t>(m)] = v;
        value_match_[static_cast<std::size_t>(v)] = m;
        return true;
      }
    }
    return false;
  }

  const DependencyGraph& g_;
  std::vector<int> value_match_;
  std::vector<int> meas_match_;
  std::vector<char> seen_;
};

}  // namespace

std::variant<CommonAssignment, HallViolation> find_common_assignment(const LocationMatrix& p,
                                                                     const MeasurementAllocation& alloc) {
  const DependencyGraph g = build_graph(p, alloc);
  Matcher matcher(g);
  const int unmatched = matcher.run();
  if (unmatched >= 0) return matcher.witness(unmatched);
  CommonAssignment out;
  out.value_to_measurement = matcher.value_match();
  for (int d = 0; d < p.common_count(); ++d)
    out.sensor_of_common.push_back(
        g.measurement_vertices[static_cast<std::size_t>(out.value_to_measurement[static_cast<std::size_t>(d)])].first);
  return out;
}

bool check_theorem3(const LocationMatrix& p, const MeasurementAllocation& alloc) {
  return !check_converse(p, alloc).has_value();
}

bool check_theorem4(const LocationMatrix& p, const MeasurementAllocation& alloc) {
  check_enumerable(p, alloc);
  const SensorSet lambda = all_sensors(p.sensors());
  for (SensorSet g = 1; g <= lambda; ++g)
    if (alloc.total(g) < conditional_sparsity(p, g) + subset_size(g)) return false;
  return true;
}

std::optional<SensorSet> check_converse(const LocationMatrix& p, const MeasurementAllocation& alloc) {
  check_enumerable(p, alloc);
  const SensorSet lambda = all_sensors(p.sensors());
  for (SensorSet g = 0; g <= lambda; ++g)
    if (alloc.total(g) < conditional_sparsity(p, g)) return g;
  return std::nullopt;
}

int common_overlap(const SignalEnsemble& x) {
  int count = 0;
  for (int n : x.common_support()) {
    bool all = true;
    for (int j = 0; j < x.sensors() && all; ++j) all = x.innovation(j)[n] != 0.0;
    count += all ? 1 : 0;
  }
  return count;
}

bool corollary_bounds(JsmKind model, const SignalEnsemble& x, const MeasurementAllocation& alloc) {
  if (model == JsmKind::Jsm2) throw std::invalid_argument("corollary_bounds: JSM-2 has no common component");
  const Representation raw = representation_of(x, model);
  const Representation reduced = sparsity_reduce(raw.location, raw.values);
  check_enumerable(raw.location, alloc);
  const int J = x.sensors();
  const SensorSet lambda = all_sensors(J);
  for (SensorSet g = 0; g < lambda; ++g) {
    int need = overlap_size(reduced.location, g) + subset_size(g);
    for (int j = 0; j < J; ++j)
      if (g >> j & 1U) need += raw.location.innovation_count(j);
    if (alloc.total(g) < need) return false;
  }
  int total_need = raw.location.common_count() + J - common_overlap(x);
  for (int j = 0; j < J; ++j) total_need += raw.location.innovation_count(j);
  return alloc.total() >= total_need;
}

double c_of_s(double s) {
  if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("c_of_s: sparsity rate must lie in (0, 1]");
  return std::log2(1.0 + 1.0 / s);
}

double c_prime(double s) {
  if (s == 0.0) return 0.0;
  return s * c_of_s(s);
}

namespace {

void check_rates(double s_c, double s_i) {
  if (!(s_c >= 0.0 && s_c <= 1.0) || !(s_i >= 0.0 && s_i <= 1.0))
    throw std::invalid_argument("rate region: sparsity rates must lie in [0, 1]");
}

}  // namespace

RateBound conjecture1_region(double s_c, double s_i) {
  check_rates(s_c, s_i);
  RateBound r;
  r.individual = c_prime(s_i + s_c * s_i - s_c * s_i * s_i);
  r.sum = r.individual + c_prime(s_c + s_i - s_c * s_i);
  return r;
}

RateBound theorem6_region(double s_c, double s_i) {
  check_rates(s_c, s_i);
  RateBound r;
  r.individual = c_prime(2.0 * s_i - s_i * s_i);
  r.sum = r.individual + c_prime(s_c + 2.0 * s_i - 2.0 * s_c * s_i - s_i * s_i + s_c * s_i * s_i);
  return r;
}

std::vector<BoundsRow> bounds_table(const LocationMatrix& p, const MeasurementAllocation& alloc) {
  check_enumerable(p, alloc);
  std::vector<BoundsRow> rows;
  const SensorSet lambda = all_sensors(p.sensors());
  for (SensorSet g = 0; g <= lambda; ++g) {
    BoundsRow r;
    r.gamma = g;
    r.sum_m = alloc.total(g);
    r.k_cond = conditional_sparsity(p, g);
    r.thm3 = r.sum_m >= r.k_cond;
    r.thm4 = g == 0 || r.sum_m >= r.k_cond + subset_size(g);
    r.thm5 = r.thm3;
    rows.push_back(r);
  }
  return rows;
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundsRow>& rows) {
  auto flag = [](bool b) { return b ? "PASS" : "FAIL"; };
  out << "gamma_mask,sum_m,k_cond,thm3,thm4,thm5\n";
  for (const auto& r : rows)
    out << r.gamma << ',' << r.sum_m << ',' << r.k_cond << ',' << flag(r.thm3) << ',' << flag(r.thm4) << ','
        << flag(r.thm5) << '\n';
}

}  // namespace dcs
