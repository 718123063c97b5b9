#include "dcs/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "dcs/bounds.hpp"
#include "dcs/random.hpp"

namespace dcs {

namespace {

struct AlgorithmName {
  Algorithm algo;
  std::string_view name;
};

constexpr AlgorithmName kAlgorithmNames[] = {
    {Algorithm::CrossVal, "crossval"},       {Algorithm::GammaL1, "gamma-l1"},
    {Algorithm::TwoStage, "two-stage"},      {Algorithm::Tp, "tp"},
    {Algorithm::DcsSomp, "dcs-somp"},        {Algorithm::Tecc, "tecc"},
    {Algorithm::Acie, "acie"},               {Algorithm::SeparateL1, "separate-l1"},
    {Algorithm::SeparateOmp, "separate-omp"}, {Algorithm::SeparateL0, "separate-l0"},
};

}  // namespace

std::string_view to_string(Algorithm algo) {
  for (const auto& a : kAlgorithmNames)
    if (a.algo == algo) return a.name;
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  for (const auto& a : kAlgorithmNames)
    if (a.name == text) return a.algo;
  throw std::invalid_argument("unknown algorithm '" + std::string(text) + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw SpecError("spec key '" + key + "': cannot parse '" + text + "'");
  return value;
}

std::vector<int> parse_int_grid(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    if (item.find(':') == std::string::npos) {
      out.push_back(parse_number<int>(key, item));
      continue;
    }
    const auto parts = split(item, ':');
    if (parts.size() < 2 || parts.size() > 3) throw SpecError("spec key '" + key + "': bad range '" + item + "'");
    const int lo = parse_number<int>(key, parts[0]);
    const int hi = parse_number<int>(key, parts[1]);
    const int step = parts.size() == 3 ? parse_number<int>(key, parts[2]) : 1;
    if (step <= 0 || hi < lo) throw SpecError("spec key '" + key + "': bad range '" + item + "'");
    for (int v = lo; v <= hi; v += step) out.push_back(v);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<double>(key, item));
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw SpecError("spec key '" + key + "': expected true or false");
}

}  // namespace

void ExperimentSpec::validate() const {
  if (n < 1) throw SpecError("n must be positive");
  if (j_list.empty()) throw SpecError("j grid is empty");
  if (m_grid.empty()) throw SpecError("m grid is empty");
  if (alpha.empty()) throw SpecError("alpha list is empty");
  if (gamma_c.empty()) throw SpecError("gamma_c grid is empty");
  if (trials < 1) throw SpecError("trials must be at least 1");
  for (int j : j_list)
    if (j < 1) throw SpecError("every J must be positive");
  for (int m : m_grid)
    if (m < 0) throw SpecError("measurement counts must be nonnegative");
  for (double a : alpha)
    if (!(a > 0.0)) throw SpecError("alpha must be positive");
  for (double g : gamma_c)
    if (!(g > 0.0)) throw SpecError("gamma_c must be positive");
  if (!(gamma_i > 0.0)) throw SpecError("gamma_i must be positive");
  if (!(threshold > 0.0)) throw SpecError("threshold must be positive");
  if (!(coefficient_std > 0.0) || !(sigma > 0.0)) throw SpecError("standard deviations must be positive");
  if (sparsity == SparsityMode::Fixed) {
    if (k_c < 0 || k_c > n || k_i < 0 || k_i > n) throw SpecError("sparsities must lie in [0, n]");
  } else {
    if (s_c < 0.0 || s_c > 1.0 || s_i < 0.0 || s_i > 1.0) throw SpecError("rates must lie in [0, 1]");
    if (algorithm == Algorithm::Tp || algorithm == Algorithm::Tecc || algorithm == Algorithm::Acie)
      throw SpecError("this algorithm needs an exact innovation sparsity (sparsity = fixed)");
  }
  if (algorithm == Algorithm::TwoStage) {
    for (int j : j_list)
      if (j != 2) throw SpecError("two-stage needs j = 2");
    if (shared_fraction < 0.0 || shared_fraction > 1.0) throw SpecError("shared_fraction must lie in [0, 1]");
  }
  if (acie_iterations < 1) throw SpecError("acie_iterations must be positive");
  if (threads < 0) throw SpecError("threads must be nonnegative");
}

ExperimentSpec parse_spec(std::istream& in) {
  ExperimentSpec s;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw SpecError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (value.empty()) throw SpecError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
    try {
      if (key == "model") {
        s.model = parse_jsm_kind(value);
      } else if (key == "algo" || key == "algorithm") {
        s.algorithm = parse_algorithm(value);
      } else if (key == "n") {
        s.n = parse_number<int>(key, value);
      } else if (key == "j") {
        s.j_list = parse_int_grid(key, value);
      } else if (key == "sparsity") {
        if (value == "fixed")
          s.sparsity = SparsityMode::Fixed;
        else if (value == "rate")
          s.sparsity = SparsityMode::Rate;
        else
          throw SpecError("sparsity must be fixed or rate");
      } else if (key == "kc") {
        s.k_c = parse_number<int>(key, value);
      } else if (key == "ki") {
        s.k_i = parse_number<int>(key, value);
      } else if (key == "sc") {
        s.s_c = parse_number<double>(key, value);
      } else if (key == "si") {
        s.s_i = parse_number<double>(key, value);
      } else if (key == "coefficient_std") {
        s.coefficient_std = parse_number<double>(key, value);
      } else if (key == "sigma") {
        s.sigma = parse_number<double>(key, value);
      } else if (key == "m") {
        s.m_grid = parse_int_grid(key, value);
      } else if (key == "alpha") {
        s.alpha = parse_double_list(key, value);
      } else if (key == "trials") {
        s.trials = parse_number<int>(key, value);
      } else if (key == "seed") {
        s.seed = parse_number<std::uint64_t>(key, value);
      } else if (key == "threshold") {
        s.threshold = parse_number<double>(key, value);
      } else if (key == "gamma_c") {
        s.gamma_c = parse_double_list(key, value);
      } else if (key == "gamma_i") {
        s.gamma_i = parse_number<double>(key, value);
      } else if (key == "acie_iterations") {
        s.acie_iterations = parse_number<int>(key, value);
      } else if (key == "support") {
        if (value == "omp")
          s.support = SupportMethod::Omp;
        else if (value == "somp")
          s.support = SupportMethod::Somp;
        else
          throw SpecError("support must be omp or somp");
      } else if (key == "somp_epsilon") {
        s.somp_epsilon = parse_number<double>(key, value);
      } else if (key == "shared_fraction") {
        s.shared_fraction = parse_number<double>(key, value);
      } else if (key == "crossval_bound") {
        s.crossval_bound = parse_number<int>(key, value);
      } else if (key == "seed_mode") {
        if (value == "cell")
          s.seed_mode = SeedMode::PerCell;
        else if (value == "common")
          s.seed_mode = SeedMode::Common;
        else
          throw SpecError("seed_mode must be cell or common");
      } else if (key == "record_time") {
        s.record_time = parse_bool(key, value);
      } else if (key == "threads") {
        s.threads = parse_number<int>(key, value);
      } else {
        throw SpecError("unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw SpecError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const SpecError& e) {
      throw SpecError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  s.validate();
  return s;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  return parse_spec(in);
}

// ---------------------------------------------------------------------------
// Trials

std::vector<CellParams> enumerate_cells(const ExperimentSpec& spec) {
  std::vector<CellParams> cells;
  for (int j : spec.j_list)
    for (double a : spec.alpha)
      for (double g : spec.gamma_c)
        for (int m : spec.m_grid) {
          CellParams c;
          c.j = j;
          c.m1 = m;
          c.m2 = static_cast<int>(std::lround(a * m));
          c.alpha = a;
          c.gamma_c = g;
          cells.push_back(c);
        }
  return cells;
}

std::uint64_t trial_seed(const ExperimentSpec& spec, std::size_t cell, int trial) {
  if (spec.seed_mode == SeedMode::Common) return derive_seed(spec.seed, {static_cast<std::uint64_t>(trial)});
  return derive_seed(spec.seed, {static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(trial)});
}

RecoveryResult run_trial(const ExperimentSpec& spec, const CellParams& cell, std::uint64_t seed) {
  StochasticModel stoch;
  stoch.mode = spec.sparsity;
  stoch.s_c = spec.s_c;
  stoch.s_j = {spec.s_i};
  stoch.k_c = spec.k_c;
  stoch.k_j = {spec.k_i};
  stoch.coefficient_std = spec.coefficient_std;
  stoch.seed = derive_seed(seed, {1});
  const SignalEnsemble x = generate(spec.model, stoch, spec.n, cell.j);

  const std::uint64_t mseed = derive_seed(seed, {2});
  MeasurementEnsemble y;
  if (spec.algorithm == Algorithm::TwoStage) {
    TwoStageSplit split;
    split.shared = static_cast<int>(std::lround(spec.shared_fraction * std::min(cell.m1, cell.m2)));
    split.own_1 = cell.m1 - split.shared;
    split.own_2 = cell.m2 - split.shared;
    y = measure_two_stage(x, split, mseed);
  } else {
    std::vector<int> m(static_cast<std::size_t>(cell.j), cell.m2);
    m[0] = cell.m1;
    y = measure(x, MeasurementAllocation(std::move(m)), {spec.sigma}, mseed);
  }

  RecoveryResult r;
  switch (spec.algorithm) {
    case Algorithm::CrossVal: r = crossval_recover(y, spec.model, spec.crossval_bound); break;
    case Algorithm::GammaL1: {
      std::vector<double> g(static_cast<std::size_t>(cell.j) + 1, spec.gamma_i);
      g[0] = cell.gamma_c;
      r = jsm1_gamma_recover(y, g);
      break;
    }
    case Algorithm::TwoStage: r = jsm1_two_stage_recover(y); break;
    case Algorithm::Tp: r = tp_recover(y, spec.k_i); break;
    case Algorithm::DcsSomp: {
      SompOptions o;
      o.epsilon = spec.somp_epsilon;
      r = dcs_somp(y, o);
      break;
    }
    case Algorithm::Tecc: r = tecc(y, {spec.k_i}); break;
    case Algorithm::Acie: {
      AcieOptions o;
      o.k = spec.k_i;
      o.iterations = spec.acie_iterations;
      o.support = spec.support;
      r = acie(y, o);
      break;
    }
    case Algorithm::SeparateL1: r = separate_recover(y, SeparateMethod::L1); break;
    case Algorithm::SeparateOmp: r = separate_recover(y, SeparateMethod::Omp); break;
    case Algorithm::SeparateL0: r = separate_recover(y, SeparateMethod::L0); break;
  }
  score(r, x, spec.threshold);
  return r;
}

CellReport evaluate_cell(const ExperimentSpec& spec, std::size_t index, const CellParams& cell,
                         std::vector<std::string>* log) {
  const int trials = spec.trials;
  std::vector<char> success(static_cast<std::size_t>(trials), 0);
  std::vector<std::string> error(static_cast<std::size_t>(trials));
  std::vector<double> seconds(static_cast<std::size_t>(trials), 0.0);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) {
      const auto start = std::chrono::steady_clock::now();
      try {
        success[static_cast<std::size_t>(t)] = run_trial(spec, cell, trial_seed(spec, index, t)).success ? 1 : 0;
      } catch (const std::exception& e) {
        error[static_cast<std::size_t>(t)] = e.what();
      }
      if (spec.record_time)
        seconds[static_cast<std::size_t>(t)] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  unsigned workers = spec.threads > 0 ? static_cast<unsigned>(spec.threads) : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1U, static_cast<unsigned>(trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CellReport report;
  report.index = index;
  report.params = cell;
  report.trials = trials;
  for (int t = 0; t < trials; ++t) {
    report.successes += success[static_cast<std::size_t>(t)];
    report.seconds += seconds[static_cast<std::size_t>(t)];
    if (!error[static_cast<std::size_t>(t)].empty()) {
      ++report.errors;
      if (log)
        log->push_back("cell " + std::to_string(index) + " trial " + std::to_string(t) + ": " +
                       error[static_cast<std::size_t>(t)]);
    }
  }
  report.probability = static_cast<double>(report.successes) / trials;
  return report;
}

SweepReport run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  SweepReport report;
  const auto cells = enumerate_cells(spec);
  for (std::size_t i = 0; i < cells.size(); ++i) report.cells.push_back(evaluate_cell(spec, i, cells[i], &report.log));
  return report;
}

void write_sweep_csv(std::ostream& out, const ExperimentSpec& spec, const SweepReport& report) {
  const bool fixed = spec.sparsity == SparsityMode::Fixed;
  const std::string kc = fixed ? std::to_string(spec.k_c) : format_double(spec.s_c);
  const std::string ki = fixed ? std::to_string(spec.k_i) : format_double(spec.s_i);
  out << "model,algo,N,J,Kc,Ki,M1,M2,alpha,gammaC,trials,successes,prob,sec\n";
  for (const auto& c : report.cells) {
    out << to_string(spec.model) << ',' << to_string(spec.algorithm) << ',' << spec.n << ',' << c.params.j << ','
        << kc << ',' << ki << ',' << c.params.m1 << ',' << c.params.m2 << ',' << format_double(c.params.alpha) << ','
        << format_double(c.params.gamma_c) << ',' << c.trials << ',' << c.successes << ','
        << format_double(c.probability) << ',' << format_double(spec.record_time ? c.seconds : 0.0) << '\n';
  }
}

std::vector<MinMeasurement> min_measurements(const ExperimentSpec& spec, double target) {
  spec.validate();
  const auto cells = enumerate_cells(spec);
  const std::size_t run = spec.m_grid.size();
  std::vector<MinMeasurement> out;
  for (std::size_t start = 0; start < cells.size(); start += run) {
    MinMeasurement mm;
    mm.j = cells[start].j;
    mm.alpha = cells[start].alpha;
    mm.gamma_c = cells[start].gamma_c;
    // Upward scan in M1 order, independent of the order m was written in.
    std::vector<std::size_t> order(run);
    for (std::size_t i = 0; i < run; ++i) order[i] = start + i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a].m1 < cells[b].m1; });
    for (std::size_t idx : order) {
      const CellReport r = evaluate_cell(spec, idx, cells[idx]);
      if (r.probability >= target) {
        mm.m1 = cells[idx].m1;
        mm.probability = r.probability;
        break;
      }
    }
    out.push_back(mm);
  }
  return out;
}

GammaSearch gamma_line_search(const ExperimentSpec& spec) {
  const SweepReport report = run_sweep(spec);
  std::map<double, std::pair<long, long>> pooled;
  for (const auto& c : report.cells) {
    auto& p = pooled[c.params.gamma_c];
    p.first += c.successes;
    p.second += c.trials;
  }
  GammaSearch out;
  double best_p = -1.0;
  for (const auto& [g, p] : pooled) {
    const double prob = static_cast<double>(p.first) / static_cast<double>(p.second);
    out.curve.emplace_back(g, prob);
    if (prob > best_p) {
      best_p = prob;
      out.best = g;
    }
  }
  return out;
}

namespace {

// Point where the ray R2 = alpha R1 meets the region boundary.
std::pair<double, double> boundary_on_ray(const RateBound& b, double alpha) {
  const double r1 = std::max({b.individual, b.individual / alpha, b.sum / (1.0 + alpha)});
  return {r1, alpha * r1};
}

}  // namespace

std::vector<RateRegionRow> rate_region_sweep(const ExperimentSpec& spec) {
  const auto mins = min_measurements(spec, 1.0);
  std::vector<RateRegionRow> rows;
  const double n = spec.n;
  for (double a : spec.alpha) {
    RateRegionRow row;
    row.kind = "empirical";
    row.alpha = a;
    for (const auto& mm : mins)
      if (mm.alpha == a && mm.m1 && (!row.m1 || *mm.m1 < *row.m1)) row.m1 = mm.m1;
    if (row.m1) {
      row.m2 = static_cast<int>(std::lround(a * *row.m1));
      row.r1 = *row.m1 / n;
      row.r2 = *row.m2 / n;
    } else {
      row.r1 = row.r2 = std::nan("");
    }
    rows.push_back(row);
  }
  const RateBound conj = conjecture1_region(spec.s_c, spec.s_i);
  const RateBound ach = theorem6_region(spec.s_c, spec.s_i);
  for (const auto& [kind, bound] : {std::pair{"conjecture1", conj}, std::pair{"theorem6", ach}})
    for (double a : spec.alpha) {
      RateRegionRow row;
      row.kind = kind;
      row.alpha = a;
      std::tie(row.r1, row.r2) = boundary_on_ray(bound, a);
      rows.push_back(row);
    }
  return rows;
}

void write_rate_region_csv(std::ostream& out, const std::vector<RateRegionRow>& rows) {
  out << "kind,alpha,M1,M2,R1,R2\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << format_double(r.alpha) << ',' << (r.m1 ? std::to_string(*r.m1) : "") << ','
        << (r.m2 ? std::to_string(*r.m2) : "") << ',' << (std::isnan(r.r1) ? "" : format_double(r.r1)) << ','
        << (std::isnan(r.r2) ? "" : format_double(r.r2)) << '\n';
  }
}

}  // namespace dcs
