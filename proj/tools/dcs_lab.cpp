// dcs-lab: command-line front end for the distributed compressive sensing library.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcs/bounds.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/experiments.hpp"
#include "dcs/recovery.hpp"

namespace {

constexpr int kSpecErrorExit = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_allocation(const std::string& text) {
  std::vector<int> m;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      m.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad measurement count '" + item + "'");
    }
  }
  if (m.empty()) throw UsageError("empty allocation");
  return m;
}

dcs::LoadedEnsemble load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open ensemble file '" + path + "'");
  try {
    return dcs::read_ensemble(in);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
}

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write '" + path + "'");
  return file;
}

int run_sweep_command(const std::string& spec_path, const std::string& mode, double target, const std::string& out_path) {
  dcs::ExperimentSpec spec;
  try {
    spec = dcs::parse_spec_file(spec_path);
  } catch (const dcs::SpecError& e) {
    std::cerr << "dcs-lab: spec error: " << e.what() << '\n';
    return kSpecErrorExit;
  }
  std::ofstream file;
  std::ostream& out = output(out_path, file);
  if (mode == "sweep") {
    const auto report = dcs::run_sweep(spec);
    for (const auto& line : report.log) std::cerr << "dcs-lab: " << line << '\n';
    dcs::write_sweep_csv(out, spec, report);
  } else if (mode == "min") {
    out << "J,alpha,gammaC,min_M1,prob\n";
    for (const auto& mm : dcs::min_measurements(spec, target))
      out << mm.j << ',' << dcs::format_double(mm.alpha) << ',' << dcs::format_double(mm.gamma_c) << ','
          << (mm.m1 ? std::to_string(*mm.m1) : "NOT-FOUND") << ',' << dcs::format_double(mm.probability) << '\n';
  } else if (mode == "gamma") {
    const auto search = dcs::gamma_line_search(spec);
    out << "gammaC,prob\n";
    for (const auto& [g, p] : search.curve) out << dcs::format_double(g) << ',' << dcs::format_double(p) << '\n';
    std::cerr << "dcs-lab: best gammaC = " << dcs::format_double(search.best) << '\n';
  } else if (mode == "region") {
    dcs::write_rate_region_csv(out, dcs::rate_region_sweep(spec));
  }
  return 0;
}

int run_bounds_command(const std::string& path, const std::string& alloc_text) {
  const auto loaded = load(path);
  const dcs::MeasurementAllocation alloc(parse_allocation(alloc_text));
  if (alloc.sensors() != loaded.ensemble.sensors()) throw UsageError("allocation length differs from J");
  const auto rep = dcs::representation_of(loaded.ensemble, loaded.model);
  const auto reduced = dcs::sparsity_reduce(rep.location, rep.values);
  dcs::write_bounds_csv(std::cout, dcs::bounds_table(reduced.location, alloc));
  return 0;
}

struct RecoverArgs {
  std::string model;
  std::string algo;
  std::string ensemble;
  std::string alloc;
  std::uint64_t seed = 0;
  int k = -1;
  double gamma_c = 1.0;
  double gamma_i = 1.0;
  int bound = dcs::kCrossValMaxColumns;
  int shared = -1;
  int iterations = 10;
  double threshold = dcs::kSuccessThreshold;
};

int run_recover_command(const RecoverArgs& a) {
  const auto loaded = load(a.ensemble);
  const dcs::JsmKind model = [&] {
    try {
      return dcs::parse_jsm_kind(a.model);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  const dcs::SignalEnsemble& x = loaded.ensemble;
  const dcs::MeasurementAllocation alloc(parse_allocation(a.alloc));
  if (alloc.sensors() != x.sensors()) throw UsageError("allocation length differs from J");

  auto need_k = [&] {
    if (a.k < 0) throw UsageError("--k is required for algorithm '" + a.algo + "'");
    return a.k;
  };
  dcs::RecoveryResult r;
  const std::string& algo = a.algo;
  if (algo == "two-stage") {
    if (x.sensors() != 2) throw UsageError("two-stage needs exactly two sensors");
    dcs::TwoStageSplit split;
    split.shared = a.shared >= 0 ? a.shared : std::min(alloc[0], alloc[1]) / 2;
    split.own_1 = alloc[0] - split.shared;
    split.own_2 = alloc[1] - split.shared;
    if (split.own_1 < 0 || split.own_2 < 0) throw UsageError("--shared exceeds a sensor's measurement count");
    r = dcs::jsm1_two_stage_recover(dcs::measure_two_stage(x, split, a.seed));
  } else {
    const auto y = dcs::measure(x, alloc, {1.0}, a.seed);
    if (algo == "crossval") {
      r = dcs::crossval_recover(y, model, a.bound);
    } else if (algo == "gamma-l1") {
      std::vector<double> g(static_cast<std::size_t>(x.sensors()) + 1, a.gamma_i);
      g[0] = a.gamma_c;
      r = dcs::jsm1_gamma_recover(y, g);
    } else if (algo == "tp") {
      r = dcs::tp_recover(y, need_k());
    } else if (algo == "dcs-somp") {
      r = dcs::dcs_somp(y);
    } else if (algo == "tecc") {
      r = dcs::tecc(y, {need_k()});
    } else if (algo == "acie") {
      dcs::AcieOptions o;
      o.k = need_k();
      o.iterations = a.iterations;
      o.support = model == dcs::JsmKind::Jsm3CommonSupport ? dcs::SupportMethod::Somp : dcs::SupportMethod::Omp;
      r = dcs::acie(y, o);
    } else if (algo == "separate-l1") {
      r = dcs::separate_recover(y, dcs::SeparateMethod::L1, a.k);
    } else if (algo == "separate-omp") {
      r = dcs::separate_recover(y, dcs::SeparateMethod::Omp, a.k);
    } else if (algo == "separate-l0") {
      r = dcs::separate_recover(y, dcs::SeparateMethod::L0, a.k);
    } else {
      throw UsageError("unknown algorithm '" + algo + "'");
    }
  }
  dcs::score(r, x, a.threshold);
  double worst = 0.0;
  for (double e : r.per_signal_rel_error) worst = std::max(worst, e);
  std::string m_field;
  for (int j = 0; j < alloc.sensors(); ++j) m_field += (j ? ";" : "") + std::to_string(alloc[j]);
  std::cout << "model,algo,N,J,M,success,max_rel_error,ambiguous,flagged,iterations\n";
  std::cout << a.model << ',' << algo << ',' << x.n() << ',' << x.sensors() << ',' << m_field << ','
            << (r.success ? 1 : 0) << ',' << dcs::format_double(worst) << ',' << (r.diagnostics.ambiguous ? 1 : 0)
            << ',' << (r.diagnostics.flagged ? 1 : 0) << ',' << r.diagnostics.iterations << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed compressive sensing laboratory"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string sweep_mode = "sweep";
  double target = 0.95;
  std::string out_path;
  auto* sweep = app.add_subcommand("sweep", "Run a Monte Carlo sweep described by a spec file");
  sweep->add_option("--spec", spec_path, "key = value experiment spec")->required();
  sweep->add_option("--mode", sweep_mode, "sweep | min | gamma | region")
      ->check(CLI::IsMember({"sweep", "min", "gamma", "region"}));
  sweep->add_option("--target", target, "success probability for --mode min");
  sweep->add_option("--out", out_path, "output CSV (default stdout)");

  std::string ensemble_path;
  std::string alloc_text;
  auto* bounds = app.add_subcommand("bounds", "Evaluate the measurement-bound conditions for every sensor subset");
  bounds->add_option("--ensemble", ensemble_path, "serialized ensemble")->required();
  bounds->add_option("--m", alloc_text, "measurements per sensor, comma separated")->required();

  RecoverArgs rec;
  auto* recover = app.add_subcommand("recover", "Measure a serialized ensemble and run one recovery algorithm");
  recover->add_option("--model", rec.model, "jsm1 | jsm2 | jsm3 | jsm3cs")->required();
  recover->add_option("--algo", rec.algo,
                      "crossval | gamma-l1 | two-stage | tp | dcs-somp | tecc | acie | separate-l1 | separate-omp | "
                      "separate-l0")
      ->required();
  recover->add_option("--ensemble", rec.ensemble, "serialized ensemble")->required();
  recover->add_option("--m", rec.alloc, "measurements per sensor, comma separated")->required();
  recover->add_option("--seed", rec.seed, "measurement seed");
  recover->add_option("--k", rec.k, "innovation sparsity, iteration count or search depth");
  recover->add_option("--gamma-c", rec.gamma_c, "common-component weight (gamma-l1)");
  recover->add_option("--gamma-i", rec.gamma_i, "innovation weight (gamma-l1)");
  recover->add_option("--bound", rec.bound, "column bound (crossval)");
  recover->add_option("--shared", rec.shared, "shared rows (two-stage)");
  recover->add_option("--iterations", rec.iterations, "ACIE iterations");
  recover->add_option("--threshold", rec.threshold, "relative error counted as success");

  std::string gen_model = "jsm1";
  std::string gen_mode = "fixed";
  int gen_n = 50;
  int gen_j = 2;
  int gen_kc = 0;
  int gen_ki = 0;
  double gen_sc = 0.0;
  double gen_si = 0.0;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "Draw a random ensemble and write it in the text format");
  gen->add_option("--model", gen_model, "jsm1 | jsm2 | jsm3 | jsm3cs");
  gen->add_option("--sparsity", gen_mode, "fixed | rate")->check(CLI::IsMember({"fixed", "rate"}));
  gen->add_option("--n", gen_n, "signal length");
  gen->add_option("--j", gen_j, "number of sensors");
  gen->add_option("--kc", gen_kc, "common sparsity (fixed)");
  gen->add_option("--ki", gen_ki, "innovation sparsity (fixed)");
  gen->add_option("--sc", gen_sc, "common rate (rate)");
  gen->add_option("--si", gen_si, "innovation rate (rate)");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kSpecErrorExit;
  }

  try {
    if (*sweep) return run_sweep_command(spec_path, sweep_mode, target, out_path);
    if (*bounds) return run_bounds_command(ensemble_path, alloc_text);
    if (*recover) return run_recover_command(rec);
    if (*gen) {
      dcs::StochasticModel s;
      s.mode = gen_mode == "rate" ? dcs::SparsityMode::Rate : dcs::SparsityMode::Fixed;
      s.k_c = gen_kc;
      s.k_j = {gen_ki};
      s.s_c = gen_sc;
      s.s_j = {gen_si};
      s.seed = gen_seed;
      dcs::JsmKind model;
      try {
        model = dcs::parse_jsm_kind(gen_model);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      dcs::SignalEnsemble x = [&] {
        try {
          return dcs::generate(model, s, gen_n, gen_j);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }();
      std::ofstream file;
      dcs::write_ensemble(output(out_path, file), x, model);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "dcs-lab: " << e.what() << '\n';
    return kSpecErrorExit;
  } catch (const std::exception& e) {
    std::cerr << "dcs-lab: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
