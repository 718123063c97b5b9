#include <doctest.h>

#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "dcs/ensemble.hpp"
#include "dcs/random.hpp"

using namespace dcs;

namespace {

// Independent assembler: [1_J (x) I_C | blockdiag(I_{P_1}, ..., I_{P_J})].
Matrix kron_location(const LocationMatrix& p) {
  const int n = p.n();
  const int J = p.sensors();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix common(n, p.common_count());
  for (int k = 0; k < p.common_count(); ++k) common.col(k) = eye.col(p.common()[static_cast<std::size_t>(k)]);
  Matrix left = Eigen::kroneckerProduct(Matrix::Ones(J, 1), common).eval();
  int inn = 0;
  for (int j = 0; j < J; ++j) inn += p.innovation_count(j);
  Matrix right = Matrix::Zero(J * n, inn);
  int col = 0;
  for (int j = 0; j < J; ++j) {
    Matrix e = Matrix::Zero(J, J);
    e(j, j) = 1.0;
    Matrix block(n, p.innovation_count(j));
    for (int k = 0; k < p.innovation_count(j); ++k) block.col(k) = eye.col(p.innovation(j)[static_cast<std::size_t>(k)]);
    Matrix placed = Eigen::kroneckerProduct(e.col(j), block).eval();
    right.middleCols(col, block.cols()) = placed;
    col += static_cast<int>(block.cols());
  }
  Matrix out(J * n, p.columns());
  out << left, right;
  return out;
}

LocationMatrix example_location() { return LocationMatrix(2, {0}, {{0}, {0}}); }

ValueVector values(std::vector<double> c, std::vector<std::vector<double>> inn) {
  ValueVector v;
  v.theta_c = Eigen::Map<Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  for (auto& t : inn) v.theta_j.push_back(Eigen::Map<Vector>(t.data(), static_cast<Eigen::Index>(t.size())));
  return v;
}

bool same_signals(const SignalEnsemble& a, const SignalEnsemble& b) {
  if (a.sensors() != b.sensors() || a.n() != b.n()) return false;
  for (int j = 0; j < a.sensors(); ++j)
    for (int i = 0; i < a.n(); ++i)
      if (a.signal(j)[i] != b.signal(j)[i]) return false;
  return true;
}

// Random location matrix with deliberate overlaps and optional zero values.
Representation random_representation(Rng& rng, int n, int J, bool allow_zero) {
  std::bernoulli_distribution coin(0.4);
  std::uniform_int_distribution<int> small(-2, 2);
  std::vector<int> common;
  std::vector<std::vector<int>> inn(static_cast<std::size_t>(J));
  for (int i = 0; i < n; ++i) {
    if (coin(rng)) common.push_back(i);
    for (int j = 0; j < J; ++j)
      if (coin(rng)) inn[static_cast<std::size_t>(j)].push_back(i);
  }
  LocationMatrix p(n, common, inn);
  auto draw = [&] {
    double v = small(rng);
    if (!allow_zero && v == 0.0) v = 3.0;
    return v;
  };
  ValueVector theta;
  theta.theta_c = Vector(p.common_count());
  for (auto& v : theta.theta_c) v = draw();
  for (int j = 0; j < J; ++j) {
    Vector t(p.innovation_count(j));
    for (auto& v : t) v = draw();
    theta.theta_j.push_back(t);
  }
  return {p, theta};
}

// Minimum column count over every admissible P that reproduces X exactly.
int brute_force_joint_sparsity(const SignalEnsemble& x, JsmKind model) {
  const int n = x.n();
  const int J = x.sensors();
  const int slots = (J + 1) * n;
  int best = slots + 1;
  const Vector target = x.stacked();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots); ++mask) {
    std::vector<int> common;
    std::vector<std::vector<int>> inn(static_cast<std::size_t>(J));
    for (int s = 0; s < slots; ++s)
      if (mask >> s & 1U) {
        if (s < n)
          common.push_back(s);
        else
          inn[static_cast<std::size_t>(s / n - 1)].push_back(s % n);
      }
    if (model == JsmKind::Jsm2) {
      if (!common.empty()) continue;
      bool same = true;
      for (int j = 1; j < J; ++j) same = same && inn[static_cast<std::size_t>(j)] == inn[0];
      if (!same) continue;
    }
    if (model == JsmKind::Jsm3 && static_cast<int>(common.size()) != n) continue;
    const LocationMatrix p(n, common, inn);
    if (p.columns() >= best) continue;
    const Matrix dense = realize_location_matrix(p);
    Vector theta = dense.cols() == 0 ? Vector(0) : Vector(dense.completeOrthogonalDecomposition().solve(target));
    const Vector fit = dense.cols() == 0 ? Vector::Zero(target.size()) : Vector(dense * theta);
    if ((fit - target).norm() <= 1e-12) best = p.columns();
  }
  return best;
}

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("location matrix realizes the printed two-sensor example") {
    Matrix expect(4, 3);
    expect << 1, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0;
    CHECK(realize_location_matrix(example_location()) == expect);
  }

  TEST_CASE("single innovation column") {
    const Matrix p = realize_location_matrix(LocationMatrix(3, {}, {{1}}));
    REQUIRE(p.rows() == 3);
    REQUIRE(p.cols() == 1);
    CHECK(p(1, 0) == 1.0);
    CHECK(p.sum() == 1.0);
  }

  TEST_CASE("dense layout agrees with a Kronecker assembler") {
    const LocationMatrix p(4, {0, 2}, {{1}, {}, {3}});
    CHECK(p.columns() == 4);
    const Matrix dense = realize_location_matrix(p);
    CHECK(dense.rows() == 12);
    CHECK(dense == kron_location(p));
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
      const auto rep = random_representation(rng, 5, 3, true);
      CHECK(realize_location_matrix(rep.location) == kron_location(rep.location));
    }
  }

  TEST_CASE("location matrix validates its blocks") {
    CHECK_THROWS_AS(LocationMatrix(3, {3}, {{}}), std::invalid_argument);
    CHECK_THROWS_AS(LocationMatrix(3, {-1}, {{}}), std::invalid_argument);
    CHECK_THROWS_AS(LocationMatrix(3, {1, 1}, {{}}), std::invalid_argument);
    CHECK_THROWS_AS(LocationMatrix(3, {}, {{2, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(LocationMatrix(3, {}, {}), std::invalid_argument);
  }

  TEST_CASE("synthesize multiplies P by theta") {
    const auto x = synthesize(example_location(), values({1}, {{1}, {1}}));
    CHECK(x.signal(0) == Vector::Unit(2, 0) * 2.0);
    CHECK(x.signal(1) == Vector::Unit(2, 0) * 2.0);

    const auto zero = synthesize(example_location(), values({0}, {{0}, {0}}));
    CHECK(zero.signal(0).isZero(0));
    CHECK(zero.signal(1).isZero(0));

    const auto pure = synthesize(LocationMatrix(2, {1}, {{}, {}}), values({5}, {{}, {}}));
    CHECK(pure.signal(0) == Vector::Unit(2, 1) * 5.0);
    CHECK(pure.signal(1) == Vector::Unit(2, 1) * 5.0);

    const auto rep = synthesize(LocationMatrix(4, {0, 2}, {{1}, {}, {3}}), values({1, 2}, {{3}, {}, {4}}));
    const Matrix dense = realize_location_matrix(LocationMatrix(4, {0, 2}, {{1}, {}, {3}}));
    Vector theta(4);
    theta << 1, 2, 3, 4;
    CHECK(rep.stacked() == dense * theta);
  }

  TEST_CASE("synthesize rejects mismatched values") {
    CHECK_THROWS_AS(synthesize(example_location(), values({1, 2}, {{1}, {1}})), std::invalid_argument);
    CHECK_THROWS_AS(synthesize(example_location(), values({1}, {{1}})), std::invalid_argument);
    CHECK_THROWS_AS(synthesize(example_location(), values({1}, {{1, 2}, {1}})), std::invalid_argument);
  }

  TEST_CASE("components add up to the signals") {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
      const auto rep = random_representation(rng, 6, 3, true);
      const auto x = synthesize(rep.location, rep.values);
      for (int j = 0; j < 3; ++j) CHECK((x.signal(j) - x.common_component() - x.innovation(j)).isZero(0));
    }
  }

  TEST_CASE("sparsity reduction of the printed example leaves two columns") {
    const auto theta = values({1.0}, {{0.5}, {-2.0}});
    const auto reduced = sparsity_reduce(example_location(), theta);
    CHECK(reduced.location.columns() == 2);
    CHECK(same_signals(synthesize(reduced.location, reduced.values), synthesize(example_location(), theta)));
  }

  TEST_CASE("equal values at a shared index collapse to the common column") {
    // theta = (1, 1, 1) gives x_1 = x_2 = (2, 0), which one common column reproduces.
    const auto reduced = sparsity_reduce(example_location(), values({1}, {{1}, {1}}));
    CHECK(reduced.location == LocationMatrix(2, {0}, {{}, {}}));
    CHECK(reduced.values.theta_c[0] == 2.0);
  }

  TEST_CASE("zero-valued entries are dropped") {
    const LocationMatrix p(3, {0}, {{1, 2}, {2}});
    const auto reduced = sparsity_reduce(p, values({1}, {{0, 4}, {5}}));
    CHECK(reduced.location == LocationMatrix(3, {0}, {{2}, {2}}));
  }

  TEST_CASE("common-support JSM-3 reduces to N + (J-1)K") {
    StochasticModel s;
    s.mode = SparsityMode::Fixed;
    s.k_j = {2};
    s.seed = 11;
    const auto x = generate(JsmKind::Jsm3CommonSupport, s, 6, 3);
    const auto rep = representation_of(x, JsmKind::Jsm3CommonSupport);
    CHECK(rep.location.columns() == 6 + 3 * 2);
    CHECK(sparsity_reduce(rep.location, rep.values).location.columns() == 10);
    CHECK(joint_sparsity(x, JsmKind::Jsm3CommonSupport) == 10);
  }

  TEST_CASE("sparsity reduction preserves X bitwise and reaches a fixed point") {
    Rng rng(21);
    for (int t = 0; t < 300; ++t) {
      const auto rep = random_representation(rng, 5, 1 + t % 3, true);
      const auto reduced = sparsity_reduce(rep.location, rep.values);
      CHECK(same_signals(synthesize(reduced.location, reduced.values), synthesize(rep.location, rep.values)));
      CHECK(reduced.location.columns() <= rep.location.columns());
      const auto again = sparsity_reduce(reduced.location, reduced.values);
      CHECK(again.location == reduced.location);
    }
  }

  TEST_CASE("joint sparsity: worked examples") {
    const auto x = synthesize(example_location(), values({1.0}, {{0.5}, {-2.0}}));
    CHECK(joint_sparsity(x, JsmKind::Jsm1) == 2);
    const auto plain = SignalEnsemble::from_components(x.common_component(), x.innovations());
    CHECK(joint_sparsity(plain, JsmKind::Jsm1) == 2);

    const auto zero = SignalEnsemble::from_components(Vector::Zero(4), {Vector::Zero(4), Vector::Zero(4)});
    CHECK(joint_sparsity(zero, JsmKind::Jsm1) == 0);
    CHECK(joint_sparsity(zero, JsmKind::Jsm2) == 0);

    StochasticModel s;
    s.mode = SparsityMode::Fixed;
    s.k_j = {2};
    s.seed = 5;
    const auto jsm2 = generate(JsmKind::Jsm2, s, 8, 3);
    CHECK(joint_sparsity(jsm2, JsmKind::Jsm2) == 6);
    const auto jsm2_plain = SignalEnsemble::from_components(jsm2.common_component(), jsm2.innovations());
    CHECK(joint_sparsity(jsm2_plain, JsmKind::Jsm2) == 6);
  }

  TEST_CASE("joint sparsity search agrees with brute force over every P") {
    Rng rng(99);
    std::uniform_int_distribution<int> val(-1, 2);
    for (int t = 0; t < 60; ++t) {
      const int J = 1 + t % 2;
      const int n = 2 + t % 2;
      std::vector<Vector> z(static_cast<std::size_t>(J), Vector(n));
      for (auto& zj : z)
        for (auto& v : zj) v = val(rng);
      const auto x = SignalEnsemble::from_components(Vector::Zero(n), z);
      for (JsmKind m : {JsmKind::Jsm1, JsmKind::Jsm2, JsmKind::Jsm3}) {
        CAPTURE(t);
        CHECK(joint_sparsity(x, m) == brute_force_joint_sparsity(x, m));
      }
    }
  }

  TEST_CASE("joint sparsity never exceeds the generating column count") {
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
      const auto rep = random_representation(rng, 4, 2, false);
      const auto x = synthesize(rep.location, rep.values);
      CHECK(joint_sparsity(x, JsmKind::Jsm1) <= rep.location.columns());
    }
    // Disjoint supports, nonzero values: no reduction possible.
    const LocationMatrix p(6, {0, 1}, {{2}, {3, 4}});
    const auto x = synthesize(p, values({1, 2}, {{3}, {4, 5}}));
    CHECK(joint_sparsity(x, JsmKind::Jsm1) == 5);
  }

  TEST_CASE("joint sparsity search is size limited") {
    const auto big = SignalEnsemble::from_components(Vector::Zero(13), {Vector::Zero(13), Vector::Zero(13)});
    CHECK_THROWS_AS(joint_sparsity(big, JsmKind::Jsm1), std::invalid_argument);
  }

  TEST_CASE("generate: JSM-2 shares one support") {
    StochasticModel s;
    s.mode = SparsityMode::Fixed;
    s.k_j = {5};
    s.seed = 2024;
    const auto x = generate(JsmKind::Jsm2, s, 50, 32);
    for (int j = 0; j < 32; ++j) {
      CHECK(x.innovation_support(j).size() == 5);
      CHECK(x.innovation_support(j) == x.innovation_support(0));
    }
    CHECK(x.common_support().empty());
  }

  TEST_CASE("generate: zero rates give the zero ensemble") {
    StochasticModel s;
    s.seed = 1;
    const auto x = generate(JsmKind::Jsm1, s, 40, 3);
    for (int j = 0; j < 3; ++j) CHECK(x.signal(j).isZero(0));
  }

  TEST_CASE("generate: Bernoulli common support concentrates") {
    StochasticModel s;
    s.s_c = 0.2;
    s.s_j = {0.05};
    s.seed = 77;
    const auto x = generate(JsmKind::Jsm1, s, 10000, 2);
    const double frac = static_cast<double>(x.common_support().size()) / 10000.0;
    CHECK(std::abs(frac - 0.2) < 5.0 * std::sqrt(0.2 * 0.8 / 10000.0));
  }

  TEST_CASE("generate: JSM-3 common component is dense") {
    StochasticModel s;
    s.mode = SparsityMode::Fixed;
    s.k_j = {3};
    s.seed = 4;
    const auto x = generate(JsmKind::Jsm3, s, 30, 4);
    CHECK(x.common_support().size() == 30);
    for (int j = 0; j < 4; ++j) CHECK(x.innovation_support(j).size() == 3);
  }

  TEST_CASE("generate is reproducible and nested in J") {
    StochasticModel s;
    s.s_c = 0.3;
    s.s_j = {0.1};
    s.seed = 42;
    const auto a = generate(JsmKind::Jsm1, s, 64, 4);
    const auto b = generate(JsmKind::Jsm1, s, 64, 4);
    const auto c = generate(JsmKind::Jsm1, s, 64, 2);
    CHECK(same_signals(a, b));
    for (int j = 0; j < 2; ++j) CHECK(a.signal(j) == c.signal(j));
    s.seed = 43;
    CHECK_FALSE(same_signals(a, generate(JsmKind::Jsm1, s, 64, 4)));
  }

  TEST_CASE("generate rejects invalid models") {
    StochasticModel s;
    s.s_c = 1.5;
    CHECK_THROWS_AS(generate(JsmKind::Jsm1, s, 10, 2), std::invalid_argument);
    s.s_c = 0.1;
    s.coefficient_std = 0.0;
    CHECK_THROWS_AS(generate(JsmKind::Jsm1, s, 10, 2), std::invalid_argument);
    s.coefficient_std = 1.0;
    s.mode = SparsityMode::Fixed;
    s.k_j = {11};
    CHECK_THROWS_AS(generate(JsmKind::Jsm1, s, 10, 2), std::invalid_argument);
    s.k_j = {1, 2, 3};
    CHECK_THROWS_AS(generate(JsmKind::Jsm1, s, 10, 2), std::invalid_argument);
  }

  TEST_CASE("text format round-trips exactly") {
    StochasticModel s;
    s.s_c = 0.3;
    s.s_j = {0.2};
    s.seed = 9;
    const auto x = generate(JsmKind::Jsm1, s, 20, 3);
    std::stringstream ss;
    write_ensemble(ss, x, JsmKind::Jsm1);
    const auto back = read_ensemble(ss);
    CHECK(back.model == JsmKind::Jsm1);
    CHECK(same_signals(back.ensemble, x));
    for (int j = 0; j < 3; ++j) CHECK(back.ensemble.innovation(j) == x.innovation(j));

    std::stringstream bad("2 1 jsm1\n1 2\n3\n");
    CHECK_THROWS_AS(read_ensemble(bad), std::runtime_error);
    std::stringstream bad_model("2 1 jsm9\n1 2\n3 4\n");
    CHECK_THROWS_AS(read_ensemble(bad_model), std::runtime_error);
  }
}
