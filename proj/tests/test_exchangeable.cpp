#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "blin/exchangeable.hpp"
#include "support/random_spec.hpp"

using namespace blin;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

ExchangeableSpec scalar_spec(double c, double c_prime, double var_v, double u) {
  ExchangeableSpec s;
  s.r = 1;
  s.mu = VectorXd::Zero(1);
  s.c = mat({{c}});
  s.c_prime = mat({{c_prime}});
  s.v_prime = mat({{var_v}});
  s.v = mat({{var_v + u}});
  return s;
}

ExchangeableSpec diagonal_spec(std::size_t r, double var_v, double u) {
  const auto m = static_cast<Eigen::Index>(slot_count(r));
  const auto n = static_cast<Eigen::Index>(r);
  ExchangeableSpec s;
  s.r = r;
  s.mu = VectorXd::Zero(n);
  s.c_prime = MatrixXd::Identity(n, n);
  s.c = 2.0 * MatrixXd::Identity(n, n);
  s.v_prime = var_v * MatrixXd::Identity(m, m);
  s.v = (var_v + u) * MatrixXd::Identity(m, m);
  return s;
}

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  return std::any_of(msgs.begin(), msgs.end(), [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("population beliefs: expectation and covariance of V") {
  auto spec = scalar_spec(2.0, 1.0, 0.5, 1.0);
  auto b = population_beliefs(spec);
  REQUIRE(b.v_ids.size() == 1);
  CHECK(b.s_ids.empty());
  CHECK(b.store.expectation(b.v_ids[0]) == 1.0);
  CHECK(b.store.covariance(b.v_ids[0], b.v_ids[0]) == 0.5);
  CHECK(b.store.registry().label(b.v_ids[0]) == "V_11");

  auto two = diagonal_spec(2, 1.0, 1.0);
  two.v_prime(slot_index(2, 0, 0), slot_index(2, 1, 1)) = 0.2;
  two.v_prime(slot_index(2, 1, 1), slot_index(2, 0, 0)) = 0.2;
  two.v = two.v_prime + MatrixXd::Identity(3, 3);
  auto b2 = population_beliefs(two);
  CHECK(b2.store.covariance(b2.v_ids[slot_index(2, 0, 0)], b2.v_ids[slot_index(2, 1, 1)]) == 0.2);
}

TEST_CASE("population beliefs: E(V) override wins over c - c'") {
  auto spec = scalar_spec(2.0, 1.0, 0.5, 1.0);
  spec.e_v_override = mat({{7.5}});
  auto b = population_beliefs(spec);
  CHECK(b.store.expectation(b.v_ids[0]) == 7.5);
}

TEST_CASE("sample beliefs") {
  auto spec = scalar_spec(2.0, 1.0, 0.5, 1.0);
  auto b = sample_beliefs(spec, 4);
  const auto v = b.v_ids[0], s = b.s_ids[0];
  CHECK(b.store.covariance(s, s) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(b.store.expectation(s) == b.store.expectation(v));
  for (std::size_t n : {2, 3, 10, 1000}) {
    auto bn = sample_beliefs(spec, n);
    CHECK(bn.store.covariance(bn.v_ids[0], bn.s_ids[0]) == 0.5);
  }
  // u = 0 makes S as uncertain as V whatever n.
  auto flat = scalar_spec(2.0, 1.0, 0.5, 0.0);
  for (std::size_t n : {2, 5, 50}) {
    auto bn = sample_beliefs(flat, n);
    CHECK(bn.store.covariance(bn.s_ids[0], bn.s_ids[0]) == 0.5);
  }
  // Large n: Var(S) -> Var(V).
  auto big = sample_beliefs(spec, 1000000);
  CHECK(big.store.covariance(big.s_ids[0], big.s_ids[0]) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(b.store.registry().label(s) == "S_11");
}

TEST_CASE("sample beliefs: n must be at least 2") {
  auto spec = scalar_spec(2.0, 1.0, 0.5, 1.0);
  CHECK_THROWS_AS(sample_beliefs(spec, 1), InsufficientDataError);
  CHECK_THROWS_AS(sample_beliefs(spec, 0), InsufficientDataError);
}

TEST_CASE("quantity labels switch to separated indices past r = 9") {
  CHECK(quantity_label('V', 3, slot_index(3, 0, 1)) == "V_12");
  CHECK(quantity_label('S', 3, slot_index(3, 2, 2)) == "S_33");
  CHECK(quantity_label('V', 10, slot_index(10, 0, 9)) == "V_1_10");
}

TEST_CASE("Var(S) >= Var(V) and sample-store structure on random specs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + trial % 3;
    const auto spec = testing::random_spec(r, rng);
    const auto n = testing::random_n(rng);
    const auto b = sample_beliefs(spec, n);
    const MatrixXd u = spec.u();
    for (std::size_t a = 0; a < slot_count(r); ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      if (u(ai, ai) >= 0.0) CHECK(b.store.covariance(b.s_ids[a], b.s_ids[a]) >= b.store.covariance(b.v_ids[a], b.v_ids[a]));
      for (std::size_t c = 0; c < slot_count(r); ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        CHECK(b.store.covariance(b.v_ids[a], b.s_ids[c]) == spec.v_prime(ai, ci));
        CHECK(b.store.covariance(b.s_ids[a], b.s_ids[c]) ==
              doctest::Approx(spec.v_prime(ai, ci) + u(ai, ci) / static_cast<double>(n)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("observe_sample and the random matrices V, S") {
  auto spec = diagonal_spec(2, 1.0, 1.0);
  auto b = sample_beliefs(spec, 5);
  const MatrixXd s = mat({{1.0, 0.3}, {0.3, 2.0}});
  const auto obs = observe_sample(b, s);
  const RandomMatrix S = sample_matrix(b);
  CHECK(S.realize(obs) == s);
  CHECK(expectation_matrix(population_matrix(b), b.store) == MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(observe_sample(b, MatrixXd::Zero(3, 3)), InputError);
  auto pop = population_beliefs(spec);
  CHECK_THROWS_AS(observe_sample(pop, s), InputError);
}

TEST_CASE("sample covariance: worked examples") {
  CHECK(sample_covariance({mat({{0, 0}, {2, 2}})}) == mat({{2, 2}, {2, 2}}));
  CHECK(sample_covariance({mat({{0, 0}, {1, 1}, {2, 2}})}) == mat({{1, 1}, {1, 1}}));

  const MatrixXd s = sample_covariance({mat({{1, 5, 2}, {3, 5, -1}, {0, 5, 4}, {2, 5, 0}})});
  CHECK(s.row(1).isZero(0.0));
  CHECK(s.col(1).isZero(0.0));
  CHECK(s == s.transpose());
}

TEST_CASE("sample covariance agrees with a direct double loop") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + trial * 3);
    const auto r = static_cast<Eigen::Index>(1 + trial % 5);
    const MatrixXd x = testing::random_matrix(n, r, rng);
    MatrixXd expected = MatrixXd::Zero(r, r);
    const VectorXd mean = x.colwise().mean();
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < r; ++j)
        for (Eigen::Index w = 0; w < n; ++w) expected(i, j) += (x(w, i) - mean(i)) * (x(w, j) - mean(j));
    expected /= static_cast<double>(n - 1);
    const MatrixXd got = sample_covariance({x});
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(got == got.transpose());
  }
}

TEST_CASE("sample covariance: row permutation invariance is exact") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + trial);
    const MatrixXd x = testing::random_matrix(n, 3, rng);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd y(n, 3);
    for (Eigen::Index k = 0; k < n; ++k) y.row(k) = x.row(perm[static_cast<std::size_t>(k)]);
    CHECK(sample_covariance({x}) == sample_covariance({y}));
  }
}

TEST_CASE("sample covariance: column shifts do not matter") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd x = testing::random_matrix(20, 3, rng);
    MatrixXd y = x;
    const auto col = static_cast<Eigen::Index>(trial % 3);
    y.col(col).array() += shift(rng);
    CHECK((sample_covariance({x}) - sample_covariance({y})).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("sample covariance: errors") {
  CHECK_THROWS_AS(sample_covariance({mat({{1, 2}})}), InsufficientDataError);
  MatrixXd x = mat({{1, 2}, {3, 4}, {5, 6}});
  x(2, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    sample_covariance({x});
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  x(2, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sample_covariance({x}), DataError);
}

TEST_CASE("Gaussian fourth moments: worked values") {
  CHECK(gaussian_fourth_moments(mat({{3.0}}))(0, 0) == 18.0);

  const MatrixXd u = gaussian_fourth_moments(MatrixXd::Identity(2, 2));
  const auto s11 = static_cast<Eigen::Index>(slot_index(2, 0, 0));
  const auto s12 = static_cast<Eigen::Index>(slot_index(2, 0, 1));
  const auto s22 = static_cast<Eigen::Index>(slot_index(2, 1, 1));
  CHECK(u(s12, s12) == 1.0);
  CHECK(u(s11, s22) == 0.0);
  CHECK(u(s11, s11) == 2.0);

  for (double rho : {-0.8, -0.3, 0.0, 0.4, 0.9}) {
    const MatrixXd ur = gaussian_fourth_moments(mat({{1.0, rho}, {rho, 1.0}}));
    CHECK(ur(s11, s22) == doctest::Approx(2.0 * rho * rho).epsilon(1e-15));
    CHECK(ur(s11, s12) == doctest::Approx(2.0 * rho).epsilon(1e-15));
    CHECK(ur(s12, s12) == doctest::Approx(1.0 + rho * rho).epsilon(1e-15));
  }
}

TEST_CASE("Gaussian fourth moments match a Monte Carlo oracle") {
  const std::vector<MatrixXd> cases = {mat({{3.0}}), MatrixXd::Identity(2, 2), mat({{1.0, 0.6}, {0.6, 1.0}}),
                                       mat({{2.0, 0.5, -0.3}, {0.5, 1.0, 0.2}, {-0.3, 0.2, 0.7}})};
  std::uint64_t seed = 100;
  for (const auto& ev : cases) {
    const MatrixXd u = gaussian_fourth_moments(ev);
    const auto mc = monte_carlo_quadratic_covariance(ev, 100000, seed++);
    CHECK(mc.draws == 100000);
    for (Eigen::Index a = 0; a < u.rows(); ++a)
      for (Eigen::Index b = 0; b < u.cols(); ++b) {
        const double gap = std::abs(mc.covariance(a, b) - u(a, b));
        // Exact-zero cells have vanishing SE only when both products are degenerate.
        CHECK(gap <= 3.0 * mc.standard_error(a, b) + 1e-12);
      }
  }
}

TEST_CASE("Monte Carlo is deterministic given the seed") {
  const MatrixXd ev = mat({{1.0, 0.5}, {0.5, 1.0}});
  const auto a = monte_carlo_quadratic_covariance(ev, 1000, 42);
  const auto b = monte_carlo_quadratic_covariance(ev, 1000, 42);
  const auto c = monte_carlo_quadratic_covariance(ev, 1000, 43);
  CHECK(a.covariance == b.covariance);
  CHECK(a.standard_error == b.standard_error);
  CHECK(a.covariance != c.covariance);
  CHECK_THROWS_AS(monte_carlo_quadratic_covariance(ev, 1, 1), InsufficientDataError);
}

TEST_CASE("Gaussian residual spec: symmetry and composition") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = static_cast<Eigen::Index>(1 + trial % 4);
    const auto m = static_cast<Eigen::Index>(slot_count(static_cast<std::size_t>(r)));
    const MatrixXd ev = testing::random_psd(r, rng);
    const MatrixXd vp = testing::random_psd(m, rng);
    const auto g = gaussian_residual_spec(ev, vp);
    CHECK(g.u == g.u.transpose());
    CHECK(g.v == g.v.transpose());
    CHECK(g.u == gaussian_fourth_moments(ev));
    CHECK((g.v - (vp + g.u)).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + g.v.cwiseAbs().maxCoeff()));
    CHECK(!g.provenance.empty());
  }
}

TEST_CASE("Gaussian residual spec: non-PSD ev") {
  const MatrixXd ev = mat({{1.0, 2.0}, {2.0, 1.0}});
  const MatrixXd vp = MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(gaussian_residual_spec(ev, vp, {}, true), SpecError);
  const auto g = gaussian_residual_spec(ev, vp, {}, false);
  CHECK(g.provenance.find("warning") != std::string::npos);
  CHECK_THROWS_AS(gaussian_residual_spec(mat({{1.0, 0.5}, {0.4, 1.0}}), vp), SpecError);
  CHECK_THROWS_AS(gaussian_residual_spec(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2)), SpecError);
}

TEST_CASE("validation collects every violation and names indices") {
  auto spec = diagonal_spec(2, 1.0, 1.0);
  spec.c(0, 1) = 0.5;  // asymmetric c
  spec.v(slot_index(2, 0, 0), slot_index(2, 0, 1)) = 0.3;  // asymmetric v
  spec.v_prime(2, 2) = -1.0;
  const auto report = validate(spec);
  CHECK_FALSE(report.ok());
  CHECK(report.errors.size() >= 3);
  CHECK(mentions(report.errors, "c[1,2]"));
  CHECK(mentions(report.errors, "(1,1)"));
  CHECK(mentions(report.errors, "(1,2)"));
  CHECK(mentions(report.errors, "v_prime"));

  try {
    population_beliefs(spec);
    FAIL("expected a specification error");
  } catch (const SpecError& e) {
    CHECK(e.violations().size() == report.errors.size());
  }
}

TEST_CASE("validation: shapes, PSD warnings, strict mode") {
  auto bad_shape = diagonal_spec(2, 1.0, 1.0);
  bad_shape.v = MatrixXd::Identity(2, 2);
  bad_shape.mu = VectorXd::Zero(3);
  const auto rep = validate(bad_shape);
  CHECK(rep.errors.size() >= 2);

  // u = v - v' indefinite: warning by default, error when strict.
  auto spec = diagonal_spec(2, 1.0, 1.0);
  spec.v(0, 0) = 0.5;
  const auto lax = validate(spec);
  CHECK(lax.ok());
  CHECK(mentions(lax.warnings, "u"));
  CHECK_FALSE(validate(spec, {}, true).ok());
  CHECK_THROWS_AS(sample_beliefs(spec, 10, {}, true), SpecError);
  CHECK_NOTHROW(sample_beliefs(spec, 10));

  // E(V) = c - c' indefinite.
  auto ev_bad = diagonal_spec(2, 1.0, 1.0);
  ev_bad.c = mat({{2.0, 3.0}, {3.0, 2.0}});
  CHECK_FALSE(validate(ev_bad, {}, true).ok());

  auto nan = diagonal_spec(2, 1.0, 1.0);
  nan.c(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(validate(nan).ok());
}

TEST_CASE("spec equality is exact") {
  std::mt19937_64 rng(2);
  const auto a = testing::random_spec(3, rng);
  auto b = a;
  CHECK(a == b);
  b.v(0, 0) = std::nextafter(b.v(0, 0), 1e9);
  CHECK_FALSE(a == b);
  b = a;
  b.n = 12;
  CHECK_FALSE(a == b);
}
