#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "blin/diagnostics.hpp"
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

struct World {
  CovarianceBeliefs beliefs;
  DataCollections data;
  Observation obs;
  RandomMatrix v;
};

World make_world(const ExchangeableSpec& spec, std::size_t n, const MatrixXd& s_obs) {
  World w{sample_beliefs(spec, n), {}, {}, RandomMatrix(spec.r)};
  w.obs = observe_sample(w.beliefs, s_obs);
  auto raw = build_collections(w.beliefs.s_ids, spec.r);
  w.data.d_s = with_observation(raw.d_s, w.obs);
  w.data.d_i = with_observation(raw.d_i, w.obs);
  w.data.d_c = with_observation(raw.d_c, w.obs);
  w.v = population_matrix(w.beliefs);
  return w;
}

World random_world(std::size_t r, std::mt19937_64& rng) {
  const auto spec = testing::random_spec(r, rng);
  return make_world(spec, testing::random_n(rng), testing::random_sample(spec.expected_population(), rng));
}

ExchangeableSpec scalar_spec(double ev, double var_v, double u) {
  ExchangeableSpec s;
  s.r = 1;
  s.mu = VectorXd::Zero(1);
  s.c_prime = mat({{1.0}});
  s.c = mat({{ev + 1.0}});
  s.v_prime = mat({{var_v}});
  s.v = mat({{var_v + u}});
  return s;
}

}  // namespace

TEST_CASE("bearing: no change means no bearing") {
  std::mt19937_64 rng(1);
  const auto spec = testing::random_spec(2, rng);
  const auto w = make_world(spec, 15, spec.expected_population());
  for (const auto* d : {&w.data.d_s, &w.data.d_i, &w.data.d_c}) {
    const auto rep = bearing(*d, all_ones(2), w.beliefs.store);
    CHECK(rep.size == doctest::Approx(0.0));
    CHECK(rep.coefficients.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rep.expected_size > 0.0);
    const auto ratio = size_ratio(rep);
    REQUIRE(ratio.ratio.has_value());
    CHECK(*ratio.ratio == doctest::Approx(0.0));
    CHECK(ratio.tag == SizeTag::smaller_than_expected);
  }
}

TEST_CASE("bearing: one-quantity case matches the scalar theory") {
  const double ev = 2.0, var_v = 0.6, u = 1.5, s_obs = 3.4;
  const std::size_t n = 5;
  const auto w = make_world(scalar_spec(ev, var_v, u), n, mat({{s_obs}}));
  const double var_s = var_v + u / static_cast<double>(n);
  const auto rep = bearing(w.data.d_s, all_ones(1), w.beliefs.store);
  REQUIRE(rep.coefficients.size() == 1);
  CHECK(rep.coefficients(0) == doctest::Approx((s_obs - ev) / var_s).epsilon(1e-13));
  CHECK(rep.size == doctest::Approx((s_obs - ev) * (s_obs - ev) / var_s).epsilon(1e-13));
  CHECK(rep.expected_size == doctest::Approx(1.0).epsilon(1e-13));
  REQUIRE(rep.size_ratio.has_value());
  CHECK(*rep.size_ratio == doctest::Approx((s_obs - ev) * (s_obs - ev) / var_s).epsilon(1e-13));
  CHECK(rep.g_ref == all_ones(1));
}

TEST_CASE("bearing: defining identity and size on random adjustments") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t r = 1 + trial % 3;
    const auto w = random_world(r, rng);
    const auto& st = w.beliefs.store;
    MatrixXd g_ref = all_ones(r);
    if (trial % 2 == 1) g_ref = testing::random_psd(static_cast<Eigen::Index>(r), rng);
    for (const auto* d : {&w.data.d_s, &w.data.d_i, &w.data.d_c}) {
      const auto rep = bearing(*d, g_ref, st);
      double scale = 1e-300;
      std::vector<double> lhs, rhs;
      for (std::size_t t = 0; t < d->size(); ++t) {
        const auto& a = d->members[t];
        const MatrixXd change = (*d->observed)[t] - expectation_matrix(a, st);
        lhs.push_back(inner_product(center(a, st), rep.bearing, st));
        rhs.push_back(trace_product(change, g_ref));
        scale = std::max(scale, std::abs(rhs.back()));
      }
      for (std::size_t t = 0; t < lhs.size(); ++t) CHECK(std::abs(lhs[t] - rhs[t]) <= 1e-8 * scale);
      CHECK(rep.size >= 0.0);
      CHECK(rep.expected_size >= 0.0);
      const double recomputed = inner_product(rep.bearing, rep.bearing, st);
      CHECK(std::abs(rep.size - recomputed) <= 1e-10 * std::max(1.0, recomputed));
    }
  }
}

TEST_CASE("bearing: errors") {
  std::mt19937_64 rng(3);
  const auto w = random_world(2, rng);
  CHECK_THROWS_AS(bearing(w.data.d_s, all_ones(3), w.beliefs.store), InputError);
  CHECK_THROWS_AS(bearing(w.data.d_s, mat({{1.0, 2.0}, {0.0, 1.0}}), w.beliefs.store), InputError);
  const auto raw = build_collections(w.beliefs.s_ids, 2);
  CHECK_THROWS_AS(bearing(raw.d_s, all_ones(2), w.beliefs.store), InputError);
}

TEST_CASE("size ratio classification") {
  CHECK(classify_size_ratio(1.0) == SizeTag::consistent);
  CHECK(classify_size_ratio(0.0) == SizeTag::smaller_than_expected);
  CHECK(classify_size_ratio(2.6) == SizeTag::larger_than_expected);
  CHECK(classify_size_ratio(2.5) == SizeTag::consistent);
  CHECK(classify_size_ratio(0.4) == SizeTag::consistent);
  CHECK(classify_size_ratio(0.39) == SizeTag::smaller_than_expected);
  CHECK(classify_size_ratio(std::nullopt) == SizeTag::undefined);
  CHECK(classify_size_ratio(1.5, {1.2, 0.8}) == SizeTag::larger_than_expected);
  CHECK(to_string(SizeTag::larger_than_expected) == "larger-than-expected");
  CHECK(to_string(SizeTag::smaller_than_expected) == "smaller-than-expected");
  CHECK(to_string(SizeTag::consistent) == "consistent");
  CHECK(to_string(SizeTag::undefined) == "undefined");

  BearingReport rep;
  rep.size = 3.0;
  rep.expected_size = 3.0;
  rep.size_ratio = 1.0;
  CHECK(size_ratio(rep).tag == SizeTag::consistent);
  CHECK(*size_ratio(rep).ratio == 1.0);
  rep.expected_size = 0.0;
  rep.size_ratio.reset();
  CHECK(size_ratio(rep).tag == SizeTag::undefined);
  CHECK_FALSE(size_ratio(rep).ratio.has_value());
}

TEST_CASE("expected size is undefined without data variance") {
  // Var(S) = 0 makes the Gram matrix zero.
  const auto w = make_world(scalar_spec(2.0, 0.0, 0.0), 5, mat({{3.0}}));
  const auto rep = bearing(w.data.d_s, all_ones(1), w.beliefs.store);
  CHECK(rep.expected_size == 0.0);
  CHECK_FALSE(rep.size_ratio.has_value());
  CHECK(size_ratio(rep).tag == SizeTag::undefined);
}

TEST_CASE("conditional linear independence") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t r = 1 + trial % 3;
    const auto w = random_world(r, rng);
    const auto& st = w.beliefs.store;
    const RandomMatrix s = sample_matrix(w.beliefs);
    const auto vi = build_individual_population(w.beliefs.v_ids, r);
    const RandomMatrix b = w.v;
    const RandomMatrix c = vi.members.front();
    for (const auto* d : {&w.data.d_s, &w.data.d_i, &w.data.d_c}) {
      const auto self = cond_lin_indep(b, b, *d, st);
      CHECK(self.value == doctest::Approx(project(b, *d, st).residual_norm_sq).epsilon(1e-10));
      CHECK_FALSE(self.independent);
      // Symmetric in its two arguments, bit for bit.
      CHECK(cond_lin_indep(b, c, *d, st).value == cond_lin_indep(c, b, *d, st).value);
      // A target inside the span has no residual.
      CHECK(cond_lin_indep(s, c, *d, st).independent);
      CHECK(cond_lin_indep(c, s, *d, st).independent);
    }
  }
}

TEST_CASE("conditional linear independence: prior orthogonality with no data") {
  Registry reg;
  const auto a = reg.add("a");
  const auto b = reg.add("b");
  const BeliefStore st(std::move(reg), VectorXd::Zero(2), mat({{2.0, 0.0}, {0.0, 3.0}}));
  const auto pa = RandomMatrix::single(2, 0, 1, AffineForm::of(a));
  const auto pb = RandomMatrix::single(2, 0, 1, AffineForm::of(b));
  const Collection none;
  const auto check = cond_lin_indep(pa, pb, none, st);
  CHECK(check.value == 0.0);
  CHECK(check.independent);
  CHECK(check.scale == doctest::Approx(std::sqrt(4.0 * 6.0)));
}

TEST_CASE("eigen diagnostic: worked matrices") {
  const auto id = eigen_diagnostic(MatrixXd::Identity(3, 3));
  CHECK(id.eigenvalues.isApprox(VectorXd::Ones(3)));
  CHECK_FALSE(id.has_negative());
  CHECK(id.condition_number == doctest::Approx(1.0));

  const auto ind = eigen_diagnostic(mat({{1, 2}, {2, 1}}));
  CHECK(ind.eigenvalues(0) == doctest::Approx(3.0));
  CHECK(ind.eigenvalues(1) == doctest::Approx(-1.0));
  REQUIRE(ind.negative.size() == 1);
  CHECK(ind.negative[0] == 1);

  // The complete-collection adjusted matrix printed for the exam example.
  const auto ecv = eigen_diagnostic(mat({{8.30, 15.43, 20.06}, {15.43, 92.04, 80.66}, {20.06, 80.66, 156.79}}));
  CHECK_FALSE(ecv.has_negative());
  CHECK(ecv.eigenvalues.minCoeff() > 0.0);

  const auto singular = eigen_diagnostic(mat({{1, 1}, {1, 1}}));
  CHECK_FALSE(singular.has_negative());
  CHECK(std::isinf(singular.condition_number));

  CHECK_THROWS_AS(eigen_diagnostic(mat({{1, 2}, {2.1, 1}})), InputError);
  CHECK_THROWS_AS(eigen_diagnostic(MatrixXd::Zero(2, 3)), InputError);
}

TEST_CASE("eigen diagnostic: trace and Frobenius identities") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = static_cast<Eigen::Index>(1 + trial % 6);
    MatrixXd m = testing::random_matrix(r, r, rng);
    m = (0.5 * (m + m.transpose())).eval();
    const auto d = eigen_diagnostic(m);
    const double trace = m.trace();
    const double frob = m.squaredNorm();
    const double scale = std::max(1.0, frob);
    CHECK(std::abs(d.eigenvalues.sum() - trace) <= 1e-10 * std::max(1.0, std::abs(trace)) * scale);
    CHECK(std::abs(d.eigenvalues.squaredNorm() - frob) <= 1e-10 * scale);
    for (Eigen::Index k = 1; k < d.eigenvalues.size(); ++k) CHECK(d.eigenvalues(k - 1) >= d.eigenvalues(k));
  }
}

TEST_CASE("diagram export: structure") {
  const DiagramModel empty;
  const std::string e = diagram_export(empty);
  CHECK(e.rfind("digraph", 0) == 0);
  CHECK(e.find("->") == std::string::npos);
  CHECK(e.back() == '\n');

  DiagramModel one;
  one.nodes.push_back({"V", {0.6, 0.1, 0.05}, 1.2});
  const std::string o = diagram_export(one);
  CHECK(o.find("60.0%") != std::string::npos);
  CHECK(o.find("70.0%") != std::string::npos);
  CHECK(o.find("75.0%") != std::string::npos);
  CHECK(o.find("consistent") != std::string::npos);

  DiagramModel two;
  two.nodes.push_back({"D_S", {}, std::nullopt});
  two.nodes.push_back({"V", {0.3}, 3.0});
  two.arcs.push_back({"D_S", "V", false});
  const std::string t = diagram_export(two);
  std::size_t edges = 0;
  for (auto pos = t.find("->"); pos != std::string::npos; pos = t.find("->", pos + 2)) ++edges;
  CHECK(edges == 1);
  CHECK(t.find("larger-than-expected") != std::string::npos);
  CHECK(t.find("dir=back") == std::string::npos);
  two.arcs.front().reversed = true;
  CHECK(diagram_export(two).find("dir=back") != std::string::npos);
}

TEST_CASE("diagram export: determinism and label quoting") {
  DiagramModel m;
  m.nodes.push_back({"V", {0.25, 0.125}, 0.1});
  m.nodes.push_back({"say \"hi\"", {}, std::nullopt});
  m.arcs.push_back({"say \"hi\"", "V", false});
  const std::string a = diagram_export(m);
  CHECK(a == diagram_export(m));
  CHECK(a.find("\\\"hi\\\"") != std::string::npos);
}

TEST_CASE("diagram export: invalid models") {
  DiagramModel over;
  over.nodes.push_back({"V", {0.7, 0.4}, std::nullopt});
  CHECK_THROWS_AS(diagram_export(over), InputError);

  DiagramModel neg;
  neg.nodes.push_back({"V", {-0.2}, std::nullopt});
  CHECK_THROWS_AS(diagram_export(neg), InputError);

  DiagramModel dup;
  dup.nodes.push_back({"V", {}, std::nullopt});
  dup.nodes.push_back({"V", {}, std::nullopt});
  CHECK_THROWS_AS(diagram_export(dup), InputError);

  DiagramModel dangling;
  dangling.nodes.push_back({"V", {}, std::nullopt});
  dangling.arcs.push_back({"D_S", "V", false});
  CHECK_THROWS_AS(diagram_export(dangling), InputError);
}
