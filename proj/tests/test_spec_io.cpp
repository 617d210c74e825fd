#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "blin/spec_io.hpp"
#include "support/random_spec.hpp"

using namespace blin;
using Eigen::MatrixXd;

namespace {

DataBatch csv(const std::string& text) {
  std::istringstream in(text);
  return io::parse_csv(in, "test.csv");
}

template <class Fn>
std::vector<std::string> violations_of(Fn&& fn) {
  try {
    fn();
  } catch (const SpecError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  return std::any_of(msgs.begin(), msgs.end(), [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

const char* kMinimal = R"({
  "r": 1, "mu": [0.5], "c": [[2.0]], "c_prime": [[1.0]],
  "v": [[1.5]], "v_prime": [[0.5]]
})";

}  // namespace

TEST_CASE("spec round trip is exact") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> wild(-1e6, 1e6);
  for (int trial = 0; trial < 100; ++trial) {
    auto spec = testing::random_spec(1 + trial % 4, rng);
    if (trial % 3 == 0) spec.n = 2 + trial;
    if (trial % 5 == 0) spec.e_v_override = spec.c - spec.c_prime;
    // Awkward but valid reals in the mean.
    spec.mu(0) = wild(rng) * 1e-300 + (trial % 2 == 0 ? 0.1 : 1.0 / 3.0);
    const std::string text = io::write_spec(spec);
    const auto back = io::parse_spec(text);
    CHECK(back.spec == spec);
    CHECK(io::write_spec(back.spec) == text);
  }
}

TEST_CASE("minimal spec parses") {
  const auto f = io::parse_spec(kMinimal);
  CHECK(f.spec.r == 1);
  CHECK(f.spec.mu(0) == 0.5);
  CHECK(f.spec.u()(0, 0) == 1.0);
  CHECK_FALSE(f.s_observed.has_value());
  CHECK_FALSE(f.provenance.has_value());
  CHECK_FALSE(f.spec.n.has_value());
}

TEST_CASE("gaussian residual field") {
  const auto f = io::parse_spec(R"({
    "r": 2, "mu": [0, 0], "c": [[2, 0.5], [0.5, 2]], "c_prime": [[1, 0], [0, 1]],
    "gaussian": {"v_prime": [[0.1, 0, 0], [0, 0.1, 0], [0, 0, 0.1]]}
  })");
  const MatrixXd ev = f.spec.expected_population();
  CHECK(f.spec.u().isApprox(gaussian_fourth_moments(ev), 1e-15));
  REQUIRE(f.provenance.has_value());
  CHECK(f.provenance->find("Gaussian") != std::string::npos);

  // An explicit ev takes precedence over E(V).
  const auto g = io::parse_spec(R"({
    "r": 1, "e_v_override": [[4.0]], "gaussian": {"ev": [[3.0]]}, "v_prime": [[0.2]]
  })");
  CHECK(g.spec.u()(0, 0) == doctest::Approx(18.0));
  CHECK(g.spec.expected_population()(0, 0) == 4.0);
}

TEST_CASE("missing v' defaults to zero with a warning") {
  const auto f = io::parse_spec(R"({"r": 1, "mu": [0], "c": [[2]], "c_prime": [[1]], "v": [[1]]})");
  CHECK(f.spec.v_prime(0, 0) == 0.0);
  CHECK_FALSE(f.warnings.empty());
}

TEST_CASE("bundled example spec") {
  const auto f = io::read_spec_file(std::string(BLIN_SPEC_DIR) + "/exam_performance.json");
  CHECK(f.spec.r == 3);
  REQUIRE(f.spec.n.has_value());
  CHECK(*f.spec.n == 34);
  REQUIRE(f.s_observed.has_value());
  CHECK((*f.s_observed)(1, 1) == 178.30);
  CHECK(f.spec.expected_population()(0, 0) == 7.98);
  REQUIRE(f.diagram_arcs.has_value());
  CHECK(f.diagram_arcs->size() == 7);
  CHECK(f.warnings.empty());
}

TEST_CASE("structural problems are all listed") {
  const auto v = violations_of([] { io::parse_spec(R"({"r": 2, "c": [[1, 0], [0, 1, 3]]})"); });
  CHECK(mentions(v, "mu"));
  CHECK(mentions(v, "c_prime"));
  CHECK(mentions(v, "c row 2"));
  CHECK(mentions(v, "residual"));
  CHECK(v.size() >= 4);

  const auto shapes = violations_of([] {
    io::parse_spec(R"({"r": 2, "mu": [0], "c": [[1, 0], [0, 1]], "c_prime": [[0, 0], [0, 0]], "v": [[1]]})");
  });
  CHECK(mentions(shapes, "mu"));
  CHECK(mentions(shapes, "v must be"));

  const auto sym = violations_of([] {
    io::parse_spec(R"({"r": 2, "mu": [0, 0], "c": [[2, 0.3], [0, 2]], "c_prime": [[1, 0], [0, 1]],
                      "v": [[1, 0, 0], [0, 1, 0.5], [0, 0, 1]]})");
  });
  CHECK(mentions(sym, "c[1,2]"));
  CHECK(mentions(sym, "(1,2)"));

  CHECK_THROWS_AS(io::parse_spec(R"({"r": 0})"), SpecError);
  CHECK_THROWS_AS(io::parse_spec(R"([1, 2])"), SpecError);
  CHECK_THROWS_AS(io::parse_spec(R"({"r": 1, "gaussian": {}, "v": [[1]], "e_v_override": [[1]]})"), SpecError);
}

TEST_CASE("invalid JSON is a data error") {
  CHECK_THROWS_AS(io::parse_spec("{\"r\": 1,"), DataError);
  CHECK_THROWS_AS(io::parse_spec(""), DataError);
  CHECK_THROWS_AS(io::read_spec_file("/nonexistent/spec.json"), IoError);
}

TEST_CASE("csv: header detection and values") {
  const auto with_header = csv("maths,english\n1,2\n3,4.5\n");
  CHECK(with_header.n() == 2);
  CHECK(with_header.r() == 2);
  CHECK(with_header.values(1, 1) == 4.5);

  const auto bare = csv("1,2\n\n3,4\n5, 6 \n");
  CHECK(bare.n() == 3);
  CHECK(bare.values(2, 1) == 6.0);

  const auto signed_values = csv("-1e-3,+2\n");
  CHECK(signed_values.values(0, 0) == -1e-3);
  CHECK(signed_values.values(0, 1) == 2.0);
}

TEST_CASE("csv: malformed lines are reported with their line number") {
  try {
    csv("a,b\n1,2\n3\n");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("test.csv:3") != std::string::npos);
  }
  try {
    csv("1,2\n3,x\n");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("test.csv:2") != std::string::npos);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
  CHECK_THROWS_AS(csv("1,nan\n"), DataError);
  CHECK_THROWS_AS(csv("1,inf\n2,3\n"), DataError);
}

TEST_CASE("matrix files") {
  CHECK(io::parse_matrix("[[1, 2], [2, 3]]") == (MatrixXd(2, 2) << 1, 2, 2, 3).finished());
  CHECK(io::parse_matrix(R"({"ev": [[4]]})") == MatrixXd::Constant(1, 1, 4.0));
  CHECK(io::parse_matrix("1,2\n2,3\n") == (MatrixXd(2, 2) << 1, 2, 2, 3).finished());
  CHECK_THROWS_AS(io::parse_matrix(""), DataError);
  CHECK_THROWS_AS(io::parse_matrix("[[1, 2], [3]]"), DataError);
  CHECK_THROWS_AS(io::parse_matrix(R"({"a": [[1]], "b": [[2]]})"), DataError);
  CHECK_THROWS_AS(io::parse_matrix("[1, 2]"), DataError);
}
