#include "blin/exchangeable.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "blin/kernels.hpp"
#include "blin/linalg.hpp"

namespace blin {
namespace {

using Eigen::Index;

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void check_shape(std::vector<std::string>& errors, const char* name, const Eigen::MatrixXd& m, Index rows,
                 Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    errors.push_back(std::string(name) + " must be " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void check_finite(std::vector<std::string>& errors, const char* name, const Eigen::MatrixXd& m) {
  if (!m.allFinite()) errors.push_back(std::string(name) + " contains non-finite values");
}

// Asymmetric entries named by matrix indices (plain) or by slot pairs (tensors).
void check_symmetric(std::vector<std::string>& errors, const char* name, const Eigen::MatrixXd& m, double tol,
                     std::size_t r_for_slots) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Index a = 0; a < m.rows(); ++a) {
    for (Index b = a + 1; b < m.cols(); ++b) {
      if (std::abs(m(a, b) - m(b, a)) > tol * scale) {
        std::string ia, ib;
        if (r_for_slots > 0) {
          ia = slot_name(r_for_slots, static_cast<std::size_t>(a));
          ib = slot_name(r_for_slots, static_cast<std::size_t>(b));
        } else {
          ia = std::to_string(a + 1);
          ib = std::to_string(b + 1);
        }
        errors.push_back(std::string(name) + "[" + ia + "," + ib + "] = " + fmt(m(a, b)) + " differs from " + name +
                         "[" + ib + "," + ia + "] = " + fmt(m(b, a)));
      }
    }
  }
}

void check_psd(std::vector<std::string>& sink, const std::string& what, const Eigen::MatrixXd& m, double tol) {
  const auto report = linalg::check_psd(0.5 * (m + m.transpose()), tol);
  if (!report.ok) {
    sink.push_back(what + " is not positive semi-definite (smallest eigenvalue " + fmt(report.min_eigenvalue) +
                   ", largest " + fmt(report.max_eigenvalue) + ")");
  }
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Validated copy with exactly symmetric matrices.
ExchangeableSpec checked(const ExchangeableSpec& spec, const Tolerances& tol, bool strict,
                         std::vector<std::string>& warnings) {
  auto report = validate(spec, tol, strict);
  if (!report.ok()) throw SpecError(std::move(report.errors));
  warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
  ExchangeableSpec out = spec;
  out.c = symmetrize(spec.c);
  out.c_prime = symmetrize(spec.c_prime);
  out.v = symmetrize(spec.v);
  out.v_prime = symmetrize(spec.v_prime);
  if (out.e_v_override) out.e_v_override = symmetrize(*spec.e_v_override);
  return out;
}

// Covariance (divisor n - 1) of the columns of an n x k column-major matrix.
// Each column is centred once, then every entry is one column dot product.
Eigen::MatrixXd column_covariance(const Eigen::MatrixXd& x, Eigen::MatrixXd* centred_out = nullptr) {
  const auto n = static_cast<std::size_t>(x.rows());
  const Index k = x.cols();
  const auto& kt = kernels::active();
  Eigen::MatrixXd centred(x.rows(), k);
  for (Index c = 0; c < k; ++c) {
    const double mean = kt.sum(x.col(c).data(), n) / static_cast<double>(n);
    kt.subtract(x.col(c).data(), mean, centred.col(c).data(), n);
  }
  Eigen::MatrixXd cov(k, k);
  const double denom = static_cast<double>(n - 1);
  for (Index a = 0; a < k; ++a) {
    for (Index b = a; b < k; ++b) {
      const double v = kt.dot(centred.col(a).data(), centred.col(b).data(), n) / denom;
      cov(a, b) = v;
      cov(b, a) = v;
    }
  }
  if (centred_out != nullptr) *centred_out = std::move(centred);
  return cov;
}

// Sum of the values in ascending order, so the result ignores input order.
double ordered_sum(std::vector<double>& buf, const kernels::KernelTable& kt) {
  std::sort(buf.begin(), buf.end());
  return kt.sum(buf.data(), buf.size());
}

// Same statistic as column_covariance, but every sum runs over sorted terms:
// permuting the rows leaves the result bitwise unchanged.
Eigen::MatrixXd row_order_free_covariance(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  const Index k = x.cols();
  const auto& kt = kernels::active();
  std::vector<double> buf(n);
  Eigen::MatrixXd centred(x.rows(), k);
  for (Index c = 0; c < k; ++c) {
    std::copy(x.col(c).data(), x.col(c).data() + n, buf.begin());
    const double mean = ordered_sum(buf, kt) / static_cast<double>(n);
    kt.subtract(x.col(c).data(), mean, centred.col(c).data(), n);
  }
  Eigen::MatrixXd cov(k, k);
  const double denom = static_cast<double>(n - 1);
  for (Index a = 0; a < k; ++a) {
    for (Index b = a; b < k; ++b) {
      Eigen::Map<Eigen::VectorXd>(buf.data(), x.rows()) = centred.col(a).cwiseProduct(centred.col(b));
      const double v = ordered_sum(buf, kt) / denom;
      cov(a, b) = v;
      cov(b, a) = v;
    }
  }
  return cov;
}

}  // namespace

// ------------------------------------------------------------------ spec

Eigen::MatrixXd ExchangeableSpec::expected_population() const {
  if (e_v_override) return *e_v_override;
  return c - c_prime;
}

bool ExchangeableSpec::operator==(const ExchangeableSpec& o) const {
  if (r != o.r || n != o.n) return false;
  if (!same(mu, o.mu) || !same(c, o.c) || !same(c_prime, o.c_prime) || !same(v, o.v) ||
      !same(v_prime, o.v_prime)) {
    return false;
  }
  if (e_v_override.has_value() != o.e_v_override.has_value()) return false;
  return !e_v_override || same(*e_v_override, *o.e_v_override);
}

ValidationReport validate(const ExchangeableSpec& spec, const Tolerances& tol, bool strict) {
  ValidationReport report;
  auto& errors = report.errors;
  if (spec.r == 0) {
    errors.push_back("r must be a positive dimension");
    return report;
  }
  const auto r = static_cast<Index>(spec.r);
  const auto m = static_cast<Index>(spec.slots());
  if (spec.mu.size() != r) {
    errors.push_back("mu must have " + std::to_string(r) + " entries, got " + std::to_string(spec.mu.size()));
  }
  check_shape(errors, "c", spec.c, r, r);
  check_shape(errors, "c_prime", spec.c_prime, r, r);
  check_shape(errors, "v", spec.v, m, m);
  check_shape(errors, "v_prime", spec.v_prime, m, m);
  if (spec.e_v_override) check_shape(errors, "e_v_override", *spec.e_v_override, r, r);
  if (spec.n && *spec.n < 2) errors.push_back("n must be at least 2, got " + std::to_string(*spec.n));
  if (!errors.empty()) return report;

  check_finite(errors, "mu", spec.mu);
  check_finite(errors, "c", spec.c);
  check_finite(errors, "c_prime", spec.c_prime);
  check_finite(errors, "v", spec.v);
  check_finite(errors, "v_prime", spec.v_prime);
  if (spec.e_v_override) check_finite(errors, "e_v_override", *spec.e_v_override);
  if (!errors.empty()) return report;

  check_symmetric(errors, "c", spec.c, tol.symmetry, 0);
  check_symmetric(errors, "c_prime", spec.c_prime, tol.symmetry, 0);
  check_symmetric(errors, "v", spec.v, tol.symmetry, spec.r);
  check_symmetric(errors, "v_prime", spec.v_prime, tol.symmetry, spec.r);
  if (spec.e_v_override) check_symmetric(errors, "e_v_override", *spec.e_v_override, tol.symmetry, 0);
  for (Index s = 0; s < m; ++s) {
    if (spec.v_prime(s, s) < 0.0) {
      errors.push_back("v_prime" + slot_name(spec.r, static_cast<std::size_t>(s)) + " diagonal (a variance of V) is negative");
    }
  }
  if (!errors.empty()) return report;

  auto& psd_sink = strict ? report.errors : report.warnings;
  check_psd(psd_sink, spec.e_v_override ? "E(V) (e_v_override)" : "E(V) = c - c_prime", spec.expected_population(),
            tol.psd);
  check_psd(psd_sink, "u = v - v_prime", spec.u(), tol.psd);
  check_psd(psd_sink, "v_prime", spec.v_prime, tol.psd);
  if (spec.v_prime.isZero(0.0)) {
    report.warnings.push_back("v_prime is zero: Var(V) = 0, so no data can revise beliefs about V");
  }
  return report;
}

// ------------------------------------------------------------- beliefs

std::string quantity_label(char prefix, std::size_t r, std::size_t slot) {
  const auto [i, j] = slot_pair(r, slot);
  std::string out(1, prefix);
  out += '_';
  if (r <= 9) {
    out += std::to_string(i + 1) + std::to_string(j + 1);
  } else {
    out += std::to_string(i + 1) + "_" + std::to_string(j + 1);
  }
  return out;
}

CovarianceBeliefs population_beliefs(const ExchangeableSpec& raw, const Tolerances& tol, bool strict) {
  std::vector<std::string> warnings;
  const ExchangeableSpec spec = checked(raw, tol, strict, warnings);
  const std::size_t m = spec.slots();
  Registry reg;
  std::vector<QuantityId> v_ids;
  for (std::size_t s = 0; s < m; ++s) v_ids.push_back(reg.add(quantity_label('V', spec.r, s)));
  BeliefStore store(std::move(reg), linalg::to_slots(spec.expected_population()), spec.v_prime, tol, strict);
  warnings.insert(warnings.end(), store.warnings().begin(), store.warnings().end());
  return CovarianceBeliefs{spec.r, 0, std::move(store), std::move(v_ids), {}, std::move(warnings)};
}

CovarianceBeliefs sample_beliefs(const ExchangeableSpec& raw, std::size_t n, const Tolerances& tol, bool strict) {
  if (n < 2) throw InsufficientDataError("sample size n must be at least 2, got " + std::to_string(n));
  std::vector<std::string> warnings;
  const ExchangeableSpec spec = checked(raw, tol, strict, warnings);
  const auto m = static_cast<Index>(spec.slots());
  Registry reg;
  std::vector<QuantityId> v_ids, s_ids;
  for (Index s = 0; s < m; ++s) v_ids.push_back(reg.add(quantity_label('V', spec.r, static_cast<std::size_t>(s))));
  for (Index s = 0; s < m; ++s) s_ids.push_back(reg.add(quantity_label('S', spec.r, static_cast<std::size_t>(s))));

  const Eigen::VectorXd ev = linalg::to_slots(spec.expected_population());
  Eigen::VectorXd mean(2 * m);
  mean << ev, ev;
  const Eigen::MatrixXd u = spec.u();
  Eigen::MatrixXd cov(2 * m, 2 * m);
  cov.topLeftCorner(m, m) = spec.v_prime;
  cov.topRightCorner(m, m) = spec.v_prime;
  cov.bottomLeftCorner(m, m) = spec.v_prime;
  cov.bottomRightCorner(m, m) = spec.v_prime + u / static_cast<double>(n);

  BeliefStore store(std::move(reg), std::move(mean), std::move(cov), tol, strict);
  warnings.insert(warnings.end(), store.warnings().begin(), store.warnings().end());
  return CovarianceBeliefs{spec.r, n, std::move(store), std::move(v_ids), std::move(s_ids), std::move(warnings)};
}

Observation observe_sample(const CovarianceBeliefs& beliefs, const Eigen::MatrixXd& s) {
  const auto r = static_cast<Index>(beliefs.r);
  if (s.rows() != r || s.cols() != r) {
    throw InputError("observed sample covariance must be " + std::to_string(r) + "x" + std::to_string(r));
  }
  if (beliefs.s_ids.empty()) throw InputError("belief store has no sample quantities");
  Observation obs;
  for (std::size_t slot = 0; slot < beliefs.s_ids.size(); ++slot) {
    const auto [i, j] = slot_pair(beliefs.r, slot);
    obs.set(beliefs.s_ids[slot], s(static_cast<Index>(i), static_cast<Index>(j)));
  }
  return obs;
}

namespace {
RandomMatrix matrix_of(std::size_t r, const std::vector<QuantityId>& ids) {
  if (ids.size() != slot_count(r)) throw InputError("quantity handles do not cover every slot");
  std::vector<AffineForm> slots;
  for (const auto id : ids) slots.push_back(AffineForm::of(id));
  return RandomMatrix(r, std::move(slots));
}
}  // namespace

RandomMatrix population_matrix(const CovarianceBeliefs& b) { return matrix_of(b.r, b.v_ids); }
RandomMatrix sample_matrix(const CovarianceBeliefs& b) { return matrix_of(b.r, b.s_ids); }

// ------------------------------------------------------------------ data

Eigen::MatrixXd sample_covariance(const DataBatch& data) {
  if (data.n() < 2) {
    throw InsufficientDataError("sample covariance needs at least 2 observations, got " + std::to_string(data.n()));
  }
  if (data.r() == 0) throw DataError("data batch has no columns");
  for (Index k = 0; k < data.values.rows(); ++k) {
    if (!data.values.row(k).allFinite()) {
      throw DataError("non-finite value in observation row " + std::to_string(k + 1));
    }
  }
  return row_order_free_covariance(data.values);
}

// -------------------------------------------------------- gaussian spec

Eigen::MatrixXd gaussian_fourth_moments(const Eigen::MatrixXd& ev) {
  if (ev.rows() != ev.cols() || ev.rows() == 0) throw InputError("ev must be square and non-empty");
  const auto r = static_cast<std::size_t>(ev.rows());
  const auto m = static_cast<Index>(slot_count(r));
  Eigen::MatrixXd u(m, m);
  for (Index a = 0; a < m; ++a) {
    const auto [i, j] = slot_pair(r, static_cast<std::size_t>(a));
    for (Index b = 0; b < m; ++b) {
      const auto [p, q] = slot_pair(r, static_cast<std::size_t>(b));
      const auto I = static_cast<Index>(i), J = static_cast<Index>(j), P = static_cast<Index>(p),
                 Q = static_cast<Index>(q);
      u(a, b) = ev(I, P) * ev(J, Q) + ev(I, Q) * ev(J, P);
    }
  }
  return u;
}

GaussianResidualSpec gaussian_residual_spec(const Eigen::MatrixXd& ev, const Eigen::MatrixXd& v_prime,
                                            const Tolerances& tol, bool strict) {
  if (ev.rows() != ev.cols() || ev.rows() == 0) throw InputError("ev must be square and non-empty");
  if (linalg::relative_asymmetry(ev) > tol.symmetry) throw SpecError("ev is not symmetric");
  const auto r = static_cast<std::size_t>(ev.rows());
  const auto m = static_cast<Index>(slot_count(r));
  if (v_prime.rows() != m || v_prime.cols() != m) {
    throw SpecError("v_prime must be " + std::to_string(m) + "x" + std::to_string(m) + " for r = " +
                    std::to_string(r));
  }
  const Eigen::MatrixXd sym = symmetrize(ev);
  std::vector<std::string> psd;
  check_psd(psd, "ev", sym, tol.psd);
  if (strict && !psd.empty()) throw SpecError(std::move(psd));

  GaussianResidualSpec out;
  out.u = gaussian_fourth_moments(sym);
  out.v = symmetrize(v_prime) + out.u;
  out.provenance =
      "u_ijpq = ev_ip*ev_jq + ev_iq*ev_jp (zero-mean Gaussian fourth moments) evaluated at the supplied ev "
      "(plug-in at E(V), no integration over uncertainty in V); v = v_prime + u";
  if (!psd.empty()) out.provenance += "; warning: " + psd.front();
  return out;
}

QuadraticMomentEstimate monte_carlo_quadratic_covariance(const Eigen::MatrixXd& ev, std::size_t draws,
                                                         std::uint64_t seed) {
  if (ev.rows() != ev.cols() || ev.rows() == 0) throw InputError("ev must be square and non-empty");
  if (draws < 2) throw InsufficientDataError("Monte Carlo needs at least 2 draws");
  const auto r = static_cast<std::size_t>(ev.rows());
  const auto m = static_cast<Index>(slot_count(r));

  // Symmetric square root handles singular (PSD) covariances.
  const auto eig = linalg::eigen_symmetric(symmetrize(ev));
  const Eigen::MatrixXd root =
      eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.vectors.transpose();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Index>(draws);
  Eigen::MatrixXd products(n, m);
  Eigen::VectorXd z(static_cast<Index>(r));
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    const Eigen::VectorXd x = root * z;
    for (Index s = 0; s < m; ++s) {
      const auto [i, j] = slot_pair(r, static_cast<std::size_t>(s));
      products(k, s) = x(static_cast<Index>(i)) * x(static_cast<Index>(j));
    }
  }

  QuadraticMomentEstimate out;
  out.draws = draws;
  Eigen::MatrixXd centred;
  out.covariance = column_covariance(products, &centred);
  out.standard_error.resize(m, m);
  const auto& kt = kernels::active();
  Eigen::VectorXd cross(n);
  const double N = static_cast<double>(draws);
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) {
      cross = centred.col(a).cwiseProduct(centred.col(b));
      const double mean = kt.sum(cross.data(), draws) / N;
      const double var = (kt.dot(cross.data(), cross.data(), draws) - N * mean * mean) / (N - 1.0);
      const double se = std::sqrt(std::max(var, 0.0) / N);
      out.standard_error(a, b) = se;
      out.standard_error(b, a) = se;
    }
  }
  return out;
}

}  // namespace blin
