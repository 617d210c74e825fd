#pragma once

// Second-order exchangeable specifications for vector observations and the
// belief stores they induce over the population covariance quantities V_ij
// and the sample covariances S_ij = V_ij + T_ij.
//
// Fourth-order tensors (v, v', u) are stored as m x m symmetric matrices over
// unordered slots (i <= j), m = r(r+1)/2, in slot_index order.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blin/belief_core.hpp"
#include "blin/common.hpp"

namespace blin {

struct ExchangeableSpec {
  std::size_t r = 0;
  Eigen::VectorXd mu;        // E(X_ik)
  Eigen::MatrixXd c;         // Cov(X_ik, X_jk)
  Eigen::MatrixXd c_prime;   // Cov(X_ik, X_jl), k != l
  Eigen::MatrixXd v;         // Cov(R_ik R_jk, R_pk R_qk)
  Eigen::MatrixXd v_prime;   // Cov(R_ik R_jk, R_pl R_ql), k != l
  std::optional<Eigen::MatrixXd> e_v_override;  // E(V) given directly
  std::optional<std::size_t> n;                 // default sample size

  std::size_t slots() const { return slot_count(r); }
  /// u = v - v': covariance of the individual quadratic-product residuals.
  Eigen::MatrixXd u() const { return v - v_prime; }
  /// E(V): the override when present, otherwise c - c'.
  Eigen::MatrixXd expected_population() const;
  bool operator==(const ExchangeableSpec&) const;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

/// Collects every violation. PSD failures are warnings unless strict.
ValidationReport validate(const ExchangeableSpec& spec, const Tolerances& tol = {}, bool strict = false);

struct CovarianceBeliefs {
  std::size_t r = 0;
  std::size_t n = 0;                 // 0 for population-only stores
  BeliefStore store;
  std::vector<QuantityId> v_ids;     // indexed by slot
  std::vector<QuantityId> s_ids;     // empty for population-only stores
  std::vector<std::string> warnings;
};

/// Label of V_ij / S_ij (1-based): "V_12", or "V_1_12" once r > 9.
std::string quantity_label(char prefix, std::size_t r, std::size_t slot);

/// Beliefs over {V_ij}: E(V) = c - c' (or the override), Cov(V_ij, V_pq) = v'_ijpq.
CovarianceBeliefs population_beliefs(const ExchangeableSpec& spec, const Tolerances& tol = {},
                                     bool strict = false);

// Beliefs over {V_ij} and {S_ij} for a sample of size n:
//   E(S) = E(V), Cov(S_ij, S_pq) = v'_ijpq + u_ijpq / n, Cov(V_ij, S_pq) = v'_ijpq.
CovarianceBeliefs sample_beliefs(const ExchangeableSpec& spec, std::size_t n, const Tolerances& tol = {},
                                 bool strict = false);

/// Observation assigning S_ij := s(i,j).
Observation observe_sample(const CovarianceBeliefs& beliefs, const Eigen::MatrixXd& s);

/// V and S as random matrices over the store's quantities.
RandomMatrix population_matrix(const CovarianceBeliefs& beliefs);
RandomMatrix sample_matrix(const CovarianceBeliefs& beliefs);

struct DataBatch {
  Eigen::MatrixXd values;  // n x r, one observation per row
  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t r() const { return static_cast<std::size_t>(values.cols()); }
};

/// Unbiased (divisor n - 1) sample covariance of the columns.
Eigen::MatrixXd sample_covariance(const DataBatch& data);

struct GaussianResidualSpec {
  Eigen::MatrixXd u;  // ev_ip ev_jq + ev_iq ev_jp
  Eigen::MatrixXd v;  // v' + u
  std::string provenance;
};

/// Fourth-moment tensor of zero-mean Gaussian residuals with covariance ev.
Eigen::MatrixXd gaussian_fourth_moments(const Eigen::MatrixXd& ev);

/// Gaussian-consistent residual specification evaluated at ev (normally E(V)).
GaussianResidualSpec gaussian_residual_spec(const Eigen::MatrixXd& ev, const Eigen::MatrixXd& v_prime,
                                            const Tolerances& tol = {}, bool strict = false);

struct QuadraticMomentEstimate {
  std::size_t draws = 0;
  Eigen::MatrixXd covariance;      // m x m, estimate of Cov(R_i R_j, R_p R_q)
  Eigen::MatrixXd standard_error;  // per entry
};

// Monte Carlo estimate of the quadratic-product covariance for zero-mean
// Gaussian residuals with covariance ev. Deterministic given the seed.
QuadraticMomentEstimate monte_carlo_quadratic_covariance(const Eigen::MatrixXd& ev, std::size_t draws,
                                                         std::uint64_t seed);

}  // namespace blin
