#pragma once

// Quantity registry, second-order belief store, and the space of random
// symmetric matrices whose entries are affine forms in registered
// quantities. The inner product (P, Q) = E(Tr(PQ)) defines its geometry.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "blin/common.hpp"

namespace blin {

struct QuantityId {
  std::uint32_t index = 0;
  auto operator<=>(const QuantityId&) const = default;
};

class Registry {
 public:
  QuantityId add(std::string label);
  std::optional<QuantityId> find(std::string_view label) const;
  QuantityId at(std::string_view label) const;
  const std::string& label(QuantityId id) const;
  bool contains(QuantityId id) const { return id.index < labels_.size(); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::uint32_t, std::less<>> index_;
};

struct Term {
  QuantityId id;
  double coeff = 0.0;
  bool operator==(const Term&) const = default;
};

// constant + sum coeff * quantity. Terms are kept sorted by id with merged
// duplicates and no zero coefficients, so equality is structural.
class AffineForm {
 public:
  AffineForm() = default;
  explicit AffineForm(double constant) : constant_(constant) {}
  static AffineForm of(QuantityId id, double coeff = 1.0, double constant = 0.0);

  double constant() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool is_constant() const { return terms_.empty(); }
  bool is_zero() const { return terms_.empty() && constant_ == 0.0; }

  AffineForm& operator+=(const AffineForm& other);
  AffineForm& operator-=(const AffineForm& other);
  AffineForm& operator*=(double s);
  friend AffineForm operator+(AffineForm a, const AffineForm& b) { return a += b; }
  friend AffineForm operator-(AffineForm a, const AffineForm& b) { return a -= b; }
  friend AffineForm operator*(double s, AffineForm a) { return a *= s; }
  bool operator==(const AffineForm&) const = default;

 private:
  void add_scaled(const AffineForm& other, double s);

  double constant_ = 0.0;
  std::vector<Term> terms_;
};

/// Realised values for some registered quantities.
class Observation {
 public:
  void set(QuantityId id, double value) { values_[id.index] = value; }
  std::optional<double> value(QuantityId id) const;
  bool empty() const { return values_.empty(); }

 private:
  std::map<std::uint32_t, double> values_;
};

// An r x r symmetric random matrix. One affine form per upper-triangle slot
// (see slot_index); slot (i,j) stands for both (i,j) and (j,i).
class RandomMatrix {
 public:
  explicit RandomMatrix(std::size_t dim = 1);
  RandomMatrix(std::size_t dim, std::vector<AffineForm> slots);

  /// Uses the upper triangle; throws InputError when asymmetric beyond 1e-12.
  static RandomMatrix constant(const Eigen::MatrixXd& m);
  static RandomMatrix single(std::size_t dim, std::size_t i, std::size_t j, AffineForm form);

  std::size_t dim() const { return dim_; }
  std::size_t slot_count() const { return slots_.size(); }
  const AffineForm& slot(std::size_t s) const { return slots_.at(s); }
  const AffineForm& operator()(std::size_t i, std::size_t j) const {
    return slots_.at(slot_index(dim_, i, j));
  }
  const std::vector<AffineForm>& slots() const { return slots_; }

  bool is_constant() const;
  /// Slots whose form is not identically zero.
  std::vector<std::size_t> support() const;
  /// Substitutes observed values; throws InputError when one is missing.
  Eigen::MatrixXd realize(const Observation& obs) const;

  RandomMatrix& operator+=(const RandomMatrix& other);
  RandomMatrix& operator-=(const RandomMatrix& other);
  RandomMatrix& operator*=(double s);
  friend RandomMatrix operator+(RandomMatrix a, const RandomMatrix& b) { return a += b; }
  friend RandomMatrix operator-(RandomMatrix a, const RandomMatrix& b) { return a -= b; }
  friend RandomMatrix operator*(double s, RandomMatrix a) { return a *= s; }
  bool operator==(const RandomMatrix&) const = default;

 private:
  void require_same_dim(const RandomMatrix& other) const;

  std::size_t dim_;
  std::vector<AffineForm> slots_;
};

// Expectations and covariances over the quantities of a registry.
// Immutable once built. Symmetry and non-negative variances are enforced;
// positive semi-definiteness is reported through warnings() unless strict.
class BeliefStore {
 public:
  BeliefStore(Registry registry, Eigen::VectorXd expectation, Eigen::MatrixXd covariance,
              const Tolerances& tol = {}, bool strict = false);

  const Registry& registry() const { return registry_; }
  std::size_t size() const { return registry_.size(); }
  const Eigen::VectorXd& expectations() const { return expectation_; }
  const Eigen::MatrixXd& covariances() const { return covariance_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double expectation(QuantityId id) const;
  double covariance(QuantityId a, QuantityId b) const;
  double expectation(const AffineForm& f) const;
  double covariance(const AffineForm& f, const AffineForm& g) const;

  /// Throws SpecError when the id is not registered here.
  void require(QuantityId id) const;
  void require(const RandomMatrix& m) const;

 private:
  Registry registry_;
  Eigen::VectorXd expectation_;
  Eigen::MatrixXd covariance_;
  std::vector<std::string> warnings_;
};

Eigen::MatrixXd expectation_matrix(const RandomMatrix& p, const BeliefStore& store);

/// (P, Q) = E(Tr(PQ)) = sum over all r*r positions of E(P_ij Q_ij).
double inner_product(const RandomMatrix& p, const RandomMatrix& q, const BeliefStore& store);

/// E(||P - Q||_F^2); tiny negative rounding is clamped to zero.
double distance_sq(const RandomMatrix& p, const RandomMatrix& q, const BeliefStore& store,
                   const Tolerances& tol = {});

/// P - E(P): same random part, zero expectation.
RandomMatrix center(const RandomMatrix& p, const BeliefStore& store);

/// Equality in the quotient space: distance_sq <= eq * max(1, ||P||^2, ||Q||^2).
bool equivalent(const RandomMatrix& p, const RandomMatrix& q, const BeliefStore& store,
                const Tolerances& tol = {});

/// Tr(A B) for constant symmetric matrices.
double trace_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace blin
