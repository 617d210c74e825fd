#include "blin/belief_core.hpp"

#include <algorithm>
#include <cmath>

#include "blin/linalg.hpp"

namespace blin {

// ---------------------------------------------------------------- Registry

QuantityId Registry::add(std::string label) {
  if (label.empty()) throw SpecError("quantity label must not be empty");
  if (index_.contains(label)) throw SpecError("duplicate quantity label '" + label + "'");
  const auto idx = static_cast<std::uint32_t>(labels_.size());
  index_.emplace(label, idx);
  labels_.push_back(std::move(label));
  return QuantityId{idx};
}

std::optional<QuantityId> Registry::find(std::string_view label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return QuantityId{it->second};
}

QuantityId Registry::at(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw SpecError("unregistered quantity '" + std::string(label) + "'");
}

const std::string& Registry::label(QuantityId id) const {
  if (!contains(id)) throw SpecError("unregistered quantity #" + std::to_string(id.index));
  return labels_[id.index];
}

// -------------------------------------------------------------- AffineForm

AffineForm AffineForm::of(QuantityId id, double coeff, double constant) {
  AffineForm f(constant);
  if (coeff != 0.0) f.terms_.push_back({id, coeff});
  return f;
}

void AffineForm::add_scaled(const AffineForm& other, double s) {
  constant_ += s * other.constant_;
  if (other.terms_.empty() || s == 0.0) return;
  std::vector<Term> merged;
  merged.reserve(terms_.size() + other.terms_.size());
  auto a = terms_.begin();
  auto b = other.terms_.begin();
  while (a != terms_.end() || b != other.terms_.end()) {
    if (b == other.terms_.end() || (a != terms_.end() && a->id < b->id)) {
      merged.push_back(*a++);
    } else if (a == terms_.end() || b->id < a->id) {
      merged.push_back({b->id, s * b->coeff});
      ++b;
    } else {
      const double c = a->coeff + s * b->coeff;
      if (c != 0.0) merged.push_back({a->id, c});
      ++a;
      ++b;
    }
  }
  terms_ = std::move(merged);
}

AffineForm& AffineForm::operator+=(const AffineForm& other) {
  add_scaled(other, 1.0);
  return *this;
}

AffineForm& AffineForm::operator-=(const AffineForm& other) {
  add_scaled(other, -1.0);
  return *this;
}

AffineForm& AffineForm::operator*=(double s) {
  constant_ *= s;
  if (s == 0.0) {
    terms_.clear();
  } else {
    for (auto& t : terms_) t.coeff *= s;
  }
  return *this;
}

// ------------------------------------------------------------- Observation

std::optional<double> Observation::value(QuantityId id) const {
  const auto it = values_.find(id.index);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

// ------------------------------------------------------------ RandomMatrix

RandomMatrix::RandomMatrix(std::size_t dim) : dim_(dim), slots_(blin::slot_count(dim)) {
  if (dim == 0) throw InputError("random matrix dimension must be positive");
}

RandomMatrix::RandomMatrix(std::size_t dim, std::vector<AffineForm> slots)
    : dim_(dim), slots_(std::move(slots)) {
  if (dim == 0) throw InputError("random matrix dimension must be positive");
  if (slots_.size() != blin::slot_count(dim)) {
    throw InputError("random matrix of dimension " + std::to_string(dim) + " needs " +
                     std::to_string(blin::slot_count(dim)) + " slots, got " +
                     std::to_string(slots_.size()));
  }
}

RandomMatrix RandomMatrix::constant(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw InputError("constant matrix must be square and non-empty");
  if (linalg::relative_asymmetry(m) > 1e-12) throw InputError("constant matrix is not symmetric");
  const auto r = static_cast<std::size_t>(m.rows());
  RandomMatrix out(r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i; j < r; ++j) {
      out.slots_[slot_index(r, i, j)] = AffineForm(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

RandomMatrix RandomMatrix::single(std::size_t dim, std::size_t i, std::size_t j, AffineForm form) {
  if (i >= dim || j >= dim) throw InputError("slot index out of range");
  RandomMatrix out(dim);
  out.slots_[slot_index(dim, i, j)] = std::move(form);
  return out;
}

bool RandomMatrix::is_constant() const {
  return std::all_of(slots_.begin(), slots_.end(), [](const AffineForm& f) { return f.is_constant(); });
}

std::vector<std::size_t> RandomMatrix::support() const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    if (!slots_[s].is_zero()) out.push_back(s);
  }
  return out;
}

Eigen::MatrixXd RandomMatrix::realize(const Observation& obs) const {
  const auto r = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd out(r, r);
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    double v = slots_[s].constant();
    for (const auto& t : slots_[s].terms()) {
      const auto x = obs.value(t.id);
      if (!x) throw InputError("no observed value for quantity #" + std::to_string(t.id.index));
      v += t.coeff * *x;
    }
    const auto [i, j] = slot_pair(dim_, s);
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

void RandomMatrix::require_same_dim(const RandomMatrix& other) const {
  if (dim_ != other.dim_) {
    throw InputError("dimension mismatch: " + std::to_string(dim_) + " vs " + std::to_string(other.dim_));
  }
}

RandomMatrix& RandomMatrix::operator+=(const RandomMatrix& other) {
  require_same_dim(other);
  for (std::size_t s = 0; s < slots_.size(); ++s) slots_[s] += other.slots_[s];
  return *this;
}

RandomMatrix& RandomMatrix::operator-=(const RandomMatrix& other) {
  require_same_dim(other);
  for (std::size_t s = 0; s < slots_.size(); ++s) slots_[s] -= other.slots_[s];
  return *this;
}

RandomMatrix& RandomMatrix::operator*=(double s) {
  for (auto& f : slots_) f *= s;
  return *this;
}

// ------------------------------------------------------------- BeliefStore

BeliefStore::BeliefStore(Registry registry, Eigen::VectorXd expectation, Eigen::MatrixXd covariance,
                         const Tolerances& tol, bool strict)
    : registry_(std::move(registry)), expectation_(std::move(expectation)), covariance_(std::move(covariance)) {
  const auto n = static_cast<Eigen::Index>(registry_.size());
  if (expectation_.size() != n || covariance_.rows() != n || covariance_.cols() != n) {
    throw SpecError("belief store: expectation/covariance sizes do not match the registry (" +
                    std::to_string(n) + " quantities)");
  }
  std::vector<std::string> errors;
  for (Eigen::Index a = 0; a < n; ++a) {
    if (!std::isfinite(expectation_(a))) {
      errors.push_back("E(" + registry_.labels()[a] + ") is not finite");
    }
    if (!(covariance_(a, a) >= 0.0)) {
      errors.push_back("Var(" + registry_.labels()[a] + ") is negative or not finite");
    }
    for (Eigen::Index b = a + 1; b < n; ++b) {
      if (covariance_(a, b) != covariance_(b, a)) {
        errors.push_back("Cov(" + registry_.labels()[a] + "," + registry_.labels()[b] + ") is not symmetric");
      }
    }
  }
  if (!errors.empty()) throw SpecError(std::move(errors));
  const auto psd = linalg::check_psd(covariance_, tol.psd);
  if (!psd.ok) {
    std::string msg = "belief store covariance is not positive semi-definite (smallest eigenvalue " +
                      std::to_string(psd.min_eigenvalue) + ", largest " + std::to_string(psd.max_eigenvalue) + ")";
    if (strict) throw SpecError(msg);
    warnings_.push_back(std::move(msg));
  }
}

void BeliefStore::require(QuantityId id) const {
  if (!registry_.contains(id)) {
    throw SpecError("unregistered quantity #" + std::to_string(id.index) + " (store holds " +
                    std::to_string(registry_.size()) + " quantities)");
  }
}

void BeliefStore::require(const RandomMatrix& m) const {
  for (const auto& f : m.slots()) {
    for (const auto& t : f.terms()) require(t.id);
  }
}

double BeliefStore::expectation(QuantityId id) const {
  require(id);
  return expectation_(id.index);
}

double BeliefStore::covariance(QuantityId a, QuantityId b) const {
  require(a);
  require(b);
  return covariance_(a.index, b.index);
}

double BeliefStore::expectation(const AffineForm& f) const {
  // Same order as center(), so a centred form has expectation exactly 0.
  double random_mean = 0.0;
  for (const auto& t : f.terms()) random_mean += t.coeff * expectation(t.id);
  return f.constant() + random_mean;
}

namespace {
double ordered_covariance(const Eigen::MatrixXd& cov, const AffineForm& f, const AffineForm& g) {
  double c = 0.0;
  for (const auto& a : f.terms()) {
    double row = 0.0;
    for (const auto& b : g.terms()) row += b.coeff * cov(a.id.index, b.id.index);
    c += a.coeff * row;
  }
  return c;
}
}  // namespace

// Both summation orders are averaged so Cov(f, g) == Cov(g, f) bit for bit.
double BeliefStore::covariance(const AffineForm& f, const AffineForm& g) const {
  for (const auto& a : f.terms()) require(a.id);
  for (const auto& b : g.terms()) require(b.id);
  if (f.terms().empty() || g.terms().empty()) return 0.0;
  if (&f == &g || f == g) return ordered_covariance(covariance_, f, f);
  return 0.5 * (ordered_covariance(covariance_, f, g) + ordered_covariance(covariance_, g, f));
}

// -------------------------------------------------------------- geometry

Eigen::MatrixXd expectation_matrix(const RandomMatrix& p, const BeliefStore& store) {
  const auto r = p.dim();
  Eigen::MatrixXd out(r, r);
  for (std::size_t s = 0; s < p.slot_count(); ++s) {
    const double e = store.expectation(p.slot(s));
    const auto [i, j] = slot_pair(r, s);
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e;
    out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = e;
  }
  return out;
}

double inner_product(const RandomMatrix& p, const RandomMatrix& q, const BeliefStore& store) {
  if (p.dim() != q.dim()) {
    throw InputError("inner_product: dimension mismatch " + std::to_string(p.dim()) + " vs " +
                     std::to_string(q.dim()));
  }
  store.require(p);
  store.require(q);
  const auto r = p.dim();
  double total = 0.0;
  std::size_t s = 0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i; j < r; ++j, ++s) {
      const auto& a = p.slot(s);
      const auto& b = q.slot(s);
      if (a.is_zero() || b.is_zero()) continue;
      // E(ab) = Cov(a,b) + E(a)E(b); off-diagonal slots appear at (i,j) and (j,i).
      const double e_ab = store.covariance(a, b) + store.expectation(a) * store.expectation(b);
      total += (i == j ? 1.0 : 2.0) * e_ab;
    }
  }
  return total;
}

double distance_sq(const RandomMatrix& p, const RandomMatrix& q, const BeliefStore& store,
                   const Tolerances& tol) {
  const RandomMatrix diff = p - q;
  const double d = inner_product(diff, diff, store);
  if (d < 0.0) {
    const double scale = std::max({1.0, std::abs(inner_product(p, p, store)), std::abs(inner_product(q, q, store))});
    if (d >= -tol.num * scale) return 0.0;
  }
  return d;
}

RandomMatrix center(const RandomMatrix& p, const BeliefStore& store) {
  std::vector<AffineForm> slots;
  slots.reserve(p.slot_count());
  for (const auto& f : p.slots()) {
    // The constant is rebuilt from the terms alone so centring is exactly idempotent.
    double random_mean = 0.0;
    for (const auto& t : f.terms()) random_mean += t.coeff * store.expectation(t.id);
    AffineForm c = f;
    c -= AffineForm(f.constant());
    c += AffineForm(0.0 - random_mean);
    slots.push_back(std::move(c));
  }
  return RandomMatrix(p.dim(), std::move(slots));
}

bool equivalent(const RandomMatrix& p, const RandomMatrix& q, const BeliefStore& store, const Tolerances& tol) {
  const double scale = std::max({1.0, inner_product(p, p, store), inner_product(q, q, store)});
  return distance_sq(p, q, store, tol) <= tol.eq * scale;
}

double trace_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("trace_product: shape mismatch");
  return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace blin
