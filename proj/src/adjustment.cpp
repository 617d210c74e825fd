#include "blin/adjustment.hpp"

#include <algorithm>
#include <cmath>

#include "blin/linalg.hpp"

namespace blin {

using Eigen::Index;

std::string_view to_string(CollectionLabel label) {
  switch (label) {
    case CollectionLabel::D_S: return "D_S";
    case CollectionLabel::D_I: return "D_I";
    case CollectionLabel::D_C: return "D_C";
    case CollectionLabel::V_I: return "V_I";
    case CollectionLabel::C: return "C";
    case CollectionLabel::custom: return "custom";
  }
  return "custom";
}

void Collection::validate() const {
  if (members.empty()) return;
  const auto r = members.front().dim();
  for (const auto& m : members) {
    if (m.dim() != r) throw InputError("collection " + std::string(to_string(label)) + " mixes dimensions");
  }
  if (!observed) return;
  if (observed->size() != members.size()) {
    throw InputError("collection " + std::string(to_string(label)) + ": " + std::to_string(observed->size()) +
                     " observations for " + std::to_string(members.size()) + " members");
  }
  for (std::size_t t = 0; t < members.size(); ++t) {
    const auto& obs = (*observed)[t];
    if (obs.rows() != static_cast<Index>(r) || obs.cols() != static_cast<Index>(r)) {
      throw InputError("observation " + std::to_string(t + 1) + " has the wrong shape");
    }
    for (std::size_t s = 0; s < members[t].slot_count(); ++s) {
      const auto [i, j] = slot_pair(r, s);
      const double a = obs(static_cast<Index>(i), static_cast<Index>(j));
      const double b = obs(static_cast<Index>(j), static_cast<Index>(i));
      if (a != b) throw InputError("observation " + std::to_string(t + 1) + " is not symmetric");
      if (members[t].slot(s).is_zero() && a != 0.0) {
        throw InputError("observation " + std::to_string(t + 1) + " is non-zero at structural-zero slot " +
                         slot_name(r, s));
      }
    }
  }
}

DataCollections build_collections(const std::vector<QuantityId>& s_ids, std::size_t r) {
  const std::size_t m = slot_count(r);
  if (s_ids.size() != m) {
    throw SpecError("expected " + std::to_string(m) + " sample quantities for r = " + std::to_string(r) + ", got " +
                    std::to_string(s_ids.size()));
  }
  DataCollections out;
  out.d_s.label = CollectionLabel::D_S;
  out.d_i.label = CollectionLabel::D_I;
  out.d_c.label = CollectionLabel::D_C;

  std::vector<AffineForm> whole;
  for (const auto id : s_ids) whole.push_back(AffineForm::of(id));
  out.d_s.members.emplace_back(r, std::move(whole));

  for (std::size_t s = 0; s < m; ++s) {
    const auto [i, j] = slot_pair(r, s);
    out.d_i.members.push_back(RandomMatrix::single(r, i, j, AffineForm::of(s_ids[s])));
  }
  // Quantity-major order: S_11 at every slot, then S_12 at every slot, ...
  for (std::size_t q = 0; q < m; ++q) {
    for (std::size_t s = 0; s < m; ++s) {
      const auto [i, j] = slot_pair(r, s);
      out.d_c.members.push_back(RandomMatrix::single(r, i, j, AffineForm::of(s_ids[q])));
    }
  }
  return out;
}

Collection build_constant_basis(std::size_t r) {
  Collection out;
  out.label = CollectionLabel::C;
  for (std::size_t s = 0; s < slot_count(r); ++s) {
    const auto [i, j] = slot_pair(r, s);
    out.members.push_back(RandomMatrix::single(r, i, j, AffineForm(1.0)));
  }
  return out;
}

Collection build_individual_population(const std::vector<QuantityId>& v_ids, std::size_t r) {
  if (v_ids.size() != slot_count(r)) {
    throw SpecError("expected " + std::to_string(slot_count(r)) + " population quantities for r = " +
                    std::to_string(r) + ", got " + std::to_string(v_ids.size()));
  }
  Collection out;
  out.label = CollectionLabel::V_I;
  for (std::size_t s = 0; s < v_ids.size(); ++s) {
    const auto [i, j] = slot_pair(r, s);
    out.members.push_back(RandomMatrix::single(r, i, j, AffineForm::of(v_ids[s])));
  }
  return out;
}

Collection with_observation(Collection collection, const Observation& obs) {
  std::vector<Eigen::MatrixXd> values;
  values.reserve(collection.members.size());
  for (const auto& m : collection.members) values.push_back(m.realize(obs));
  collection.observed = std::move(values);
  return collection;
}

Collection union_of(std::span<const Collection> collections) {
  Collection out;
  bool all_observed = !collections.empty();
  for (const auto& c : collections) all_observed = all_observed && c.is_observed();
  if (all_observed) out.observed.emplace();
  for (const auto& c : collections) {
    out.label = c.label;
    out.members.insert(out.members.end(), c.members.begin(), c.members.end());
    if (all_observed) out.observed->insert(out.observed->end(), c.observed->begin(), c.observed->end());
  }
  return out;
}

namespace {

struct Gram {
  std::vector<std::size_t> kept;    // indices of distinct members
  std::vector<std::size_t> group;   // per member: position of its representative in kept
  Eigen::VectorXd multiplicity;     // per kept member
  std::vector<RandomMatrix> centred;
  Eigen::MatrixXd matrix;           // over kept members
};

Gram assemble_gram(const Collection& data, const BeliefStore& store) {
  Gram g;
  std::vector<double> counts;
  for (std::size_t t = 0; t < data.members.size(); ++t) {
    const auto it = std::find_if(g.kept.begin(), g.kept.end(),
                                 [&](std::size_t k) { return data.members[k] == data.members[t]; });
    if (it != g.kept.end()) {
      const auto pos = static_cast<std::size_t>(it - g.kept.begin());
      g.group.push_back(pos);
      counts[pos] += 1.0;
      continue;
    }
    g.group.push_back(g.kept.size());
    g.kept.push_back(t);
    counts.push_back(1.0);
    g.centred.push_back(center(data.members[t], store));
  }
  const auto k = static_cast<Index>(g.kept.size());
  g.multiplicity = Eigen::Map<const Eigen::VectorXd>(counts.data(), k);
  g.matrix.resize(k, k);
  // Fixed summation order: upper triangle row by row, mirrored.
  for (Index s = 0; s < k; ++s) {
    for (Index t = s; t < k; ++t) {
      const double v = inner_product(g.centred[static_cast<std::size_t>(s)], g.centred[static_cast<std::size_t>(t)], store);
      g.matrix(s, t) = v;
      g.matrix(t, s) = v;
    }
  }
  return g;
}

linalg::PseudoInverse checked_pinv(const Eigen::MatrixXd& gram, const Tolerances& tol) {
  auto pinv = linalg::symmetric_pinv(gram, tol.pinv);
  if (gram.rows() > 0 && pinv.lambda_min < -tol.psd * std::max(pinv.lambda_max, 0.0)) {
    throw SpecError("Gram matrix of the adjusting collection is not positive semi-definite (smallest eigenvalue " +
                    std::to_string(pinv.lambda_min) + "); the belief store is inconsistent");
  }
  return pinv;
}

}  // namespace

AdjustmentResult project(const RandomMatrix& target, const Collection& data, const BeliefStore& store,
                         const Tolerances& tol) {
  data.validate();
  for (const auto& m : data.members) {
    if (m.dim() != target.dim()) throw InputError("target and collection dimensions differ");
  }
  store.require(target);

  const Gram gram = assemble_gram(data, store);
  const RandomMatrix centred_target = center(target, store);
  const auto k = static_cast<Index>(gram.kept.size());
  Eigen::VectorXd g(k);
  for (Index s = 0; s < k; ++s) g(s) = inner_product(centred_target, gram.centred[static_cast<std::size_t>(s)], store);

  // A member repeated c times shares its group total a_k as a_k / c. The
  // minimum-norm split over the full list minimises sum a_k^2 / c_k, which is
  // the plain pseudo-inverse solution after scaling by sqrt(c).
  const Eigen::VectorXd w = gram.multiplicity.cwiseSqrt();
  const Eigen::MatrixXd weighted = w.asDiagonal() * gram.matrix * w.asDiagonal();
  const auto pinv = checked_pinv(weighted, tol);
  const Eigen::VectorXd a = w.cwiseProduct(pinv.matrix * w.cwiseProduct(g));

  AdjustmentResult out;
  out.rank = pinv.rank;
  out.coefficients.resize(static_cast<Index>(data.members.size()));
  for (std::size_t t = 0; t < data.members.size(); ++t) {
    const auto pos = static_cast<Index>(gram.group[t]);
    out.coefficients(static_cast<Index>(t)) = a(pos) / gram.multiplicity(pos);
  }
  RandomMatrix fitted(target.dim());
  for (Index s = 0; s < k; ++s) {
    if (a(s) != 0.0) fitted += a(s) * gram.centred[static_cast<std::size_t>(s)];
  }
  out.adjusted = RandomMatrix::constant(expectation_matrix(target, store)) + fitted;

  out.prior_norm_sq = inner_product(centred_target, centred_target, store);
  out.resolved_norm_sq = k > 0 ? a.dot(gram.matrix * a) : 0.0;
  const RandomMatrix residual = centred_target - fitted;
  out.residual_norm_sq = inner_product(residual, residual, store);
  const double slack = tol.num * std::max(1.0, out.prior_norm_sq);
  if (out.residual_norm_sq < 0.0 && out.residual_norm_sq >= -slack) out.residual_norm_sq = 0.0;
  out.resolution = out.prior_norm_sq > 0.0 ? out.resolved_norm_sq / out.prior_norm_sq : 0.0;
  return out;
}

AdjustmentResult adjust(const RandomMatrix& target, const Collection& data, const BeliefStore& store,
                        const Tolerances& tol) {
  if (!data.is_observed()) {
    throw InputError("collection " + std::string(to_string(data.label)) + " has no observations");
  }
  AdjustmentResult out = project(target, data, store, tol);
  Eigen::MatrixXd realized = expectation_matrix(target, store);
  for (std::size_t t = 0; t < data.members.size(); ++t) {
    const double a = out.coefficients(static_cast<Index>(t));
    if (a == 0.0) continue;
    realized += a * ((*data.observed)[t] - expectation_matrix(data.members[t], store));
  }
  out.realized = std::move(realized);
  return out;
}

StepwiseAdjustment adjust_stepwise(const RandomMatrix& target, std::span<const Collection> sequence,
                                   const BeliefStore& store, const Tolerances& tol) {
  StepwiseAdjustment out;
  double previous = 0.0;
  for (std::size_t k = 1; k <= sequence.size(); ++k) {
    const Collection joined = union_of(sequence.first(k));
    out.steps.push_back(adjust(target, joined, store, tol));
    out.increments.push_back(out.steps.back().resolution - previous);
    previous = out.steps.back().resolution;
  }
  return out;
}

CollectionAdjustment adjust_collection(const Collection& targets, const Collection& data, const BeliefStore& store,
                                       const Tolerances& tol) {
  CollectionAdjustment out;
  double prior = 0.0, resolved = 0.0;
  for (const auto& b : targets.members) {
    out.members.push_back(data.is_observed() ? adjust(b, data, store, tol) : project(b, data, store, tol));
    prior += out.members.back().prior_norm_sq;
    resolved += out.members.back().resolved_norm_sq;
  }
  out.resolution = prior > 0.0 ? resolved / prior : 0.0;
  return out;
}

Eigen::VectorXd adjust_elementwise_oracle(const std::vector<QuantityId>& v_ids, const std::vector<QuantityId>& s_ids,
                                          const BeliefStore& store, const Observation& obs, const Tolerances& tol) {
  const auto mv = static_cast<Index>(v_ids.size());
  const auto ms = static_cast<Index>(s_ids.size());
  Eigen::VectorXd ev(mv), es(ms), s(ms);
  Eigen::MatrixXd cvs(mv, ms), css(ms, ms);
  for (Index a = 0; a < mv; ++a) {
    ev(a) = store.expectation(v_ids[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < ms; ++b) cvs(a, b) = store.covariance(v_ids[static_cast<std::size_t>(a)], s_ids[static_cast<std::size_t>(b)]);
  }
  for (Index a = 0; a < ms; ++a) {
    const auto id = s_ids[static_cast<std::size_t>(a)];
    es(a) = store.expectation(id);
    const auto x = obs.value(id);
    if (!x) throw InputError("no observed value for quantity " + store.registry().label(id));
    s(a) = *x;
    for (Index b = 0; b < ms; ++b) css(a, b) = store.covariance(id, s_ids[static_cast<std::size_t>(b)]);
  }
  const auto pinv = checked_pinv(css, tol);
  return ev + cvs * (pinv.matrix * (s - es));
}

}  // namespace blin
