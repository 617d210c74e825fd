#pragma once

// Adjusted expectations by orthogonal projection in the space of random
// symmetric matrices, plus the canonical projection collections built from
// sample and population covariance quantities.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "blin/belief_core.hpp"
#include "blin/common.hpp"

namespace blin {

enum class CollectionLabel { D_S, D_I, D_C, V_I, C, custom };

std::string_view to_string(CollectionLabel label);

struct Collection {
  CollectionLabel label = CollectionLabel::custom;
  std::vector<RandomMatrix> members;
  // Realisations of the members, in the same order, when observed.
  std::optional<std::vector<Eigen::MatrixXd>> observed;

  std::size_t size() const { return members.size(); }
  bool is_observed() const { return observed.has_value(); }
  /// Throws InputError on mixed dimensions or observations off a member's pattern.
  void validate() const;
};

struct DataCollections {
  Collection d_s;  // [S]
  Collection d_i;  // S_ij at its own slot, one per slot
  Collection d_c;  // S_pq at slot (i,j), every pair of slots
};

DataCollections build_collections(const std::vector<QuantityId>& s_ids, std::size_t r);

/// Unit patterns, one per slot: E_ii, or E_ij + E_ji off the diagonal.
Collection build_constant_basis(std::size_t r);

/// V_ij at its own slot, one per slot.
Collection build_individual_population(const std::vector<QuantityId>& v_ids, std::size_t r);

/// Copy of the collection with every member realised under the observation.
Collection with_observation(Collection collection, const Observation& obs);

/// Members of all collections in order; the label is that of the last one.
Collection union_of(std::span<const Collection> collections);

struct AdjustmentResult {
  Eigen::VectorXd coefficients;       // one per member of the adjusting collection
  RandomMatrix adjusted;              // E(B) + sum a_t (D_t - E(D_t))
  std::optional<Eigen::MatrixXd> realized;
  double resolution = 0.0;
  double prior_norm_sq = 0.0;         // (B - E(B), B - E(B))
  double resolved_norm_sq = 0.0;      // a' G a
  double residual_norm_sq = 0.0;      // (B - E_D(B), B - E_D(B))
  Eigen::Index rank = 0;              // rank of the Gram matrix used
};

// Projection of B onto span{D_t - E(D_t)} without using observations.
// Coefficients are G^+ g with G_st = (W_s, W_t), g_s = (B - E(B), W_s);
// exact duplicate members share one Gram row and split their coefficient evenly,
// which keeps the coefficient vector minimum-norm over the full list.
AdjustmentResult project(const RandomMatrix& target, const Collection& data, const BeliefStore& store,
                         const Tolerances& tol = {});

/// project() plus the realised adjusted expectation. Requires observations.
AdjustmentResult adjust(const RandomMatrix& target, const Collection& data, const BeliefStore& store,
                        const Tolerances& tol = {});

struct StepwiseAdjustment {
  std::vector<AdjustmentResult> steps;  // step k uses collections 1..k
  std::vector<double> increments;       // resolution_k - resolution_{k-1}
};

StepwiseAdjustment adjust_stepwise(const RandomMatrix& target, std::span<const Collection> sequence,
                                   const BeliefStore& store, const Tolerances& tol = {});

struct CollectionAdjustment {
  std::vector<AdjustmentResult> members;
  /// sum of resolved norms / sum of prior norms over the target members.
  double resolution = 0.0;
};

CollectionAdjustment adjust_collection(const Collection& targets, const Collection& data, const BeliefStore& store,
                                       const Tolerances& tol = {});

// Scalar Bayes linear adjustment of the vector (V_ij) by the vector (S_ij):
//   E(V) + Cov(V, S) Cov(S, S)^+ (s - E(S)), returned in slot order.
Eigen::VectorXd adjust_elementwise_oracle(const std::vector<QuantityId>& v_ids, const std::vector<QuantityId>& s_ids,
                                          const BeliefStore& store, const Observation& obs,
                                          const Tolerances& tol = {});

}  // namespace blin
