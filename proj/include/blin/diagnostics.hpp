#pragma once

// Interpretive diagnostics for matrix adjustments: bearings and their size,
// conditional linear independence, eigenvalue warnings on revised matrices,
// and a DOT export of the diagnostic influence diagram.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "blin/adjustment.hpp"
#include "blin/belief_core.hpp"
#include "blin/common.hpp"

namespace blin {

struct BearingReport {
  Eigen::MatrixXd g_ref;
  Eigen::VectorXd coefficients;   // per collection member
  RandomMatrix bearing;           // sum b_t (D_t - E(D_t))
  Eigen::MatrixXd realized_bearing;
  double size = 0.0;              // b' G b = (bearing, bearing)
  double expected_size = 0.0;     // Tr(G^+ K), K_st = Cov(rho_s, rho_t)
  std::optional<double> size_ratio;
};

Eigen::MatrixXd all_ones(std::size_t r);

// The bearing of the adjustment by an observed collection against the
// constant reference matrix g_ref: the element of span{D_t - E(D_t)} whose
// inner product with each centred member equals the realised change
// Tr((d_t - E(D_t)) g_ref).
BearingReport bearing(const Collection& data, const Eigen::MatrixXd& g_ref, const BeliefStore& store,
                      const Tolerances& tol = {});

enum class SizeTag { larger_than_expected, smaller_than_expected, consistent, undefined };

std::string to_string(SizeTag tag);

struct SizeThresholds {
  double larger = 2.5;
  double smaller = 0.4;
};

struct SizeRatio {
  std::optional<double> ratio;
  SizeTag tag = SizeTag::undefined;
};

SizeTag classify_size_ratio(std::optional<double> ratio, const SizeThresholds& thresholds = {});
SizeRatio size_ratio(const BearingReport& report, const SizeThresholds& thresholds = {});

struct IndependenceCheck {
  double value = 0.0;  // (B - E_D(B), C - E_D(C))
  double scale = 0.0;  // sqrt((B - E(B), B - E(B)) * (C - E(C), C - E(C)))
  bool independent = false;
};

/// B and C are conditionally linearly independent given D when the adjusted residuals are orthogonal.
IndependenceCheck cond_lin_indep(const RandomMatrix& b, const RandomMatrix& c, const Collection& data,
                                 const BeliefStore& store, const Tolerances& tol = {});

struct EigenDiagnostic {
  Eigen::VectorXd eigenvalues;             // descending
  std::vector<std::size_t> negative;       // indices into eigenvalues
  double condition_number = 0.0;           // |lambda|max / |lambda|min, inf when singular
  bool has_negative() const { return !negative.empty(); }
};

EigenDiagnostic eigen_diagnostic(const Eigen::MatrixXd& m, const Tolerances& tol = {});

struct DiagramNode {
  std::string label;
  std::vector<double> segments;        // resolution increments, in adjustment order
  std::optional<double> size_ratio;
};

struct DiagramArc {
  std::string from;
  std::string to;
  bool reversed = false;
};

struct DiagramModel {
  std::vector<DiagramNode> nodes;
  std::vector<DiagramArc> arcs;
  SizeThresholds thresholds;
};

/// Graphviz DOT text; byte-identical for equal models.
std::string diagram_export(const DiagramModel& model);

}  // namespace blin
