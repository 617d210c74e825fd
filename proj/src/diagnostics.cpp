#include "blin/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "blin/linalg.hpp"

namespace blin {

using Eigen::Index;

Eigen::MatrixXd all_ones(std::size_t r) {
  return Eigen::MatrixXd::Ones(static_cast<Index>(r), static_cast<Index>(r));
}

namespace {

// Tr(W G_ref) as an affine form over the store's quantities.
AffineForm trace_against(const RandomMatrix& w, const Eigen::MatrixXd& g_ref) {
  AffineForm out;
  const auto r = w.dim();
  for (std::size_t s = 0; s < w.slot_count(); ++s) {
    if (w.slot(s).is_zero()) continue;
    const auto [i, j] = slot_pair(r, s);
    const auto I = static_cast<Index>(i), J = static_cast<Index>(j);
    const double weight = i == j ? g_ref(I, I) : g_ref(I, J) + g_ref(J, I);
    out += weight * w.slot(s);
  }
  return out;
}

}  // namespace

BearingReport bearing(const Collection& data, const Eigen::MatrixXd& g_ref, const BeliefStore& store,
                      const Tolerances& tol) {
  if (!data.is_observed()) throw InputError("bearing needs an observed collection");
  data.validate();
  if (data.members.empty()) throw InputError("bearing needs a non-empty collection");
  const auto r = data.members.front().dim();
  if (g_ref.rows() != static_cast<Index>(r) || g_ref.cols() != static_cast<Index>(r)) {
    throw InputError("reference matrix must be " + std::to_string(r) + "x" + std::to_string(r));
  }
  if (linalg::relative_asymmetry(g_ref) > tol.symmetry) throw InputError("reference matrix is not symmetric");

  // Distinct members, centred.
  std::vector<std::size_t> kept;
  std::vector<RandomMatrix> centred;
  for (std::size_t t = 0; t < data.members.size(); ++t) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) { return data.members[k] == data.members[t]; });
    if (dup) continue;
    kept.push_back(t);
    centred.push_back(center(data.members[t], store));
  }
  const auto k = static_cast<Index>(kept.size());
  Eigen::MatrixXd gram(k, k), cov_rho(k, k);
  Eigen::VectorXd rho(k);
  std::vector<AffineForm> rho_forms;
  std::vector<Eigen::MatrixXd> changes;
  for (Index s = 0; s < k; ++s) {
    const auto t = kept[static_cast<std::size_t>(s)];
    changes.push_back((*data.observed)[t] - expectation_matrix(data.members[t], store));
    rho(s) = trace_product(changes.back(), g_ref);
    rho_forms.push_back(trace_against(centred[static_cast<std::size_t>(s)], g_ref));
  }
  for (Index s = 0; s < k; ++s) {
    for (Index t = s; t < k; ++t) {
      const auto us = static_cast<std::size_t>(s), ut = static_cast<std::size_t>(t);
      gram(s, t) = gram(t, s) = inner_product(centred[us], centred[ut], store);
      cov_rho(s, t) = cov_rho(t, s) = store.covariance(rho_forms[us], rho_forms[ut]);
    }
  }
  auto pinv = linalg::symmetric_pinv(gram, tol.pinv);
  if (k > 0 && pinv.lambda_min < -tol.psd * std::max(pinv.lambda_max, 0.0)) {
    throw SpecError("Gram matrix of the adjusting collection is not positive semi-definite");
  }
  const Eigen::VectorXd b = pinv.matrix * rho;

  BearingReport out;
  out.g_ref = g_ref;
  out.coefficients = Eigen::VectorXd::Zero(static_cast<Index>(data.members.size()));
  out.bearing = RandomMatrix(r);
  out.realized_bearing = Eigen::MatrixXd::Zero(static_cast<Index>(r), static_cast<Index>(r));
  for (Index s = 0; s < k; ++s) {
    const auto us = static_cast<std::size_t>(s);
    out.coefficients(static_cast<Index>(kept[us])) = b(s);
    if (b(s) == 0.0) continue;
    out.bearing += b(s) * centred[us];
    out.realized_bearing += b(s) * changes[us];
  }
  out.size = k > 0 ? std::max(0.0, b.dot(gram * b)) : 0.0;
  out.expected_size = k > 0 ? std::max(0.0, (pinv.matrix * cov_rho).trace()) : 0.0;
  if (out.expected_size > 0.0) out.size_ratio = out.size / out.expected_size;
  return out;
}

std::string to_string(SizeTag tag) {
  switch (tag) {
    case SizeTag::larger_than_expected: return "larger-than-expected";
    case SizeTag::smaller_than_expected: return "smaller-than-expected";
    case SizeTag::consistent: return "consistent";
    case SizeTag::undefined: return "undefined";
  }
  return "undefined";
}

SizeTag classify_size_ratio(std::optional<double> ratio, const SizeThresholds& th) {
  if (!ratio || !std::isfinite(*ratio)) return SizeTag::undefined;
  if (*ratio > th.larger) return SizeTag::larger_than_expected;
  if (*ratio < th.smaller) return SizeTag::smaller_than_expected;
  return SizeTag::consistent;
}

SizeRatio size_ratio(const BearingReport& report, const SizeThresholds& thresholds) {
  SizeRatio out;
  if (report.expected_size > 0.0) out.ratio = report.size / report.expected_size;
  out.tag = classify_size_ratio(out.ratio, thresholds);
  return out;
}

IndependenceCheck cond_lin_indep(const RandomMatrix& b, const RandomMatrix& c, const Collection& data,
                                 const BeliefStore& store, const Tolerances& tol) {
  // Residual of X after adjustment: X - E_D(X) as a random object.
  auto residual = [&](const RandomMatrix& x) -> std::pair<RandomMatrix, double> {
    const AdjustmentResult adj = project(x, data, store, tol);
    return {x - adj.adjusted, adj.prior_norm_sq};
  };
  const auto [rb, prior_b] = residual(b);
  const auto [rc, prior_c] = residual(c);
  IndependenceCheck out;
  out.value = inner_product(rb, rc, store);
  out.scale = std::sqrt(std::max(prior_b, 0.0) * std::max(prior_c, 0.0));
  out.independent = std::abs(out.value) <= tol.independence * out.scale;
  return out;
}

EigenDiagnostic eigen_diagnostic(const Eigen::MatrixXd& m, const Tolerances& tol) {
  if (m.rows() != m.cols() || m.rows() == 0) throw InputError("eigen_diagnostic: matrix must be square and non-empty");
  if (!m.allFinite()) throw InputError("eigen_diagnostic: matrix has non-finite entries");
  if (linalg::relative_asymmetry(m) > tol.symmetry) throw InputError("eigen_diagnostic: matrix is not symmetric");
  EigenDiagnostic out;
  out.eigenvalues = linalg::eigen_symmetric(0.5 * (m + m.transpose())).values;
  const double top = out.eigenvalues(0);
  const double floor = -tol.eig * std::max(1.0, std::abs(top));
  for (Index k = 0; k < out.eigenvalues.size(); ++k) {
    if (out.eigenvalues(k) < floor) out.negative.push_back(static_cast<std::size_t>(k));
  }
  const double hi = out.eigenvalues.cwiseAbs().maxCoeff();
  const double lo = out.eigenvalues.cwiseAbs().minCoeff();
  out.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return out;
}

// ------------------------------------------------------------------ DOT

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  out += '"';
  return out;
}

std::string number(const char* format, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

const char* size_fill(SizeTag tag) {
  switch (tag) {
    case SizeTag::larger_than_expected: return "gray35";
    case SizeTag::consistent: return "gray70";
    case SizeTag::smaller_than_expected: return "gray92";
    case SizeTag::undefined: return "white";
  }
  return "white";
}

}  // namespace

std::string diagram_export(const DiagramModel& model) {
  constexpr double slack = 1e-9;
  std::set<std::string> names;
  for (const auto& node : model.nodes) {
    if (!names.insert(node.label).second) throw InputError("diagram: duplicate node '" + node.label + "'");
    double total = 0.0;
    for (double seg : node.segments) {
      if (!std::isfinite(seg) || seg < -slack || seg > 1.0 + slack) {
        throw InputError("diagram: node '" + node.label + "' has a segment outside [0,1]");
      }
      total += seg;
    }
    if (total > 1.0 + slack) throw InputError("diagram: node '" + node.label + "' segments sum above 1");
  }
  for (const auto& arc : model.arcs) {
    if (!names.contains(arc.from) || !names.contains(arc.to)) {
      throw InputError("diagram: arc " + arc.from + " -> " + arc.to + " references an unknown node");
    }
  }

  std::string out = "digraph blin {\n";
  out += "  rankdir=BT;\n";
  out += "  node [shape=circle, style=filled, fontname=\"Helvetica\", fontsize=10];\n";
  for (const auto& node : model.nodes) {
    std::string label = node.label;
    std::string segments_attr;
    double cumulative = 0.0;
    if (!node.segments.empty()) {
      label += "\nresolved:";
      for (std::size_t k = 0; k < node.segments.size(); ++k) {
        const double seg = std::clamp(node.segments[k], 0.0, 1.0);
        cumulative += seg;
        label += (k == 0 ? " " : " / ") + number("%.1f%%", 100.0 * std::min(cumulative, 1.0));
        segments_attr += (k == 0 ? "" : ",") + number("%.6f", seg);
      }
    }
    const SizeTag tag = classify_size_ratio(node.size_ratio, model.thresholds);
    if (node.size_ratio) label += "\nsize ratio " + number("%.3f", *node.size_ratio) + " (" + to_string(tag) + ")";

    out += "  " + quoted(node.label) + " [label=" + quoted(label) + ", fillcolor=\"" + size_fill(tag) + "\"";
    if (!node.segments.empty()) {
      // Outer ring thickness in quarter steps of total resolution.
      const int level = static_cast<int>(std::lround(4.0 * std::min(cumulative, 1.0)));
      out += ", penwidth=" + std::to_string(1 + level);
      out += ", peripheries=" + std::to_string(1 + node.segments.size());
      out += ", resolution_segments=" + quoted(segments_attr);
    }
    if (node.size_ratio) out += ", size_ratio=" + quoted(number("%.6f", *node.size_ratio));
    out += "];\n";
  }
  for (const auto& arc : model.arcs) {
    out += "  " + quoted(arc.from) + " -> " + quoted(arc.to);
    if (arc.reversed) out += " [dir=back]";
    out += ";\n";
  }
  out += "}\n";
  return out;
}

}  // namespace blin
