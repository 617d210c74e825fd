#pragma once

// File formats: the JSON belief specification, CSV observation data, and
// plain matrices (JSON array of rows, or numeric CSV without header).

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blin/diagnostics.hpp"
#include "blin/exchangeable.hpp"

namespace blin::io {

struct SpecFile {
  ExchangeableSpec spec;
  std::optional<Eigen::MatrixXd> s_observed;
  std::optional<std::vector<DiagramArc>> diagram_arcs;
  std::vector<std::string> warnings;
  std::optional<std::string> provenance;  // set when v came from the Gaussian plug-in
};

// Throws DataError on JSON syntax errors and SpecError (listing every
// problem found) on structurally invalid documents.
SpecFile parse_spec(const std::string& text, const Tolerances& tol = {}, bool strict = false);
SpecFile read_spec_file(const std::string& path, const Tolerances& tol = {}, bool strict = false);

/// Canonical JSON document for a spec; parse_spec(write_spec(s)).spec == s.
std::string write_spec(const ExchangeableSpec& spec);

/// CSV with an optional header row (detected by a non-numeric first row).
DataBatch parse_csv(std::istream& in, const std::string& source = "<input>");
DataBatch read_csv_file(const std::string& path);

Eigen::MatrixXd parse_matrix(const std::string& text, const std::string& source = "<input>");
Eigen::MatrixXd read_matrix_file(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace blin::io
