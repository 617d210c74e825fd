#include "blin/spec_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace blin::io {

using json = nlohmann::ordered_json;
using Eigen::Index;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_number(const std::string& field) {
  if (field.empty()) return std::nullopt;
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (*begin == '+') ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  fields.push_back(trim(current));
  return fields;
}

// Collects structural problems instead of stopping at the first one.
struct Reader {
  std::vector<std::string> errors;

  std::optional<Eigen::MatrixXd> matrix(const json& doc, const char* key, Index rows, Index cols) {
    if (!doc.contains(key)) return std::nullopt;
    return to_matrix(doc.at(key), key, rows, cols);
  }

  std::optional<Eigen::MatrixXd> to_matrix(const json& node, const std::string& name, Index rows, Index cols) {
    if (!node.is_array() || static_cast<Index>(node.size()) != rows) {
      errors.push_back(name + " must be an array of " + std::to_string(rows) + " rows");
      return std::nullopt;
    }
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      const auto& row = node[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
        errors.push_back(name + " row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
        return std::nullopt;
      }
      for (Index j = 0; j < cols; ++j) {
        const auto& x = row[static_cast<std::size_t>(j)];
        if (!x.is_number()) {
          errors.push_back(name + "[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "] is not a number");
          return std::nullopt;
        }
        m(i, j) = x.get<double>();
      }
    }
    return m;
  }

  std::optional<Eigen::VectorXd> vector(const json& doc, const char* key, Index size) {
    if (!doc.contains(key)) return std::nullopt;
    const auto& node = doc.at(key);
    if (!node.is_array() || static_cast<Index>(node.size()) != size) {
      errors.push_back(std::string(key) + " must be an array of " + std::to_string(size) + " numbers");
      return std::nullopt;
    }
    Eigen::VectorXd v(size);
    for (Index i = 0; i < size; ++i) {
      const auto& x = node[static_cast<std::size_t>(i)];
      if (!x.is_number()) {
        errors.push_back(std::string(key) + "[" + std::to_string(i + 1) + "] is not a number");
        return std::nullopt;
      }
      v(i) = x.get<double>();
    }
    return v;
  }
};

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

SpecFile parse_spec(const std::string& text, const Tolerances& tol, bool strict) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SpecError("spec must be a JSON object");
  if (!doc.contains("r") || !doc["r"].is_number_integer() || doc["r"].get<long long>() < 1) {
    throw SpecError("spec field 'r' must be a positive integer");
  }
  SpecFile out;
  auto& spec = out.spec;
  spec.r = static_cast<std::size_t>(doc["r"].get<long long>());
  const auto r = static_cast<Index>(spec.r);
  const auto m = static_cast<Index>(spec.slots());
  Reader rd;

  spec.e_v_override = rd.matrix(doc, "e_v_override", r, r);
  const bool direct = spec.e_v_override.has_value();
  auto mu = rd.vector(doc, "mu", r);
  auto c = rd.matrix(doc, "c", r, r);
  auto c_prime = rd.matrix(doc, "c_prime", r, r);
  for (const char* key : {"mu", "c", "c_prime"}) {
    if (!direct && !doc.contains(key)) rd.errors.push_back(std::string("missing field '") + key + "' (required unless e_v_override is given)");
  }
  spec.mu = mu.value_or(Eigen::VectorXd::Zero(r));
  if (direct) {
    spec.c = c.value_or(*spec.e_v_override);
    spec.c_prime = c_prime.value_or(Eigen::MatrixXd::Zero(r, r));
  } else {
    spec.c = c.value_or(Eigen::MatrixXd::Zero(r, r));
    spec.c_prime = c_prime.value_or(Eigen::MatrixXd::Zero(r, r));
  }

  if (doc.contains("n")) {
    if (!doc["n"].is_number_integer() || doc["n"].get<long long>() < 0) {
      rd.errors.push_back("n must be a non-negative integer");
    } else {
      spec.n = static_cast<std::size_t>(doc["n"].get<long long>());
    }
  }

  std::optional<Eigen::MatrixXd> v_prime = rd.matrix(doc, "v_prime", m, m);
  const bool gaussian = doc.contains("gaussian");
  if (gaussian && doc.contains("v")) rd.errors.push_back("give either 'v' or 'gaussian', not both");
  std::optional<Eigen::MatrixXd> ev;
  if (gaussian) {
    const auto& g = doc["gaussian"];
    if (!g.is_object()) {
      rd.errors.push_back("'gaussian' must be an object");
    } else {
      ev = rd.matrix(g, "ev", r, r);
      if (g.contains("v_prime")) {
        if (v_prime) rd.errors.push_back("v_prime given both at top level and inside 'gaussian'");
        v_prime = rd.to_matrix(g["v_prime"], "gaussian.v_prime", m, m);
      }
    }
  }
  // A missing v_prime is zero; validate() warns about the consequence.
  if (!v_prime) v_prime = Eigen::MatrixXd::Zero(m, m);
  spec.v_prime = *v_prime;

  out.s_observed = rd.matrix(doc, "s_observed", r, r);
  if (doc.contains("diagram_arcs")) {
    const auto& arcs = doc["diagram_arcs"];
    std::vector<DiagramArc> parsed;
    if (!arcs.is_array()) rd.errors.push_back("diagram_arcs must be an array");
    for (const auto& a : arcs.is_array() ? arcs : json::array()) {
      if (!a.is_array() || a.size() < 2 || a.size() > 3 || !a[0].is_string() || !a[1].is_string() ||
          (a.size() == 3 && !a[2].is_boolean())) {
        rd.errors.push_back("each diagram arc must be [from, to] or [from, to, reversed]");
        continue;
      }
      parsed.push_back({a[0].get<std::string>(), a[1].get<std::string>(), a.size() == 3 && a[2].get<bool>()});
    }
    out.diagram_arcs = std::move(parsed);
  }
  std::optional<Eigen::MatrixXd> v_direct;
  if (!gaussian) v_direct = rd.matrix(doc, "v", m, m);
  if (!gaussian && !doc.contains("v")) rd.errors.push_back("missing residual specification: give 'v' or 'gaussian'");
  if (!rd.errors.empty()) throw SpecError(std::move(rd.errors));

  if (gaussian) {
    const Eigen::MatrixXd at = ev.value_or(spec.expected_population());
    auto g = gaussian_residual_spec(at, spec.v_prime, tol, strict);
    spec.v = g.v;
    out.provenance = g.provenance;
  } else {
    spec.v = *v_direct;
  }

  auto report = validate(spec, tol, strict);
  if (!report.ok()) throw SpecError(std::move(report.errors));
  out.warnings.insert(out.warnings.end(), report.warnings.begin(), report.warnings.end());
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

SpecFile read_spec_file(const std::string& path, const Tolerances& tol, bool strict) {
  return parse_spec(read_text_file(path), tol, strict);
}

std::string write_spec(const ExchangeableSpec& spec) {
  json doc;
  doc["r"] = spec.r;
  json mu = json::array();
  for (Index i = 0; i < spec.mu.size(); ++i) mu.push_back(spec.mu(i));
  doc["mu"] = std::move(mu);
  doc["c"] = matrix_json(spec.c);
  doc["c_prime"] = matrix_json(spec.c_prime);
  doc["v"] = matrix_json(spec.v);
  doc["v_prime"] = matrix_json(spec.v_prime);
  if (spec.e_v_override) doc["e_v_override"] = matrix_json(*spec.e_v_override);
  if (spec.n) doc["n"] = *spec.n;
  return doc.dump(2) + "\n";
}

DataBatch parse_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values;
    values.reserve(fields.size());
    std::optional<std::size_t> bad;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto x = parse_number(fields[k]);
      if (!x) {
        bad = k;
        break;
      }
      values.push_back(*x);
    }
    if (first) {
      first = false;
      width = fields.size();
      if (bad) continue;  // header row
    }
    if (fields.size() != width) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                      " fields, found " + std::to_string(fields.size()));
    }
    if (bad) {
      throw DataError(source + ":" + std::to_string(line_no) + ": field " + std::to_string(*bad + 1) + " ('" +
                      fields[*bad] + "') is not a number");
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!std::isfinite(values[k])) {
        throw DataError(source + ":" + std::to_string(line_no) + ": field " + std::to_string(k + 1) +
                        " is not finite (observation row " + std::to_string(rows.size() + 1) + ")");
      }
    }
    rows.push_back(std::move(values));
  }
  if (in.bad()) throw IoError("error reading " + source);
  DataBatch batch;
  batch.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < width; ++j) batch.values(static_cast<Index>(k), static_cast<Index>(j)) = rows[k][j];
  }
  return batch;
}

DataBatch read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

Eigen::MatrixXd parse_matrix(const std::string& text, const std::string& source) {
  const std::string body = trim(text);
  if (body.empty()) throw DataError(source + ": empty matrix file");
  if (body.front() == '[' || body.front() == '{') {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const json::parse_error& e) {
      throw DataError(source + ": invalid JSON: " + e.what());
    }
    if (doc.is_object()) {
      if (doc.size() != 1) throw DataError(source + ": matrix object must have exactly one field");
      doc = doc.begin().value();
    }
    if (!doc.is_array() || doc.empty() || !doc[0].is_array()) throw DataError(source + ": expected an array of rows");
    Reader rd;
    auto m = rd.to_matrix(doc, source, static_cast<Index>(doc.size()), static_cast<Index>(doc[0].size()));
    if (!m) throw DataError(rd.errors.front());
    return *m;
  }
  std::istringstream in(body);
  DataBatch b = parse_csv(in, source);
  return b.values;
}

Eigen::MatrixXd read_matrix_file(const std::string& path) { return parse_matrix(read_text_file(path), path); }

}  // namespace blin::io
