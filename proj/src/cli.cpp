#include "blin/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "blin/adjustment.hpp"
#include "blin/diagnostics.hpp"
#include "blin/exchangeable.hpp"
#include "blin/linalg.hpp"
#include "blin/spec_io.hpp"
#include "json.hpp"

namespace blin::cli {

using json = nlohmann::ordered_json;
using Eigen::Index;

namespace {

// ------------------------------------------------------------ formatting

std::string num(double x, const char* format = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, x);
  return buf;
}

std::string matrix_table(const Eigen::MatrixXd& m, const std::string& indent = "    ") {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    out += indent;
    for (Index j = 0; j < m.cols(); ++j) out += num(m(i, j), "%14.6f");
    out += "\n";
  }
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json optional_number(std::optional<double> x) {
  if (!x || !std::isfinite(*x)) return nullptr;
  return *x;
}

// ---------------------------------------------------------------- inputs

std::vector<CollectionLabel> parse_choices(const std::string& text) {
  std::set<char> seen;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    std::string t;
    for (char ch : token) {
      if (ch != ' ') t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    if (t.empty()) continue;
    if (t != "s" && t != "i" && t != "c") throw SpecError("unknown collection '" + t + "' (expected s, i or c)");
    seen.insert(t[0]);
  }
  if (seen.empty()) throw SpecError("no collections selected (use --collections s,i,c)");
  std::vector<CollectionLabel> out;
  if (seen.contains('s')) out.push_back(CollectionLabel::D_S);
  if (seen.contains('i')) out.push_back(CollectionLabel::D_I);
  if (seen.contains('c')) out.push_back(CollectionLabel::D_C);
  return out;
}

struct Pipeline {
  io::SpecFile file;
  std::optional<CovarianceBeliefs> beliefs;
  Eigen::MatrixXd s_obs;
  std::size_t n = 0;
  std::vector<CollectionLabel> choices;
  std::vector<Collection> sequence;  // observed, in choice order
  Collection v_i;
  RandomMatrix v{1};
  std::vector<std::string> warnings;

  const BeliefStore& store() const { return beliefs->store; }
};

Pipeline load_pipeline(const RunConfig& cfg) {
  if (cfg.spec_path.empty()) throw SpecError("--spec is required");
  Pipeline p;
  p.choices = parse_choices(cfg.collections);
  p.file = io::read_spec_file(cfg.spec_path, cfg.tolerances, cfg.strict);
  p.warnings = p.file.warnings;
  const std::size_t r = p.file.spec.r;

  std::optional<std::size_t> n_from_data;
  if (!cfg.data_path.empty()) {
    const DataBatch data = io::read_csv_file(cfg.data_path);
    if (data.n() > 0 && data.r() != r) {
      throw SpecError("data has " + std::to_string(data.r()) + " columns but the spec has r = " + std::to_string(r));
    }
    p.s_obs = sample_covariance(data);
    n_from_data = data.n();
  } else if (!cfg.sample_path.empty()) {
    p.s_obs = io::read_matrix_file(cfg.sample_path);
  } else if (p.file.s_observed) {
    p.s_obs = *p.file.s_observed;
  } else {
    throw SpecError("no sample covariance: supply --data, --sample, or 's_observed' in the spec");
  }
  if (p.s_obs.rows() != static_cast<Index>(r) || p.s_obs.cols() != static_cast<Index>(r)) {
    throw SpecError("sample covariance must be " + std::to_string(r) + "x" + std::to_string(r));
  }
  if (linalg::relative_asymmetry(p.s_obs) > cfg.tolerances.symmetry) throw SpecError("sample covariance is not symmetric");
  p.s_obs = 0.5 * (p.s_obs + p.s_obs.transpose());

  if (cfg.n_override) {
    p.n = *cfg.n_override;
  } else if (n_from_data) {
    p.n = *n_from_data;
  } else if (p.file.spec.n) {
    p.n = *p.file.spec.n;
  } else {
    throw SpecError("sample size unknown: supply --n, --data, or 'n' in the spec");
  }

  p.beliefs = sample_beliefs(p.file.spec, p.n, cfg.tolerances, cfg.strict);
  for (const auto& w : p.beliefs->warnings) {
    if (std::find(p.warnings.begin(), p.warnings.end(), w) == p.warnings.end()) p.warnings.push_back(w);
  }
  const Observation obs = observe_sample(*p.beliefs, p.s_obs);
  const DataCollections dc = build_collections(p.beliefs->s_ids, r);
  for (const auto label : p.choices) {
    const Collection& c = label == CollectionLabel::D_S ? dc.d_s : label == CollectionLabel::D_I ? dc.d_i : dc.d_c;
    p.sequence.push_back(with_observation(c, obs));
  }
  p.v_i = build_individual_population(p.beliefs->v_ids, r);
  p.v = population_matrix(*p.beliefs);
  return p;
}

// One nested adjustment step with every diagnostic attached.
struct Step {
  std::string label;
  AdjustmentResult v;
  double increment_v = 0.0;
  CollectionAdjustment v_i;
  double increment_v_i = 0.0;
  EigenDiagnostic eigen;
  std::optional<BearingReport> bearing;
  SizeRatio ratio;
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, IndependenceCheck>> independence;
};

std::vector<Step> run_steps(const Pipeline& p, const RunConfig& cfg, bool with_bearing, const Eigen::MatrixXd& g_ref) {
  std::vector<Step> steps;
  double prev_v = 0.0, prev_vi = 0.0;
  for (std::size_t k = 1; k <= p.sequence.size(); ++k) {
    const Collection joined = union_of(std::span<const Collection>(p.sequence).first(k));
    Step st;
    st.label = std::string(to_string(p.sequence[k - 1].label));
    st.v = adjust(p.v, joined, p.store(), cfg.tolerances);
    st.increment_v = st.v.resolution - prev_v;
    prev_v = st.v.resolution;
    st.v_i = adjust_collection(p.v_i, joined, p.store(), cfg.tolerances);
    st.increment_v_i = st.v_i.resolution - prev_vi;
    prev_vi = st.v_i.resolution;
    st.eigen = eigen_diagnostic(*st.v.realized, cfg.tolerances);
    if (with_bearing) {
      st.bearing = bearing(joined, g_ref, p.store(), cfg.tolerances);
      st.ratio = size_ratio(*st.bearing);
      for (std::size_t a = 0; a < p.v_i.size(); ++a) {
        for (std::size_t b = a + 1; b < p.v_i.size(); ++b) {
          st.independence.push_back(
              {{a, b}, cond_lin_indep(p.v_i.members[a], p.v_i.members[b], joined, p.store(), cfg.tolerances)});
        }
      }
    }
    steps.push_back(std::move(st));
  }
  return steps;
}

std::vector<DiagramArc> default_arcs(const std::vector<std::string>& data_nodes) {
  std::vector<DiagramArc> arcs;
  for (const auto& d : data_nodes) {
    arcs.push_back({d, "V", false});
    arcs.push_back({d, "V_I", false});
  }
  return arcs;
}

json steps_json(const Pipeline& p, const std::vector<Step>& steps) {
  json out = json::array();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Step& st = steps[k];
    json j;
    j["collection"] = st.label;
    json used = json::array();
    for (std::size_t q = 0; q <= k; ++q) used.push_back(std::string(to_string(p.sequence[q].label)));
    j["collections"] = std::move(used);
    j["adjusted"] = matrix_json(*st.v.realized);
    j["resolution_V"] = st.v.resolution;
    j["increment_V"] = st.increment_v;
    j["resolution_V_I"] = st.v_i.resolution;
    j["increment_V_I"] = st.increment_v_i;
    j["prior_norm_sq"] = st.v.prior_norm_sq;
    j["resolved_norm_sq"] = st.v.resolved_norm_sq;
    j["residual_norm_sq"] = st.v.residual_norm_sq;
    j["eigen"] = {{"eigenvalues", vector_json(st.eigen.eigenvalues)},
                  {"negative", st.eigen.has_negative()},
                  {"condition_number", optional_number(st.eigen.condition_number)}};
    if (st.bearing) {
      j["bearing"] = {{"coefficients", vector_json(st.bearing->coefficients)},
                      {"realized", matrix_json(st.bearing->realized_bearing)},
                      {"size", st.bearing->size},
                      {"expected_size", st.bearing->expected_size},
                      {"size_ratio", optional_number(st.ratio.ratio)},
                      {"tag", to_string(st.ratio.tag)}};
      json ind = json::array();
      for (const auto& [pair, chk] : st.independence) {
        ind.push_back({{"a", p.store().registry().label(p.beliefs->v_ids[pair.first])},
                       {"b", p.store().registry().label(p.beliefs->v_ids[pair.second])},
                       {"value", chk.value},
                       {"independent", chk.independent}});
      }
      j["independence"] = std::move(ind);
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::string header_table(const char* command, const Pipeline& p) {
  std::string out = std::string(command) + ": r = " + std::to_string(p.file.spec.r) + ", n = " + std::to_string(p.n) + "\n";
  for (const auto& w : p.warnings) out += "warning: " + w + "\n";
  out += "\nprior E(V):\n" + matrix_table(p.file.spec.expected_population());
  out += "sample covariance S:\n" + matrix_table(p.s_obs);
  return out;
}

json header_json(const char* command, const Pipeline& p) {
  json j;
  j["command"] = command;
  j["r"] = p.file.spec.r;
  j["n"] = p.n;
  j["warnings"] = p.warnings;
  j["prior_expectation"] = matrix_json(p.file.spec.expected_population());
  j["sample_covariance"] = matrix_json(p.s_obs);
  if (p.file.provenance) j["residual_provenance"] = *p.file.provenance;
  return j;
}

std::string eigen_line(const EigenDiagnostic& e) {
  std::string out = "  eigenvalues:";
  for (Index k = 0; k < e.eigenvalues.size(); ++k) out += " " + num(e.eigenvalues(k), "%.6g");
  out += std::isfinite(e.condition_number) ? "  (condition " + num(e.condition_number, "%.6g") + ")" : "  (singular)";
  if (e.has_negative()) out += "  WARNING: negative eigenvalue";
  return out + "\n";
}

// ------------------------------------------------------------- commands

struct Report {
  std::string text;
  int code = kOk;
};

Report cmd_sample_cov(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw SpecError("--data is required");
  const DataBatch data = io::read_csv_file(cfg.data_path);
  const Eigen::MatrixXd s = sample_covariance(data);
  if (cfg.json) {
    json j{{"command", "sample-cov"}, {"n", data.n()}, {"r", data.r()}, {"sample_covariance", matrix_json(s)}};
    return {j.dump(2) + "\n"};
  }
  return {"sample-cov: n = " + std::to_string(data.n()) + ", r = " + std::to_string(data.r()) + "\n" + matrix_table(s)};
}

Report cmd_normal_spec(const RunConfig& cfg) {
  if (cfg.ev_path.empty()) throw SpecError("--ev is required");
  const Eigen::MatrixXd ev = io::read_matrix_file(cfg.ev_path);
  if (ev.rows() != ev.cols()) throw SpecError("ev must be square");
  const auto r = static_cast<std::size_t>(ev.rows());
  const auto m = static_cast<Index>(slot_count(r));
  std::vector<std::string> warnings;
  Eigen::MatrixXd vprime;
  if (cfg.vprime_path.empty()) {
    vprime = Eigen::MatrixXd::Zero(m, m);
    warnings.push_back("v_prime not given; using zero (Var(V) = 0, so data cannot revise V)");
  } else {
    vprime = io::read_matrix_file(cfg.vprime_path);
  }
  const auto g = gaussian_residual_spec(ev, vprime, cfg.tolerances, cfg.strict);
  std::optional<QuadraticMomentEstimate> mc;
  const std::uint64_t seed = cfg.seed.value_or(0);
  if (cfg.mc_draws > 0) mc = monte_carlo_quadratic_covariance(ev, cfg.mc_draws, seed);

  if (cfg.json) {
    json j;
    j["command"] = "normal-spec";
    j["r"] = r;
    j["warnings"] = warnings;
    j["provenance"] = g.provenance;
    j["u"] = matrix_json(g.u);
    j["v_prime"] = matrix_json(vprime);
    j["v"] = matrix_json(g.v);
    if (mc) {
      j["monte_carlo"] = {{"draws", mc->draws}, {"seed", seed}, {"covariance", matrix_json(mc->covariance)},
                          {"standard_error", matrix_json(mc->standard_error)}};
    }
    return {j.dump(2) + "\n"};
  }
  std::string out = "normal-spec: r = " + std::to_string(r) + ", slots in order";
  for (std::size_t s = 0; s < slot_count(r); ++s) out += " " + slot_name(r, s);
  out += "\n";
  for (const auto& w : warnings) out += "warning: " + w + "\n";
  out += "provenance: " + g.provenance + "\n";
  out += "u (residual quadratic-product covariance):\n" + matrix_table(g.u);
  out += "v = v_prime + u:\n" + matrix_table(g.v);
  if (mc) {
    out += "Monte Carlo check (" + std::to_string(mc->draws) + " draws, seed " + std::to_string(seed) + "):\n";
    out += matrix_table(mc->covariance);
    out += "standard errors:\n" + matrix_table(mc->standard_error);
  }
  return {out};
}

Report cmd_adjust(const RunConfig& cfg) {
  const Pipeline p = load_pipeline(cfg);
  json results = json::array();
  std::string text = header_table("adjust", p);
  for (const auto& coll : p.sequence) {
    const AdjustmentResult res = adjust(p.v, coll, p.store(), cfg.tolerances);
    const EigenDiagnostic eig = eigen_diagnostic(*res.realized, cfg.tolerances);
    const std::string label(to_string(coll.label));
    if (cfg.json) {
      results.push_back({{"collection", label},
                         {"adjusted", matrix_json(*res.realized)},
                         {"resolution", res.resolution},
                         {"coefficients", vector_json(res.coefficients)},
                         {"prior_norm_sq", res.prior_norm_sq},
                         {"resolved_norm_sq", res.resolved_norm_sq},
                         {"residual_norm_sq", res.residual_norm_sq},
                         {"eigen", {{"eigenvalues", vector_json(eig.eigenvalues)},
                                    {"negative", eig.has_negative()},
                                    {"condition_number", optional_number(eig.condition_number)}}}});
    } else {
      text += "\nE_" + label + "(V):\n" + matrix_table(*res.realized);
      text += "  resolution: " + num(res.resolution) + "\n";
      text += "  coefficients (" + std::to_string(res.coefficients.size()) + "):";
      for (Index k = 0; k < res.coefficients.size(); ++k) text += " " + num(res.coefficients(k), "%.6g");
      text += "\n" + eigen_line(eig);
    }
  }
  if (cfg.json) {
    json j = header_json("adjust", p);
    j["results"] = std::move(results);
    return {j.dump(2) + "\n"};
  }
  return {text};
}

Report cmd_resolve(const RunConfig& cfg) {
  const Pipeline p = load_pipeline(cfg);
  const auto steps = run_steps(p, cfg, false, all_ones(p.file.spec.r));
  if (cfg.json) {
    json j = header_json("resolve", p);
    json arr = json::array();
    for (const auto& st : steps) {
      arr.push_back({{"collection", st.label},
                     {"resolution_V", st.v.resolution},
                     {"increment_V", st.increment_v},
                     {"resolution_V_I", st.v_i.resolution},
                     {"increment_V_I", st.increment_v_i}});
    }
    j["steps"] = std::move(arr);
    return {j.dump(2) + "\n"};
  }
  std::string text = header_table("resolve", p);
  text += "\nstep  adds   resolution(V)  increment   resolution(V_I)  increment\n";
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& st = steps[k];
    char line[160];
    std::snprintf(line, sizeof line, "%4zu  %-5s  %13.6f  %+9.6f   %15.6f  %+9.6f\n", k + 1, st.label.c_str(),
                  st.v.resolution, st.increment_v, st.v_i.resolution, st.increment_v_i);
    text += line;
  }
  return {text};
}

Eigen::MatrixXd load_g_ref(const RunConfig& cfg, std::size_t r) {
  if (cfg.g_ref_path.empty()) return all_ones(r);
  Eigen::MatrixXd g = io::read_matrix_file(cfg.g_ref_path);
  if (g.rows() != static_cast<Index>(r) || g.cols() != static_cast<Index>(r)) {
    throw SpecError("reference matrix must be " + std::to_string(r) + "x" + std::to_string(r));
  }
  return g;
}

struct Diagnosis {
  Pipeline pipeline;
  std::vector<Step> steps;
  Eigen::MatrixXd g_ref;
};

Diagnosis diagnose(const RunConfig& cfg) {
  Diagnosis d{load_pipeline(cfg), {}, {}};
  d.g_ref = load_g_ref(cfg, d.pipeline.file.spec.r);
  d.steps = run_steps(d.pipeline, cfg, true, d.g_ref);
  return d;
}

std::vector<DiagramArc> arcs_for(const Pipeline& p) {
  if (p.file.diagram_arcs) return *p.file.diagram_arcs;
  std::vector<std::string> names;
  for (const auto& c : p.sequence) names.emplace_back(to_string(c.label));
  return default_arcs(names);
}

json arcs_json(const std::vector<DiagramArc>& arcs) {
  json out = json::array();
  for (const auto& a : arcs) {
    json one = json::array({a.from, a.to});
    if (a.reversed) one.push_back(true);
    out.push_back(std::move(one));
  }
  return out;
}

Report cmd_diagnose(const RunConfig& cfg) {
  const Diagnosis d = diagnose(cfg);
  const Pipeline& p = d.pipeline;
  bool negative = false;
  for (const auto& st : d.steps) negative = negative || st.eigen.has_negative();
  const int code = (cfg.strict && negative) ? kStrictDiagnostic : kOk;

  if (cfg.json) {
    json j = header_json("diagnose", p);
    j["g_ref"] = matrix_json(d.g_ref);
    j["steps"] = steps_json(p, d.steps);
    j["diagram_arcs"] = arcs_json(arcs_for(p));
    return {j.dump(2) + "\n", code};
  }
  std::string text = header_table("diagnose", p);
  text += "reference matrix G:\n" + matrix_table(d.g_ref);
  for (std::size_t k = 0; k < d.steps.size(); ++k) {
    const Step& st = d.steps[k];
    text += "\nstep " + std::to_string(k + 1) + ": adds " + st.label + "\n";
    text += "  adjusted E(V):\n" + matrix_table(*st.v.realized, "  ");
    text += "  resolution V: " + num(st.v.resolution) + " (" + num(st.increment_v, "%+.6f") + ")   V_I: " +
            num(st.v_i.resolution) + " (" + num(st.increment_v_i, "%+.6f") + ")\n";
    text += eigen_line(st.eigen);
    text += "  bearing: size " + num(st.bearing->size, "%.6g") + ", expected " + num(st.bearing->expected_size, "%.6g");
    text += st.ratio.ratio ? ", ratio " + num(*st.ratio.ratio, "%.6g") : std::string(", ratio undefined");
    text += " (" + to_string(st.ratio.tag) + ")\n";
    text += "  conditional linear independence of V_I members:\n";
    for (const auto& [pair, chk] : st.independence) {
      text += "    " + p.store().registry().label(p.beliefs->v_ids[pair.first]) + " , " +
              p.store().registry().label(p.beliefs->v_ids[pair.second]) + ": " + num(chk.value, "%+.6e") +
              (chk.independent ? "  independent" : "") + "\n";
    }
  }
  if (code == kStrictDiagnostic) text += "\nstrict: negative eigenvalues in an adjusted matrix\n";
  return {text, code};
}

DiagramModel model_from_steps(const std::vector<std::string>& labels, const std::vector<double>& inc_v,
                              const std::vector<double>& inc_vi, const std::vector<std::optional<double>>& ratios,
                              std::vector<DiagramArc> arcs) {
  DiagramModel model;
  DiagramNode v{"V", {}, std::nullopt};
  DiagramNode vi{"V_I", {}, std::nullopt};
  for (std::size_t k = 0; k < labels.size(); ++k) {
    v.segments.push_back(std::max(inc_v[k], 0.0));
    vi.segments.push_back(std::max(inc_vi[k], 0.0));
  }
  if (!ratios.empty()) v.size_ratio = ratios.back();
  model.nodes.push_back(std::move(v));
  model.nodes.push_back(std::move(vi));
  for (std::size_t k = 0; k < labels.size(); ++k) model.nodes.push_back({labels[k], {}, ratios[k]});
  model.arcs = std::move(arcs);
  return model;
}

DiagramModel model_from_report(const std::string& path) {
  json doc;
  try {
    doc = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("steps") || !doc["steps"].is_array() || doc["steps"].empty()) {
    throw SpecError(path + ": report has no adjustment steps (run 'blin diagnose --format json' first)");
  }
  std::vector<std::string> labels;
  std::vector<double> inc_v, inc_vi;
  std::vector<std::optional<double>> ratios;
  for (const auto& st : doc["steps"]) {
    for (const char* key : {"collection", "increment_V", "increment_V_I", "bearing"}) {
      if (!st.contains(key)) throw SpecError(path + ": step is missing '" + key + "'");
    }
    labels.push_back(st["collection"].get<std::string>());
    inc_v.push_back(st["increment_V"].get<double>());
    inc_vi.push_back(st["increment_V_I"].get<double>());
    const auto& sr = st["bearing"]["size_ratio"];
    ratios.push_back(sr.is_number() ? std::optional<double>(sr.get<double>()) : std::nullopt);
  }
  std::vector<DiagramArc> arcs;
  if (doc.contains("diagram_arcs")) {
    for (const auto& a : doc["diagram_arcs"]) {
      arcs.push_back({a.at(0).get<std::string>(), a.at(1).get<std::string>(), a.size() > 2 && a.at(2).get<bool>()});
    }
  } else {
    arcs = default_arcs(labels);
  }
  return model_from_steps(labels, inc_v, inc_vi, ratios, std::move(arcs));
}

Report cmd_diagram(const RunConfig& cfg) {
  if (!cfg.report_path.empty()) return {diagram_export(model_from_report(cfg.report_path))};
  const Diagnosis d = diagnose(cfg);
  std::vector<std::string> labels;
  std::vector<double> inc_v, inc_vi;
  std::vector<std::optional<double>> ratios;
  for (const auto& st : d.steps) {
    labels.push_back(st.label);
    inc_v.push_back(st.increment_v);
    inc_vi.push_back(st.increment_v_i);
    ratios.push_back(st.ratio.ratio);
  }
  return {diagram_export(model_from_steps(labels, inc_v, inc_vi, ratios, arcs_for(d.pipeline)))};
}

Report dispatch(const RunConfig& cfg) {
  switch (cfg.command) {
    case Command::sample_cov: return cmd_sample_cov(cfg);
    case Command::normal_spec: return cmd_normal_spec(cfg);
    case Command::adjust: return cmd_adjust(cfg);
    case Command::resolve: return cmd_resolve(cfg);
    case Command::diagnose: return cmd_diagnose(cfg);
    case Command::diagram: return cmd_diagram(cfg);
  }
  throw SpecError("unknown command");
}

}  // namespace

int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const Report report = dispatch(cfg);
    if (cfg.output_path.empty()) {
      out << report.text;
    } else {
      std::ofstream file(cfg.output_path, std::ios::binary);
      if (!file) throw IoError("cannot write '" + cfg.output_path + "'");
      file << report.text;
      if (!file) throw IoError("error writing '" + cfg.output_path + "'");
    }
    return report.code;
  } catch (const SpecError& e) {
    err << "validation failed:\n";
    for (const auto& v : e.violations()) err << "  - " << v << "\n";
    return kValidation;
  } catch (const InsufficientDataError& e) {
    err << "insufficient data: " << e.what() << "\n";
    return kInsufficientData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kIoOrParse;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoOrParse;
  } catch (const InputError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string format = "table";
  std::vector<std::string> tol_overrides;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;

  CLI::App app{"Bayes linear adjustment of covariance matrices"};
  app.require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"table", "json"}));
    sub->add_option("--out", cfg.output_path, "Write the report to FILE instead of stdout");
    sub->add_flag("--strict", cfg.strict, "Treat PSD and eigenvalue warnings as failures");
    sub->add_option("--tol", tol_overrides, "Tolerance override name=value (psd, num, eq, pinv, ind, eig, symmetry)");
  };
  auto add_pipeline = [&](CLI::App* sub) {
    sub->add_option("--spec", cfg.spec_path, "Belief specification (JSON)")->required();
    sub->add_option("--data", cfg.data_path, "Observations (CSV)");
    sub->add_option("--sample", cfg.sample_path, "Observed sample covariance matrix");
    sub->add_option("--collections", cfg.collections, "Subset of s,i,c");
    sub->add_option("--n", n, "Sample size override");
    sub->add_option("--gref", cfg.g_ref_path, "Reference matrix for bearings (default all ones)");
  };

  auto* sample_cov = app.add_subcommand("sample-cov", "Sample covariance of a CSV file");
  sample_cov->add_option("--data", cfg.data_path, "Observations (CSV)")->required();
  add_common(sample_cov);

  auto* normal = app.add_subcommand("normal-spec", "Gaussian-consistent residual specification");
  normal->add_option("--ev", cfg.ev_path, "Covariance matrix at which to evaluate the fourth moments")->required();
  normal->add_option("--vprime", cfg.vprime_path, "v_prime tensor as an m x m matrix over slots");
  normal->add_option("--mc-draws", cfg.mc_draws, "Monte Carlo draws for a consistency check (0 = off)");
  normal->add_option("--seed", seed, "Monte Carlo seed (BLIN_SEED overrides)");
  add_common(normal);

  auto* adjust_cmd = app.add_subcommand("adjust", "Adjusted expectations of V by each chosen collection");
  auto* resolve_cmd = app.add_subcommand("resolve", "Stepwise resolutions over the chosen collections");
  auto* diagnose_cmd = app.add_subcommand("diagnose", "Bearings, size ratios, and independence checks");
  auto* diagram_cmd = app.add_subcommand("diagram", "Diagnostic influence diagram in DOT");
  for (auto* sub : {adjust_cmd, resolve_cmd, diagnose_cmd}) {
    add_pipeline(sub);
    add_common(sub);
  }
  add_common(diagram_cmd);
  diagram_cmd->add_option("--spec", cfg.spec_path, "Belief specification (JSON)");
  diagram_cmd->add_option("--data", cfg.data_path, "Observations (CSV)");
  diagram_cmd->add_option("--sample", cfg.sample_path, "Observed sample covariance matrix");
  diagram_cmd->add_option("--collections", cfg.collections, "Subset of s,i,c");
  diagram_cmd->add_option("--n", n, "Sample size override");
  diagram_cmd->add_option("--gref", cfg.g_ref_path, "Reference matrix for bearings");
  diagram_cmd->add_option("--report", cfg.report_path, "Cached 'diagnose --format json' report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    const auto* failed = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    if (e.get_exit_code() == 0) {
      out << failed->help();
      return kOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kIoOrParse;
  }

  if (sample_cov->parsed()) cfg.command = Command::sample_cov;
  else if (normal->parsed()) cfg.command = Command::normal_spec;
  else if (adjust_cmd->parsed()) cfg.command = Command::adjust;
  else if (resolve_cmd->parsed()) cfg.command = Command::resolve;
  else if (diagnose_cmd->parsed()) cfg.command = Command::diagnose;
  else cfg.command = Command::diagram;

  cfg.json = format == "json";
  cfg.n_override = n;
  cfg.seed = seed;
  if (const char* env = std::getenv("BLIN_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "usage error: BLIN_SEED must be an unsigned integer\n";
      return kIoOrParse;
    }
  }
  for (const auto& t : tol_overrides) {
    const auto eq = t.find('=');
    bool ok = eq != std::string::npos;
    if (ok) {
      try {
        ok = cfg.tolerances.set(t.substr(0, eq), std::stod(t.substr(eq + 1)));
      } catch (const std::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      err << "validation failed:\n  - bad tolerance override '" << t << "' (expected name=positive value)\n";
      return kValidation;
    }
  }
  if (cfg.command == Command::diagram && cfg.report_path.empty() && cfg.spec_path.empty()) {
    err << "validation failed:\n  - diagram needs upstream results: --spec (pipeline) or --report FILE\n";
    return kValidation;
  }
  return execute(cfg, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("blin");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace blin::cli
