#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "halfcalc/calculus.hpp"
#include "halfcalc/errors.hpp"
#include "halfcalc/golden.hpp"
#include "halfcalc/observability.hpp"
#include "halfcalc/riesz.hpp"
#include "halfcalc/toeplitz.hpp"

namespace halfcalc::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* config_schema = "halfcalc-config/1";
inline constexpr const char* report_schema = "halfcalc-report/1";
inline constexpr const char* tool_version = "0.1.0";

////////////////////////////////////////////////////////////////////////////////
//
// emission: fixed %.17g numbers, insertion-ordered keys
//
////////////////////////////////////////////////////////////////////////////////

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool is_scalar(const json& j) { return !j.is_array() && !j.is_object(); }

// Arrays of scalars, or arrays of arrays of scalars ([re, im] rows), stay on one line.
inline bool inline_array(const json& j) {
  if (!j.is_array()) return false;
  for (const auto& e : j) {
    if (e.is_object()) return false;
    if (e.is_array())
      for (const auto& x : e)
        if (!is_scalar(x)) return false;
  }
  return true;
}

inline void emit(const json& j, std::string& out, int indent) {
  const std::string pad(std::size_t(indent) * 2, ' ');
  switch (j.type()) {
    case json::value_t::number_float: out += format_double(j.get<double>()); return;
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::boolean:
    case json::value_t::null:
    case json::value_t::string: out += j.dump(); return;
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (inline_array(j)) {
        out += "[";
        bool first = true;
        for (const auto& e : j) {
          if (!first) out += ", ";
          first = false;
          emit(e, out, 0);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad + "  ";
        emit(j[i], out, indent + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "]";
      return;
    }
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad + "  " + json(it.key()).dump() + ": ";
        emit(it.value(), out, indent + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "}";
      return;
    }
    default: out += "null"; return;
  }
}

}  // namespace detail

inline std::string to_text(const json& j) {
  std::string out;
  detail::emit(j, out, 0);
  out += "\n";
  return out;
}

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const CVector& v) {
  json a = json::array();
  for (const auto& z : v) a.push_back(to_json(z));
  return a;
}

inline json to_json(const CMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json real_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

////////////////////////////////////////////////////////////////////////////////
//
// config parsing; every malformed input is a usage_error
//
////////////////////////////////////////////////////////////////////////////////

namespace detail {

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw usage_error(what + ": expected a number");
  return j.get<double>();
}

inline cplx complex_value(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw usage_error(what + ": expected a number or an [re, im] pair");
}

inline CVector complex_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw usage_error(what + ": expected an array");
  CVector v;
  for (const auto& e : j) v.push_back(complex_value(e, what));
  return v;
}

inline CMatrix complex_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw usage_error(what + ": expected an array of rows");
  const std::size_t cols = j[0].size();
  CMatrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw usage_error(what + ": ragged rows");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = complex_value(j[i][k], what);
  }
  return m;
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw usage_error(where + ": missing '" + key + "'");
  return j.at(key);
}

inline std::size_t count_value(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw usage_error(what + ": expected a nonnegative integer");
  return std::size_t(j.get<long long>());
}

}  // namespace detail

inline Generator parse_generator(const json& cfg) {
  const json& g = detail::require(cfg, "generator", "config");
  const Stability st = cfg.value("allow_unstable", false) ? Stability::allow : Stability::require;
  if (!g.is_object()) throw usage_error("generator: expected an object");
  if (g.contains("golden")) {
    if (!g["golden"].is_string()) throw usage_error("generator.golden: expected a name");
    try {
      return golden_generator(g["golden"].get<std::string>());
    } catch (const domain_error& e) {
      throw usage_error(e.what());
    }
  }
  if (g.contains("diagonal")) {
    const auto d = detail::complex_vector(g["diagonal"], "generator.diagonal");
    if (d.empty()) throw usage_error("generator.diagonal: empty");
    return make_diagonal_generator(d, st);
  }
  if (g.contains("spectral")) {
    const json& s = g["spectral"];
    auto eig = detail::complex_vector(detail::require(s, "eigenvalues", "generator.spectral"), "eigenvalues");
    auto v = detail::complex_matrix(detail::require(s, "V", "generator.spectral"), "generator.spectral.V");
    if (v.rows() != eig.size() || !v.is_square()) throw usage_error("generator.spectral: V does not match eigenvalues");
    auto form = make_spectral_form(std::move(eig), std::move(v));
    CMatrix a = reconstruct(form);
    return make_generator(std::move(a), std::move(form), st);
  }
  if (g.contains("dense")) {
    auto a = detail::complex_matrix(g["dense"], "generator.dense");
    if (!a.is_square()) throw usage_error("generator.dense: matrix is not square");
    return make_generator(std::move(a), std::nullopt, st);
  }
  throw usage_error("generator: expected one of golden, diagonal, spectral, dense");
}

inline HalfPlaneFunction parse_symbol(const json& s) {
  if (!s.is_object()) throw usage_error("symbol: expected an object");
  const std::string kind = detail::require(s, "kind", "symbol").is_string() ? s["kind"].get<std::string>() : "";
  if (kind == "identity") return identity_symbol();
  if (kind == "constant") return constant_symbol(detail::complex_value(detail::require(s, "c", "symbol"), "symbol.c"));
  if (kind == "resolvent") {
    const cplx mu = detail::complex_value(detail::require(s, "mu", "symbol"), "symbol.mu");
    if (!(mu.real() > 0.0)) throw usage_error("symbol.mu: real part must be positive");
    return resolvent_kernel(mu);
  }
  if (kind == "exponential") {
    const double t = detail::number(detail::require(s, "t", "symbol"), "symbol.t");
    if (!(t >= 0.0)) throw usage_error("symbol.t: must be nonnegative");
    return exponential_kernel(t);
  }
  if (kind == "regularizer") return regularizer();
  if (kind == "allpass") return rational(1.0, {-1.0}, {1.0});
  if (kind == "rational") {
    const cplx gain = s.contains("gain") ? detail::complex_value(s["gain"], "symbol.gain") : cplx(1.0);
    const auto zeros = s.contains("zeros") ? detail::complex_vector(s["zeros"], "symbol.zeros") : CVector{};
    const auto poles = detail::complex_vector(detail::require(s, "poles", "symbol"), "symbol.poles");
    for (const auto& p : poles)
      if (!(p.real() > 0.0)) throw usage_error("symbol.poles: every pole must lie in Re z > 0");
    if (zeros.size() > poles.size()) throw usage_error("symbol: more zeros than poles");
    return rational(gain, zeros, poles);
  }
  if (kind == "exp_rational") {
    const double t = detail::number(detail::require(s, "t", "symbol"), "symbol.t");
    const std::size_t n = detail::count_value(detail::require(s, "n", "symbol"), "symbol.n");
    if (!(t > 0.0) || n == 0) throw usage_error("symbol: exp_rational needs t > 0 and n >= 1");
    return exp_rational_sequence(t, n);
  }
  if (kind == "golden") {
    const json& n = detail::require(s, "name", "symbol");
    if (!n.is_string()) throw usage_error("symbol.name: expected a string");
    try {
      return golden_symbol(n.get<std::string>());
    } catch (const domain_error& e) {
      throw usage_error(e.what());
    }
  }
  if (kind == "sum" || kind == "product") {
    const json& args = detail::require(s, "args", "symbol");
    if (!args.is_array() || args.size() < 2) throw usage_error("symbol.args: need at least two symbols");
    HalfPlaneFunction f = parse_symbol(args[0]);
    for (std::size_t i = 1; i < args.size(); ++i)
      f = combine(kind == "sum" ? CombineOp::sum : CombineOp::product, f, parse_symbol(args[i]));
    return f;
  }
  throw usage_error("symbol.kind: unknown kind '" + kind + "'");
}

inline std::vector<PathKind> parse_paths(const json& cfg, bool has_oracle) {
  std::vector<PathKind> all{PathKind::spectral_oracle, PathKind::phillips, PathKind::contour_h1,
                            PathKind::contour_general, PathKind::output_map};
  if (!has_oracle) all.erase(all.begin());
  if (!cfg.contains("path")) return all;
  const json& p = cfg["path"];
  auto one = [](const json& j) {
    if (!j.is_string()) throw usage_error("path: expected a path name");
    try {
      return parse_path(j.get<std::string>());
    } catch (const domain_error& e) {
      throw usage_error(e.what());
    }
  };
  if (p.is_string() && p.get<std::string>() == "all") return all;
  if (p.is_string()) return {one(p)};
  if (!p.is_array() || p.empty()) throw usage_error("path: expected \"all\", a name, or a list of names");
  std::vector<PathKind> out;
  for (const auto& e : p) out.push_back(one(e));
  return out;
}

inline PathOptions parse_path_options(const json& cfg) {
  PathOptions opt;
  if (cfg.contains("grid")) {
    const json& g = cfg["grid"];
    TimeGrid grid;
    if (g.contains("step")) grid.step = detail::number(g["step"], "grid.step");
    if (g.contains("count")) grid.count = detail::count_value(g["count"], "grid.count");
    try {
      grid.validate();
    } catch (const error& e) {
      throw usage_error(std::string("grid: ") + e.what());
    }
    opt.output_map.grid = grid;
  }
  if (cfg.contains("contour_eps")) opt.contour.eps = detail::number(cfg["contour_eps"], "contour_eps");
  if (cfg.contains("lambda_base")) {
    if (!cfg["lambda_base"].is_string()) throw usage_error("lambda_base: expected a path name");
    try {
      opt.lambda_base = parse_path(cfg["lambda_base"].get<std::string>());
    } catch (const domain_error& e) {
      throw usage_error(e.what());
    }
  }
  return opt;
}

// Per-path tolerance overrides under "tolerances": {"Phillips": 1e-7, ...}.
inline double tolerance_for(const json& cfg, const std::string& key, double fallback) {
  if (!cfg.contains("tolerances")) return fallback;
  const json& t = cfg["tolerances"];
  if (!t.is_object()) throw usage_error("tolerances: expected an object");
  if (!t.contains(key)) return fallback;
  const double v = detail::number(t[key], "tolerances." + key);
  if (!(v > 0.0)) throw usage_error("tolerances." + key + ": must be positive");
  return v;
}

inline DirectionalSearch parse_search(const json& cfg, std::uint64_t seed) {
  DirectionalSearch s;
  s.seed = seed;
  if (cfg.contains("search")) {
    const json& j = cfg["search"];
    if (j.contains("starts")) s.starts = detail::count_value(j["starts"], "search.starts");
    if (j.contains("iterations")) s.iterations = detail::count_value(j["iterations"], "search.iterations");
    if (s.starts == 0) throw usage_error("search.starts: must be positive");
  }
  return s;
}

inline void validate_config(const json& cfg) {
  if (!cfg.is_object()) throw usage_error("config: expected a JSON object");
  if (!cfg.contains("schema") || cfg["schema"] != config_schema)
    throw usage_error(std::string("config: schema must be \"") + config_schema + "\"");
  if (cfg.contains("tolerances") && cfg["tolerances"].is_object())
    for (auto it = cfg["tolerances"].begin(); it != cfg["tolerances"].end(); ++it)
      if (!it.value().is_number() || !(it.value().get<double>() > 0.0))
        throw usage_error("tolerances." + it.key() + ": must be a positive number");
}

////////////////////////////////////////////////////////////////////////////////
//
// report assembly
//
////////////////////////////////////////////////////////////////////////////////

enum class Relation { le, lt, ge, gt };

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::le: return "<=";
    case Relation::lt: return "<";
    case Relation::ge: return ">=";
    case Relation::gt: return ">";
  }
  return "?";
}

inline bool holds(double residual, const std::string& rel, double threshold) {
  if (rel == "<=") return residual <= threshold;
  if (rel == "<") return residual < threshold;
  if (rel == ">=") return residual >= threshold;
  if (rel == ">") return residual > threshold;
  throw validation_error("unknown relation '" + rel + "'");
}

class Report {
 public:
  Report(std::string command, const json& inputs, std::uint64_t seed) {
    doc_["schema"] = report_schema;
    doc_["command"] = std::move(command);
    doc_["tool_version"] = tool_version;
    doc_["seed"] = seed;
    doc_["inputs"] = inputs;
    doc_["provenance"] = json::object();
    doc_["results"] = json::object();
    doc_["verdicts"] = json::array();
  }

  json& results() { return doc_["results"]; }
  json& provenance() { return doc_["provenance"]; }

  bool verdict(const std::string& name, double residual, Relation rel, double threshold) {
    const bool pass = holds(residual, relation_name(rel), threshold);
    doc_["verdicts"].push_back(json{{"name", name},
                                    {"residual", residual},
                                    {"relation", relation_name(rel)},
                                    {"threshold", threshold},
                                    {"pass", pass}});
    return pass;
  }

  const json& doc() const { return doc_; }

 private:
  json doc_;
};

inline json result_json(const CalculusResult& r) {
  json j;
  j["path"] = r.label();
  j["error_estimate"] = r.error_estimate;
  j["tolerance"] = r.tolerance;
  j["matrix"] = to_json(r.matrix);
  json meta = json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = v;
  j["metadata"] = meta;
  j["warnings"] = r.warnings;
  return j;
}

inline json grid_json(const TimeGrid& g) {
  return json{{"step", g.step}, {"count", g.count}, {"horizon", g.horizon()}, {"tail_tolerance", g.tail_tolerance}};
}

inline json quadrature_json() {
  const PhillipsOptions p;
  const ContourOptions c;
  return json{{"phillips", json{{"rule", "composite Gauss-Legendre"}, {"panels", p.panels}, {"order", p.order}}},
              {"contour", json{{"rule", "composite Gauss-Kronrod 7/15"},
                               {"tail_target", c.tail_target},
                               {"oscillatory_tail_target", c.oscillatory_tail_target}}},
              {"output_map", "rectangle-rule Toeplitz convolution via FFT, refinement against the 2x coarser grid"}};
}

////////////////////////////////////////////////////////////////////////////////
//
// commands
//
////////////////////////////////////////////////////////////////////////////////

struct CommandInput {
  json config;
  std::uint64_t seed = 0;
};

namespace detail {

inline CalculusResult run_path(PathKind k, const HalfPlaneFunction& g, const Generator& gen,
                               const std::optional<double>& rescale, const PathOptions& opt) {
  return rescale ? rescaled_apply(g, gen, *rescale, k, opt) : apply_path(k, g, gen, opt);
}

}  // namespace detail

inline json cmd_apply(const CommandInput& in) {
  const json& cfg = in.config;
  const Generator gen = parse_generator(cfg);
  const HalfPlaneFunction g = parse_symbol(detail::require(cfg, "symbol", "config"));
  const auto kinds = parse_paths(cfg, gen.spectral().has_value());
  const PathOptions opt = parse_path_options(cfg);
  std::optional<double> rescale;
  if (cfg.contains("rescale")) rescale = detail::number(cfg["rescale"], "rescale");

  Report rep("apply", cfg, in.seed);
  rep.provenance()["quadrature"] = quadrature_json();
  if (gen.stable()) rep.provenance()["output_map_grid"] = grid_json(opt.output_map.grid.value_or(default_grid(gen.omega())));
  rep.provenance()["omega"] = gen.omega();

  std::vector<std::optional<CalculusResult>> slots(kinds.size());
  std::vector<std::string> reasons(kinds.size());
  parallel_for(kinds.size(), [&](std::size_t i) {
    try {
      slots[i] = detail::run_path(kinds[i], g, gen, rescale, opt);
    } catch (const path_inapplicable_error& e) {
      reasons[i] = e.what();
    }
  });
  std::vector<CalculusResult> results;
  json paths = json::array(), inapplicable = json::array();
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (slots[i]) {
      auto r = *slots[i];
      r.tolerance = tolerance_for(cfg, path_name(kinds[i]), r.tolerance);
      paths.push_back(result_json(r));
      results.push_back(std::move(r));
    } else {
      inapplicable.push_back(json{{"path", path_name(kinds[i])}, {"reason", reasons[i]}});
    }
  }
  rep.results()["paths"] = paths;
  rep.results()["inapplicable"] = inapplicable;

  // oracle (computed even when not requested, if a spectral form exists)
  std::optional<CalculusResult> oracle;
  if (gen.spectral()) {
    try {
      oracle = detail::run_path(PathKind::spectral_oracle, g, gen, rescale, opt);
    } catch (const path_inapplicable_error&) {
    }
  }
  if (oracle) {
    json dev = json::array();
    for (const auto& r : results) {
      const double d = op_norm_2(r.matrix - oracle->matrix);
      dev.push_back(json{{"path", r.label()}, {"deviation", d}});
      if (r.path == PathKind::spectral_oracle) continue;
      rep.verdict("tolerance:" + r.label(), d, Relation::le, r.tolerance);
      rep.verdict("coincidence:" + r.label(), d, Relation::le, 5.0 * r.error_estimate);
    }
    rep.results()["oracle_deviation"] = dev;
  }
  json pair = json::array();
  for (std::size_t i = 0; i < results.size(); ++i)
    for (std::size_t j = i + 1; j < results.size(); ++j) {
      const double d = op_norm_2(results[i].matrix - results[j].matrix);
      const double bound = results[i].error_estimate + results[j].error_estimate;
      pair.push_back(json{{"a", results[i].label()}, {"b", results[j].label()}, {"deviation", d}, {"bound", bound}});
      rep.verdict("pairwise:" + results[i].label() + "|" + results[j].label(), d, Relation::le, bound);
    }
  rep.results()["pairwise"] = pair;
  return rep.doc();
}

inline json cmd_laws(const CommandInput& in) {
  const json& cfg = in.config;
  const Generator gen = parse_generator(cfg);
  HalfPlaneFunction g1, g2;
  if (cfg.contains("symbols")) {
    const json& s = cfg["symbols"];
    if (!s.is_array() || s.size() != 2) throw usage_error("symbols: expected exactly two symbols");
    g1 = parse_symbol(s[0]);
    g2 = parse_symbol(s[1]);
  } else {
    g1 = parse_symbol(detail::require(cfg, "symbol", "config"));
    g2 = regularizer();
  }
  std::vector<PathKind> kinds;
  if (cfg.contains("path"))
    kinds = parse_paths(cfg, gen.spectral().has_value());
  else if (gen.spectral())
    kinds = {PathKind::spectral_oracle, PathKind::output_map};
  else
    kinds = {PathKind::output_map};
  const PathOptions opt = parse_path_options(cfg);

  Report rep("laws", cfg, in.seed);
  rep.provenance()["quadrature"] = quadrature_json();
  rep.provenance()["laws"] = "residuals are spectral-norm differences divided by ||g1(A)|| ||g2(A)|| + 1";
  json out = json::array(), skipped = json::array();
  for (auto k : kinds) {
    try {
      const auto r = calculus_laws(g1, g2, gen, k, opt);
      out.push_back(json{{"path", r.path},
                         {"scale", r.scale},
                         {"identity", r.identity},
                         {"additivity", r.additivity},
                         {"multiplicativity", r.multiplicativity},
                         {"semigroup_commutation", r.semigroup_commutation},
                         {"p_commutation", r.p_commutation}});
      rep.verdict("laws:" + r.path, r.max_residual(), Relation::le,
                  tolerance_for(cfg, r.path, path_tolerance(k)));
    } catch (const path_inapplicable_error& e) {
      skipped.push_back(json{{"path", path_name(k)}, {"reason", e.what()}});
    }
  }
  rep.results()["laws"] = out;
  rep.results()["inapplicable"] = skipped;
  return rep.doc();
}

inline json directional_json(const DirectionalResult& d) {
  return json{{"K_dir", d.K_dir},
              {"K_dir_label", d.K_label},
              {"m_dir", d.m_dir},
              {"m_dir_label", d.m_label},
              {"starts", d.starts},
              {"seed", d.seed},
              {"argmin_start", d.argmin_start},
              {"argmax_start", d.argmax_start},
              {"argmin", to_json(d.argmin)},
              {"witness", to_json(d.witness)},
              {"argmax", to_json(d.argmax)},
              {"min_trace", real_array(d.min_trace)},
              {"max_trace", real_array(d.max_trace)}};
}

inline json cmd_observability(const CommandInput& in) {
  const json& cfg = in.config;
  const Generator gen = parse_generator(cfg);
  const CMatrix c = cfg.contains("C") ? detail::complex_matrix(cfg["C"], "C") : CMatrix::identity(gen.dim());
  if (c.cols() != gen.dim()) throw usage_error("C: column count differs from the generator dimension");
  const auto sys = make_observed_system(gen, c);
  const auto search = parse_search(cfg, in.seed);
  std::vector<LabeledSymbol> symbols;
  if (cfg.contains("symbols")) {
    if (!cfg["symbols"].is_array()) throw usage_error("symbols: expected an array");
    for (std::size_t i = 0; i < cfg["symbols"].size(); ++i)
      symbols.push_back({"symbols[" + std::to_string(i) + "]", parse_symbol(cfg["symbols"][i])});
  } else {
    for (const auto& s : golden_symbols()) symbols.push_back({s.name, s.symbol});
  }

  Report rep("observability", cfg, in.seed);
  rep.provenance()["lyapunov"] = gen.spectral() ? "spectral form" : "Kronecker linear solve";
  rep.provenance()["search"] = json{{"starts", search.starts}, {"iterations", search.iterations}, {"seed", search.seed}};
  rep.provenance()["zero_threshold"] = observability_zero;

  const auto r = observability_report(sys, search);
  json& res = rep.results();
  res["gramian"] = to_json(r.Q);
  res["K"] = r.K;
  res["m"] = r.m;
  res["gramian_residual"] = r.gramian_residual;
  res["directional"] = directional_json(r.directional);
  res["exactly_observable"] = r.exactly_observable;
  res["observable_by_direction"] = r.observable_by_direction;
  rep.verdict("gramian_residual", r.gramian_residual, Relation::le, 1e-8);
  rep.verdict("K_dir<=m_dir", r.directional.K_dir, Relation::le, r.directional.m_dir);
  rep.verdict("m_dir<=m", r.directional.m_dir, Relation::le, r.m + 1e-9);

  const auto eq = equivalence_check_finite_dim(sys, search);
  res["equivalence"] = json{{"K", eq.K},
                            {"K_dir", eq.K_dir},
                            {"exactly_observable", eq.exactly_observable},
                            {"observable_by_direction", eq.observable_by_direction},
                            {"agree", eq.agree},
                            {"caveat", eq.caveat}};
  rep.verdict("equivalence_flags_differ", eq.agree ? 0.0 : 1.0, Relation::le, 0.0);

  const auto b = boundedness_theorem_check(sys, symbols, search);
  json entries = json::array();
  for (const auto& e : b.entries) {
    entries.push_back(json{{"symbol", e.symbol}, {"path", e.path}, {"norm", e.norm}, {"bound", e.bound}, {"margin", e.margin}});
    rep.verdict("boundedness:" + e.symbol, e.norm, Relation::le, e.bound);
  }
  res["boundedness"] = json{{"applicable", b.applicable}, {"notice", b.notice}, {"ratio", b.applicable ? b.m_dir / b.K_dir : 0.0},
                            {"entries", entries}};
  return rep.doc();
}

inline json cmd_example(const CommandInput& in) {
  const json& cfg = in.config;
  const std::size_t n = cfg.contains("N") ? detail::count_value(cfg["N"], "N") : 8;
  std::optional<std::vector<double>> lambdas;
  if (cfg.contains("lambdas")) {
    if (!cfg["lambdas"].is_array()) throw usage_error("lambdas: expected an array of numbers");
    std::vector<double> l;
    for (const auto& v : cfg["lambdas"]) l.push_back(detail::number(v, "lambdas"));
    lambdas = std::move(l);
  }
  std::vector<std::size_t> sizes;
  if (cfg.contains("table")) {
    if (!cfg["table"].is_array()) throw usage_error("table: expected an array of sizes");
    for (const auto& v : cfg["table"]) sizes.push_back(detail::count_value(v, "table"));
  } else {
    for (std::size_t k = 1; k < n; k *= 2) sizes.push_back(k);
    sizes.push_back(n);
  }
  const auto search = parse_search(cfg, in.seed);
  const auto ex = build_example(n, lambdas);
  for (std::size_t s : sizes)
    if (s == 0 || s > n) throw usage_error("table: sizes must lie in [1, N]");

  Report rep("example", cfg, in.seed);
  rep.provenance()["search"] = json{{"starts", search.starts}, {"iterations", search.iterations}, {"seed", search.seed}};
  rep.provenance()["lambdas"] = real_array(ex.lambdas);
  json& res = rep.results();

  const CMatrix q = gramian(ex.sys);
  const auto c = constants_from_gramian(q);
  const double half_dev = max_abs(q - 0.5 * CMatrix::identity(n));
  const double target = 1.0 / std::sqrt(2.0);
  res["K"] = c.K;
  res["m"] = c.m;
  res["gramian_deviation_from_half_identity"] = half_dev;
  res["gramian_note"] = "the Lyapunov solution is (1/2) I; the value sqrt(2) I would need a different normalization of C";
  rep.verdict("K=1/sqrt2", std::abs(c.K - target), Relation::le, 1e-9);
  rep.verdict("m=1/sqrt2", std::abs(c.m - target), Relation::le, 1e-9);
  rep.verdict("gramian=I/2", half_dev, Relation::le, 1e-9);

  const auto full = make_exponential_system(ex.lambdas);
  json table = json::array();
  std::vector<double> tops;
  for (std::size_t s : sizes) {
    const std::vector<double> sub(ex.lambdas.begin(), ex.lambdas.begin() + std::ptrdiff_t(s));
    const auto sub_ex = build_example(s, sub);
    const double top = hermitian_eig(directional_gram(sub_ex.sys, sub_ex.x)).values.back();
    const double upper = hermitian_eig(gram_matrix(full, s)).values.back();
    const auto d = directional_constants(sub_ex.sys, search);
    table.push_back(json{{"N", s},
                         {"lambda_max_W_xN", top},
                         {"riesz_upper", upper},
                         {"bound_M_over_2N", upper / (2.0 * double(s))},
                         {"K_dir", d.K_dir},
                         {"m_dir", d.m_dir}});
    rep.verdict("W_xN<=M/2N:N=" + std::to_string(s), top, Relation::le, upper / (2.0 * double(s)) * (1.0 + 1e-12));
    tops.push_back(top);
  }
  res["table"] = table;
  json decay = json::array();
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    if (sizes[k] <= sizes[k - 1]) continue;
    const double doublings = std::log2(double(sizes[k]) / double(sizes[k - 1]));
    const double factor = std::pow(tops[k - 1] / tops[k], 1.0 / doublings);
    decay.push_back(json{{"from", sizes[k - 1]}, {"to", sizes[k]}, {"factor_per_doubling", factor}});
    if (sizes[k - 1] >= 4)
      rep.verdict("decay_per_doubling:" + std::to_string(sizes[k - 1]) + "->" + std::to_string(sizes[k]), factor,
                  Relation::ge, 1.8);
  }
  res["decay"] = decay;

  if (n >= 2) {
    const auto car = carleson_products(full);
    const auto rz = riesz_bounds(full);
    json sweep = json::array();
    for (std::size_t k = 0; k < rz.sizes.size(); ++k)
      sweep.push_back(json{{"N", rz.sizes[k]}, {"lambda_min", rz.lower[k]}, {"lambda_max", rz.upper[k]}});
    res["riesz"] = json{{"sweep", sweep},
                        {"ratios", real_array(rz.ratios)},
                        {"effective_lower", rz.effective_lower},
                        {"rule", rz.rule},
                        {"verdict", rz.verdict}};
    res["carleson"] = json{{"products", real_array(car.products)},
                           {"tail_factors", real_array(car.tail_factors)},
                           {"infimum", car.infimum},
                           {"corrected_infimum", car.corrected_infimum},
                           {"tail_note", car.tail_note},
                           {"verdict", car.verdict}};
    rep.verdict("riesz", rz.effective_lower, Relation::gt, rz.zero_threshold);
    rep.verdict("carleson", car.corrected_infimum, Relation::ge, car.threshold);
  }
  return rep.doc();
}

inline json cmd_toeplitz_demo(const CommandInput& in) {
  const json& cfg = in.config;
  const HalfPlaneFunction g = cfg.contains("symbol") ? parse_symbol(cfg["symbol"]) : resolvent_kernel(2.0);
  const HalfPlaneFunction h = cfg.contains("symbol2") ? parse_symbol(cfg["symbol2"]) : regularizer();
  CVector exps{-0.5, -1.0, cplx(-2.0, 1.0)};
  if (cfg.contains("exponents")) exps = detail::complex_vector(cfg["exponents"], "exponents");
  if (exps.empty()) throw usage_error("exponents: empty");
  for (const auto& a : exps)
    if (!(a.real() < 0.0)) throw usage_error("exponents: every exponent needs a negative real part");
  TimeGrid grid;
  if (cfg.contains("grid")) {
    const PathOptions po = parse_path_options(json{{"grid", cfg["grid"]}});
    grid = *po.output_map.grid;
  }
  const double tau = cfg.contains("tau") ? detail::number(cfg["tau"], "tau") : 0.5;
  const double tol = tolerance_for(cfg, "eigen", 1e-3);
  const double tol_refined = tolerance_for(cfg, "eigen_refined", 2.5e-4);
  const double tol_shift = tolerance_for(cfg, "shift", 1e-3);
  const double tol_mult = tolerance_for(cfg, "multiplicativity", 1e-3);

  Report rep("toeplitz-demo", cfg, in.seed);
  rep.provenance()["grid"] = grid_json(grid);
  rep.provenance()["refined_grid"] = grid_json(refine(grid));
  rep.provenance()["fft"] = "radix-2, zero padded to 2N, Nyquist bin averaged";

  json eigen = json::array();
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const cplx a = exps[i];
    const cplx ga = g.fn(a);
    json row{{"a", to_json(a)}, {"g(a)", to_json(ga)}};
    for (const auto& [label, gr] : {std::pair<const char*, TimeGrid>{"default", grid}, {"refined", refine(grid)}}) {
      const auto f = sample(gr, [a](double t) { return std::exp(a * t); });
      const auto got = toeplitz_apply(g, f);
      const auto want = sample(gr, [a, ga](double t) { return ga * std::exp(a * t); });
      const double den = std::abs(ga) > 1e-12 ? want.l2_norm() : g.sup_norm_est * f.l2_norm();
      const double err = (got - want).l2_norm() / den;
      row[std::string("relative_error_") + label] = err;
      rep.verdict(std::string("eigen_relation_") + label + ":" + std::to_string(i), err, Relation::le,
                  std::string(label) == "default" ? tol : tol_refined);
    }
    eigen.push_back(row);
  }
  rep.results()["eigen_relation"] = eigen;

  const cplx a0 = exps[0];
  const auto f0 = sample(grid, [a0](double t) { return std::exp(a0 * t); });
  MgPropertiesReport p;
  try {
    p = check_mg_properties(g, h, f0, tau);
  } catch (const alignment_error& e) {
    throw usage_error(std::string("tau: ") + e.what());
  }
  rep.results()["properties"] = json{{"sup_norm", p.sup_norm},
                                     {"contraction_margin", p.contraction_margin},
                                     {"contraction_slack", p.contraction_slack},
                                     {"shift_residual", p.shift_residual},
                                     {"shift_window", p.shift_window},
                                     {"multiplicativity_residual", p.multiplicativity_residual}};
  rep.verdict("contraction", p.contraction_margin, Relation::le, p.contraction_slack);
  rep.verdict("shift_commutation", p.shift_residual, Relation::le, tol_shift);
  rep.verdict("multiplicativity", p.multiplicativity_residual, Relation::le, tol_mult);
  return rep.doc();
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"apply", "laws", "observability", "example", "toeplitz-demo"};
  return names;
}

inline json run_command(const std::string& command, const CommandInput& in) {
  validate_config(in.config);
  if (command == "apply") return cmd_apply(in);
  if (command == "laws") return cmd_laws(in);
  if (command == "observability") return cmd_observability(in);
  if (command == "example") return cmd_example(in);
  if (command == "toeplitz-demo") return cmd_toeplitz_demo(in);
  throw usage_error("unknown command '" + command + "'");
}

inline json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw usage_error(what + ": " + e.what());
  }
}

struct CheckResult {
  std::size_t verdicts = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

// Re-validates every verdict of a report against its recorded residual and threshold.
inline CheckResult check_report(const json& doc) {
  CheckResult c;
  if (!doc.is_object() || !doc.contains("schema") || doc["schema"] != report_schema) {
    c.problems.push_back(std::string("schema is not \"") + report_schema + "\"");
    return c;
  }
  for (const char* key : {"command", "tool_version", "seed", "inputs", "provenance", "results", "verdicts"})
    if (!doc.contains(key)) c.problems.push_back(std::string("missing field '") + key + "'");
  if (!doc.contains("verdicts") || !doc["verdicts"].is_array()) return c;
  auto num = [](const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw validation_error("non-numeric value");
  };
  for (const auto& v : doc["verdicts"]) {
    ++c.verdicts;
    const std::string name = v.value("name", std::string("?"));
    try {
      const bool recomputed = holds(num(v.at("residual")), v.at("relation").get<std::string>(), num(v.at("threshold")));
      if (recomputed != v.at("pass").get<bool>()) c.problems.push_back("verdict '" + name + "' does not match its residual");
    } catch (const std::exception& e) {
      c.problems.push_back("verdict '" + name + "' is malformed: " + e.what());
    }
  }
  return c;
}

inline bool all_pass(const json& doc) {
  for (const auto& v : doc["verdicts"])
    if (!v["pass"].get<bool>()) return false;
  return true;
}

}  // namespace halfcalc::cli
