// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cltlab/io.hpp"
#include "cltlab/numerics.hpp"
#include "json.hpp"

namespace cltlab {

using nlohmann::json;

std::string to_string(Normalization norm) {
  return norm == Normalization::long_run ? "long_run" : "exact_variance";
}

std::vector<std::int64_t> default_n_grid() {
  std::vector<std::int64_t> grid;
  for (int e = 7; e <= 14; ++e) grid.push_back(std::int64_t{1} << e);
  return grid;
}

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " is missing or has the wrong type");
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
  return obj.at(key).get<double>();
}

std::uint64_t parse_u64(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    try {
      std::size_t pos = 0;
      const auto x = std::stoull(s, &pos, 0);
      if (pos == s.size()) return x;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(where + " must be an unsigned 64-bit integer");
}

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(where + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

CoefficientRule parse_coefficients(const json& obj) {
  const std::string where = "model.coefficients";
  check_keys(obj, where, {"rule", "kappa", "alpha", "values"});
  CoefficientRule c;
  const std::string rule = obj.contains("rule") ? get<std::string>(obj, "rule", where) : "constant";
  if (rule == "constant") c.kind = CoefficientRule::Kind::constant;
  else if (rule == "power") c.kind = CoefficientRule::Kind::power;
  else if (rule == "ramp") c.kind = CoefficientRule::Kind::ramp;
  else if (rule == "list") c.kind = CoefficientRule::Kind::list;
  else throw ConfigError("unknown coefficient rule '" + rule + "'");
  c.kappa = get_number(obj, "kappa", 1.0, where);
  c.alpha = get_number(obj, "alpha", 0.0, where);
  if (obj.contains("values")) c.values = number_list(obj.at("values"), where + ".values");
  if (c.kind == CoefficientRule::Kind::list && c.values.empty()) {
    throw ConfigError(where + ": rule 'list' needs values");
  }
  return c;
}

LinearBase parse_base(const json& obj) {
  const std::string where = "model.base";
  check_keys(obj, where, {"kind", "phi", "coefficients"});
  LinearBase b;
  const std::string kind = obj.contains("kind") ? get<std::string>(obj, "kind", where) : "ar1";
  if (kind == "ar1") b.kind = LinearBase::Kind::ar1;
  else if (kind == "ma") b.kind = LinearBase::Kind::ma;
  else throw ConfigError("unknown linear base '" + kind + "'");
  b.phi = get_number(obj, "phi", 0.0, where);
  if (obj.contains("coefficients")) b.ma_coeffs = number_list(obj.at("coefficients"), where + ".coefficients");
  return b;
}

ChainParams parse_chain(const json& obj) {
  const std::string where = "model.chain";
  check_keys(obj, where, {"q", "transition", "f", "initial", "view"});
  ChainParams c;
  if (obj.contains("q") && obj.contains("transition")) {
    throw ConfigError(where + ": give either q or transition, not both");
  }
  if (obj.contains("q")) {
    const double q = get_number(obj, "q", 0.75, where);
    c.transition = {{q, 1.0 - q}, {1.0 - q, q}};
  }
  if (obj.contains("transition")) {
    const auto& t = obj.at("transition");
    if (!t.is_array()) throw ConfigError(where + ".transition must be a matrix");
    c.transition.clear();
    for (const auto& row : t) c.transition.push_back(number_list(row, where + ".transition"));
  }
  if (obj.contains("f")) c.f = number_list(obj.at("f"), where + ".f");
  if (obj.contains("initial")) c.initial = number_list(obj.at("initial"), where + ".initial");
  if (obj.contains("view")) {
    const std::string view = get<std::string>(obj, "view", where);
    if (view == "values") c.view = ChainView::values;
    else if (view == "martingale") c.view = ChainView::martingale;
    else throw ConfigError("unknown chain view '" + view + "'");
  }
  return c;
}

SequentialParams parse_sequential(const json& obj) {
  const std::string where = "model.sequential";
  check_keys(obj, where, {"schedule", "observable"});
  SequentialParams s;
  if (obj.contains("schedule")) {
    s.schedule.clear();
    for (double m : number_list(obj.at("schedule"), where + ".schedule")) {
      if (m != std::floor(m)) throw ConfigError(where + ".schedule entries must be integers");
      s.schedule.push_back(static_cast<int>(m));
    }
  }
  if (obj.contains("observable")) {
    s.observable = observable_from_string(get<std::string>(obj, "observable", where));
  }
  return s;
}

ModelSpec model_from_json(const json& obj) {
  check_keys(obj, "model", {"family", "n", "p", "coefficients", "base", "chain", "sequential"});
  ModelSpec spec;
  spec.family = family_from_string(get<std::string>(obj, "family", "model"));
  if (obj.contains("n")) {
    if (!obj.at("n").is_number_integer()) throw ConfigError("model.n must be an integer");
    spec.n = obj.at("n").get<std::int64_t>();
  }
  spec.p = get_number(obj, "p", 3.0, "model");
  if (obj.contains("coefficients")) spec.coefficients = parse_coefficients(obj.at("coefficients"));
  if (obj.contains("base")) spec.base = parse_base(obj.at("base"));
  if (obj.contains("chain")) spec.chain = parse_chain(obj.at("chain"));
  if (obj.contains("sequential")) spec.sequential = parse_sequential(obj.at("sequential"));
  return spec;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

json model_json(const ModelSpec& spec) {
  json m;
  m["family"] = to_string(spec.family);
  m["n"] = spec.n;
  m["p"] = spec.p;
  const char* rules[] = {"constant", "power", "ramp", "list"};
  m["coefficients"] = {{"rule", rules[static_cast<int>(spec.coefficients.kind)]},
                       {"kappa", spec.coefficients.kappa},
                       {"alpha", spec.coefficients.alpha},
                       {"values", spec.coefficients.values}};
  m["base"] = {{"kind", spec.base.kind == LinearBase::Kind::ar1 ? "ar1" : "ma"},
               {"phi", spec.base.phi},
               {"coefficients", spec.base.ma_coeffs}};
  json chain = {{"transition", spec.chain.transition},
                {"f", spec.chain.f},
                {"view", spec.chain.view == ChainView::values ? "values" : "martingale"}};
  if (spec.chain.initial) chain["initial"] = *spec.chain.initial;
  m["chain"] = chain;
  m["sequential"] = {{"schedule", spec.sequential.schedule},
                     {"observable", to_string(spec.sequential.observable)}};
  return m;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (replicates < 100) {
    throw ConfigError("replicates must be >= 100 (got " + std::to_string(replicates) + ")");
  }
  if (n_grid.empty()) throw ConfigError("n_grid must not be empty");
  for (auto n : n_grid) model.with_n(n).validate();
  const auto& tags = known_bound_tags();
  for (const auto& t : bound_requests) {
    if (std::find(tags.begin(), tags.end(), t) == tags.end()) {
      throw ConfigError("unknown bound tag '" + t + "'");
    }
  }
  if (a && !(*a >= 1.0)) throw ConfigError("a must be >= 1 or \"auto\"");
  if (!(r > 0.0 && r <= 3.0)) throw ConfigError("r must lie in (0, 3]");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (u_replicates < 2) throw ConfigError("u_replicates must be >= 2");
  if (wr_r && !(*wr_r > 0.0 && *wr_r <= 1.0)) throw ConfigError("wr_r must lie in (0, 1]");
}

ExperimentConfig parse_config(const std::string& json_text) {
  const json doc = parse_document(json_text);
  check_keys(doc, "config",
             {"schema_version", "model", "model_id", "n_grid", "replicates", "master_seed",
              "outputs", "bound_requests", "a", "r", "constants_mode", "kappa", "psi_mode",
              "u_replicates", "spectral_floor", "wr_r", "normalization", "distance_kind",
              "seeds", "target_exponent", "target_log_corrected", "tolerance"});
  if (doc.contains("schema_version")) {
    const auto v = doc.at("schema_version");
    if (!v.is_number_integer() || v.get<int>() != kConfigSchemaVersion) {
      throw ConfigError("unsupported schema_version (expected " +
                        std::to_string(kConfigSchemaVersion) + ")");
    }
  }
  ExperimentConfig c;
  if (!doc.contains("model")) throw ConfigError("config.model is required");
  c.model = model_from_json(doc.at("model"));
  c.model_id = doc.contains("model_id") ? get<std::string>(doc, "model_id", "config")
                                        : to_string(c.model.family);
  if (doc.contains("n_grid")) {
    const auto& g = doc.at("n_grid");
    if (g.is_string()) {
      c.n_grid = parse_n_grid(g.get<std::string>());
    } else {
      for (double n : number_list(g, "config.n_grid")) {
        if (n != std::floor(n)) throw ConfigError("config.n_grid entries must be integers");
        c.n_grid.push_back(static_cast<std::int64_t>(n));
      }
    }
  } else {
    c.n_grid = doc.at("model").contains("n") ? std::vector<std::int64_t>{c.model.n}
                                             : default_n_grid();
  }
  if (doc.contains("replicates")) c.replicates = get<std::int64_t>(doc, "replicates", "config");
  if (doc.contains("master_seed")) c.master_seed = parse_u64(doc.at("master_seed"), "config.master_seed");
  if (doc.contains("outputs")) c.outputs = get<std::string>(doc, "outputs", "config");
  if (doc.contains("bound_requests")) {
    c.bound_requests = get<std::vector<std::string>>(doc, "bound_requests", "config");
  }
  if (doc.contains("a")) {
    const auto& a = doc.at("a");
    if (a.is_string() && a.get<std::string>() == "auto") c.a.reset();
    else if (a.is_number()) c.a = a.get<double>();
    else throw ConfigError("config.a must be a number or \"auto\"");
  } else {
    c.a = 1.0;
  }
  c.r = get_number(doc, "r", c.r, "config");
  if (doc.contains("constants_mode")) {
    c.constants_mode = constants_mode_from_string(get<std::string>(doc, "constants_mode", "config"));
  }
  c.kappa = get_number(doc, "kappa", c.kappa, "config");
  if (doc.contains("psi_mode")) {
    const std::string m = get<std::string>(doc, "psi_mode", "config");
    if (m == "closed_form") c.psi_mode = PsiMode::closed_form;
    else if (m == "monte_carlo") c.psi_mode = PsiMode::monte_carlo;
    else throw ConfigError("unknown psi_mode '" + m + "'");
  }
  if (doc.contains("u_replicates")) c.u_replicates = get<std::int64_t>(doc, "u_replicates", "config");
  if (doc.contains("spectral_floor")) c.spectral_floor = get<bool>(doc, "spectral_floor", "config");
  if (doc.contains("wr_r") && !doc.at("wr_r").is_null()) c.wr_r = get_number(doc, "wr_r", 1.0, "config");
  if (doc.contains("normalization")) {
    const std::string m = get<std::string>(doc, "normalization", "config");
    if (m == "exact_variance") c.normalization = Normalization::exact_variance;
    else if (m == "long_run") c.normalization = Normalization::long_run;
    else throw ConfigError("unknown normalization '" + m + "'");
  }
  if (doc.contains("distance_kind")) {
    c.distance_kind = distance_kind_from_string(get<std::string>(doc, "distance_kind", "config"));
  }
  if (doc.contains("seeds")) c.seeds = get<std::int64_t>(doc, "seeds", "config");
  if (doc.contains("target_exponent") && !doc.at("target_exponent").is_null()) {
    c.target_exponent = get_number(doc, "target_exponent", 0.0, "config");
  }
  if (doc.contains("target_log_corrected")) {
    c.target_log_corrected = get<bool>(doc, "target_log_corrected", "config");
  }
  c.tolerance = get_number(doc, "tolerance", c.tolerance, "config");
  if (c.n_grid.empty()) throw ConfigError("n_grid must not be empty");
  c.model.n = c.n_grid.front();
  c.validate();
  return c;
}

ModelSpec parse_model(const std::string& json_text) {
  return model_from_json(parse_document(json_text));
}

std::string model_to_json(const ModelSpec& spec) { return model_json(spec).dump(); }

std::string config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["schema_version"] = kConfigSchemaVersion;
  doc["model"] = model_json(c.model);
  doc["model_id"] = c.model_id;
  doc["n_grid"] = c.n_grid;
  doc["replicates"] = c.replicates;
  doc["master_seed"] = c.master_seed;
  doc["outputs"] = c.outputs;
  doc["bound_requests"] = c.bound_requests;
  doc["a"] = c.a ? json(*c.a) : json("auto");
  doc["r"] = c.r;
  doc["constants_mode"] = to_string(c.constants_mode);
  doc["kappa"] = c.kappa;
  doc["psi_mode"] = c.psi_mode == PsiMode::closed_form ? "closed_form" : "monte_carlo";
  doc["u_replicates"] = c.u_replicates;
  doc["spectral_floor"] = c.spectral_floor;
  doc["wr_r"] = c.wr_r ? json(*c.wr_r) : json(nullptr);
  doc["normalization"] = to_string(c.normalization);
  doc["distance_kind"] = to_string(c.distance_kind);
  doc["seeds"] = c.seeds;
  doc["target_exponent"] = c.target_exponent ? json(*c.target_exponent) : json(nullptr);
  doc["target_log_corrected"] = c.target_log_corrected;
  doc["tolerance"] = c.tolerance;
  return doc.dump(2);
}

std::uint64_t spec_hash(const ModelSpec& spec) { return fnv1a64(model_to_json(spec)); }

std::vector<std::int64_t> parse_n_grid(const std::string& text) {
  auto parse_term = [&](std::string t) -> std::int64_t {
    t.erase(std::remove_if(t.begin(), t.end(), ::isspace), t.end());
    try {
      std::size_t pos = 0;
      if (t.rfind("2^", 0) == 0) {
        const int e = std::stoi(t.substr(2), &pos);
        if (pos + 2 != t.size() || e < 0 || e > 40) throw ConfigError("");
        return std::int64_t{1} << e;
      }
      const long long v = std::stoll(t, &pos);
      if (pos != t.size()) throw ConfigError("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad n-grid entry '" + t + "'");
    }
  };
  std::vector<std::int64_t> grid;
  const auto range = text.find("..");
  if (range != std::string::npos) {
    const auto lo = parse_term(text.substr(0, range));
    const auto hi = parse_term(text.substr(range + 2));
    if (lo < 1 || hi < lo || (lo & (lo - 1)) != 0) {
      throw ConfigError("n-grid range must run between powers of two, low to high");
    }
    for (std::int64_t n = lo; n <= hi; n *= 2) grid.push_back(n);
    return grid;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    grid.push_back(parse_term(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw ConfigError("n-grid must be strictly increasing");
  }
  return grid;
}

}  // namespace cltlab
