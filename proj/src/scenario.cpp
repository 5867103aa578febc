#include "emctl/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <cstring>

#include "emctl/errors.hpp"
#include "emctl/reference.hpp"
#include "emctl/simulator.hpp"

namespace emctl {

using nlohmann::json;

namespace {

// JSON pointer -> source line, from a second pass over already-valid text.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : text_(text) {
    skip_ws();
    value("");
  }

  int line(std::string pointer) const {
    for (;;) {
      auto it = lines_.find(pointer);
      if (it != lines_.end()) return it->second;
      if (pointer.empty()) return 0;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      if (pos_ < text_.size()) out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  void value(const std::string& path) {
    lines_.emplace(path, line_);
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const int key_line = line_;
        const std::string key = string_token();
        skip_ws();
        ++pos_;  // ':'
        skip_ws();
        const std::string child = path + "/" + key;
        lines_.emplace(child, key_line);
        value(child);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip_ws();
      int k = 0;
      while (pos_ < text_.size() && text_[pos_] != ']') {
        value(path + "/" + std::to_string(k++));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && !std::strchr(",]} \t\r\n", text_[pos_])) ++pos_;
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

class Reader {
 public:
  Reader(std::string origin, const LineIndex* index) : origin_(std::move(origin)), index_(index) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    const int line = index_ ? index_->line(pointer) : 0;
    std::string where = origin_;
    if (line > 0) where += ":" + std::to_string(line);
    const std::string key = pointer.empty() ? "(root)" : pointer.substr(1);
    throw SchemaError(where + ": " + key + ": " + message, line);
  }

  void object(const json& j, const std::string& p, const std::set<std::string>& allowed) const {
    if (!j.is_object()) fail(p, "expected an object");
    for (const auto& [key, _] : j.items()) {
      if (!allowed.count(key)) fail(p + "/" + key, "unknown key '" + key + "'");
    }
  }

  double number(const json& j, const std::string& p) const {
    if (!j.is_number()) fail(p, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(p, "expected a finite number");
    return v;
  }

  double positive(const json& j, const std::string& p) const {
    const double v = number(j, p);
    if (!(v > 0)) fail(p, "must be positive");
    return v;
  }

  int integer(const json& j, const std::string& p, int min_value) const {
    if (!j.is_number_integer()) fail(p, "expected an integer");
    const auto v = j.get<long long>();
    if (v < min_value || v > std::numeric_limits<int>::max()) {
      fail(p, "must be at least " + std::to_string(min_value));
    }
    return static_cast<int>(v);
  }

  std::string string(const json& j, const std::string& p) const {
    if (!j.is_string()) fail(p, "expected a string");
    return j.get<std::string>();
  }

  // null entries become null_value when given (unbounded limits).
  std::vector<double> numbers(const json& j, const std::string& p,
                              std::optional<double> null_value = std::nullopt) const {
    if (!j.is_array()) fail(p, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
      const std::string pk = p + "/" + std::to_string(k);
      if (null_value && j[k].is_null()) {
        out.push_back(*null_value);
      } else {
        out.push_back(number(j[k], pk));
      }
    }
    return out;
  }

  MatrixValue matrix(const json& j, const std::string& p) const {
    if (j.is_number()) return MatrixValue::of(number(j, p));
    if (!j.is_array() || j.empty()) fail(p, "expected a number or a non-empty array");
    MatrixValue m;
    if (j[0].is_number()) {
      m.rows.push_back(numbers(j, p));
      return m;
    }
    for (std::size_t r = 0; r < j.size(); ++r) {
      const std::string pr = p + "/" + std::to_string(r);
      m.rows.push_back(numbers(j[r], pr));
      if (m.rows.back().size() != m.rows.front().size() || m.rows.back().empty()) {
        fail(pr, "rows must be non-empty and of equal length");
      }
    }
    return m;
  }

 private:
  std::string origin_;
  const LineIndex* index_;
};

json matrix_json(const MatrixValue& m) {
  if (m.scalar) return m.rows[0][0];
  return m.rows;
}

json bounds_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::set<std::string> kControllerKeys = {"law", "K_e", "Rbar_e", "rbar_e", "D_d",
                                               "D_d_basis", "Gamma", "k_c", "auxiliary_weights"};

InlinePlant parse_inline(const Reader& rd, const json& j, const std::string& p) {
  rd.object(j, p, {"name", "n_m", "n_e", "mass", "stiffness", "linear", "quartic", "elastance",
                   "R_m", "J_e", "R_e", "G_e", "q_lower", "q_upper", "state_scale"});
  InlinePlant d;
  auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) rd.fail(p, std::string("missing '") + key + "'");
    return j.at(key);
  };
  if (j.contains("name")) d.name = rd.string(j["name"], p + "/name");
  d.n_m = rd.integer(need("n_m"), p + "/n_m", 1);
  d.n_e = rd.integer(need("n_e"), p + "/n_e", 1);
  d.mass = rd.matrix(need("mass"), p + "/mass");
  d.stiffness = rd.matrix(need("stiffness"), p + "/stiffness");
  if (j.contains("linear")) d.linear = rd.numbers(j["linear"], p + "/linear");
  if (j.contains("quartic")) d.quartic = rd.numbers(j["quartic"], p + "/quartic");
  const std::string pe = p + "/elastance";
  const json& e = need("elastance");
  rd.object(e, pe, {"form", "base", "slopes"});
  if (e.contains("form")) {
    d.elastance_form = rd.string(e["form"], pe + "/form");
    if (d.elastance_form != "affine" && d.elastance_form != "inverse_affine") {
      rd.fail(pe + "/form", "expected 'affine' or 'inverse_affine'");
    }
  }
  if (!e.contains("base")) rd.fail(pe, "missing 'base'");
  d.elastance_base = rd.matrix(e["base"], pe + "/base");
  if (e.contains("slopes")) {
    if (!e["slopes"].is_array()) rd.fail(pe + "/slopes", "expected an array");
    for (std::size_t k = 0; k < e["slopes"].size(); ++k) {
      d.elastance_slopes.push_back(rd.matrix(e["slopes"][k], pe + "/slopes/" + std::to_string(k)));
    }
  }
  d.R_m = rd.matrix(need("R_m"), p + "/R_m");
  d.J_e = j.contains("J_e") ? rd.matrix(j["J_e"], p + "/J_e") : MatrixValue::of(0.0);
  d.R_e = rd.matrix(need("R_e"), p + "/R_e");
  d.G_e = rd.matrix(need("G_e"), p + "/G_e");
  if (j.contains("q_lower")) d.q_lower = rd.numbers(j["q_lower"], p + "/q_lower", -kInf);
  if (j.contains("q_upper")) d.q_upper = rd.numbers(j["q_upper"], p + "/q_upper", kInf);
  if (j.contains("state_scale")) d.state_scale = rd.numbers(j["state_scale"], p + "/state_scale");
  return d;
}

json inline_json(const InlinePlant& d) {
  json j = {{"name", d.name}, {"n_m", d.n_m}, {"n_e", d.n_e}, {"mass", matrix_json(d.mass)},
            {"stiffness", matrix_json(d.stiffness)}, {"R_m", matrix_json(d.R_m)},
            {"J_e", matrix_json(d.J_e)}, {"R_e", matrix_json(d.R_e)}, {"G_e", matrix_json(d.G_e)}};
  if (!d.linear.empty()) j["linear"] = d.linear;
  if (!d.quartic.empty()) j["quartic"] = d.quartic;
  json slopes = json::array();
  for (const auto& s : d.elastance_slopes) slopes.push_back(matrix_json(s));
  j["elastance"] = {{"form", d.elastance_form}, {"base", matrix_json(d.elastance_base)},
                    {"slopes", slopes}};
  if (!d.q_lower.empty()) j["q_lower"] = bounds_json(d.q_lower);
  if (!d.q_upper.empty()) j["q_upper"] = bounds_json(d.q_upper);
  if (!d.state_scale.empty()) j["state_scale"] = d.state_scale;
  return j;
}

void set_path(json& root, const std::string& key, const json& value) {
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigurationError("empty component in key '" + key + "'");
    if (!node->is_object()) throw ConfigurationError("key '" + key + "' does not name a field");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

Scenario parse_json(const json& j, const Reader& rd, bool check_cases);

Scenario apply_case(const Scenario& base, const CaseConfig& c) {
  Scenario s = base;
  s.cases.clear();
  json j = scenario_to_json(s);
  for (const auto& [key, value] : c.set) set_path(j, key, value);
  const Reader rd("case '" + c.label + "'", nullptr);
  return parse_json(j, rd, false);
}

Scenario parse_json(const json& j, const Reader& rd, bool check_cases) {
  rd.object(j, "", {"name", "description", "notes", "plant", "controller", "target", "initial",
                    "integrator", "region", "cases", "sweep", "output_dir", "seed"});
  Scenario s;
  if (!j.contains("name")) rd.fail("", "missing 'name'");
  s.name = rd.string(j["name"], "/name");
  if (s.name.empty()) rd.fail("/name", "must not be empty");
  if (j.contains("description")) s.description = rd.string(j["description"], "/description");
  if (j.contains("notes")) s.notes = rd.string(j["notes"], "/notes");

  // plant
  if (!j.contains("plant")) rd.fail("", "missing 'plant'");
  const json& pj = j["plant"];
  rd.object(pj, "/plant", {"builtin", "parameters", "definition"});
  if (pj.contains("builtin") == pj.contains("definition")) {
    rd.fail("/plant", "give exactly one of 'builtin' or 'definition'");
  }
  if (pj.contains("builtin")) {
    s.plant.builtin = rd.string(pj["builtin"], "/plant/builtin");
    const auto names = builtin_plant_names();
    if (std::find(names.begin(), names.end(), s.plant.builtin) == names.end()) {
      rd.fail("/plant/builtin", "unknown built-in plant '" + s.plant.builtin + "'");
    }
    if (pj.contains("parameters")) {
      const auto allowed = builtin_plant_parameters(s.plant.builtin);
      const json& par = pj["parameters"];
      rd.object(par, "/plant/parameters", std::set<std::string>(allowed.begin(), allowed.end()));
      for (const auto& [key, value] : par.items()) {
        s.plant.parameters[key] = rd.number(value, "/plant/parameters/" + key);
      }
    }
  } else {
    if (pj.contains("parameters")) rd.fail("/plant/parameters", "only valid with 'builtin'");
    s.plant.definition = parse_inline(rd, pj["definition"], "/plant/definition");
  }

  // controller
  if (!j.contains("controller")) rd.fail("", "missing 'controller'");
  const json& cj = j["controller"];
  rd.object(cj, "/controller", kControllerKeys);
  auto& c = s.controller;
  if (!cj.contains("law")) rd.fail("/controller", "missing 'law'");
  try {
    c.law = law_kind_from_string(rd.string(cj["law"], "/controller/law"));
  } catch (const ConfigurationError& e) {
    rd.fail("/controller/law", e.what());
  }
  int resistive = 0;
  if (cj.contains("K_e")) c.K_e = rd.matrix(cj["K_e"], "/controller/K_e"), ++resistive;
  if (cj.contains("Rbar_e")) c.Rbar_e = rd.matrix(cj["Rbar_e"], "/controller/Rbar_e"), ++resistive;
  if (cj.contains("rbar_e")) c.rbar_e = rd.positive(cj["rbar_e"], "/controller/rbar_e"), ++resistive;
  if (resistive > 1) rd.fail("/controller", "give at most one of K_e, Rbar_e, rbar_e");
  if (cj.contains("D_d")) c.D_d = rd.matrix(cj["D_d"], "/controller/D_d");
  if (cj.contains("D_d_basis")) {
    c.D_d_basis = rd.string(cj["D_d_basis"], "/controller/D_d_basis");
    if (c.D_d_basis != "absolute" && c.D_d_basis != "gamma") {
      rd.fail("/controller/D_d_basis", "expected 'absolute' or 'gamma'");
    }
    if (c.D_d_basis == "gamma" && !c.D_d.scalar) {
      rd.fail("/controller/D_d", "must be a number when D_d_basis is 'gamma'");
    }
  }
  if (cj.contains("Gamma")) c.Gamma = rd.matrix(cj["Gamma"], "/controller/Gamma");
  if (cj.contains("k_c")) c.k_c = rd.matrix(cj["k_c"], "/controller/k_c");
  if (cj.contains("auxiliary_weights")) {
    c.auxiliary_weights = rd.numbers(cj["auxiliary_weights"], "/controller/auxiliary_weights");
  }

  // target
  if (!j.contains("target")) rd.fail("", "missing 'target'");
  const json& tj = j["target"];
  rd.object(tj, "/target", {"kind", "q_d", "offset", "amplitude", "omega", "phase"});
  if (tj.contains("kind")) s.target.kind = rd.string(tj["kind"], "/target/kind");
  if (s.target.kind == "equilibrium") {
    if (!tj.contains("q_d")) rd.fail("/target", "missing 'q_d'");
    for (const char* k : {"offset", "amplitude", "omega", "phase"}) {
      if (tj.contains(k)) rd.fail(std::string("/target/") + k, "only valid for a sinusoid");
    }
    s.target.q_d = rd.numbers(tj["q_d"], "/target/q_d");
  } else if (s.target.kind == "sinusoid") {
    if (tj.contains("q_d")) rd.fail("/target/q_d", "only valid for an equilibrium");
    for (const char* k : {"offset", "amplitude", "omega"}) {
      if (!tj.contains(k)) rd.fail("/target", std::string("missing '") + k + "'");
    }
    s.target.offset = rd.number(tj["offset"], "/target/offset");
    s.target.amplitude = rd.number(tj["amplitude"], "/target/amplitude");
    s.target.omega = rd.positive(tj["omega"], "/target/omega");
    if (tj.contains("phase")) s.target.phase = rd.number(tj["phase"], "/target/phase");
  } else {
    rd.fail("/target/kind", "expected 'equilibrium' or 'sinusoid'");
  }

  if (j.contains("initial")) {
    const json& ij = j["initial"];
    rd.object(ij, "/initial", {"state", "offset"});
    if (ij.contains("state") && ij.contains("offset")) {
      rd.fail("/initial", "give either 'state' or 'offset'");
    }
    if (ij.contains("state")) s.initial.state = rd.numbers(ij["state"], "/initial/state");
    if (ij.contains("offset")) s.initial.offset = rd.numbers(ij["offset"], "/initial/offset");
  }

  if (!j.contains("integrator")) rd.fail("", "missing 'integrator'");
  {
    const json& ij = j["integrator"];
    rd.object(ij, "/integrator", {"method", "rel_tol", "abs_tol", "max_step", "min_step",
                                  "horizon", "output_samples"});
    auto& in = s.integrator;
    if (ij.contains("method")) {
      in.method = rd.string(ij["method"], "/integrator/method");
      if (in.method != "auto") {
        try {
          integration_method_from_string(in.method);
        } catch (const ConfigurationError& e) {
          rd.fail("/integrator/method", e.what());
        }
      }
    }
    if (!ij.contains("horizon")) rd.fail("/integrator", "missing 'horizon'");
    in.horizon = rd.positive(ij["horizon"], "/integrator/horizon");
    if (ij.contains("rel_tol")) in.rel_tol = rd.positive(ij["rel_tol"], "/integrator/rel_tol");
    if (ij.contains("abs_tol")) in.abs_tol = rd.positive(ij["abs_tol"], "/integrator/abs_tol");
    if (ij.contains("max_step")) in.max_step = rd.number(ij["max_step"], "/integrator/max_step");
    if (ij.contains("min_step")) in.min_step = rd.number(ij["min_step"], "/integrator/min_step");
    if (in.max_step < 0) rd.fail("/integrator/max_step", "must be nonnegative");
    if (in.min_step < 0) rd.fail("/integrator/min_step", "must be nonnegative");
    if (in.max_step > 0 && in.min_step >= in.max_step) {
      rd.fail("/integrator/min_step", "must be below max_step");
    }
    if (ij.contains("output_samples")) {
      in.output_samples = rd.integer(ij["output_samples"], "/integrator/output_samples", 2);
    }
  }

  if (j.contains("region")) {
    const json& rj = j["region"];
    rd.object(rj, "/region", {"lower", "upper", "points_per_dim", "time_samples"});
    RegionConfig r;
    if (!rj.contains("lower") || !rj.contains("upper")) {
      rd.fail("/region", "needs 'lower' and 'upper'");
    }
    r.lower = rd.numbers(rj["lower"], "/region/lower");
    r.upper = rd.numbers(rj["upper"], "/region/upper");
    if (r.lower.size() != r.upper.size()) rd.fail("/region/upper", "length differs from 'lower'");
    for (std::size_t k = 0; k < r.lower.size(); ++k) {
      if (r.lower[k] > r.upper[k]) rd.fail("/region/upper/" + std::to_string(k), "below lower");
    }
    if (rj.contains("points_per_dim")) {
      r.points_per_dim = rd.integer(rj["points_per_dim"], "/region/points_per_dim", 1);
    }
    if (rj.contains("time_samples")) {
      r.time_samples = rd.integer(rj["time_samples"], "/region/time_samples", 1);
    }
    s.region = r;
  }

  if (j.contains("sweep")) {
    const json& sj = j["sweep"];
    rd.object(sj, "/sweep", {"parameter", "grid"});
    SweepConfig sw;
    if (sj.contains("parameter")) sw.parameter = rd.string(sj["parameter"], "/sweep/parameter");
    const auto params = sweep_parameters();
    if (std::find(params.begin(), params.end(), sw.parameter) == params.end()) {
      rd.fail("/sweep/parameter", "unknown sweep parameter '" + sw.parameter + "'");
    }
    if (!sj.contains("grid")) rd.fail("/sweep", "missing 'grid'");
    sw.grid = rd.numbers(sj["grid"], "/sweep/grid");
    if (sw.grid.empty()) rd.fail("/sweep/grid", "must not be empty");
    s.sweep = sw;
  }

  if (j.contains("output_dir")) s.output_dir = rd.string(j["output_dir"], "/output_dir");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) rd.fail("/seed", "expected a nonnegative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("cases")) {
    const json& cs = j["cases"];
    if (!cs.is_array()) rd.fail("/cases", "expected an array");
    std::set<std::string> labels;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const std::string pk = "/cases/" + std::to_string(k);
      rd.object(cs[k], pk, {"label", "set"});
      CaseConfig cc;
      if (!cs[k].contains("label")) rd.fail(pk, "missing 'label'");
      cc.label = rd.string(cs[k]["label"], pk + "/label");
      const bool safe = !cc.label.empty() && std::all_of(cc.label.begin(), cc.label.end(), [](char ch) {
        return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
      });
      if (!safe) rd.fail(pk + "/label", "use letters, digits, '_', '-' or '.'");
      if (!labels.insert(cc.label).second) rd.fail(pk + "/label", "duplicate label");
      if (cs[k].contains("set")) {
        if (!cs[k]["set"].is_object()) rd.fail(pk + "/set", "expected an object");
        for (const auto& [key, value] : cs[k]["set"].items()) cc.set[key] = value;
      }
      s.cases.push_back(cc);
    }
    if (check_cases) {
      for (std::size_t k = 0; k < s.cases.size(); ++k) {
        const std::string pk = "/cases/" + std::to_string(k);
        try {
          apply_case(s, s.cases[k]);
        } catch (const SchemaError& e) {
          rd.fail(pk + "/set", e.what());
        } catch (const ConfigurationError& e) {
          rd.fail(pk + "/set", e.what());
        }
      }
    }
  }
  return s;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

EMPlant build_plant(const PlantConfig& pc) {
  if (!pc.definition) return make_builtin_plant(pc.builtin, pc.parameters);
  const InlinePlant& d = *pc.definition;
  PolynomialPlantSpec spec;
  spec.name = d.name;
  spec.n_m = d.n_m;
  spec.n_e = d.n_e;
  spec.mass = d.mass.to_matrix(d.n_m, d.n_m, "mass");
  spec.stiffness = d.stiffness.to_matrix(d.n_m, d.n_m, "stiffness");
  spec.linear = d.linear.empty() ? Vector::Zero(d.n_m) : to_vector(d.linear);
  spec.quartic = d.quartic.empty() ? Vector::Zero(d.n_m) : to_vector(d.quartic);
  spec.form = d.elastance_form == "inverse_affine"
                  ? PolynomialPlantSpec::ElastanceForm::inverse_affine
                  : PolynomialPlantSpec::ElastanceForm::affine;
  spec.base = d.elastance_base.to_matrix(d.n_e, d.n_e, "elastance base");
  for (const auto& sl : d.elastance_slopes) spec.slopes.push_back(sl.to_matrix(d.n_e, d.n_e, "elastance slope"));
  spec.R_m = d.R_m.to_matrix(d.n_m, d.n_m, "R_m");
  spec.J_e = d.J_e.to_matrix(d.n_e, d.n_e, "J_e");
  spec.R_e = d.R_e.to_matrix(d.n_e, d.n_e, "R_e");
  const int n_u = d.G_e.scalar ? d.n_e : static_cast<int>(d.G_e.rows.front().size());
  spec.G_e = d.G_e.to_matrix(d.n_e, n_u, "G_e");
  if (!d.q_lower.empty()) spec.q_lower = to_vector(d.q_lower);
  if (!d.q_upper.empty()) spec.q_upper = to_vector(d.q_upper);
  if (!d.state_scale.empty()) spec.state_scale = to_vector(d.state_scale);
  return make_polynomial_plant(spec);
}

}  // namespace

Matrix MatrixValue::to_matrix(int r, int c, const char* what) const {
  if (scalar) {
    const double v = rows[0][0];
    if (r == c) return v * Matrix::Identity(r, c);
    if (v == 0.0) return Matrix::Zero(r, c);
    throw ConfigurationError(std::string(what) + ": a nonzero number needs a square shape, got " +
                             std::to_string(r) + "x" + std::to_string(c));
  }
  if (static_cast<int>(rows.size()) != r || static_cast<int>(rows.front().size()) != c) {
    throw ConfigurationError(std::string(what) + ": expected " + std::to_string(r) + "x" +
                             std::to_string(c));
  }
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = rows[i][k];
  return m;
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line.
    const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + at, '\n'));
    throw SchemaError(origin + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), line);
  }
  const LineIndex index(text);
  const Reader rd(origin, &index);
  return parse_json(j, rd, true);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open scenario file", 0);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  if (!s.description.empty()) j["description"] = s.description;
  if (!s.notes.empty()) j["notes"] = s.notes;
  if (s.plant.definition) {
    j["plant"] = {{"definition", inline_json(*s.plant.definition)}};
  } else {
    j["plant"] = {{"builtin", s.plant.builtin}};
    if (!s.plant.parameters.empty()) j["plant"]["parameters"] = s.plant.parameters;
  }
  const auto& c = s.controller;
  json cj = {{"law", to_string(c.law)}, {"D_d", matrix_json(c.D_d)},
             {"D_d_basis", c.D_d_basis}, {"Gamma", matrix_json(c.Gamma)}};
  if (c.K_e) cj["K_e"] = matrix_json(*c.K_e);
  if (c.Rbar_e) cj["Rbar_e"] = matrix_json(*c.Rbar_e);
  if (c.rbar_e) cj["rbar_e"] = *c.rbar_e;
  if (c.k_c) cj["k_c"] = matrix_json(*c.k_c);
  if (!c.auxiliary_weights.empty()) cj["auxiliary_weights"] = c.auxiliary_weights;
  j["controller"] = cj;
  if (s.target.kind == "equilibrium") {
    j["target"] = {{"kind", "equilibrium"}, {"q_d", s.target.q_d}};
  } else {
    j["target"] = {{"kind", s.target.kind}, {"offset", s.target.offset},
                   {"amplitude", s.target.amplitude}, {"omega", s.target.omega},
                   {"phase", s.target.phase}};
  }
  if (!s.initial.state.empty()) j["initial"] = {{"state", s.initial.state}};
  if (!s.initial.offset.empty()) j["initial"] = {{"offset", s.initial.offset}};
  const auto& in = s.integrator;
  j["integrator"] = {{"method", in.method},     {"rel_tol", in.rel_tol},   {"abs_tol", in.abs_tol},
                     {"max_step", in.max_step}, {"min_step", in.min_step}, {"horizon", in.horizon},
                     {"output_samples", in.output_samples}};
  if (s.region) {
    j["region"] = {{"lower", s.region->lower}, {"upper", s.region->upper},
                   {"points_per_dim", s.region->points_per_dim},
                   {"time_samples", s.region->time_samples}};
  }
  if (!s.cases.empty()) {
    json cs = json::array();
    for (const auto& cc : s.cases) {
      json set = json::object();
      for (const auto& [k, v] : cc.set) set[k] = v;
      cs.push_back({{"label", cc.label}, {"set", set}});
    }
    j["cases"] = cs;
  }
  if (s.sweep) j["sweep"] = {{"parameter", s.sweep->parameter}, {"grid", s.sweep->grid}};
  j["output_dir"] = s.output_dir;
  j["seed"] = s.seed;
  return j;
}

std::string emit_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

std::vector<ScenarioCase> expand_cases(const Scenario& s) {
  if (s.cases.empty()) return {{"base", s}};
  std::vector<ScenarioCase> out;
  for (const auto& c : s.cases) out.push_back({c.label, apply_case(s, c)});
  return out;
}

Scenario with_override(const Scenario& s, const std::string& key, const json& value) {
  CaseConfig c;
  c.label = "override";
  c.set[key] = value;
  Scenario out = apply_case(s, c);
  return out;
}

std::vector<std::string> sweep_parameters() { return {"D_d", "K_e", "Rbar_e", "rbar_e", "Gamma", "k_c"}; }

std::string sweep_key_path(const std::string& parameter) {
  const auto params = sweep_parameters();
  if (std::find(params.begin(), params.end(), parameter) == params.end()) {
    throw ConfigurationError("unknown sweep parameter '" + parameter + "'");
  }
  return "controller." + parameter;
}

BuiltScenario build_scenario(const Scenario& s) {
  BuiltScenario b{build_plant(s.plant), {}, s.controller.law, {}, {}, {}, {}, {}, {}, {}};
  const EMPlant& plant = b.plant;
  const int nm = plant.n_m, ne = plant.n_e;

  if (s.target.kind == "equilibrium") {
    if (static_cast<int>(s.target.q_d.size()) != nm) {
      throw ConfigurationError("target q_d needs " + std::to_string(nm) + " entries");
    }
    b.target = make_equilibrium_target(plant, to_vector(s.target.q_d));
  } else {
    MotionProfile p;
    p.kind = MotionProfile::Kind::sinusoid;
    p.offset = s.target.offset;
    p.amplitude = s.target.amplitude;
    p.omega = s.target.omega;
    p.phase = s.target.phase;
    b.target = make_reference(plant, p, s.integrator.horizon);
  }

  const auto& c = s.controller;
  b.Gamma = c.Gamma.to_matrix(nm, ne, "Gamma");
  if (c.D_d_basis == "gamma") {
    b.D_d = c.D_d.rows[0][0] * b.Gamma.transpose();
  } else {
    b.D_d = c.D_d.to_matrix(ne, nm, "D_d");
  }
  if (c.K_e) {
    b.K_e = c.K_e->to_matrix(ne, ne, "K_e");
  } else if (c.Rbar_e) {
    b.K_e = c.Rbar_e->to_matrix(ne, ne, "Rbar_e") - plant.R_e;
  } else if (c.rbar_e) {
    b.K_e = Matrix::Identity(ne, ne) / *c.rbar_e - plant.R_e;
  } else {
    b.K_e = Matrix::Zero(ne, ne);
  }
  if (c.k_c) b.shaping.gain = c.k_c->to_matrix(ne, ne, "k_c");
  if (!c.auxiliary_weights.empty()) {
    if (static_cast<int>(c.auxiliary_weights.size()) != ne) {
      throw ConfigurationError("auxiliary_weights needs " + std::to_string(ne) + " entries");
    }
    b.shaping.auxiliary = cubic_shaping(to_vector(c.auxiliary_weights));
  }

  const Vector star0 = b.target.state(0.0);
  if (!s.initial.state.empty()) {
    if (static_cast<int>(s.initial.state.size()) != plant.state_size()) {
      throw ConfigurationError("initial state needs " + std::to_string(plant.state_size()) +
                               " entries");
    }
    b.eta0 = to_vector(s.initial.state);
  } else if (!s.initial.offset.empty()) {
    if (static_cast<int>(s.initial.offset.size()) != plant.state_size()) {
      throw ConfigurationError("initial offset needs " + std::to_string(plant.state_size()) +
                               " entries");
    }
    b.eta0 = star0 + to_vector(s.initial.offset);
  } else {
    b.eta0 = star0;
  }

  const auto& in = s.integrator;
  b.integrator = default_integrator(plant, in.horizon);
  if (in.method != "auto") b.integrator.method = integration_method_from_string(in.method);
  b.integrator.rel_tol = in.rel_tol;
  b.integrator.abs_tol = in.abs_tol;
  b.integrator.max_step = in.max_step;
  b.integrator.min_step = in.min_step;
  b.integrator.output_samples = in.output_samples;
  b.integrator.validate();

  b.verification.horizon = in.horizon;
  if (s.region) {
    if (static_cast<int>(s.region->lower.size()) != plant.state_size()) {
      throw ConfigurationError("region bounds need " + std::to_string(plant.state_size()) +
                               " entries");
    }
    SamplingRegion r;
    r.lower = to_vector(s.region->lower);
    r.upper = to_vector(s.region->upper);
    r.points_per_dim = s.region->points_per_dim;
    r.times.clear();
    const int nt = b.target.is_equilibrium() ? 1 : s.region->time_samples;
    for (int k = 0; k < nt; ++k) r.times.push_back(nt == 1 ? 0.0 : in.horizon * k / (nt - 1));
    r.validate();
    b.verification.region = r;
  }
  return b;
}

}  // namespace emctl
