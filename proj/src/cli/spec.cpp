#include "hyperme/cli/spec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hyperme/error.hpp"

namespace hyperme::cli {
namespace {

using nlohmann::json;

class Schema {
 public:
  void fail(const std::string& path, const std::string& message) { issues_.push_back(path + ": " + message); }
  const std::vector<std::string>& issues() const { return issues_; }

  void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) fail(path + "." + it.key(), "unknown field");
    }
  }

  bool object(const json& parent, const std::string& path, const char* key, const json*& out, bool required) {
    out = nullptr;
    if (!parent.contains(key)) {
      if (required) fail(path + "." + key, "required block is missing");
      return false;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      fail(path + "." + key, "must be an object");
      return false;
    }
    out = &v;
    return true;
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required) {
    if (!obj.contains(key)) {
      if (required) fail(path + "." + key, "required field is missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
      fail(path + "." + key, "must be a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      fail(path + "." + key, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<int> integer(const json& obj, const std::string& path, const char* key, bool required,
                             int min_value) {
    if (!obj.contains(key)) {
      if (required) fail(path + "." + key, "required field is missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(path + "." + key, "must be an integer");
      return std::nullopt;
    }
    const auto i = v.get<long long>();
    if (i < min_value || i > 100'000'000) {
      fail(path + "." + key, "must lie in [" + std::to_string(min_value) + ", 1e8]");
      return std::nullopt;
    }
    return static_cast<int>(i);
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const char* key, bool required,
                                    std::initializer_list<const char*> choices = {}) {
    if (!obj.contains(key)) {
      if (required) fail(path + "." + key, "required field is missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_string()) {
      fail(path + "." + key, "must be a string");
      return std::nullopt;
    }
    std::string s = v.get<std::string>();
    if (choices.size() > 0 && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string list;
      for (const char* c : choices) list += (list.empty() ? "" : ", ") + std::string(c);
      fail(path + "." + key, "must be one of: " + list);
      return std::nullopt;
    }
    return s;
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& path, const char* key,
                                             bool required, bool non_empty = true) {
    if (!obj.contains(key)) {
      if (required) fail(path + "." + key, "required field is missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(path + "." + key, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        fail(path + "." + key + "[" + std::to_string(i) + "]", "must be a finite number");
        return std::nullopt;
      }
      out.push_back(v[i].get<double>());
    }
    if (non_empty && out.empty()) {
      fail(path + "." + key, "must not be empty");
      return std::nullopt;
    }
    return out;
  }

  std::optional<std::vector<int>> integers(const json& obj, const std::string& path, const char* key, int min_value) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_array() || v.empty()) {
      fail(path + "." + key, "must be a non-empty array of integers");
      return std::nullopt;
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || v[i].get<long long>() < min_value) {
        fail(path + "." + key + "[" + std::to_string(i) + "]", "must be an integer >= " + std::to_string(min_value));
        return std::nullopt;
      }
      out.push_back(v[i].get<int>());
    }
    return out;
  }

 private:
  std::vector<std::string> issues_;
};

SpaceSpec read_space(Schema& s, const json& obj, const std::string& path) {
  SpaceSpec sp;
  s.allow_keys(obj, path, {"generator", "k", "units", "x_min", "x_max", "points", "cell_volumes", "measure"});
  const bool inline_grid = obj.contains("points") && obj.at("points").is_array();
  if (inline_grid) {
    sp.generator = "inline";
    if (obj.contains("generator")) s.fail(path + ".generator", "not allowed together with inline points");
    sp.inline_points = s.numbers(obj, path, "points", true).value_or(std::vector<double>{});
    sp.cell_volumes = s.numbers(obj, path, "cell_volumes", true).value_or(std::vector<double>{});
    sp.measure = s.numbers(obj, path, "measure", true).value_or(std::vector<double>{});
    if (sp.cell_volumes.size() != sp.inline_points.size() || sp.measure.size() != sp.inline_points.size()) {
      s.fail(path, "points, cell_volumes and measure must have equal lengths");
    }
    return sp;
  }
  sp.generator = s.string(obj, path, "generator", true, {"two-state", "k-state", "binomial", "gaussian-grid"}).value_or("");
  if (sp.generator == "k-state") sp.k = s.integer(obj, path, "k", true, 2).value_or(2);
  if (sp.generator == "binomial") sp.units = s.integer(obj, path, "units", true, 1).value_or(1);
  if (sp.generator == "gaussian-grid") {
    sp.x_min = s.number(obj, path, "x_min", true).value_or(0.0);
    sp.x_max = s.number(obj, path, "x_max", true).value_or(1.0);
    sp.points = s.integer(obj, path, "points", true, 3).value_or(3);
    if (!(sp.x_min < sp.x_max)) s.fail(path, "x_min must be below x_max");
  }
  return sp;
}

std::vector<ObservableSpec> read_observables(Schema& s, const json& root, const std::string& path) {
  std::vector<ObservableSpec> out;
  if (!root.contains("observables")) {
    s.fail(path, "required field is missing");
    return out;
  }
  const json& arr = root.at("observables");
  if (!arr.is_array() || arr.empty()) {
    s.fail(path, "must be a non-empty array");
    return out;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!arr[i].is_object()) {
      s.fail(p, "must be an object");
      continue;
    }
    s.allow_keys(arr[i], p, {"name", "builtin", "exponent", "values"});
    ObservableSpec o;
    o.name = s.string(arr[i], p, "name", true).value_or("a" + std::to_string(i));
    if (arr[i].contains("values")) {
      o.builtin = "values";
      o.values = s.numbers(arr[i], p, "values", true).value_or(std::vector<double>{});
      if (arr[i].contains("builtin")) s.fail(p + ".builtin", "not allowed together with values");
    } else {
      o.builtin = s.string(arr[i], p, "builtin", true, {"identity", "power"}).value_or("identity");
      if (o.builtin == "power") o.exponent = s.number(arr[i], p, "exponent", true).value_or(1.0);
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<AxisSpec> read_axes(Schema& s, const json& grid, const std::string& path) {
  std::vector<AxisSpec> axes;
  s.allow_keys(grid, path, {"axes"});
  if (!grid.contains("axes") || !grid.at("axes").is_array() || grid.at("axes").empty()) {
    s.fail(path + ".axes", "must be a non-empty array");
    return axes;
  }
  const json& arr = grid.at("axes");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + ".axes[" + std::to_string(i) + "]";
    if (!arr[i].is_object()) {
      s.fail(p, "must be an object");
      continue;
    }
    s.allow_keys(arr[i], p, {"name", "lower", "upper", "nodes", "resolution", "offset"});
    AxisSpec a;
    a.name = s.string(arr[i], p, "name", true).value_or("theta" + std::to_string(i));
    a.lower = s.number(arr[i], p, "lower", false);
    a.upper = s.number(arr[i], p, "upper", false);
    a.nodes = s.integer(arr[i], p, "nodes", false, 1);
    a.resolution = s.number(arr[i], p, "resolution", false);
    a.offset = s.number(arr[i], p, "offset", false).value_or(kDefaultBoundaryOffset);
    if (a.nodes.has_value() == a.resolution.has_value()) s.fail(p, "give exactly one of nodes or resolution");
    if (a.resolution && !(*a.resolution > 0.0)) s.fail(p + ".resolution", "must be positive");
    if (!(a.offset > 0.0 && a.offset < 0.5)) s.fail(p + ".offset", "must lie in (0, 0.5)");
    if (a.lower && a.upper && !(*a.lower < *a.upper)) s.fail(p, "lower must be below upper");
    axes.push_back(a);
  }
  return axes;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  // nlohmann reports the byte after the offending character.
  return {line, col > 1 ? col - 1 : col};
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelSpec parse_spec(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": parse error: " << e.what();
    throw CliError(kExitParse, os.str());
  }

  Schema s;
  ModelSpec spec;
  spec.source = source;
  spec.hash = fnv1a(text);
  if (!root.is_object()) throw CliError(kExitSchema, source + ": $: spec must be a JSON object");

  s.allow_keys(root, "$", {"schema_version", "name", "space", "observables", "constraints", "solver", "family",
                           "parameter_grid", "prior", "fluct", "repeat", "reparametrize", "expect", "oracle"});
  const auto version = s.integer(root, "$", "schema_version", true, 0);
  if (version && *version != kSchemaVersion) {
    s.fail("$.schema_version", "unsupported version " + std::to_string(*version) + " (expected " +
                                   std::to_string(kSchemaVersion) + ")");
  }
  spec.name = s.string(root, "$", "name", false).value_or("model");
  for (char& c : spec.name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }

  const json* blk = nullptr;
  if (s.object(root, "$", "space", blk, true)) spec.space = read_space(s, *blk, "$.space");
  spec.observables = read_observables(s, root, "$.observables");

  if (s.object(root, "$", "constraints", blk, false)) {
    s.allow_keys(*blk, "$.constraints", {"targets"});
    spec.targets = s.numbers(*blk, "$.constraints", "targets", true);
    if (spec.targets && spec.targets->size() != spec.observables.size()) {
      s.fail("$.constraints.targets", "needs one target per observable");
    }
  }
  if (s.object(root, "$", "solver", blk, false)) {
    s.allow_keys(*blk, "$.solver", {"tolerance", "max_iterations", "damping", "feasibility_margin"});
    spec.solver.tolerance = s.number(*blk, "$.solver", "tolerance", false).value_or(spec.solver.tolerance);
    spec.solver.max_iterations = s.integer(*blk, "$.solver", "max_iterations", false, 1).value_or(spec.solver.max_iterations);
    spec.solver.damping = s.number(*blk, "$.solver", "damping", false).value_or(spec.solver.damping);
    spec.solver.feasibility_margin =
        s.number(*blk, "$.solver", "feasibility_margin", false).value_or(spec.solver.feasibility_margin);
    try {
      spec.solver.validate();
    } catch (const Error& e) {
      s.fail("$.solver", e.what());
    }
  }
  if (s.object(root, "$", "family", blk, false)) {
    s.allow_keys(*blk, "$.family", {"kind"});
    spec.family = FamilySpec{s.string(*blk, "$.family", "kind", true, {"target", "multiplier", "gaussian"}).value_or("target")};
  }
  if (s.object(root, "$", "parameter_grid", blk, false)) spec.axes = read_axes(s, *blk, "$.parameter_grid");
  if (s.object(root, "$", "prior", blk, false)) {
    s.allow_keys(*blk, "$.prior", {"alphas", "observations"});
    PriorSpec p;
    p.alphas = s.numbers(*blk, "$.prior", "alphas", false).value_or(p.alphas);
    p.observations = s.numbers(*blk, "$.prior", "observations", false, false).value_or(std::vector<double>{});
    spec.prior = p;
  }
  if (s.object(root, "$", "fluct", blk, false)) {
    s.allow_keys(*blk, "$.fluct", {"lambda0", "metric", "scan_units", "bath"});
    FluctSpec f;
    f.lambda0 = s.numbers(*blk, "$.fluct", "lambda0", true).value_or(std::vector<double>{});
    if (f.lambda0.size() != spec.observables.size()) s.fail("$.fluct.lambda0", "needs one entry per observable");
    f.metric = s.string(*blk, "$.fluct", "metric", false, {"entropy-hessian", "inverse-covariance"}).value_or(f.metric);
    f.scan_units = s.integers(*blk, "$.fluct", "scan_units", 1).value_or(std::vector<int>{});
    if (!f.scan_units.empty() && spec.space.generator != "binomial") {
      s.fail("$.fluct.scan_units", "requires a binomial space");
    }
    const json* bath = nullptr;
    if (s.object(*blk, "$.fluct", "bath", bath, false)) {
      s.allow_keys(*bath, "$.fluct.bath", {"space", "observables", "total"});
      BathBlock b;
      const json* bs = nullptr;
      if (s.object(*bath, "$.fluct.bath", "space", bs, true)) b.space = read_space(s, *bs, "$.fluct.bath.space");
      b.observables = read_observables(s, *bath, "$.fluct.bath.observables");
      b.total = s.numbers(*bath, "$.fluct.bath", "total", true).value_or(std::vector<double>{});
      if (b.total.size() != spec.observables.size()) s.fail("$.fluct.bath.total", "needs one entry per observable");
      f.bath = std::move(b);
    }
    spec.fluct = std::move(f);
  }
  if (s.object(root, "$", "repeat", blk, false)) {
    s.allow_keys(*blk, "$.repeat", {"n", "scan"});
    RepeatSpec r;
    r.n = s.integer(*blk, "$.repeat", "n", false, 1).value_or(r.n);
    r.scan = s.integers(*blk, "$.repeat", "scan", 1).value_or(r.scan);
    spec.repeat = r;
  }
  if (s.object(root, "$", "reparametrize", blk, false)) {
    s.allow_keys(*blk, "$.reparametrize", {"map", "factor", "tolerance"});
    ReparamSpec r;
    r.map = s.string(*blk, "$.reparametrize", "map", true, {"identity", "square", "scale"}).value_or(r.map);
    r.factor = s.number(*blk, "$.reparametrize", "factor", r.map == "scale").value_or(r.factor);
    r.tolerance = s.number(*blk, "$.reparametrize", "tolerance", false).value_or(r.tolerance);
    spec.reparametrize = r;
  }
  if (s.object(root, "$", "expect", blk, false)) {
    s.allow_keys(*blk, "$.expect", {"lambda", "exp_neg_lambda", "entropy", "log_partition", "distribution", "tolerance"});
    ExpectSpec e;
    e.lambda = s.number(*blk, "$.expect", "lambda", false);
    e.exp_neg_lambda = s.number(*blk, "$.expect", "exp_neg_lambda", false);
    e.entropy = s.number(*blk, "$.expect", "entropy", false);
    e.log_partition = s.number(*blk, "$.expect", "log_partition", false);
    e.distribution = s.numbers(*blk, "$.expect", "distribution", false).value_or(std::vector<double>{});
    e.tolerance = s.number(*blk, "$.expect", "tolerance", false).value_or(e.tolerance);
    spec.expect = e;
  }
  if (s.object(root, "$", "oracle", blk, false)) {
    s.allow_keys(*blk, "$.oracle", {"random_instances", "seed"});
    OracleSpec o;
    o.random_instances = s.integer(*blk, "$.oracle", "random_instances", true, 1).value_or(1);
    o.seed = static_cast<std::uint64_t>(s.integer(*blk, "$.oracle", "seed", false, 0).value_or(1));
    spec.oracle = o;
  }
  if (spec.family && spec.axes.empty()) s.fail("$.parameter_grid", "required by the family block");
  if (spec.fluct && spec.axes.empty()) s.fail("$.parameter_grid", "required by the fluct block");

  if (!s.issues().empty()) {
    std::string msg = source + ": schema error";
    for (const auto& i : s.issues()) msg += "\n  " + i;
    throw CliError(kExitSchema, msg);
  }
  return spec;
}

ModelSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(kExitIo, path + ": cannot open spec file");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw CliError(kExitIo, path + ": read error");
  return parse_spec(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Builders

SpacePtr build_space(const SpaceSpec& spec) {
  if (spec.generator == "two-state") return spaces::two_state();
  if (spec.generator == "k-state") return spaces::k_state(static_cast<std::size_t>(spec.k));
  if (spec.generator == "binomial") return spaces::binomial_units(static_cast<std::size_t>(spec.units));
  if (spec.generator == "gaussian-grid") {
    return spaces::uniform_grid(spec.x_min, spec.x_max, static_cast<std::size_t>(spec.points));
  }
  return SampleSpace::create(spec.inline_points, spec.cell_volumes, spec.measure);
}

std::vector<Observable> build_observables(const SpacePtr& space, const std::vector<ObservableSpec>& specs) {
  std::vector<Observable> out;
  for (const auto& o : specs) {
    if (o.builtin == "identity") {
      out.push_back(observables::identity(space, o.name));
    } else if (o.builtin == "power") {
      out.push_back(observables::power(space, o.exponent, o.name));
    } else {
      if (o.values.size() != space->size()) {
        throw CliError(kExitSchema, "observable '" + o.name + "': values must have one entry per space point");
      }
      out.emplace_back(space, o.values, o.name);
    }
  }
  return out;
}

ParameterGrid build_grid(const std::vector<AxisSpec>& axes, const SampleSpace& space,
                         const std::vector<Observable>& observables) {
  std::vector<Axis> built;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const AxisSpec& a = axes[i];
    double lo = a.lower.value_or(0.0), hi = a.upper.value_or(0.0);
    if (!a.lower || !a.upper) {
      if (i >= observables.size()) {
        throw CliError(kExitSchema, "axis '" + a.name + "': bounds are required when no observable matches the axis");
      }
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (std::size_t k = 0; k < space.size(); ++k) {
        if (!space.in_support(k)) continue;
        mn = std::min(mn, observables[i].values()[k]);
        mx = std::max(mx, observables[i].values()[k]);
      }
      if (!a.lower) lo = mn;
      if (!a.upper) hi = mx;
    }
    if (!(lo < hi)) throw CliError(kExitSchema, "axis '" + a.name + "': empty range");
    std::size_t nodes = 0;
    if (a.nodes) {
      nodes = static_cast<std::size_t>(*a.nodes);
    } else {
      nodes = static_cast<std::size_t>(std::llround((hi - lo) * (1.0 - 2.0 * a.offset) / *a.resolution)) + 1;
    }
    if (nodes == 1) {
      built.push_back(Axis::single(a.name, 0.5 * (lo + hi), hi - lo));
    } else {
      built.push_back(Axis::uniform(a.name, lo, hi, nodes, a.offset));
    }
  }
  return ParameterGrid(std::move(built));
}

ModelFamily gaussian_family(const SpacePtr& space, ParameterGrid grid) {
  if (grid.dim() != 2) throw CliError(kExitSchema, "gaussian family needs two axes (mu, sigma)");
  if (!(grid.axis(1).lower() >= 0.0)) throw CliError(kExitSchema, "gaussian family: sigma axis must be positive");
  return ModelFamily::explicit_family(
      space, std::move(grid),
      [space](std::span<const double> theta) {
        const double mu = theta[0], sigma = theta[1];
        const auto x = space->points();
        std::vector<double> f(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
          const double z = (x[k] - mu) / sigma;
          f[k] = std::exp(-0.5 * z * z);
        }
        return normalize(space, f);
      },
      "gaussian");
}

ModelFamily build_family(const ModelSpec& spec) {
  if (!spec.family) throw CliError(kExitSchema, spec.source + ": $.family: required block is missing");
  SpacePtr space = build_space(spec.space);
  auto obs = build_observables(space, spec.observables);
  ParameterGrid grid = build_grid(spec.axes, *space, obs);
  if (spec.family->kind == "gaussian") return gaussian_family(space, std::move(grid));
  if (grid.dim() != obs.size()) {
    throw CliError(kExitSchema, spec.source + ": $.parameter_grid.axes: needs one axis per observable");
  }
  if (spec.family->kind == "multiplier") return ModelFamily::by_multiplier(space, std::move(obs), std::move(grid));
  return ModelFamily::by_target(space, std::move(obs), std::move(grid), 1.0, spec.solver);
}

FluctuationScenario build_scenario(const ModelSpec& spec, std::optional<int> units) {
  if (!spec.fluct) throw CliError(kExitSchema, spec.source + ": $.fluct: required block is missing");
  SpaceSpec space_spec = spec.space;
  if (units) space_spec.units = *units;
  SpacePtr space = build_space(space_spec);
  auto obs = build_observables(space, spec.observables);
  ParameterGrid grid = build_grid(spec.axes, *space, obs);
  if (grid.dim() != obs.size()) {
    throw CliError(kExitSchema, spec.source + ": $.parameter_grid.axes: needs one axis per observable");
  }
  FluctuationScenario sc{space, obs, spec.fluct->lambda0, std::move(grid),
                         spec.fluct->metric == "inverse-covariance" ? FluctuationMetric::kInverseCovariance
                                                                    : FluctuationMetric::kEntropyHessian,
                         std::nullopt, spec.solver};
  if (spec.fluct->bath) {
    SpacePtr bspace = build_space(spec.fluct->bath->space);
    sc.bath = BathSpec{bspace, build_observables(bspace, spec.fluct->bath->observables), spec.fluct->bath->total};
    if (sc.bath->observables.size() != obs.size()) {
      throw CliError(kExitSchema, spec.source + ": $.fluct.bath.observables: needs one per system observable");
    }
  }
  return sc;
}

}  // namespace hyperme::cli
