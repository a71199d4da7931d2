#pragma once

// Run configuration: TOML parsing with defaults, validation, --set overrides
// and serialization back to TOML.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "mvisco/diagnostics.hpp"
#include "mvisco/errors.hpp"
#include "mvisco/setup.hpp"

namespace mvisco {

enum class Command { Simulate, SweepEpsilon, SweepDelta, Refine, ValidateKernel, CheckWeak };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::SweepEpsilon: return "sweep-epsilon";
    case Command::SweepDelta: return "sweep-delta";
    case Command::Refine: return "refine";
    case Command::ValidateKernel: return "validate-kernel";
    case Command::CheckWeak: return "check-weak";
  }
  return "";
}

struct SweepConfig {
  std::vector<double> epsilon{0.2, 0.1, 0.05, 0.025};
  std::vector<double> delta{1e-1, 1e-2, 1e-3};
  std::size_t levels = 3;
  bool compare_singular = true;
  bool operator==(const SweepConfig&) const = default;
};

struct WeakConfig {
  TestFunction phi{SpatialShape::Sine, 1, TemporalShape::Linear};
  VectorTestFunction psi{{SpatialShape::Sine, 1, TemporalShape::Linear},
                         {SpatialShape::Zero, 1, TemporalShape::Linear}};
  std::size_t levels = 2;
  bool operator==(const WeakConfig&) const = default;
};

struct KernelCheckConfig {
  double horizon = 1.0;
  std::size_t samples = 400;
  bool operator==(const KernelCheckConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::size_t stride = 10;
  std::size_t jobs = 1;
  bool operator==(const OutputConfig&) const = default;
};

/// Which pass/fail checks count towards the exit status.
struct DiagnosticToggles {
  bool lemma21 = true;
  bool lemma22 = true;
  bool gronwall = true;
  bool uniformity = true;
  bool cauchy = true;
  bool penalty = true;
  bool convergence = true;
  bool weak = true;
  bool operator==(const DiagnosticToggles&) const = default;
};

struct RunConfig {
  Command command = Command::Simulate;
  ProblemSetup problem;
  SweepConfig sweep;
  WeakConfig weak;
  KernelCheckConfig kernel_check;
  OutputConfig output;
  DiagnosticToggles diagnostics;
  bool operator==(const RunConfig&) const = default;
};

namespace detail {

template <typename E>
struct NamedEnum {
  const char* name;
  E value;
};

inline constexpr NamedEnum<Command> kCommands[] = {
    {"simulate", Command::Simulate},         {"sweep-epsilon", Command::SweepEpsilon},
    {"sweep-delta", Command::SweepDelta},    {"refine", Command::Refine},
    {"validate-kernel", Command::ValidateKernel}, {"check-weak", Command::CheckWeak}};
inline constexpr NamedEnum<SimulationMode> kModes[] = {
    {"regular-eps", SimulationMode::RegularEps},
    {"singular-evolution", SimulationMode::SingularEvolution},
    {"viscoelastic-only", SimulationMode::ViscoelasticOnly}};
inline constexpr NamedEnum<MemoryForm> kForms[] = {
    {"convolution", MemoryForm::Convolution}, {"history-difference", MemoryForm::HistoryDifference}};
inline constexpr NamedEnum<SpatialShape> kShapes[] = {{"zero", SpatialShape::Zero},
                                                      {"sine", SpatialShape::Sine},
                                                      {"cosine", SpatialShape::Cosine},
                                                      {"bump", SpatialShape::Bump}};
inline constexpr NamedEnum<TemporalShape> kTemporal[] = {{"linear", TemporalShape::Linear},
                                                         {"constant", TemporalShape::Constant}};

template <typename E, std::size_t N>
E lookup(const NamedEnum<E> (&table)[N], const std::string& key, const std::string& text) {
  std::string allowed;
  for (const auto& e : table) {
    if (text == e.name) return e.value;
    allowed += allowed.empty() ? e.name : std::string(", ") + e.name;
  }
  throw ValidationError(key, "must be one of: " + allowed);
}

template <typename E, std::size_t N>
const char* name_of(const NamedEnum<E> (&table)[N], E value) {
  for (const auto& e : table)
    if (e.value == value) return e.name;
  return "";
}

// Typed access to a table with bookkeeping of consumed keys.
class Reader {
 public:
  Reader(const toml::table* table, std::string section) : table_(table), section_(std::move(section)) {}

  bool has(const char* key) const { return table_ && table_->contains(key); }

  double number(const char* key, double fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
    throw ValidationError(key, "must be a number");
  }

  std::size_t count(const char* key, std::size_t fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (!n->is_integer()) throw ValidationError(key, "must be an integer");
    const std::int64_t v = *n->value<std::int64_t>();
    if (v < 0) throw ValidationError(key, "must be non-negative");
    return static_cast<std::size_t>(v);
  }

  int integer(const char* key, int fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (!n->is_integer()) throw ValidationError(key, "must be an integer");
    return static_cast<int>(*n->value<std::int64_t>());
  }

  bool boolean(const char* key, bool fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (!n->is_boolean()) throw ValidationError(key, "must be true or false");
    return *n->value<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    if (!n->is_string()) throw ValidationError(key, "must be a string");
    return *n->value<std::string>();
  }

  std::vector<double> numbers(const char* key, std::vector<double> fallback) {
    const toml::node* n = get(key);
    if (!n) return fallback;
    const toml::array* arr = n->as_array();
    if (!arr) throw ValidationError(key, "must be an array of numbers");
    std::vector<double> out;
    for (const toml::node& e : *arr) {
      auto v = e.value<double>();
      if (!v || !(e.is_floating_point() || e.is_integer()))
        throw ValidationError(key, "must be an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  void reject_unknown() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (key == "u0") throw ValidationError("u0", "fixed to zero by model assumption");
      if (!used_.contains(key))
        throw ValidationError(section_.empty() ? key : section_ + "." + key, "unknown key");
    }
  }

 private:
  const toml::node* get(const char* key) {
    used_.insert(key);
    return table_ ? table_->get(key) : nullptr;
  }

  const toml::table* table_;
  std::string section_;
  std::set<std::string> used_;
};

inline const toml::table* section(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ValidationError(name, "must be a table");
  return n->as_table();
}

inline void require(bool ok, const std::string& parameter, const std::string& constraint) {
  if (!ok) throw ValidationError(parameter, constraint);
}

inline void require_descending(const std::vector<double>& xs, const std::string& name) {
  require(xs.size() >= 2, name, "needs at least two values");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > 0.0 && std::isfinite(xs[i]), name, "values must be positive");
    if (i > 0) require(xs[i] < xs[i - 1], name, "values must be strictly decreasing");
  }
}

inline KernelSpec read_kernel(Reader& r) {
  const std::string family = r.text("family", "fractional");
  if (family == "fractional") {
    Fractional f{r.number("alpha", 0.5), r.number("scale", 1.0)};
    require(f.alpha > 0.0 && f.alpha < 1.0, "alpha", "must lie in (0,1)");
    require(f.scale > 0.0 && std::isfinite(f.scale), "scale", "must be positive");
    return {f};
  }
  if (family == "constant") {
    Constant c{r.number("value", 1.0)};
    require(c.value > 0.0 && std::isfinite(c.value), "value", "must be positive");
    return {c};
  }
  if (family == "prony") {
    const std::vector<double> cs = r.numbers("coefficients", {});
    const std::vector<double> rs = r.numbers("rates", {});
    require(!cs.empty(), "coefficients", "must be a non-empty array");
    require(cs.size() == rs.size(), "rates", "must have as many entries as coefficients");
    PronySeries p;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      require(cs[i] > 0.0 && std::isfinite(cs[i]), "coefficients", "must be positive");
      require(rs[i] > 0.0 && std::isfinite(rs[i]), "rates", "must be positive");
      p.terms.push_back({cs[i], rs[i]});
    }
    return {p};
  }
  throw ValidationError("family", "must be one of: fractional, constant, prony");
}

inline TestFunction read_test_function(Reader& r, const std::string& name, TestFunction fallback) {
  TestFunction f = fallback;
  f.shape = lookup(kShapes, name, r.text(name.c_str(), name_of(kShapes, fallback.shape)));
  f.mode = r.integer((name + "_mode").c_str(), fallback.mode);
  f.temporal = lookup(kTemporal, name + "_time",
                      r.text((name + "_time").c_str(), name_of(kTemporal, fallback.temporal)));
  require(f.mode >= 1, name + "_mode", "must be >= 1");
  return f;
}

inline void validate_problem(const ProblemSetup& p) {
  require(p.lambda >= 0.0 && std::isfinite(p.lambda), "lambda", "must be >= 0");
  require(p.delta > 0.0 && p.delta < 1.0, "delta", "must lie in (0,1)");
  require(p.epsilon >= 0.0 && std::isfinite(p.epsilon), "epsilon", "must be >= 0");
  require(p.T > 0.0 && std::isfinite(p.T), "T", "must be positive");
  require(p.n_cells >= 4, "N", "must be >= 4");
  require(p.cfl > 0.0 && p.cfl <= 1.0, "cfl", "must lie in (0,1]");
  if (p.dt) require(*p.dt > 0.0 && *p.dt <= p.T, "dt", "must lie in (0,T]");
  const RelaxationKernel kernel = make_kernel(p.kernel, p.epsilon);
  if (p.mode == SimulationMode::RegularEps) {
    require(!kernel.singular_at_origin(), "epsilon",
            "must be positive for regular-eps with a kernel singular at the origin");
    const double h = 1.0 / static_cast<double>(p.n_cells);
    if (p.dt)
      require(*p.dt <= h / std::sqrt(kernel.eval(0.0)), "dt",
              "exceeds the explicit stability limit h/sqrt(G(eps))");
  }
  if (const auto* s = std::get_if<SinusoidalForcing>(&p.forcing))
    require(s->mode >= 1, "forcing.mode", "must be >= 1");
  if (const auto* s = std::get_if<SineProfile>(&p.u1))
    require(s->mode >= 1, "u1_mode", "must be >= 1");
}

}  // namespace detail

/// Builds a validated RunConfig from a parsed TOML document.
inline RunConfig config_from_table(const toml::table& root) {
  using detail::Reader;
  RunConfig c;
  Reader top(&root, "");
  for (const char* s : {"model", "kernel", "grid", "initial", "forcing", "sweep", "weak",
                        "validate", "output", "diagnostics"})
    detail::section(root, s);  // type check only
  c.command = detail::lookup(detail::kCommands, "command", top.text("command", "simulate"));

  ProblemSetup& p = c.problem;
  {
    Reader r(detail::section(root, "model"), "model");
    p.mode = detail::lookup(detail::kModes, "mode", r.text("mode", "regular-eps"));
    p.lambda = r.number("lambda", p.lambda);
    p.delta = r.number("delta", p.delta);
    p.epsilon = r.number("epsilon", p.epsilon);
    p.T = r.number("T", p.T);
    p.memory_form =
        detail::lookup(detail::kForms, "memory_form", r.text("memory_form", "convolution"));
    r.reject_unknown();
  }
  {
    Reader r(detail::section(root, "kernel"), "kernel");
    p.kernel = detail::read_kernel(r);
    r.reject_unknown();
  }
  {
    Reader r(detail::section(root, "grid"), "grid");
    p.n_cells = r.count("N", p.n_cells);
    p.cfl = r.number("cfl", p.cfl);
    if (r.has("dt")) p.dt = r.number("dt", 0.0);
    r.reject_unknown();
  }
  {
    Reader r(detail::section(root, "initial"), "initial");
    const std::string u1 = r.text("u1", "sine");
    if (u1 == "sine") {
      p.u1 = SineProfile{r.number("u1_amplitude", 1.0), r.integer("u1_mode", 1)};
    } else if (u1 == "zero") {
      p.u1 = ZeroProfile{};
    } else {
      throw ValidationError("u1", "must be one of: zero, sine");
    }
    const std::string theta = r.text("theta", "smoothstep");
    if (theta == "smoothstep") {
      p.theta = SmoothstepAngle{r.number("theta_max", std::numbers::pi / 2)};
    } else if (theta == "constant") {
      p.theta = ConstantAngle{r.number("theta0", 0.0)};
    } else if (theta == "linear") {
      p.theta = LinearAngle{r.number("theta_max", 1.0)};
    } else {
      throw ValidationError("theta", "must be one of: constant, smoothstep, linear");
    }
    r.reject_unknown();
  }
  {
    Reader r(detail::section(root, "forcing"), "forcing");
    const std::string type = r.text("type", "zero");
    if (type == "zero") {
      p.forcing = ZeroForcing{};
    } else if (type == "sinusoidal") {
      p.forcing = SinusoidalForcing{r.number("amplitude", 1.0), r.integer("mode", 1),
                                    r.number("omega", 0.0)};
    } else {
      throw ValidationError("forcing.type", "must be one of: zero, sinusoidal");
    }
    r.reject_unknown();
  }
  {
    Reader r(detail::section(root, "sweep"), "sweep");
    c.sweep.epsilon = r.numbers("epsilon", c.sweep.epsilon);
    c.sweep.delta = r.numbers("delta", c.sweep.delta);
    c.sweep.levels = r.count("levels", c.sweep.levels);
    c.sweep.compare_singular = r.boolean("compare_singular", c.sweep.compare_singular);
    r.reject_unknown();
    detail::require_descending(c.sweep.epsilon, "sweep.epsilon");
    detail::require_descending(c.sweep.delta, "sweep.delta");
    for (double d : c.sweep.delta) detail::require(d < 1.0, "sweep.delta", "values must be < 1");
    detail::require(c.sweep.levels >= 2, "sweep.levels", "must be >= 2");
  }
  {
    Reader r(detail::section(root, "weak"), "weak");
    c.weak.phi = detail::read_test_function(r, "phi", c.weak.phi);
    c.weak.psi.first = detail::read_test_function(r, "psi1", c.weak.psi.first);
    c.weak.psi.second = detail::read_test_function(r, "psi2", c.weak.psi.second);
    c.weak.levels = r.count("levels", c.weak.levels);
    r.reject_unknown();
    detail::require(c.weak.levels >= 1, "weak.levels", "must be >= 1");
  }
  {
    Reader r(detail::section(root, "validate"), "validate");
    c.kernel_check.horizon = r.number("horizon", c.kernel_check.horizon);
    c.kernel_check.samples = r.count("samples", c.kernel_check.samples);
    r.reject_unknown();
    detail::require(c.kernel_check.horizon > 0.0, "validate.horizon", "must be positive");
    detail::require(c.kernel_check.samples >= 2, "validate.samples", "must be >= 2");
  }
  {
    Reader r(detail::section(root, "output"), "output");
    c.output.dir = r.text("dir", c.output.dir);
    c.output.stride = r.count("stride", c.output.stride);
    c.output.jobs = r.count("jobs", c.output.jobs);
    r.reject_unknown();
    detail::require(c.output.stride >= 1, "output.stride", "must be >= 1");
    detail::require(c.output.jobs >= 1, "output.jobs", "must be >= 1");
  }
  {
    Reader r(detail::section(root, "diagnostics"), "diagnostics");
    DiagnosticToggles& d = c.diagnostics;
    d.lemma21 = r.boolean("lemma21", d.lemma21);
    d.lemma22 = r.boolean("lemma22", d.lemma22);
    d.gronwall = r.boolean("gronwall", d.gronwall);
    d.uniformity = r.boolean("uniformity", d.uniformity);
    d.cauchy = r.boolean("cauchy", d.cauchy);
    d.penalty = r.boolean("penalty", d.penalty);
    d.convergence = r.boolean("convergence", d.convergence);
    d.weak = r.boolean("weak", d.weak);
    r.reject_unknown();
  }
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (key == "u0") throw ValidationError("u0", "fixed to zero by model assumption");
    static const std::set<std::string> known{"command", "model",  "kernel",   "grid",
                                             "initial", "forcing", "sweep",   "weak",
                                             "validate", "output", "diagnostics"};
    if (!known.contains(key)) throw ValidationError(key, "unknown key");
  }
  detail::validate_problem(p);
  return c;
}

inline toml::table parse_toml(std::string_view text, std::string_view source = "config") {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " (" << e.source().begin << ")";
    throw ParseError(os.str());
  }
}

inline RunConfig parse_config_string(std::string_view text) {
  return config_from_table(parse_toml(text));
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Sets a dotted key ("model.lambda") to a TOML literal; bare words are taken
/// as strings.
inline void apply_override(toml::table& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ParseError("override must have the form key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string literal = assignment.substr(eq + 1);

  std::vector<std::string> path;
  std::stringstream ks(key);
  for (std::string part; std::getline(ks, part, '.');) {
    if (part.empty()) throw ParseError("empty key component in override: " + assignment);
    path.push_back(part);
  }
  toml::table* t = &root;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!t->contains(path[i])) t->insert(path[i], toml::table{});
    toml::node* n = t->get(path[i]);
    if (!n->is_table()) throw ValidationError(key, "is not a table");
    t = n->as_table();
  }
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + literal);
  } catch (const toml::parse_error&) {
    parsed.insert("v", literal);
  }
  t->insert_or_assign(path.back(), std::move(*parsed.get("v")));
}

inline RunConfig parse_config(const std::filesystem::path* file,
                              const std::vector<std::string>& overrides) {
  toml::table root = file ? parse_toml(read_text_file(*file), file->string()) : toml::table{};
  for (const auto& o : overrides) apply_override(root, o);
  return config_from_table(root);
}

namespace detail {

inline toml::array to_array(const std::vector<double>& xs) {
  toml::array a;
  for (double x : xs) a.push_back(x);
  return a;
}

inline void write_test_function(toml::table& t, const std::string& name, const TestFunction& f) {
  t.insert(name, name_of(kShapes, f.shape));
  t.insert(name + "_mode", f.mode);
  t.insert(name + "_time", name_of(kTemporal, f.temporal));
}

}  // namespace detail

inline toml::table config_to_table(const RunConfig& c) {
  const ProblemSetup& p = c.problem;
  toml::table root;
  root.insert("command", to_string(c.command));

  root.insert("model", toml::table{{"mode", to_string(p.mode)},
                                   {"lambda", p.lambda},
                                   {"delta", p.delta},
                                   {"epsilon", p.epsilon},
                                   {"T", p.T},
                                   {"memory_form", detail::name_of(detail::kForms, p.memory_form)}});

  toml::table kernel;
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Fractional>) {
          kernel.insert("family", "fractional");
          kernel.insert("alpha", f.alpha);
          kernel.insert("scale", f.scale);
        } else if constexpr (std::is_same_v<F, Constant>) {
          kernel.insert("family", "constant");
          kernel.insert("value", f.value);
        } else if constexpr (std::is_same_v<F, PronySeries>) {
          kernel.insert("family", "prony");
          toml::array cs, rs;
          for (const auto& t : f.terms) {
            cs.push_back(t.coefficient);
            rs.push_back(t.rate);
          }
          kernel.insert("coefficients", cs);
          kernel.insert("rates", rs);
        } else {
          throw InvalidSpec("kernel family cannot be serialized");
        }
      },
      p.kernel.family);
  root.insert("kernel", kernel);

  toml::table grid{{"N", static_cast<std::int64_t>(p.n_cells)}, {"cfl", p.cfl}};
  if (p.dt) grid.insert("dt", *p.dt);
  root.insert("grid", grid);

  toml::table initial;
  if (const auto* s = std::get_if<SineProfile>(&p.u1)) {
    initial.insert("u1", "sine");
    initial.insert("u1_amplitude", s->amplitude);
    initial.insert("u1_mode", s->mode);
  } else {
    initial.insert("u1", "zero");
  }
  if (const auto* a = std::get_if<SmoothstepAngle>(&p.theta)) {
    initial.insert("theta", "smoothstep");
    initial.insert("theta_max", a->theta_max);
  } else if (const auto* a = std::get_if<ConstantAngle>(&p.theta)) {
    initial.insert("theta", "constant");
    initial.insert("theta0", a->theta0);
  } else {
    initial.insert("theta", "linear");
    initial.insert("theta_max", std::get<LinearAngle>(p.theta).theta_max);
  }
  root.insert("initial", initial);

  toml::table forcing;
  if (const auto* s = std::get_if<SinusoidalForcing>(&p.forcing)) {
    forcing.insert("type", "sinusoidal");
    forcing.insert("amplitude", s->amplitude);
    forcing.insert("mode", s->mode);
    forcing.insert("omega", s->omega);
  } else if (std::holds_alternative<ZeroForcing>(p.forcing)) {
    forcing.insert("type", "zero");
  } else {
    throw InvalidArgument("tabulated forcing cannot be serialized");
  }
  root.insert("forcing", forcing);

  root.insert("sweep", toml::table{{"epsilon", detail::to_array(c.sweep.epsilon)},
                                   {"delta", detail::to_array(c.sweep.delta)},
                                   {"levels", static_cast<std::int64_t>(c.sweep.levels)},
                                   {"compare_singular", c.sweep.compare_singular}});

  toml::table weak;
  detail::write_test_function(weak, "phi", c.weak.phi);
  detail::write_test_function(weak, "psi1", c.weak.psi.first);
  detail::write_test_function(weak, "psi2", c.weak.psi.second);
  weak.insert("levels", static_cast<std::int64_t>(c.weak.levels));
  root.insert("weak", weak);

  root.insert("validate",
              toml::table{{"horizon", c.kernel_check.horizon},
                          {"samples", static_cast<std::int64_t>(c.kernel_check.samples)}});
  root.insert("output", toml::table{{"dir", c.output.dir},
                                    {"stride", static_cast<std::int64_t>(c.output.stride)},
                                    {"jobs", static_cast<std::int64_t>(c.output.jobs)}});
  const DiagnosticToggles& d = c.diagnostics;
  root.insert("diagnostics", toml::table{{"lemma21", d.lemma21},
                                         {"lemma22", d.lemma22},
                                         {"gronwall", d.gronwall},
                                         {"uniformity", d.uniformity},
                                         {"cauchy", d.cauchy},
                                         {"penalty", d.penalty},
                                         {"convergence", d.convergence},
                                         {"weak", d.weak}});
  return root;
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << toml::toml_formatter{config_to_table(c)} << '\n';
  return os.str();
}

}  // namespace mvisco
