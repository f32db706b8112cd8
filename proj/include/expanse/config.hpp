#pragma once

// JSON experiment configuration and its validation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "align.hpp"
#include "errors.hpp"
#include "flows.hpp"
#include "measures.hpp"

namespace expanse {

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds = {"ball-mass", "scan",           "entropy",   "bk-curve",
                                                "cover",     "regularize-demo", "tube-check"};
  return cmds;
}

struct FlowSpec {
  std::string family = "torus";          ///< "torus" | "suspension"
  double dx = 1.0;
  double dy = 1.6180339887498949;
  int alphabet = 2;
  int probe_window = FlowSystem::kDefaultProbeWindow;
};

struct PointSpec {
  // torus
  double u = 0.0, v = 0.0;
  // suspension: periodic pattern, or i.i.d. symbols from (symbol_seed, p)
  std::vector<int> pattern;
  std::vector<double> p;
  std::uint64_t symbol_seed = 0;
  double roof = 0.0;
};

struct MeasureSpec {
  std::string kind = "lebesgue-torus";  ///< lebesgue-torus | bernoulli-suspension | dirac | custom
  std::vector<double> p;
  std::optional<PointSpec> point;
  std::vector<PointSpec> points;
  double pushforward = 0.0;
};

struct ExperimentParams {
  std::vector<double> epsilon;
  std::vector<double> alpha;   ///< ball-mass only; empty means alpha = epsilon
  std::vector<double> t;
  std::vector<int> n;
  double delta = 0.1;
  double step = 0.1;
  int q = 5;
  long N = 1000;
  double L = 1.0;
  long center_count = 4;
  std::string side = "forward";
  std::string kind = "generalized";
  std::string policy = "grid";
  long members = 200;
  double block = 1.0;          ///< regularize-demo: block length T
  long trials = 100;           ///< regularize-demo
  double rho_min = 0.1;
  double r2_min = 0.9;
};

struct ExperimentConfig {
  std::string command;
  FlowSpec flow;
  MeasureSpec measure;
  ExperimentParams params;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";
  Json raw;  ///< document as read, echoed into the manifest
};

enum class Severity { error, warning };

struct Violation {
  std::string field;
  std::string message;
  Severity severity = Severity::error;
};

inline bool has_errors(const std::vector<Violation>& v) {
  for (const auto& x : v)
    if (x.severity == Severity::error) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw InputError(std::string("config field '") + key + "' has the wrong type");
    }
  }
}

template <class T>
void read_grid(const Json& j, const char* key, std::vector<T>& out) {
  if (!j.contains(key)) return;
  try {
    if (j.at(key).is_array())
      out = j.at(key).get<std::vector<T>>();
    else
      out = {j.at(key).get<T>()};
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline PointSpec parse_point(const Json& j) {
  PointSpec p;
  read_opt(j, "u", p.u);
  read_opt(j, "v", p.v);
  read_opt(j, "pattern", p.pattern);
  read_opt(j, "p", p.p);
  read_opt(j, "symbol_seed", p.symbol_seed);
  read_opt(j, "roof", p.roof);
  return p;
}

inline Json point_json(const PointSpec& p) {
  Json j;
  j["u"] = p.u;
  j["v"] = p.v;
  j["pattern"] = p.pattern;
  j["p"] = p.p;
  j["symbol_seed"] = p.symbol_seed;
  j["roof"] = p.roof;
  return j;
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  ExperimentConfig c;
  c.raw = j;
  detail::read_opt(j, "command", c.command);
  detail::read_opt(j, "output_dir", c.output_dir);
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    detail::read_opt(j, "seed", s);
    c.seed = s;
  }
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    detail::read_opt(f, "family", c.flow.family);
    if (f.contains("direction")) {
      std::vector<double> d;
      detail::read_opt(f, "direction", d);
      if (d.size() != 2) throw InputError("config field 'flow.direction' needs two components");
      c.flow.dx = d[0];
      c.flow.dy = d[1];
    }
    detail::read_opt(f, "alphabet", c.flow.alphabet);
    detail::read_opt(f, "probe_window", c.flow.probe_window);
  }
  if (j.contains("measure")) {
    const auto& m = j.at("measure");
    detail::read_opt(m, "kind", c.measure.kind);
    detail::read_opt(m, "p", c.measure.p);
    detail::read_opt(m, "pushforward", c.measure.pushforward);
    if (m.contains("point")) c.measure.point = detail::parse_point(m.at("point"));
    if (m.contains("points"))
      for (const auto& p : m.at("points")) c.measure.points.push_back(detail::parse_point(p));
  }
  if (j.contains("params")) {
    const auto& p = j.at("params");
    auto& o = c.params;
    detail::read_grid(p, "epsilon", o.epsilon);
    detail::read_grid(p, "alpha", o.alpha);
    detail::read_grid(p, "t", o.t);
    detail::read_grid(p, "n", o.n);
    detail::read_opt(p, "delta", o.delta);
    detail::read_opt(p, "step", o.step);
    detail::read_opt(p, "q", o.q);
    detail::read_opt(p, "N", o.N);
    detail::read_opt(p, "L", o.L);
    detail::read_opt(p, "center_count", o.center_count);
    detail::read_opt(p, "side", o.side);
    detail::read_opt(p, "kind", o.kind);
    detail::read_opt(p, "policy", o.policy);
    detail::read_opt(p, "members", o.members);
    detail::read_opt(p, "block", o.block);
    detail::read_opt(p, "trials", o.trials);
    detail::read_opt(p, "rho_min", o.rho_min);
    detail::read_opt(p, "r2_min", o.r2_min);
  }
  return c;
}

/// Normalized document (all fields explicit) that reproduces the run.
inline Json config_json(const ExperimentConfig& c) {
  Json j;
  j["command"] = c.command;
  j["flow"] = {{"family", c.flow.family},
               {"direction", {c.flow.dx, c.flow.dy}},
               {"alphabet", c.flow.alphabet},
               {"probe_window", c.flow.probe_window}};
  Json m;
  m["kind"] = c.measure.kind;
  m["p"] = c.measure.p;
  m["pushforward"] = c.measure.pushforward;
  if (c.measure.point) m["point"] = detail::point_json(*c.measure.point);
  if (!c.measure.points.empty()) {
    m["points"] = Json::array();
    for (const auto& p : c.measure.points) m["points"].push_back(detail::point_json(p));
  }
  j["measure"] = m;
  const auto& p = c.params;
  j["params"] = {{"epsilon", p.epsilon}, {"alpha", p.alpha},   {"t", p.t},
                 {"n", p.n},             {"delta", p.delta},   {"step", p.step},
                 {"q", p.q},             {"N", p.N},           {"L", p.L},
                 {"center_count", p.center_count},             {"side", p.side},
                 {"kind", p.kind},       {"policy", p.policy}, {"members", p.members},
                 {"block", p.block},     {"trials", p.trials}, {"rho_min", p.rho_min},
                 {"r2_min", p.r2_min}};
  if (c.seed) j["seed"] = *c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

// ---------------------------------------------------------------------------
// Construction of library objects
// ---------------------------------------------------------------------------

inline FlowSystem make_flow(const FlowSpec& f) {
  if (f.family == "torus") return FlowSystem::torus(f.dx, f.dy);
  if (f.family == "suspension") return FlowSystem::suspension(f.alphabet, f.probe_window);
  throw InputError("unknown flow family '" + f.family + "'");
}

inline PhasePoint make_point(const FlowSystem& flow, const PointSpec& p) {
  if (flow.family() == FlowFamily::torus_linear) return make_torus_point(p.u, p.v);
  if (!p.pattern.empty()) {
    std::vector<std::uint8_t> pat;
    for (int s : p.pattern) {
      if (s < 0 || s >= flow.alphabet_size()) throw InputError("point pattern symbol outside alphabet");
      pat.push_back(static_cast<std::uint8_t>(s));
    }
    return make_suspension_point(SymbolSequence::periodic(std::move(pat), flow.alphabet_size()), p.roof);
  }
  std::vector<double> law = p.p;
  if (law.empty()) law.assign(static_cast<std::size_t>(flow.alphabet_size()), 1.0 / flow.alphabet_size());
  const std::int64_t w = flow.probe_window() + 8;
  return make_suspension_point(SymbolSequence::bernoulli(p.symbol_seed, law, -w, kSampleWindowAhead + w), p.roof);
}

inline MeasureDescriptor make_descriptor(const FlowSystem& flow, const MeasureSpec& m) {
  MeasureDescriptor d;
  if (m.kind == "lebesgue-torus") {
    d = MeasureDescriptor::lebesgue();
  } else if (m.kind == "bernoulli-suspension") {
    d = MeasureDescriptor::bernoulli(m.p);
  } else if (m.kind == "dirac") {
    if (!m.point) throw InputError("dirac measure needs 'point'");
    d = MeasureDescriptor::dirac(make_point(flow, *m.point));
  } else if (m.kind == "custom") {
    std::vector<PhasePoint> pts;
    for (const auto& p : m.points) pts.push_back(make_point(flow, p));
    d = MeasureDescriptor::custom(std::move(pts));
  } else {
    throw InputError("unknown measure kind '" + m.kind + "'");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Empty iff the run preconditions hold; warnings are allowed.
inline std::vector<Violation> validate(const ExperimentConfig& c) {
  std::vector<Violation> out;
  auto err = [&](std::string f, std::string m) { out.push_back({std::move(f), std::move(m), Severity::error}); };
  auto warn = [&](std::string f, std::string m) { out.push_back({std::move(f), std::move(m), Severity::warning}); };
  const auto& p = c.params;
  const auto& cmd = c.command;

  bool known = false;
  for (const auto& k : known_commands()) known |= k == cmd;
  if (!known) err("command", "unknown command '" + cmd + "'");
  if (!c.seed) err("seed", "an explicit seed is required");

  std::optional<FlowSystem> flow;
  if (c.flow.family != "torus" && c.flow.family != "suspension") {
    err("flow.family", "must be 'torus' or 'suspension'");
  } else if (c.flow.family == "torus" && (!std::isfinite(c.flow.dx) || !std::isfinite(c.flow.dy) ||
                                           (c.flow.dx == 0.0 && c.flow.dy == 0.0))) {
    err("flow.direction", "must be a finite nonzero vector");
  } else if (c.flow.family == "suspension" && (c.flow.alphabet < 2 || c.flow.alphabet > 255)) {
    err("flow.alphabet", "must lie in [2, 255]");
  } else if (c.flow.probe_window < 1 || c.flow.probe_window > 4096) {
    err("flow.probe_window", "must lie in [1, 4096]");
  } else {
    flow = make_flow(c.flow);
  }

  const bool needs_measure = cmd == "ball-mass" || cmd == "scan" || cmd == "entropy" || cmd == "bk-curve" ||
                             cmd == "cover" || cmd == "tube-check";
  if (needs_measure) {
    const auto& m = c.measure;
    if (m.kind == "lebesgue-torus") {
      if (c.flow.family != "torus") err("measure.kind", "lebesgue-torus requires the torus flow");
    } else if (m.kind == "bernoulli-suspension") {
      if (c.flow.family != "suspension") err("measure.kind", "bernoulli-suspension requires the suspension flow");
      double total = 0.0;
      bool ok = true;
      for (double x : m.p) {
        ok = ok && x >= 0.0 && x <= 1.0;
        total += x;
      }
      if (static_cast<int>(m.p.size()) != c.flow.alphabet || !ok || std::abs(total - 1.0) > 1e-9)
        err("measure.p", "must be a probability vector of length alphabet");
    } else if (m.kind == "dirac") {
      if (!m.point) err("measure.point", "dirac measure needs a point");
    } else if (m.kind == "custom") {
      if (m.points.empty()) err("measure.points", "custom measure needs at least one point");
    } else {
      err("measure.kind", "unknown measure kind '" + m.kind + "'");
    }
    if (!std::isfinite(m.pushforward)) err("measure.pushforward", "must be finite");
  }

  if (!(p.step > 0.0) || !std::isfinite(p.step)) err("step", "must be positive");
  if (p.q < 1) err("q", "must be >= 1");
  if (p.N < 1) err("N", "must be >= 1");

  const bool needs_eps = cmd != "regularize-demo";
  if (needs_eps) {
    if (p.epsilon.empty()) err("epsilon", "grid must be nonempty");
    for (double e : p.epsilon) {
      if (!(e > 0.0) || !std::isfinite(e)) err("epsilon", "values must be positive");
      if (flow && e > flow->diameter()) warn("epsilon", "value exceeds the phase-space diameter");
    }
  }
  // Commands that use alpha = epsilon.
  if (cmd == "scan" || cmd == "bk-curve")
    for (double e : p.epsilon)
      if (e >= 1.0) err("alpha", "alpha = epsilon must lie in (0,1)");
  for (double a : p.alpha)
    if (!(a > 0.0 && a < 1.0)) err("alpha", "must lie in (0,1)");
  if (cmd == "regularize-demo" && p.alpha.empty()) err("alpha", "grid must be nonempty");
  if (cmd == "ball-mass" && p.alpha.empty())
    for (double e : p.epsilon)
      if (e >= 1.0) err("alpha", "alpha defaults to epsilon and must lie in (0,1)");

  const bool needs_t = cmd == "ball-mass" || cmd == "scan" || cmd == "bk-curve" || cmd == "tube-check" ||
                       cmd == "regularize-demo";
  if (needs_t && p.t.empty()) err("t", "grid must be nonempty");
  for (double t : p.t)
    if (!(t > 0.0) || !std::isfinite(t)) err("t", "values must be positive");

  if (cmd == "entropy" || cmd == "cover") {
    if (p.n.empty()) err("n", "grid must be nonempty");
    for (std::size_t k = 0; k < p.n.size(); ++k) {
      if (p.n[k] < 1) err("n", "values must be >= 1");
      if (k > 0 && p.n[k] <= p.n[k - 1]) err("n", "grid must be increasing");
    }
    if (cmd == "entropy" && p.n.size() < 2) err("n", "grid needs at least two values");
  }
  if (cmd == "entropy" || cmd == "cover" || cmd == "tube-check")
    if (!(p.delta > 0.0 && p.delta < 1.0)) err("delta", "must lie in (0,1)");
  if (cmd == "cover") {
    if (!(p.L >= 1.0) || !std::isfinite(p.L)) err("L", "must be >= 1");
    if (p.members < 1) err("members", "must be >= 1");
  }
  if (cmd == "regularize-demo") {
    if (!(p.block > 0.0)) err("block", "must be positive");
    if (p.trials < 1) err("trials", "must be >= 1");
  }
  if (cmd == "ball-mass" || cmd == "scan" || cmd == "bk-curve" || cmd == "tube-check")
    if (p.center_count < 1) err("center_count", "must be >= 1");
  if (p.side != "forward" && p.side != "two-sided") err("side", "must be 'forward' or 'two-sided'");
  if (p.kind != "classic" && p.kind != "generalized") err("kind", "must be 'classic' or 'generalized'");
  if (p.policy != "grid" && p.policy != "conservative") err("policy", "must be 'grid' or 'conservative'");
  if (!(p.rho_min >= 0.0)) err("rho_min", "must be nonnegative");
  if (!(p.r2_min >= 0.0 && p.r2_min <= 1.0)) err("r2_min", "must lie in [0,1]");
  if (c.output_dir.empty()) err("output_dir", "must be nonempty");
  return out;
}

}  // namespace expanse
