#pragma once

// Empirical measures, Monte-Carlo masses of dynamical balls, pushforward,
// expansivity scans and the orbit-arc tube check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "align.hpp"
#include "errors.hpp"
#include "flows.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace expanse {

enum class MeasureKind { lebesgue_torus, bernoulli_suspension, dirac, custom };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::lebesgue_torus: return "lebesgue-torus";
    case MeasureKind::bernoulli_suspension: return "bernoulli-suspension";
    case MeasureKind::dirac: return "dirac";
    case MeasureKind::custom: return "custom";
  }
  return "?";
}

struct MeasureDescriptor {
  MeasureKind kind = MeasureKind::lebesgue_torus;
  std::vector<double> p;            ///< symbol law (bernoulli-suspension)
  std::optional<PhasePoint> point;  ///< dirac
  std::vector<PhasePoint> points;   ///< custom sample list
  double pushforward = 0.0;         ///< accumulated flow time applied to the samples

  static MeasureDescriptor lebesgue() { return {}; }
  static MeasureDescriptor bernoulli(std::vector<double> p) {
    MeasureDescriptor d;
    d.kind = MeasureKind::bernoulli_suspension;
    d.p = std::move(p);
    return d;
  }
  static MeasureDescriptor dirac(PhasePoint x) {
    MeasureDescriptor d;
    d.kind = MeasureKind::dirac;
    d.point = std::move(x);
    return d;
  }
  static MeasureDescriptor custom(std::vector<PhasePoint> pts) {
    MeasureDescriptor d;
    d.kind = MeasureKind::custom;
    d.points = std::move(pts);
    return d;
  }
};

struct EmpiricalMeasure {
  std::vector<PhasePoint> samples;
  std::vector<double> weights;
  std::uint64_t seed = 0;
  MeasureDescriptor descriptor;

  std::size_t size() const noexcept { return samples.size(); }

  /// Kish effective sample size 1 / sum w^2.
  double effective_size() const noexcept {
    double s = 0.0;
    for (double w : weights) s += w * w;
    return s > 0.0 ? 1.0 / s : 0.0;
  }
};

/// Symbols stored explicitly around index 0 for sampled sequences; beyond
/// this window they are regenerated from the counter-based generator.
inline constexpr std::int64_t kSampleWindowAhead = 96;

namespace detail {

inline void check_bernoulli_law(const FlowSystem& flow, const std::vector<double>& p) {
  if (flow.family() != FlowFamily::suspension_shift)
    throw InputError("bernoulli-suspension measure requires the suspension flow");
  if (static_cast<int>(p.size()) != flow.alphabet_size())
    throw InputError("bernoulli p vector length must equal alphabet_size");
  double total = 0.0;
  for (double q : p) {
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("bernoulli p entries must lie in [0,1]");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("bernoulli p vector must sum to 1");
}

// Independent draws from the descriptor's law (before pushforward), using
// sub-stream `stream` of `seed`.
inline std::vector<PhasePoint> draw_raw(const FlowSystem& flow, const MeasureDescriptor& desc,
                                        std::size_t n, std::uint64_t seed, std::string_view stream) {
  std::vector<PhasePoint> out;
  out.reserve(n);
  switch (desc.kind) {
    case MeasureKind::lebesgue_torus: {
      if (flow.family() != FlowFamily::torus_linear)
        throw InputError("lebesgue-torus measure requires the torus flow");
      Rng rng(substream(seed, stream));
      for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform();
        out.push_back(TorusPoint{u, v});
      }
      break;
    }
    case MeasureKind::bernoulli_suspension: {
      check_bernoulli_law(flow, desc.p);
      const std::int64_t back = flow.probe_window() + 8;
      out.resize(n);
      parallel_for(n, [&](std::size_t i) {
        Rng rng(substream(seed, stream, i));
        const std::uint64_t sym_seed = rng.next();
        const double roof = rng.uniform();
        out[i] = make_suspension_point(
            SymbolSequence::bernoulli(sym_seed, desc.p, -back, kSampleWindowAhead + back), roof);
      });
      break;
    }
    case MeasureKind::dirac: {
      if (!desc.point) throw InputError("dirac measure needs a point");
      require_family(flow, *desc.point);
      out.assign(n, *desc.point);
      break;
    }
    case MeasureKind::custom: {
      if (desc.points.empty()) throw InputError("custom measure needs at least one point");
      Rng rng(substream(seed, stream));
      for (std::size_t i = 0; i < n; ++i) {
        const auto& p = desc.points[rng.below(desc.points.size())];
        require_family(flow, p);
        out.push_back(p);
      }
      break;
    }
  }
  return out;
}

inline void push_all(const FlowSystem& flow, std::vector<PhasePoint>& pts, double t) {
  if (t == 0.0) return;
  parallel_for(pts.size(), [&](std::size_t i) { pts[i] = flow_map(flow, pts[i], t); });
}

}  // namespace detail

/// N equal-weight samples (custom lists are used as given).
inline EmpiricalMeasure sample_measure(const FlowSystem& flow, const MeasureDescriptor& desc,
                                       std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_measure: N must be >= 1");
  EmpiricalMeasure mu;
  mu.seed = seed;
  mu.descriptor = desc;
  if (desc.kind == MeasureKind::custom) {
    if (desc.points.empty()) throw InputError("custom measure needs at least one point");
    for (const auto& p : desc.points) require_family(flow, p);
    mu.samples = desc.points;
  } else {
    mu.samples = detail::draw_raw(flow, desc, n, seed, "measure");
  }
  detail::push_all(flow, mu.samples, desc.pushforward);
  mu.weights.assign(mu.samples.size(), 1.0 / static_cast<double>(mu.samples.size()));
  return mu;
}

/// Each sample replaced by its time-t image; weights unchanged.
inline EmpiricalMeasure pushforward(const EmpiricalMeasure& mu, const FlowSystem& flow, double t) {
  EmpiricalMeasure out = mu;
  detail::push_all(flow, out.samples, t);
  out.descriptor.pushforward += t;
  if (out.descriptor.kind == MeasureKind::dirac && out.descriptor.point)
    out.descriptor.point = flow_map(flow, *out.descriptor.point, t);
  if (out.descriptor.kind == MeasureKind::custom) {
    out.descriptor.points = out.samples;
    out.descriptor.pushforward = 0.0;
  }
  return out;
}

/// Fresh points drawn from the law of mu (independent of mu's samples), used
/// as ball centres. Custom measures resample their point list.
inline std::vector<PhasePoint> draw_centers(const FlowSystem& flow, const EmpiricalMeasure& mu,
                                            std::size_t count, std::uint64_t seed) {
  MeasureDescriptor raw = mu.descriptor;
  double t = raw.pushforward;
  if (raw.kind == MeasureKind::dirac) t = 0.0;  // the point already carries the pushforward
  auto pts = detail::draw_raw(flow, raw, count, seed, "centers");
  if (raw.kind != MeasureKind::custom) detail::push_all(flow, pts, t);
  return pts;
}

// ---------------------------------------------------------------------------
// Ball masses
// ---------------------------------------------------------------------------

/// mu-mass of the ball around `center` for each horizon in t_grid, from one
/// membership pass per sample.
inline std::vector<double> ball_masses(const EmpiricalMeasure& mu, const FlowSystem& flow,
                                       const PhasePoint& center, double eps, double alpha, BallKind kind,
                                       BallSide side, std::span<const double> t_grid, double step, int q,
                                       SlackPolicy policy = SlackPolicy::conservative) {
  if (t_grid.empty()) throw InputError("ball_masses: t grid is empty");
  for (double t : t_grid)
    if (!(t > 0.0)) throw InputError("ball_masses: horizons must be positive");
  BallOracle oracle(flow, center, eps, alpha, kind, side, step, q, policy);
  long max_rows = 0;
  std::vector<long> rows(t_grid.size());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    rows[k] = static_cast<long>(BallOracle::rows_for(t_grid[k], step));
    max_rows = std::max(max_rows, rows[k]);
  }
  oracle.prepare(max_rows);
  std::vector<long> reach(mu.size());
  parallel_for(mu.size(), [&](std::size_t i) { reach[i] = oracle.reach(mu.samples[i], max_rows); });
  std::vector<double> mass(t_grid.size(), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t k = 0; k < t_grid.size(); ++k)
      if (reach[i] >= rows[k]) mass[k] += mu.weights[i];
  for (double& m : mass) m = std::min(1.0, m);
  return mass;
}

inline double ball_mass(const EmpiricalMeasure& mu, const FlowSystem& flow, const BallQuery& query,
                        double step, int q, SlackPolicy policy = SlackPolicy::conservative) {
  validate_query(query);
  const double t[1] = {query.horizon};
  return ball_masses(mu, flow, query.center, query.eps, query.alpha, query.kind, query.side, t, step, q,
                     policy)[0];
}

/// Per-sample membership flags (sample order), for nesting checks.
inline std::vector<char> ball_members(const EmpiricalMeasure& mu, const FlowSystem& flow,
                                      const BallQuery& query, double step, int q,
                                      SlackPolicy policy = SlackPolicy::conservative) {
  validate_query(query);
  BallOracle oracle(flow, query.center, query.eps, query.alpha, query.kind, query.side, step, q, policy);
  const long rows = static_cast<long>(BallOracle::rows_for(query.horizon, step));
  oracle.prepare(rows);
  std::vector<char> in(mu.size(), 0);
  parallel_for(mu.size(), [&](std::size_t i) { in[i] = oracle.reach(mu.samples[i], rows) >= rows; });
  return in;
}

// ---------------------------------------------------------------------------
// Expansivity scan
// ---------------------------------------------------------------------------

struct ScanConfig {
  std::vector<double> eps_grid;
  std::vector<double> t_grid;
  std::size_t center_count = 8;
  double step = 0.1;
  int q = 5;
  std::uint64_t seed = 1;
  BallSide side = BallSide::forward;
  BallKind kind = BallKind::generalized;
  SlackPolicy policy = SlackPolicy::grid;
  double rho_min = 0.1;        ///< minimum decay rate per unit time for "decaying"
  double r2_min = 0.9;         ///< minimum R^2 of the centre-averaged fit
  double min_coverage = 0.9;   ///< fraction of uncensored centres needed for a t to enter the averaged fit
};

struct ScanCell {
  double eps = 0.0;
  double t = 0.0;
  std::size_t center = 0;
  double mass = 0.0;
  double stderr_ = 0.0;
  bool censored = false;  ///< no sample in the ball: mass < 1/N_eff
};

struct ScanSummary {
  double eps = 0.0;
  double rate = 0.0;        ///< mean over centres of the per-centre slope of -log(mass) vs t
  double r2 = 0.0;          ///< R^2 of the fit of the centre-averaged -log(mass) curve
  std::string verdict;      ///< "decaying" or "floored"
  double floor = 0.0;       ///< mean mass over centres at the largest horizon
  std::size_t fitted_centers = 0;
};

struct ScanReport {
  std::vector<ScanCell> cells;
  std::vector<ScanSummary> summary;
  double n_effective = 0.0;
  double slack = 0.0;
};

namespace detail {

/// Slope of -log(mass) vs t over the uncensored prefix of the horizons.
inline std::optional<LineFit> censored_prefix_fit(std::span<const double> t, std::span<const double> mass) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(mass[k] > 0.0)) break;
    xs.push_back(t[k]);
    ys.push_back(-std::log(mass[k]));
  }
  if (xs.size() < 2) return std::nullopt;
  return fit_line(xs, ys);
}

}  // namespace detail

inline ScanSummary summarize_scan(double eps, std::span<const double> t_grid,
                                  const std::vector<std::vector<double>>& masses, double n_eff,
                                  const ScanConfig& cfg) {
  ScanSummary s;
  s.eps = eps;
  const std::size_t centers = masses.size();
  double rate_sum = 0.0;
  bool any_positive = false;
  for (const auto& m : masses) {
    for (double v : m) any_positive |= v > 0.0;
    if (auto fit = detail::censored_prefix_fit(t_grid, m)) {
      rate_sum += fit->slope;
      ++s.fitted_centers;
    }
  }
  s.rate = s.fitted_centers ? rate_sum / static_cast<double>(s.fitted_centers)
                            : std::numeric_limits<double>::quiet_NaN();
  // Centre-averaged curve, censored masses imputed at half a sample.
  const double impute = -std::log(0.5 / n_eff);
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    std::size_t live = 0;
    double acc = 0.0;
    for (const auto& m : masses) {
      if (m[k] > 0.0) {
        ++live;
        acc += -std::log(m[k]);
      } else {
        acc += impute;
      }
    }
    if (centers && static_cast<double>(live) >= cfg.min_coverage * static_cast<double>(centers)) {
      xs.push_back(t_grid[k]);
      ys.push_back(acc / static_cast<double>(centers));
    }
  }
  s.r2 = xs.size() >= 2 ? fit_line(xs, ys).r2 : 0.0;
  double floor = 0.0;
  for (const auto& m : masses) floor += m.back();
  s.floor = centers ? floor / static_cast<double>(centers) : 0.0;
  if (!any_positive) {
    s.verdict = "decaying";  // every ball is below sampling resolution
  } else {
    s.verdict = (s.fitted_centers > 0 && s.rate >= cfg.rho_min && s.r2 >= cfg.r2_min) ? "decaying" : "floored";
  }
  return s;
}

/// For each eps (alpha = eps) and each of center_count centres drawn from mu,
/// the ball mass at every horizon; then a decay-vs-floor classification.
inline ScanReport expansivity_scan(const FlowSystem& flow, const EmpiricalMeasure& mu, ScanConfig cfg) {
  if (cfg.eps_grid.empty() || cfg.t_grid.empty()) throw InputError("expansivity_scan: grids must be nonempty");
  if (cfg.center_count < 1) throw InputError("expansivity_scan: center_count must be >= 1");
  std::sort(cfg.t_grid.begin(), cfg.t_grid.end());
  for (double e : cfg.eps_grid)
    if (!(e > 0.0 && e < 1.0)) throw InputError("expansivity_scan: epsilon (= alpha) must lie in (0,1)");
  ScanReport report;
  report.n_effective = mu.effective_size();
  const auto centers = draw_centers(flow, mu, cfg.center_count, cfg.seed);
  for (double eps : cfg.eps_grid) {
    std::vector<std::vector<double>> masses;
    masses.reserve(centers.size());
    for (std::size_t c = 0; c < centers.size(); ++c) {
      masses.push_back(ball_masses(mu, flow, centers[c], eps, eps, cfg.kind, cfg.side, cfg.t_grid, cfg.step,
                                   cfg.q, cfg.policy));
      for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
        const double m = masses.back()[k];
        report.cells.push_back({eps, cfg.t_grid[k], c, m, std::sqrt(m * (1.0 - m) / report.n_effective),
                                !(m > 0.0)});
      }
    }
    report.summary.push_back(summarize_scan(eps, cfg.t_grid, masses, report.n_effective, cfg));
  }
  report.slack = cell_slack(flow, cfg.step, cfg.q, cfg.eps_grid.back());
  return report;
}

// ---------------------------------------------------------------------------
// Orbit-arc tube check
// ---------------------------------------------------------------------------

struct TubeSample {
  double s = 0.0;          ///< arc parameter: y = phi_s(x)
  bool included = false;   ///< classic forward membership at radius delta up to the horizon
  double worst = 0.0;      ///< max over grid times of d(phi_t x, phi_t y)
};

struct TubeReport {
  double theta = 0.0;
  std::vector<TubeSample> samples;
};

/// Arc samples y = phi_s(x), s = theta * f for f in arc_fractions, checked for
/// d(phi_t x, phi_t y) <= delta on the grid t = 0, step, ..., horizon.
inline TubeReport tube_inclusion_check(const FlowSystem& flow, const PhasePoint& x, double delta, double horizon,
                                       double step, std::vector<double> arc_fractions = {},
                                       const ProbeConfig& probes = {}) {
  if (!(delta > 0.0)) throw InputError("tube_inclusion_check: delta must be positive");
  if (!(step > 0.0)) throw InputError("tube_inclusion_check: step must be positive");
  if (!(horizon >= 0.0)) throw InputError("tube_inclusion_check: horizon must be nonnegative");
  require_family(flow, x);
  if (arc_fractions.empty()) arc_fractions = {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0};
  TubeReport out;
  out.theta = theta_for(flow, delta, probes);
  const auto xs = sample_orbit(flow, x, step, horizon);
  for (double f : arc_fractions) {
    const double s = f * out.theta;
    const auto ys = sample_orbit(flow, flow_map(flow, x, s), step, horizon);
    TubeSample ts{s, true, 0.0};
    for (std::size_t i = 0; i < xs.points.size(); ++i) {
      const double d = distance(flow, xs.points[i], ys.points[i]);
      ts.worst = std::max(ts.worst, d);
      if (d > delta) ts.included = false;
    }
    out.samples.push_back(ts);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_scan_csv(std::ostream& os, const ScanReport& r) {
  os << "epsilon,t,center_id,mass,stderr\n";
  for (const auto& c : r.cells) {
    os << fmt_double(c.eps) << ',' << fmt_double(c.t) << ',' << c.center << ',';
    if (c.censored)
      os << '<' << fmt_double(1.0 / r.n_effective);
    else
      os << fmt_double(c.mass);
    os << ',' << fmt_double(c.stderr_) << '\n';
  }
}

inline void write_scan_summary_csv(std::ostream& os, const ScanReport& r) {
  os << "epsilon,rate,r2,verdict,floor\n";
  for (const auto& s : r.summary)
    os << fmt_double(s.eps) << ',' << fmt_double(s.rate) << ',' << fmt_double(s.r2) << ',' << s.verdict << ','
       << fmt_double(s.floor) << '\n';
}

}  // namespace expanse
