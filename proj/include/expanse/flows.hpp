#pragma once

// Concrete regular flows: the linear flow on the flat 2-torus and the
// constant-roof suspension of a full shift. Both have exact time-t maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace expanse {

// ---------------------------------------------------------------------------
// Symbol sequences
// ---------------------------------------------------------------------------

/// Two-sided symbol sequence over {0,...,A-1}, materialized on demand.
///
/// Symbols come from a counter-based generator (i.i.d. with a given law, or a
/// periodic pattern). A contiguous window of indices may be stored explicitly;
/// stored symbols take precedence over the generator, which is how spliced
/// sequences (agreeing with another sequence on a window) are represented.
/// Instances are immutable and cheap to copy.
class SymbolSequence {
 public:
  SymbolSequence() = default;

  static SymbolSequence bernoulli(std::uint64_t seed, std::span<const double> probabilities,
                                  std::int64_t lo = 0, std::int64_t hi = -1) {
    auto d = std::make_shared<Data>();
    d->seed = seed;
    d->cdf = cumulative(probabilities);
    d->alphabet = static_cast<int>(d->cdf.size());
    materialize(*d, lo, hi);
    return SymbolSequence(std::move(d));
  }

  static SymbolSequence uniform(std::uint64_t seed, int alphabet, std::int64_t lo = 0,
                                std::int64_t hi = -1) {
    std::vector<double> p(static_cast<std::size_t>(alphabet), 1.0 / alphabet);
    return bernoulli(seed, p, lo, hi);
  }

  static SymbolSequence periodic(std::vector<std::uint8_t> pattern, int alphabet) {
    if (pattern.empty()) throw InputError("periodic pattern must be nonempty");
    for (auto s : pattern)
      if (s >= alphabet) throw InputError("periodic pattern symbol outside alphabet");
    auto d = std::make_shared<Data>();
    d->pattern = std::move(pattern);
    d->alphabet = alphabet;
    return SymbolSequence(std::move(d));
  }

  /// Copy of `base` on [lo, hi]; independent i.i.d. symbols (base's law, or
  /// uniform when base is periodic) drawn from `tail_seed` elsewhere.
  static SymbolSequence splice(const SymbolSequence& base, std::int64_t lo, std::int64_t hi,
                               std::uint64_t tail_seed) {
    auto d = std::make_shared<Data>();
    d->seed = tail_seed;
    d->alphabet = base.alphabet();
    if (!base.d_->cdf.empty()) {
      d->cdf = base.d_->cdf;
    } else {
      std::vector<double> p(static_cast<std::size_t>(d->alphabet), 1.0 / d->alphabet);
      d->cdf = cumulative(p);
    }
    d->lo = lo;
    if (hi >= lo) {
      d->window.resize(static_cast<std::size_t>(hi - lo + 1));
      for (std::int64_t i = lo; i <= hi; ++i) d->window[static_cast<std::size_t>(i - lo)] = base.at(i);
    }
    return SymbolSequence(std::move(d));
  }

  /// Same sequence with the symbol at `index` replaced. The index must lie in
  /// the stored window or directly extend it.
  SymbolSequence with_symbol(std::int64_t index, std::uint8_t symbol) const {
    if (symbol >= alphabet()) throw InputError("symbol outside alphabet");
    auto d = std::make_shared<Data>(*d_);
    if (d->window.empty()) {
      d->lo = index;
      d->window.push_back(symbol);
    } else if (index == d->lo - 1) {
      d->window.insert(d->window.begin(), symbol);
      d->lo = index;
    } else if (index == d->lo + static_cast<std::int64_t>(d->window.size())) {
      d->window.push_back(symbol);
    } else if (index >= d->lo && index < d->lo + static_cast<std::int64_t>(d->window.size())) {
      d->window[static_cast<std::size_t>(index - d->lo)] = symbol;
    } else {
      throw InputError("with_symbol: index not adjacent to the stored window");
    }
    return SymbolSequence(std::move(d));
  }

  std::uint8_t at(std::int64_t i) const noexcept {
    const Data& d = *d_;
    const std::uint64_t k = static_cast<std::uint64_t>(i - d.lo);
    if (k < d.window.size()) return d.window[k];
    return generate(d, i);
  }

  int alphabet() const noexcept { return d_ ? d_->alphabet : 0; }
  bool valid() const noexcept { return static_cast<bool>(d_); }
  bool is_periodic() const noexcept { return d_ && !d_->pattern.empty(); }

  /// Smallest |n| <= window with a[oa+n] != b[ob+n], or -1 when they agree on
  /// the whole probe window. Only |n| < limit is inspected when limit is given.
  static int first_mismatch(const SymbolSequence& a, std::int64_t oa, const SymbolSequence& b,
                            std::int64_t ob, int window, int limit = -1) noexcept {
    const int stop = (limit < 0 || limit > window + 1) ? window + 1 : limit;
    const Data& da = *a.d_;
    const Data& db = *b.d_;
    const bool fast = covers(da, oa - stop, oa + stop) && covers(db, ob - stop, ob + stop);
    if (fast) {
      const std::uint8_t* pa = da.window.data() + (oa - da.lo);
      const std::uint8_t* pb = db.window.data() + (ob - db.lo);
      if (pa[0] != pb[0]) return 0;
      for (int n = 1; n < stop; ++n) {
        if (pa[n] != pb[n] || pa[-n] != pb[-n]) return n;
      }
      return -1;
    }
    if (a.at(oa) != b.at(ob)) return 0;
    for (int n = 1; n < stop; ++n) {
      if (a.at(oa + n) != b.at(ob + n) || a.at(oa - n) != b.at(ob - n)) return n;
    }
    return -1;
  }

 private:
  struct Data {
    std::uint64_t seed = 0;
    std::vector<double> cdf;              // i.i.d. generator when nonempty
    std::vector<std::uint8_t> pattern;    // periodic generator when nonempty
    int alphabet = 0;
    std::int64_t lo = 0;
    std::vector<std::uint8_t> window;     // explicit symbols on [lo, lo + size)
  };

  explicit SymbolSequence(std::shared_ptr<const Data> d) : d_(std::move(d)) {}

  static std::vector<double> cumulative(std::span<const double> p) {
    if (p.size() < 2 || p.size() > 255) throw InputError("symbol law needs 2..255 probabilities");
    double total = 0.0;
    for (double q : p) {
      if (!(q >= 0.0) || !std::isfinite(q)) throw InputError("symbol probabilities must be >= 0");
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("symbol probabilities must sum to 1");
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i] / total;
      cdf[i] = acc;
    }
    cdf.back() = 1.0;
    return cdf;
  }

  static std::uint8_t generate(const Data& d, std::int64_t i) noexcept {
    if (!d.pattern.empty()) {
      const auto n = static_cast<std::int64_t>(d.pattern.size());
      return d.pattern[static_cast<std::size_t>(((i % n) + n) % n)];
    }
    const double u = to_unit(mix64(d.seed ^ mix64(static_cast<std::uint64_t>(i))));
    std::size_t k = 0;
    while (k + 1 < d.cdf.size() && u >= d.cdf[k]) ++k;
    return static_cast<std::uint8_t>(k);
  }

  static void materialize(Data& d, std::int64_t lo, std::int64_t hi) {
    if (hi < lo) return;
    d.lo = lo;
    d.window.resize(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t i = lo; i <= hi; ++i) d.window[static_cast<std::size_t>(i - lo)] = generate(d, i);
  }

  static bool covers(const Data& d, std::int64_t lo, std::int64_t hi) noexcept {
    return lo >= d.lo && hi < d.lo + static_cast<std::int64_t>(d.window.size());
  }

  std::shared_ptr<const Data> d_;
};

// ---------------------------------------------------------------------------
// Phase points and flows
// ---------------------------------------------------------------------------

struct TorusPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Point (omega, roof) of the suspension. The current base sequence is omega
/// shifted by `offset`, i.e. its n-th symbol is sequence.at(offset + n).
struct SuspensionPoint {
  SymbolSequence sequence;
  std::int64_t offset = 0;
  double roof = 0.0;

  std::uint8_t symbol(std::int64_t n) const noexcept { return sequence.at(offset + n); }
};

using PhasePoint = std::variant<TorusPoint, SuspensionPoint>;

enum class FlowFamily { torus_linear, suspension_shift };

inline std::string to_string(FlowFamily f) {
  return f == FlowFamily::torus_linear ? "torus-linear" : "suspension-shift";
}

/// Reduce to [0,1). Guards the floating corner where x - floor(x) rounds to 1.
inline double reduce_unit(double x) noexcept {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

class FlowSystem {
 public:
  static constexpr int kDefaultProbeWindow = 64;

  /// Linear flow on the flat torus along `direction`, normalized to unit speed.
  static FlowSystem torus(double dx, double dy) {
    const double norm = std::hypot(dx, dy);
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw InputError("torus direction must be a nonzero finite vector");
    FlowSystem f;
    f.family_ = FlowFamily::torus_linear;
    f.dx_ = dx / norm;
    f.dy_ = dy / norm;
    return f;
  }

  /// Golden-ratio direction: an irrational (minimal) linear flow.
  static FlowSystem torus_irrational() { return torus(1.0, (1.0 + std::sqrt(5.0)) / 2.0); }

  /// Suspension of the full shift on `alphabet` symbols under the constant roof 1.
  static FlowSystem suspension(int alphabet, int probe_window = kDefaultProbeWindow) {
    if (alphabet < 2 || alphabet > 255) throw InputError("alphabet_size must be in [2, 255]");
    if (probe_window < 1 || probe_window > 1000) throw InputError("probe window must be in [1, 1000]");
    FlowSystem f;
    f.family_ = FlowFamily::suspension_shift;
    f.alphabet_ = alphabet;
    f.window_ = probe_window;
    return f;
  }

  FlowFamily family() const noexcept { return family_; }
  double dx() const noexcept { return dx_; }
  double dy() const noexcept { return dy_; }
  int alphabet_size() const noexcept { return alphabet_; }
  double roof_height() const noexcept { return 1.0; }
  int probe_window() const noexcept { return window_; }

  /// Metric diameter: sqrt(2)/2 for the flat torus, 1 for the suspension metric.
  double diameter() const noexcept {
    return family_ == FlowFamily::torus_linear ? std::sqrt(0.5) : 1.0;
  }

  bool owns(const PhasePoint& x) const noexcept {
    return family_ == FlowFamily::torus_linear ? std::holds_alternative<TorusPoint>(x)
                                               : std::holds_alternative<SuspensionPoint>(x);
  }

 private:
  FlowSystem() = default;

  FlowFamily family_ = FlowFamily::torus_linear;
  double dx_ = 1.0;
  double dy_ = 0.0;
  int alphabet_ = 0;
  int window_ = kDefaultProbeWindow;
};

inline void require_family(const FlowSystem& flow, const PhasePoint& x) {
  if (!flow.owns(x))
    throw InputError("phase point does not belong to the " + to_string(flow.family()) + " flow");
}

inline TorusPoint make_torus_point(double u, double v) noexcept {
  return {reduce_unit(u), reduce_unit(v)};
}

inline SuspensionPoint make_suspension_point(SymbolSequence seq, double roof, std::int64_t offset = 0) {
  const double base = std::floor(roof);
  SuspensionPoint p{std::move(seq), offset + static_cast<std::int64_t>(base), roof - base};
  if (p.roof >= 1.0) {
    p.roof = 0.0;
    ++p.offset;
  }
  return p;
}

/// Exact time-t map.
inline PhasePoint flow_map(const FlowSystem& flow, const PhasePoint& x, double t) {
  require_family(flow, x);
  if (flow.family() == FlowFamily::torus_linear) {
    const auto& p = std::get<TorusPoint>(x);
    return make_torus_point(p.u + t * flow.dx(), p.v + t * flow.dy());
  }
  const auto& p = std::get<SuspensionPoint>(x);
  return make_suspension_point(p.sequence, p.roof + t, p.offset);
}

namespace detail {

inline double wrap_delta(double a, double b) noexcept {
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

inline double torus_distance(const TorusPoint& a, const TorusPoint& b) noexcept {
  return std::hypot(wrap_delta(a.u, b.u), wrap_delta(a.v, b.v));
}

inline double shift_value(int mismatch) noexcept {
  return mismatch < 0 ? 0.0 : std::ldexp(1.0, -mismatch);
}

/// Smallest m >= 0 with 2^-m <= thr, capped at window + 1 (full agreement).
inline int agreement_needed(double thr, int window) noexcept {
  int m = 0;
  while (m <= window && std::ldexp(1.0, -m) > thr) ++m;
  return m;
}

// Representative k of a suspension point is (offset + k, roof - k). For each
// k the roof gap is |roof_a - k - roof_b|; the symbol comparison is centred
// either on b's current index or on a's, and the smaller value is kept so the
// formula is symmetric in (a, b).
inline double suspension_distance(const SuspensionPoint& a, const SuspensionPoint& b,
                                  int window) noexcept {
  double best = std::numeric_limits<double>::infinity();
  for (int k = -1; k <= 1; ++k) {
    const double roof_gap = std::abs((a.roof - b.roof) - k);
    if (roof_gap >= best) continue;
    int m1 = SymbolSequence::first_mismatch(a.sequence, a.offset + k, b.sequence, b.offset, window);
    double ds = shift_value(m1);
    if (k != 0 && ds > 0.0) {
      int m2 = SymbolSequence::first_mismatch(a.sequence, a.offset, b.sequence, b.offset - k, window);
      ds = std::min(ds, shift_value(m2));
    }
    best = std::min(best, std::max(ds, roof_gap));
  }
  return best;
}

inline bool suspension_within(const SuspensionPoint& a, const SuspensionPoint& b, double thr,
                              int window) noexcept {
  if (thr >= 1.0) {
    // d_shift <= 1 always, so only the roof gap matters.
    for (int k = -1; k <= 1; ++k)
      if (std::abs((a.roof - b.roof) - k) <= thr) return true;
    return false;
  }
  const int need = agreement_needed(thr, window);
  for (int k = -1; k <= 1; ++k) {
    if (!(std::abs((a.roof - b.roof) - k) <= thr)) continue;
    if (SymbolSequence::first_mismatch(a.sequence, a.offset + k, b.sequence, b.offset, window, need) < 0)
      return true;
    if (k != 0 &&
        SymbolSequence::first_mismatch(a.sequence, a.offset, b.sequence, b.offset - k, window, need) < 0)
      return true;
  }
  return false;
}

}  // namespace detail

/// Compatible metric: flat torus metric, or the min-over-representatives
/// suspension metric with d_shift evaluated on |n| <= probe_window.
inline double distance(const FlowSystem& flow, const PhasePoint& x, const PhasePoint& y) {
  require_family(flow, x);
  require_family(flow, y);
  if (flow.family() == FlowFamily::torus_linear)
    return detail::torus_distance(std::get<TorusPoint>(x), std::get<TorusPoint>(y));
  return detail::suspension_distance(std::get<SuspensionPoint>(x), std::get<SuspensionPoint>(y),
                                     flow.probe_window());
}

/// Equivalent to distance(flow, x, y) <= thr, with early exits.
inline bool within(const FlowSystem& flow, const PhasePoint& x, const PhasePoint& y, double thr) {
  if (flow.family() == FlowFamily::torus_linear)
    return distance(flow, x, y) <= thr;
  require_family(flow, x);
  require_family(flow, y);
  return detail::suspension_within(std::get<SuspensionPoint>(x), std::get<SuspensionPoint>(y), thr,
                                   flow.probe_window());
}

// ---------------------------------------------------------------------------
// Orbits
// ---------------------------------------------------------------------------

struct OrbitTrace {
  PhasePoint base;
  double step = 0.0;
  double horizon = 0.0;
  std::vector<PhasePoint> points;
};

inline std::size_t grid_count(double t, double step) noexcept {
  // floor(t/step) with a relative guard so that e.g. 2/0.1 counts 20 steps.
  const double r = t / step;
  return static_cast<std::size_t>(std::floor(r + 1e-9 * std::max(1.0, r)));
}

inline OrbitTrace sample_orbit(const FlowSystem& flow, const PhasePoint& x, double step, double t) {
  if (!(step > 0.0)) throw InputError("orbit step must be positive");
  if (!(t >= 0.0)) throw InputError("orbit horizon must be nonnegative");
  require_family(flow, x);
  OrbitTrace trace{x, step, t, {}};
  const std::size_t m = grid_count(t, step) + 1;
  trace.points.reserve(m);
  for (std::size_t i = 0; i < m; ++i) trace.points.push_back(flow_map(flow, x, static_cast<double>(i) * step));
  return trace;
}

/// Uniformly random point of the phase space (uniform symbols on the
/// suspension), used for metric probes.
inline PhasePoint random_point(const FlowSystem& flow, Rng& rng) {
  if (flow.family() == FlowFamily::torus_linear) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    return TorusPoint{u, v};
  }
  const std::uint64_t seed = rng.next();
  const int w = flow.probe_window() + 8;
  auto seq = SymbolSequence::uniform(seed, flow.alphabet_size(), -w, w);
  return make_suspension_point(std::move(seq), rng.uniform());
}

// ---------------------------------------------------------------------------
// Uniform orbit-shift modulus
// ---------------------------------------------------------------------------

struct ProbeConfig {
  int probe_count = 64;       ///< base points
  double probe_step = 0.37;   ///< spacing of probe times along each base orbit
  int times_per_point = 4;    ///< probe times 0, step, ..., (times-1)*step
  double theta_max = 1.0;
  int levels = 10;            ///< shift grid spacing theta_max / 2^levels
  std::uint64_t seed = 0x7e7a;
};

namespace detail {

inline std::vector<PhasePoint> probe_points(const FlowSystem& flow, const ProbeConfig& cfg) {
  Rng rng(substream(cfg.seed, "probes"));
  std::vector<PhasePoint> out;
  out.reserve(static_cast<std::size_t>(cfg.probe_count * cfg.times_per_point));
  for (int i = 0; i < cfg.probe_count; ++i) {
    PhasePoint z = random_point(flow, rng);
    for (int k = 0; k < cfg.times_per_point; ++k) out.push_back(flow_map(flow, z, k * cfg.probe_step));
  }
  return out;
}

/// sup over probes of d(p, phi_s(p)).
inline double shift_sup(const FlowSystem& flow, const std::vector<PhasePoint>& probes, double s) {
  double worst = 0.0;
  for (const auto& p : probes) worst = std::max(worst, distance(flow, p, flow_map(flow, p, s)));
  return worst;
}

}  // namespace detail

/// Empirical orbit-shift modulus: the largest theta on the dyadic grid
/// {k * theta_max / 2^m} with sup d(phi_t x, phi_{t+s} x) <= eps for all
/// probed x, t and all grid shifts |s| <= theta. The grid is refined near 0
/// when no positive grid value qualifies. Certified over the probe set only.
inline double theta_for(const FlowSystem& flow, double eps, const ProbeConfig& cfg = {}) {
  if (!(eps > 0.0)) throw InputError("theta_for: eps must be positive");
  if (cfg.probe_count < 1 || cfg.times_per_point < 1 || !(cfg.probe_step > 0.0) ||
      !(cfg.theta_max > 0.0) || cfg.levels < 1 || cfg.levels > 30)
    throw InputError("theta_for: invalid probe configuration");
  const auto probes = detail::probe_points(flow, cfg);
  double span = cfg.theta_max;
  for (int depth = 0; depth < 40; ++depth) {
    const long cells = 1L << cfg.levels;
    const double h = span / static_cast<double>(cells);
    long good = 0;
    for (long i = 1; i <= cells; ++i) {
      const double s = static_cast<double>(i) * h;
      if (detail::shift_sup(flow, probes, s) > eps || detail::shift_sup(flow, probes, -s) > eps) break;
      good = i;
    }
    if (good > 0) return static_cast<double>(good) * h;
    span = h;
  }
  return span;
}

inline double theta_for(const FlowSystem& flow, double eps, double probe_step, int probe_count) {
  ProbeConfig cfg;
  cfg.probe_step = probe_step;
  cfg.probe_count = probe_count;
  return theta_for(flow, eps, cfg);
}

/// sup over probes and |s| <= tau of d(p, phi_s(p)), sampled at `samples`
/// evenly spaced shifts on each side.
inline double orbit_modulus(const FlowSystem& flow, double tau, const ProbeConfig& cfg = {},
                            int samples = 16) {
  if (!(tau > 0.0)) return 0.0;
  const auto probes = detail::probe_points(flow, cfg);
  double worst = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double s = tau * i / samples;
    worst = std::max({worst, detail::shift_sup(flow, probes, s), detail::shift_sup(flow, probes, -s)});
  }
  return worst;
}

}  // namespace expanse
