#pragma once

// Membership in generalized dynamical balls, decided by slope-constrained
// dynamic programming over sampled orbit distances.
//
// A lattice path j_0 = 0, j_1, ..., j_m encodes the warp h(i*step) = j_i * step/q.
// Consecutive increments d = j_{i+1} - j_i are restricted to a StepBand; for
// Rep(alpha) the band is {d >= 1 : |d/q - 1| <= alpha}. Two-point quotients of
// the interpolated warp are convex combinations of step slopes, so the
// per-step band implies the all-pairs Rep(alpha) condition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "flows.hpp"
#include "parallel.hpp"
#include "warp.hpp"

namespace expanse {

/// How the continuous-time supremum is reduced to the grid.
///  conservative: grid entries must satisfy D <= eps - slack.
///  grid:         grid entries must satisfy D <= eps; slack is only reported.
enum class SlackPolicy { conservative, grid };

struct StepBand {
  long lo = 1;
  long hi = 1;
  friend bool operator==(const StepBand&, const StepBand&) = default;
};

/// Increments d >= 1 with |d - q| <= alpha*q.
inline StepBand rep_alpha_band(int q, double alpha) {
  if (q < 1) throw InputError("refinement factor q must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0,1)");
  StepBand band{std::numeric_limits<long>::max(), -1};
  for (long d = 1; d <= 2L * q; ++d) {
    if (std::abs(static_cast<double>(d - q)) <= alpha * q) {
      band.lo = std::min(band.lo, d);
      band.hi = std::max(band.hi, d);
    }
  }
  return band;
}

/// Unconstrained increasing warps, resolved on the lattice: slopes in
/// [1/q, max_slope].
inline StepBand rep_band(int q, double max_slope) {
  if (q < 1) throw InputError("refinement factor q must be >= 1");
  if (!(max_slope >= 1.0)) throw InputError("max_slope must be >= 1");
  return {1, std::max(1L, static_cast<long>(std::floor(q * max_slope)))};
}

// ---------------------------------------------------------------------------
// Lattice dynamic programs
// ---------------------------------------------------------------------------

namespace detail {

struct ReachRow {
  long first = 0;
  std::vector<char> on;  // on[k] <=> column first + k reachable
  long last() const noexcept { return first + static_cast<long>(on.size()) - 1; }
  bool has(long j) const noexcept {
    const long k = j - first;
    return k >= 0 && k < static_cast<long>(on.size()) && on[static_cast<std::size_t>(k)];
  }
};

// Lexicographically smallest path through the reachable rows 0..rows.size()-1
// that reaches the last stored row.
inline std::vector<long> lexmin_through(const std::vector<ReachRow>& rows, StepBand band) {
  const std::size_t m = rows.size();
  std::vector<ReachRow> co(m);
  co[m - 1] = rows[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) {
    co[i].first = rows[i].first;
    co[i].on.assign(rows[i].on.size(), 0);
    for (std::size_t k = 0; k < rows[i].on.size(); ++k) {
      if (!rows[i].on[k]) continue;
      const long j = rows[i].first + static_cast<long>(k);
      for (long d = band.lo; d <= band.hi; ++d) {
        if (co[i + 1].has(j + d)) {
          co[i].on[k] = 1;
          break;
        }
      }
    }
  }
  std::vector<long> path(m, 0);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    for (long d = band.lo; d <= band.hi; ++d) {
      if (co[i + 1].has(path[i] + d)) {
        path[i + 1] = path[i] + d;
        break;
      }
    }
  }
  return path;
}

}  // namespace detail

struct LatticeReach {
  long deepest = -1;             ///< deepest row with a reachable cell; -1 if (0,0) is not allowed
  std::vector<long> last_row;    ///< reachable columns of the deepest row
  std::vector<long> path;        ///< lexicographically smallest path to the deepest row (if requested)
};

/// Forward reachability from (0,0) through cells with ok(i, j), for rows
/// 0..max_row and columns 0..max_col. ok is evaluated lazily, at most once per cell.
template <class Ok>
LatticeReach lattice_reach(long max_row, long max_col, StepBand band, Ok&& ok, bool want_path) {
  LatticeReach out;
  if (max_row < 0 || max_col < 0 || !ok(0L, 0L)) return out;
  std::vector<detail::ReachRow> rows;
  rows.push_back({0, {1}});
  std::vector<long> prefix;
  for (long i = 0; i < max_row; ++i) {
    const detail::ReachRow& cur = rows.back();
    const long lo = cur.first + band.lo;
    const long hi = std::min(cur.last() + band.hi, max_col);
    if (lo > hi) break;
    prefix.assign(cur.on.size() + 1, 0);
    for (std::size_t k = 0; k < cur.on.size(); ++k) prefix[k + 1] = prefix[k] + cur.on[k];
    detail::ReachRow next{lo, std::vector<char>(static_cast<std::size_t>(hi - lo + 1), 0)};
    bool any = false;
    long first_on = -1, last_on = -1;
    for (long j = lo; j <= hi; ++j) {
      const long a = std::max(j - band.hi, cur.first) - cur.first;
      const long b = std::min(j - band.lo, cur.last()) - cur.first;
      if (a > b || prefix[static_cast<std::size_t>(b + 1)] == prefix[static_cast<std::size_t>(a)]) continue;
      if (!ok(i + 1, j)) continue;
      next.on[static_cast<std::size_t>(j - lo)] = 1;
      any = true;
      if (first_on < 0) first_on = j;
      last_on = j;
    }
    if (!any) break;
    // Trim to the occupied span.
    detail::ReachRow trimmed{first_on,
                             std::vector<char>(next.on.begin() + (first_on - lo), next.on.begin() + (last_on - lo) + 1)};
    rows.push_back(std::move(trimmed));
  }
  out.deepest = static_cast<long>(rows.size()) - 1;
  const auto& last = rows.back();
  for (std::size_t k = 0; k < last.on.size(); ++k)
    if (last.on[k]) out.last_row.push_back(last.first + static_cast<long>(k));
  if (want_path) out.path = detail::lexmin_through(rows, band);
  return out;
}

// ---------------------------------------------------------------------------
// Distance grids
// ---------------------------------------------------------------------------

/// D[i][j] = d(phi_{i*step}(x), phi_{j*step/q}(y)).
struct DistanceGrid {
  double step = 0.0;
  int q = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;  // row-major
  double slack = 0.0;
  double diameter = 1.0;

  double at(std::size_t i, std::size_t j) const noexcept { return entries[i * cols + j]; }
  double col_step() const noexcept { return step / q; }
};

/// Slack for one grid cell: the probed orbit modulus over half a row step on
/// the centre side plus half a (warped) column step on the other side.
inline double cell_slack(const FlowSystem& flow, double step, int q, double alpha_max,
                         const ProbeConfig& probes = {}) {
  const double tau_x = step / 2.0;
  const double tau_y = std::max((1.0 + alpha_max) * step, step / q) / 2.0;
  return orbit_modulus(flow, tau_x, probes) + orbit_modulus(flow, tau_y, probes);
}

inline DistanceGrid build_grid_shape(const FlowSystem& flow, const PhasePoint& x, const PhasePoint& y,
                                     double step, int q, std::size_t rows, std::size_t cols,
                                     double slack = 0.0) {
  if (!(step > 0.0)) throw InputError("grid step must be positive");
  if (q < 1) throw InputError("refinement factor q must be >= 1");
  if (rows == 0 || cols == 0) throw InputError("grid must have at least one row and column");
  require_family(flow, x);
  require_family(flow, y);
  DistanceGrid g;
  g.step = step;
  g.q = q;
  g.rows = rows;
  g.cols = cols;
  g.slack = slack;
  g.diameter = flow.diameter();
  g.entries.assign(rows * cols, 0.0);
  std::vector<PhasePoint> ys;
  ys.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j) ys.push_back(flow_map(flow, y, static_cast<double>(j) * step / q));
  parallel_for(rows, [&](std::size_t i) {
    const PhasePoint xi = flow_map(flow, x, static_cast<double>(i) * step);
    for (std::size_t j = 0; j < cols; ++j) g.entries[i * cols + j] = distance(flow, xi, ys[j]);
  });
  return g;
}

/// Grid over s in [0, t] with columns covering every warp value reachable
/// with slope <= 1 + alpha_max.
inline DistanceGrid build_grid(const FlowSystem& flow, const PhasePoint& x, const PhasePoint& y,
                               double step, double t, int q, double alpha_max = 1.0,
                               bool with_slack = true) {
  if (!(step > 0.0)) throw InputError("grid step must be positive");
  if (!(t >= 0.0)) throw InputError("grid horizon must be nonnegative");
  if (q < 1) throw InputError("refinement factor q must be >= 1");
  if (!(alpha_max >= 0.0)) throw InputError("alpha_max must be nonnegative");
  const std::size_t rows = grid_count(t, step) + 1;
  const std::size_t cols = grid_count((1.0 + alpha_max) * t, step / q) + 1;
  const double slack = with_slack ? cell_slack(flow, step, q, alpha_max) : 0.0;
  return build_grid_shape(flow, x, y, step, q, rows, cols, slack);
}

struct AlignmentVerdict {
  bool feasible = false;
  std::optional<Warp> witness;
  double achieved_sup = std::numeric_limits<double>::infinity();  ///< sup of D along the witness
  double slack = 0.0;
  double threshold = 0.0;  ///< the bound grid entries were held to
  double step = 0.0;
  int q = 1;
};

inline Warp warp_from_path(const std::vector<long>& path, double step, int q) {
  if (path.size() < 2) return Warp::identity();
  std::vector<double> knots(path.size());
  std::vector<double> values(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    knots[i] = static_cast<double>(i) * step;
    values[i] = static_cast<double>(path[i]) * step / q;
  }
  return Warp(std::move(knots), std::move(values));
}

/// Feasibility of the whole grid under an arbitrary step band, with the
/// lexicographically smallest witness path.
inline std::optional<std::vector<long>> feasible_path(const DistanceGrid& grid, double threshold,
                                                      StepBand band) {
  auto ok = [&](long i, long j) {
    return grid.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) <= threshold;
  };
  const long last = static_cast<long>(grid.rows) - 1;
  LatticeReach r = lattice_reach(last, static_cast<long>(grid.cols) - 1, band, ok, true);
  if (r.deepest != last) return std::nullopt;
  return r.path;
}

inline AlignmentVerdict feasible(const DistanceGrid& grid, double eps, double alpha,
                                 SlackPolicy policy = SlackPolicy::conservative) {
  if (!(eps > 0.0)) throw InputError("feasible: eps must be positive");
  const StepBand band = rep_alpha_band(grid.q, alpha);
  AlignmentVerdict v;
  v.slack = grid.slack;
  v.threshold = policy == SlackPolicy::conservative ? eps - grid.slack : eps;
  v.step = grid.step;
  v.q = grid.q;
  auto path = feasible_path(grid, v.threshold, band);
  if (!path) return v;
  v.feasible = true;
  double sup = 0.0;
  for (std::size_t i = 0; i < path->size(); ++i)
    sup = std::max(sup, grid.at(i, static_cast<std::size_t>((*path)[i])));
  v.achieved_sup = sup;
  v.witness = warp_from_path(*path, grid.step, grid.q);
  return v;
}

/// Smallest eps (bisection, resolution 1e-4 * diameter) at which the grid is feasible.
inline double min_eps(const DistanceGrid& grid, double alpha,
                      SlackPolicy policy = SlackPolicy::conservative) {
  const double res = 1e-4 * grid.diameter;
  double hi = grid.diameter + (policy == SlackPolicy::conservative ? grid.slack : 0.0) + res;
  double lo = 0.0;
  while (hi - lo > res) {
    const double mid = 0.5 * (lo + hi);
    if (mid > 0.0 && feasible(grid, mid, alpha, policy).feasible)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// ---------------------------------------------------------------------------
// Ball membership
// ---------------------------------------------------------------------------

enum class BallSide { forward, two_sided };
enum class BallKind { classic, generalized };

struct BallQuery {
  PhasePoint center;
  double eps = 0.1;
  double alpha = 0.1;
  double horizon = 1.0;
  BallSide side = BallSide::forward;
  BallKind kind = BallKind::generalized;
};

inline void validate_query(const BallQuery& q) {
  if (!(q.eps > 0.0) || !std::isfinite(q.eps)) throw InputError("ball query: epsilon must be positive");
  if (!(q.alpha > 0.0 && q.alpha < 1.0)) throw InputError("ball query: alpha must lie in (0,1)");
  if (!(q.horizon > 0.0) || !std::isfinite(q.horizon)) throw InputError("ball query: horizon must be positive");
}

/// Lazily evaluated orbit phi_{sign * i * step}(base).
class OrbitCache {
 public:
  OrbitCache(const FlowSystem& flow, PhasePoint base, double step)
      : flow_(&flow), base_(std::move(base)), step_(step) {}

  const PhasePoint& at(long i) {
    const auto k = static_cast<std::size_t>(i);
    if (k >= have_.size()) {
      have_.resize(k + 1, 0);
      points_.resize(k + 1);
    }
    if (!have_[k]) {
      points_[k] = flow_map(*flow_, base_, static_cast<double>(i) * step_);
      have_[k] = 1;
    }
    return points_[k];
  }

 private:
  const FlowSystem* flow_;
  PhasePoint base_;
  double step_;
  std::vector<PhasePoint> points_;
  std::vector<char> have_;
};

/// Membership engine for one ball family at fixed (eps, alpha, kind, side,
/// step, q). One DP pass answers every horizon up to max_rows, because the
/// forward reachable set of row i depends only on rows <= i.
class BallOracle {
 public:
  BallOracle(const FlowSystem& flow, PhasePoint center, double eps, double alpha, BallKind kind,
             BallSide side, double step, int q, SlackPolicy policy = SlackPolicy::conservative)
      : flow_(flow), center_(std::move(center)), eps_(eps), alpha_(alpha), kind_(kind), side_(side),
        step_(step), q_(q), band_(rep_alpha_band(q, alpha)) {
    if (!(step > 0.0)) throw InputError("ball oracle: step must be positive");
    if (!(eps > 0.0)) throw InputError("ball oracle: epsilon must be positive");
    require_family(flow, center_);
    slack_ = cell_slack(flow, step, q, alpha);
    threshold_ = policy == SlackPolicy::conservative ? eps - slack_ : eps;
    forward_ = std::make_unique<OrbitCache>(flow_, center_, step);
    backward_ = std::make_unique<OrbitCache>(flow_, center_, -step);
  }

  static std::size_t rows_for(double horizon, double step) { return grid_count(horizon, step); }

  /// Materializes the centre orbit up to max_rows so that reach() and
  /// verdict() only read shared state and may run concurrently.
  void prepare(long max_rows) {
    for (long i = 0; i <= max_rows; ++i) {
      forward_->at(i);
      backward_->at(i);
    }
  }

  double slack() const noexcept { return slack_; }
  double threshold() const noexcept { return threshold_; }
  double step() const noexcept { return step_; }
  int q() const noexcept { return q_; }
  StepBand band() const noexcept { return band_; }
  const PhasePoint& center() const noexcept { return center_; }

  /// Number of rows (s = step, 2 step, ...) for which y stays in the ball:
  /// y belongs to the ball of horizon i*step iff reach(y) >= i. -1 when
  /// d(x, y) already exceeds the threshold. Two-sided balls take the min over
  /// the forward and backward half-grids, both anchored at h(0) = 0.
  long reach(const PhasePoint& y, long max_rows) {
    long r = half_reach(y, max_rows, +1, nullptr);
    if (side_ == BallSide::two_sided && r >= 0) r = std::min(r, half_reach(y, max_rows, -1, nullptr));
    return r;
  }

  AlignmentVerdict verdict(const PhasePoint& y, double horizon) {
    const long m = static_cast<long>(rows_for(horizon, step_));
    AlignmentVerdict v;
    v.slack = slack_;
    v.threshold = threshold_;
    v.step = step_;
    v.q = q_;
    std::vector<long> fwd, bwd;
    long r = half_reach(y, m, +1, &fwd);
    if (side_ == BallSide::two_sided && r >= m) r = std::min(r, half_reach(y, m, -1, &bwd));
    if (r < m) return v;
    v.feasible = true;
    std::vector<double> knots, values;
    for (std::size_t i = bwd.size(); i-- > 1;) {
      knots.push_back(-static_cast<double>(i) * step_);
      values.push_back(-static_cast<double>(bwd[i]) * step_ / q_);
    }
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      knots.push_back(static_cast<double>(i) * step_);
      values.push_back(static_cast<double>(fwd[i]) * step_ / q_);
    }
    if (knots.size() < 2) {
      v.witness = Warp::identity();
    } else {
      v.witness = Warp(knots, values);
    }
    double sup = 0.0;
    for (std::size_t k = 0; k < knots.size(); ++k)
      sup = std::max(sup, distance(flow_, flow_map(flow_, center_, knots[k]), flow_map(flow_, y, values[k])));
    v.achieved_sup = sup;
    return v;
  }

  /// Reachable end columns at row m (forward half only): every lattice witness
  /// endpoint h(m*step) = j*step/q, for the given band.
  std::vector<long> end_columns(const PhasePoint& y, long m, StepBand band) {
    OrbitCache ys(flow_, y, step_ / q_);
    auto ok = [&](long i, long j) { return within(flow_, forward_->at(i), ys.at(j), threshold_); };
    LatticeReach r = lattice_reach(m, m * band.hi, band, ok, false);
    if (r.deepest < m) return {};
    return r.last_row;
  }

 private:
  long half_reach(const PhasePoint& y, long max_rows, int sign, std::vector<long>* path) {
    OrbitCache& xs = sign > 0 ? *forward_ : *backward_;
    if (kind_ == BallKind::classic) {
      OrbitCache ys(flow_, y, sign * step_);
      long i = 0;
      if (!within(flow_, xs.at(0), ys.at(0), threshold_)) return -1;
      while (i < max_rows && within(flow_, xs.at(i + 1), ys.at(i + 1), threshold_)) ++i;
      if (path) {
        path->resize(static_cast<std::size_t>(i + 1));
        for (long k = 0; k <= i; ++k) (*path)[static_cast<std::size_t>(k)] = k * q_;
      }
      return i;
    }
    OrbitCache ys(flow_, y, sign * step_ / q_);
    auto ok = [&](long i, long j) { return within(flow_, xs.at(i), ys.at(j), threshold_); };
    LatticeReach r = lattice_reach(max_rows, max_rows * band_.hi, band_, ok, path != nullptr);
    if (path) *path = std::move(r.path);
    return r.deepest;
  }

  const FlowSystem& flow_;
  PhasePoint center_;
  double eps_;
  double alpha_;
  BallKind kind_;
  BallSide side_;
  double step_;
  int q_;
  StepBand band_;
  double slack_ = 0.0;
  double threshold_ = 0.0;
  std::unique_ptr<OrbitCache> forward_;
  std::unique_ptr<OrbitCache> backward_;
};

/// Classic kind: h = identity. Generalized kind: slope-constrained DP.
/// Two-sided: forward and backward half-grids glued at s = 0.
inline AlignmentVerdict ball_membership(const FlowSystem& flow, const PhasePoint& x, const PhasePoint& y,
                                        const BallQuery& query, double step, int q,
                                        SlackPolicy policy = SlackPolicy::conservative) {
  validate_query(query);
  require_family(flow, x);
  require_family(flow, y);
  BallOracle oracle(flow, x, query.eps, query.alpha, query.kind, query.side, step, q, policy);
  return oracle.verdict(y, query.horizon);
}

// ---------------------------------------------------------------------------
// Horizon forcing
// ---------------------------------------------------------------------------

/// Pair of nearby points used to probe how strongly closeness forces h(T) ~ T.
struct PointPair {
  PhasePoint x;
  PhasePoint y;
};

/// Random pairs: x from the uniform probe law, y a perturbation of x of size
/// up to `radius` (spatial offset plus time shift; on the suspension the
/// symbols agree with x around the orbit segment and are fresh elsewhere).
inline std::vector<PointPair> near_pairs(const FlowSystem& flow, std::size_t count, double radius, double horizon,
                                         std::uint64_t seed, std::string_view stream = "pairs") {
  std::vector<PointPair> out(count);
  parallel_for(count, [&](std::size_t i) {
    Rng rng(substream(seed, stream, i));
    PhasePoint x = random_point(flow, rng);
    PhasePoint y;
    if (flow.family() == FlowFamily::torus_linear) {
      const auto& p = std::get<TorusPoint>(x);
      const double du = rng.uniform(-radius, radius);
      const double dv = rng.uniform(-radius, radius);
      y = make_torus_point(p.u + du, p.v + dv);
    } else {
      const auto& p = std::get<SuspensionPoint>(x);
      const int margin = detail::agreement_needed(radius / 4.0, flow.probe_window()) + 2;
      const auto hi = p.offset + static_cast<std::int64_t>(std::ceil(horizon + radius)) + margin;
      auto seq = SymbolSequence::splice(p.sequence, p.offset - margin, hi, rng.next());
      y = make_suspension_point(std::move(seq), p.roof, p.offset);
    }
    y = flow_map(flow, y, rng.uniform(-radius, radius));
    out[i] = {std::move(x), std::move(y)};
  });
  return out;
}

struct ForcingLevel {
  double eps = 0.0;
  std::size_t feasible_pairs = 0;  ///< pairs with some unconstrained warp at radius eps
  std::size_t violations = 0;      ///< pairs with an end column outside [(1-alpha)T, (1+alpha)T]
  double worst_ratio = 1.0;        ///< h(T)/T farthest from 1 over all witnesses
};

struct ForcingReport {
  double horizon = 0.0;
  double alpha = 0.0;
  std::vector<ForcingLevel> levels;
  std::optional<double> eps0;  ///< largest eps on the grid with no violation (and all smaller ones clean)
};

/// For each eps, every lattice warp with slopes in [1/q, max_slope] keeping
/// d(phi_s x, phi_{h(s)} y) <= eps on the grid over [0, T] is checked for
/// |h(T)/T - 1| <= alpha.
inline ForcingReport horizon_forcing(const FlowSystem& flow, const std::vector<PointPair>& pairs,
                                     std::vector<double> eps_grid, double horizon, double alpha, double step, int q,
                                     double max_slope = 3.0) {
  if (eps_grid.empty()) throw InputError("horizon_forcing: epsilon grid is empty");
  if (!(horizon > 0.0)) throw InputError("horizon_forcing: horizon must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("horizon_forcing: alpha must lie in (0,1)");
  std::sort(eps_grid.begin(), eps_grid.end());
  ForcingReport rep;
  rep.horizon = horizon;
  rep.alpha = alpha;
  const StepBand band = rep_band(q, max_slope);
  const long m = static_cast<long>(BallOracle::rows_for(horizon, step));
  const double t_grid = static_cast<double>(m) * step;
  bool clean = true;
  for (double eps : eps_grid) {
    ForcingLevel lvl;
    lvl.eps = eps;
    std::vector<char> feas(pairs.size(), 0), bad(pairs.size(), 0);
    std::vector<double> worst(pairs.size(), 1.0);
    parallel_for(pairs.size(), [&](std::size_t i) {
      BallOracle oracle(flow, pairs[i].x, eps, 0.5, BallKind::generalized, BallSide::forward, step, q,
                        SlackPolicy::grid);
      oracle.prepare(m);
      const auto ends = oracle.end_columns(pairs[i].y, m, band);
      if (ends.empty()) return;
      feas[i] = 1;
      for (long j : ends) {
        const double ratio = static_cast<double>(j) * step / q / t_grid;
        if (std::abs(ratio - 1.0) > std::abs(worst[i] - 1.0)) worst[i] = ratio;
        if (std::abs(ratio - 1.0) > alpha + 1e-12) bad[i] = 1;
      }
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      lvl.feasible_pairs += feas[i];
      lvl.violations += bad[i];
      if (std::abs(worst[i] - 1.0) > std::abs(lvl.worst_ratio - 1.0)) lvl.worst_ratio = worst[i];
    }
    clean = clean && lvl.violations == 0;
    if (clean) rep.eps0 = eps;
    rep.levels.push_back(lvl);
  }
  return rep;
}

}  // namespace expanse
