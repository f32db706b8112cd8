#pragma once

// Entropy estimates: Katok covering numbers for the time-one map, Brin-Katok
// decay curves of generalized forward balls, and the signature cover of a
// generalized forward ball by discrete Bowen balls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "align.hpp"
#include "errors.hpp"
#include "flows.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "warp.hpp"

namespace expanse {

// ---------------------------------------------------------------------------
// Katok estimator
// ---------------------------------------------------------------------------

struct KatokCell {
  double eps = 0.0;
  int n = 0;
  long cover_size = 0;  ///< S(n, delta, eps, phi_1)
  double log_cover = 0.0;
  bool in_fit = false;
};

struct KatokRate {
  double eps = 0.0;
  double rate = 0.0;  ///< slope of log S vs n
  double intercept = 0.0;
  double r2 = 0.0;
  int n_lo = 0;
  int n_hi = 0;
};

struct EntropyEstimate {
  std::vector<KatokCell> cells;
  std::vector<KatokRate> rates;
  double rate_at_smallest_eps = 0.0;
  double rate_spread = 0.0;  ///< max - min of the fitted rates across the eps grid
  std::vector<std::string> warnings;
  double delta = 0.0;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
};

struct KatokConfig {
  double delta = 0.1;
  std::vector<double> eps_grid;
  std::vector<int> n_grid;
  std::size_t sample_size = 0;  ///< 0 = all samples of the measure
  std::uint64_t seed = 1;
  double fit_fraction = 0.125;  ///< fit n with S(n) <= fit_fraction * (covered target)
};

namespace detail {

// Coordinate whose circular gap bounds the distance from below: u on the
// torus, the roof height on the suspension.
inline double sort_key(const PhasePoint& p) {
  if (const auto* t = std::get_if<TorusPoint>(&p)) return t->u;
  return std::get<SuspensionPoint>(p).roof;
}

/// Symmetric eps-neighbour lists (sorted, including i itself) at time zero.
inline std::vector<std::vector<std::uint32_t>> neighbour_lists(const FlowSystem& flow,
                                                               const std::vector<PhasePoint>& pts,
                                                               double eps) {
  const std::size_t n = pts.size();
  std::vector<double> key(n);
  for (std::size_t i = 0; i < n; ++i) key[i] = sort_key(pts[i]);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return key[a] < key[b] || (key[a] == key[b] && a < b);
  });
  std::vector<double> sorted(n);
  for (std::size_t k = 0; k < n; ++k) sorted[k] = key[order[k]];
  std::vector<std::vector<std::uint32_t>> out(n);
  const bool everything = eps >= 0.5;
  parallel_for(n, [&](std::size_t i) {
    auto& list = out[i];
    auto test = [&](std::uint32_t j) {
      if (j == i || within(flow, pts[i], pts[j], eps)) list.push_back(j);
    };
    if (everything) {
      for (std::uint32_t j = 0; j < n; ++j) test(j);
    } else {
      // Candidates with key in [k - eps, k + eps] modulo 1.
      auto scan = [&](double lo, double hi) {
        auto a = std::lower_bound(sorted.begin(), sorted.end(), lo);
        auto b = std::upper_bound(sorted.begin(), sorted.end(), hi);
        for (auto it = a; it < b; ++it) test(order[static_cast<std::size_t>(it - sorted.begin())]);
      };
      const double k = key[i];
      scan(std::max(0.0, k - eps), std::min(1.0, k + eps));
      if (k - eps < 0.0) scan(k - eps + 1.0, 1.0);
      if (k + eps > 1.0) scan(0.0, k + eps - 1.0);
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  });
  return out;
}

/// Greedy cover: repeatedly take the ball covering the most uncovered points
/// (lowest index on ties) until `target` points are covered.
inline long greedy_cover(const std::vector<std::vector<std::uint32_t>>& nbrs, std::size_t target) {
  const std::size_t n = nbrs.size();
  std::vector<char> covered(n, 0);
  using Entry = std::pair<std::size_t, std::int64_t>;  // (gain, -index)
  std::priority_queue<Entry> heap;
  for (std::size_t i = 0; i < n; ++i) heap.push({nbrs[i].size(), -static_cast<std::int64_t>(i)});
  std::size_t done = 0;
  long picks = 0;
  while (done < target && !heap.empty()) {
    const auto [stored, neg] = heap.top();
    heap.pop();
    const auto i = static_cast<std::size_t>(-neg);
    std::size_t gain = 0;
    for (auto j : nbrs[i]) gain += covered[j] ? 0 : 1;
    if (gain == 0) continue;
    if (gain < stored) {
      heap.push({gain, neg});
      continue;
    }
    for (auto j : nbrs[i]) covered[j] = 1;
    done += gain;
    ++picks;
  }
  return picks;
}

}  // namespace detail

/// Katok covering rates for f = phi_1: for each (eps, n), the number of
/// (n, eps, f)-balls centred at samples that the greedy pass needs to cover
/// all but the ceil(delta N) last-covered samples.
inline EntropyEstimate katok_entropy(const FlowSystem& flow, const EmpiricalMeasure& mu, const KatokConfig& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw InputError("katok_entropy: delta must lie in (0,1)");
  if (cfg.eps_grid.empty()) throw InputError("katok_entropy: epsilon grid is empty");
  if (cfg.n_grid.size() < 2) throw InputError("katok_entropy: n grid needs at least two values");
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    if (cfg.n_grid[k] < 1) throw InputError("katok_entropy: n values must be >= 1");
    if (k > 0 && cfg.n_grid[k] <= cfg.n_grid[k - 1]) throw InputError("katok_entropy: n grid must be increasing");
  }
  for (double e : cfg.eps_grid)
    if (!(e > 0.0)) throw InputError("katok_entropy: epsilon must be positive");
  if (mu.size() == 0) throw InputError("katok_entropy: empty measure");

  // Subsample by a seeded permutation when fewer points are requested.
  std::vector<PhasePoint> pts;
  if (cfg.sample_size == 0 || cfg.sample_size >= mu.size()) {
    pts = mu.samples;
  } else {
    std::vector<std::size_t> idx(mu.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(substream(cfg.seed, "katok-subsample"));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    idx.resize(cfg.sample_size);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) pts.push_back(mu.samples[i]);
  }
  const std::size_t n_pts = pts.size();
  const auto drop = static_cast<std::size_t>(std::ceil(cfg.delta * static_cast<double>(n_pts) - 1e-9));
  const std::size_t target = n_pts - std::min(drop, n_pts - 1);
  const int max_n = cfg.n_grid.back();

  // f^k orbits at integer times.
  std::vector<std::vector<PhasePoint>> orbit(static_cast<std::size_t>(max_n));
  for (int k = 0; k < max_n; ++k) {
    orbit[static_cast<std::size_t>(k)].resize(n_pts);
    parallel_for(n_pts, [&](std::size_t i) {
      orbit[static_cast<std::size_t>(k)][i] = k == 0 ? pts[i] : flow_map(flow, pts[i], static_cast<double>(k));
    });
  }

  EntropyEstimate est;
  est.delta = cfg.delta;
  est.sample_size = n_pts;
  est.seed = cfg.seed;
  std::vector<double> sorted_eps = cfg.eps_grid;
  std::sort(sorted_eps.begin(), sorted_eps.end());
  std::map<std::pair<double, int>, long> cover_of;

  for (double eps : sorted_eps) {
    auto nbrs = detail::neighbour_lists(flow, orbit[0], eps);
    int have = 1;  // nbrs currently describe the ball over times 0..have-1
    std::vector<KatokCell> row;
    for (int n : cfg.n_grid) {
      for (; have < n; ++have) {
        const auto& level = orbit[static_cast<std::size_t>(have)];
        parallel_for(n_pts, [&](std::size_t i) {
          auto& list = nbrs[i];
          std::size_t w = 0;
          for (auto j : list)
            if (j == i || within(flow, level[i], level[j], eps)) list[w++] = j;
          list.resize(w);
          list.shrink_to_fit();
        });
      }
      const long s = detail::greedy_cover(nbrs, target);
      row.push_back({eps, n, s, std::log(static_cast<double>(s)), false});
      cover_of[{eps, n}] = s;
    }
    // Fit over the unsaturated range.
    std::vector<double> xs, ys;
    for (auto& c : row) {
      if (static_cast<double>(c.cover_size) <= cfg.fit_fraction * static_cast<double>(target)) {
        c.in_fit = true;
        xs.push_back(c.n);
        ys.push_back(c.log_cover);
      }
    }
    if (xs.size() < 2) {
      xs.clear();
      ys.clear();
      for (std::size_t k = 0; k < row.size(); ++k) row[k].in_fit = k < 2;
      for (std::size_t k = 0; k < 2; ++k) {
        xs.push_back(row[k].n);
        ys.push_back(row[k].log_cover);
      }
    }
    const LineFit fit = fit_line(xs, ys);
    est.rates.push_back({eps, fit.slope, fit.intercept, fit.r2, static_cast<int>(xs.front()),
                         static_cast<int>(xs.back())});
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k].cover_size < row[k - 1].cover_size) {
        std::ostringstream w;
        w << "S decreased in n at eps=" << eps << ", n=" << row[k].n;
        est.warnings.push_back(w.str());
      }
    est.cells.insert(est.cells.end(), row.begin(), row.end());
  }
  for (std::size_t e = 1; e < sorted_eps.size(); ++e)
    for (int n : cfg.n_grid)
      if (cover_of[{sorted_eps[e], n}] > cover_of[{sorted_eps[e - 1], n}]) {
        std::ostringstream w;
        w << "S increased in eps at n=" << n << ", eps=" << sorted_eps[e];
        est.warnings.push_back(w.str());
      }
  for (std::size_t e = 1; e < est.rates.size(); ++e)
    if (est.rates[e].rate > est.rates[e - 1].rate + 1e-12) {
      std::ostringstream w;
      w << "rate increased in eps at eps=" << est.rates[e].eps;
      est.warnings.push_back(w.str());
    }
  est.rate_at_smallest_eps = est.rates.front().rate;
  double lo = est.rates.front().rate, hi = lo;
  for (const auto& r : est.rates) {
    lo = std::min(lo, r.rate);
    hi = std::max(hi, r.rate);
  }
  est.rate_spread = hi - lo;
  return est;
}

inline void write_katok_csv(std::ostream& os, const EntropyEstimate& e) {
  os << "epsilon,n,S,log_S,in_fit\n";
  for (const auto& c : e.cells)
    os << fmt_double(c.eps) << ',' << c.n << ',' << c.cover_size << ',' << fmt_double(c.log_cover) << ','
       << (c.in_fit ? 1 : 0) << '\n';
}

inline void write_katok_rates_csv(std::ostream& os, const EntropyEstimate& e) {
  os << "epsilon,rate,r2,n_lo,n_hi,delta,N,seed\n";
  for (const auto& r : e.rates)
    os << fmt_double(r.eps) << ',' << fmt_double(r.rate) << ',' << fmt_double(r.r2) << ',' << r.n_lo << ','
       << r.n_hi << ',' << fmt_double(e.delta) << ',' << e.sample_size << ',' << e.seed << '\n';
}

// ---------------------------------------------------------------------------
// Brin-Katok curves
// ---------------------------------------------------------------------------

struct BrinKatokCurve {
  std::vector<double> t;
  std::vector<double> mass;
  std::vector<double> rate;       ///< -log(mass)/t, NaN when censored
  std::vector<char> censored;     ///< mass below 1/N_eff
  double slope = std::numeric_limits<double>::quiet_NaN();  ///< slope of -log(mass) vs t
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t fit_points = 0;
  double n_effective = 0.0;
};

/// Masses of forward generalized balls (alpha = eps) around x along t_grid.
inline BrinKatokCurve brin_katok_curve(const FlowSystem& flow, const EmpiricalMeasure& mu, const PhasePoint& x,
                                       double eps, std::vector<double> t_grid, double step, int q,
                                       SlackPolicy policy = SlackPolicy::grid) {
  if (t_grid.empty()) throw InputError("brin_katok_curve: t grid is empty");
  std::sort(t_grid.begin(), t_grid.end());
  BrinKatokCurve c;
  c.t = t_grid;
  c.n_effective = mu.effective_size();
  c.mass = ball_masses(mu, flow, x, eps, eps, BallKind::generalized, BallSide::forward, t_grid, step, q, policy);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const bool cens = !(c.mass[k] > 0.0);
    c.censored.push_back(cens);
    c.rate.push_back(cens ? std::numeric_limits<double>::quiet_NaN() : -std::log(c.mass[k]) / t_grid[k]);
  }
  if (auto fit = detail::censored_prefix_fit(c.t, c.mass)) {
    c.slope = fit->slope;
    c.intercept = fit->intercept;
    c.r2 = fit->r2;
    c.fit_points = fit->points;
  }
  return c;
}

struct BrinKatokRate {
  double rate = std::numeric_limits<double>::quiet_NaN();  ///< mean per-centre slope
  double stderr_ = 0.0;
  std::vector<double> slopes;  ///< per centre, NaN if fewer than two uncensored horizons
  std::size_t fitted = 0;
};

/// Mean Brin-Katok slope over centres drawn from mu.
inline BrinKatokRate brin_katok_rate(const FlowSystem& flow, const EmpiricalMeasure& mu, double eps,
                                     const std::vector<double>& t_grid, std::size_t centers, double step, int q,
                                     std::uint64_t seed, SlackPolicy policy = SlackPolicy::grid) {
  BrinKatokRate out;
  const auto xs = draw_centers(flow, mu, centers, seed);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& x : xs) {
    const auto c = brin_katok_curve(flow, mu, x, eps, t_grid, step, q, policy);
    out.slopes.push_back(c.slope);
    if (std::isfinite(c.slope)) {
      sum += c.slope;
      sum2 += c.slope * c.slope;
      ++out.fitted;
    }
  }
  if (out.fitted) {
    const double m = sum / static_cast<double>(out.fitted);
    out.rate = m;
    const double var = out.fitted > 1 ? (sum2 - out.fitted * m * m) / static_cast<double>(out.fitted - 1) : 0.0;
    out.stderr_ = std::sqrt(std::max(0.0, var) / static_cast<double>(out.fitted));
  }
  return out;
}

inline void write_bk_csv(std::ostream& os, const BrinKatokCurve& c) {
  os << "t,mass,neglog_mass_over_t,censored\n";
  for (std::size_t k = 0; k < c.t.size(); ++k) {
    os << fmt_double(c.t[k]) << ',';
    if (c.censored[k])
      os << '<' << fmt_double(1.0 / c.n_effective) << ",,1\n";
    else
      os << fmt_double(c.mass[k]) << ',' << fmt_double(c.rate[k]) << ",0\n";
  }
}

// ---------------------------------------------------------------------------
// Signature cover of a generalized forward ball
// ---------------------------------------------------------------------------

/// A point y of the generalized forward ball around x, with a witness g in
/// Rep(alpha) such that d(phi_s y, phi_{g(s)} x) <= delta on [0, t].
struct CoverMember {
  PhasePoint point;
  Warp witness;
};

struct FlaggedMember {
  std::size_t member = 0;
  GammaSignature signature;
  std::string reason;
};

struct CoverResult {
  std::vector<std::size_t> centers;          ///< member indices of the representatives
  std::vector<GammaSignature> signatures;    ///< one per representative
  std::vector<std::size_t> group_sizes;
  std::vector<std::size_t> assignment;       ///< member -> representative slot
  std::size_t count = 0;                     ///< ell
  std::uint64_t bound = 1;                   ///< 3^(n-1)
  double covered_fraction = 0.0;
  std::vector<FlaggedMember> flagged;
  int n = 0;
  double alpha = 0.0;
  double theta = 0.0;
};

/// alpha = min(theta(eps/6) / (3L), eps/6).
inline double cover_alpha(const FlowSystem& flow, double eps, double block, const ProbeConfig& probes = {}) {
  const double theta = theta_for(flow, eps / 6.0, probes);
  return std::min(theta / (3.0 * block), eps / 6.0);
}

inline int cover_blocks(double t, double block) {
  const double r = t / block;
  return static_cast<int>(std::floor(r + 1e-9 * std::max(1.0, r)));
}

/// Members of the forward ball around x: perturbations of x verified by the
/// alignment DP, each with its lexicographically smallest witness.
inline std::vector<CoverMember> cover_members(const FlowSystem& flow, const PhasePoint& x, double delta, double t,
                                              double alpha, std::size_t count, double step, int q,
                                              std::uint64_t seed, std::size_t max_candidates = 0) {
  require_family(flow, x);
  if (!(delta > 0.0)) throw InputError("cover_members: delta must be positive");
  if (max_candidates == 0) max_candidates = 20 * count + 100;
  std::vector<CoverMember> out;
  const std::size_t batch = std::max<std::size_t>(64, count);
  const long rows = static_cast<long>(BallOracle::rows_for(t, step));
  for (std::size_t start = 0; out.size() < count && start < max_candidates; start += batch) {
    const std::size_t m = std::min(batch, max_candidates - start);
    std::vector<std::optional<CoverMember>> got(m);
    parallel_for(m, [&](std::size_t k) {
      Rng rng(substream(seed, "cover-members", start + k));
      PhasePoint y;
      if (const auto* tp = std::get_if<TorusPoint>(&x)) {
        const double r = delta * std::sqrt(rng.uniform());
        const double a = 2.0 * 3.14159265358979323846 * rng.uniform();
        y = make_torus_point(tp->u + r * std::cos(a), tp->v + r * std::sin(a));
      } else {
        const auto& sp = std::get<SuspensionPoint>(x);
        const int margin = detail::agreement_needed(delta / 2.0, flow.probe_window()) + 2;
        const auto hi = sp.offset + static_cast<std::int64_t>(std::ceil(t)) + margin;
        auto seq = SymbolSequence::splice(sp.sequence, sp.offset - margin, hi, rng.next());
        const double shift = rng.uniform(-delta, delta);
        y = make_suspension_point(std::move(seq), sp.roof + shift, sp.offset);
      }
      BallOracle oracle(flow, y, delta, alpha, BallKind::generalized, BallSide::forward, step, q,
                        SlackPolicy::grid);
      oracle.prepare(rows);
      auto v = oracle.verdict(x, t);
      if (v.feasible && v.witness) got[k] = CoverMember{std::move(y), std::move(*v.witness)};
    });
    for (auto& g : got)
      if (g && out.size() < count) out.push_back(std::move(*g));
  }
  return out;
}

/// Groups members by the gamma signature of their witness, keeps the first
/// member of each group as its representative, and re-verifies every member
/// against its representative at the integer times 0, 1, ..., floor(nL).
inline CoverResult cover_generalized_ball(const FlowSystem& flow, const PhasePoint& x, double delta, double t,
                                          double eps, double block, const std::vector<CoverMember>& members,
                                          double step, int q, const ProbeConfig& probes = {}) {
  (void)step;
  (void)q;
  (void)delta;
  require_family(flow, x);
  if (!(block >= 1.0)) throw InputError("cover: L must be >= 1");
  if (!(eps > 0.0)) throw InputError("cover: epsilon must be positive");
  if (!(t > 0.0)) throw InputError("cover: t must be positive");
  CoverResult res;
  res.n = cover_blocks(t, block);
  if (res.n < 1) throw InputError("cover: t must be at least L");
  res.theta = theta_for(flow, eps / 6.0, probes);
  res.alpha = std::min(res.theta / (3.0 * block), eps / 6.0);
  for (int k = 1; k < res.n; ++k) res.bound *= 3;

  std::map<GammaSignature, std::size_t> slot_of;
  res.assignment.assign(members.size(), static_cast<std::size_t>(-1));
  std::vector<char> usable(members.size(), 0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = members[i];
    require_family(flow, m.point);
    if (slope_class(m.witness) > res.alpha * (1.0 + 1e-9) + 1e-12) {
      res.flagged.push_back({i, {}, "witness slope class exceeds alpha"});
      continue;
    }
    GammaSignature sig;
    try {
      sig = gamma_signature(m.witness, block, res.alpha, res.n, t);
    } catch (const InputError& e) {
      res.flagged.push_back({i, {}, e.what()});
      continue;
    }
    auto [it, fresh] = slot_of.try_emplace(sig, res.centers.size());
    if (fresh) {
      res.centers.push_back(i);
      res.signatures.push_back(sig);
      res.group_sizes.push_back(0);
    }
    res.assignment[i] = it->second;
    ++res.group_sizes[it->second];
    usable[i] = 1;
  }
  res.count = res.centers.size();

  const int last_time = static_cast<int>(std::floor(res.n * block + 1e-9));
  std::vector<char> ok(members.size(), 0);
  parallel_for(members.size(), [&](std::size_t i) {
    if (!usable[i]) return;
    const auto& rep = members[res.centers[res.assignment[i]]].point;
    bool good = true;
    for (int k = 0; k <= last_time && good; ++k)
      good = within(flow, flow_map(flow, members[i].point, k), flow_map(flow, rep, k), eps);
    ok[i] = good;
  });
  std::size_t covered = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (ok[i]) {
      ++covered;
    } else if (usable[i]) {
      res.flagged.push_back({i, res.signatures[res.assignment[i]], "not within eps of its representative"});
    }
  }
  std::sort(res.flagged.begin(), res.flagged.end(),
            [](const FlaggedMember& a, const FlaggedMember& b) { return a.member < b.member; });
  res.covered_fraction = members.empty() ? 1.0 : static_cast<double>(covered) / static_cast<double>(members.size());
  return res;
}

inline std::string signature_text(const GammaSignature& s) {
  std::string out;
  for (std::size_t k = 0; k < s.entries.size(); ++k) {
    if (k) out += ' ';
    out += std::to_string(s.entries[k]);
  }
  return out;
}

inline void write_cover_csv(std::ostream& os, const CoverResult& r) {
  os << "representative,member_index,group_size,signature\n";
  for (std::size_t k = 0; k < r.centers.size(); ++k)
    os << k << ',' << r.centers[k] << ',' << r.group_sizes[k] << ',' << signature_text(r.signatures[k]) << '\n';
}

}  // namespace expanse
