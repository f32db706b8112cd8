#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "expanse/align.hpp"
#include "expanse/random.hpp"

using namespace expanse;

namespace {

DistanceGrid random_grid(Rng& rng, std::size_t rows, std::size_t cols, int q) {
  DistanceGrid g;
  g.step = 0.1;
  g.q = q;
  g.rows = rows;
  g.cols = cols;
  g.diameter = 1.0;
  g.entries.resize(rows * cols);
  for (auto& e : g.entries) e = rng.uniform();
  return g;
}

// Depth-first enumeration of every admissible monotone path, in
// lexicographic order; returns the first complete one.
std::optional<std::vector<long>> brute_path(const DistanceGrid& g, double thr, StepBand band) {
  std::vector<long> path{0};
  std::optional<std::vector<long>> found;
  std::function<void()> dfs = [&] {
    if (found) return;
    const auto i = path.size() - 1;
    if (g.at(i, static_cast<std::size_t>(path.back())) > thr) return;
    if (path.size() == g.rows) {
      found = path;
      return;
    }
    for (long d = band.lo; d <= band.hi && !found; ++d) {
      const long j = path.back() + d;
      if (j >= static_cast<long>(g.cols)) break;
      path.push_back(j);
      dfs();
      path.pop_back();
    }
  };
  dfs();
  return found;
}

PhasePoint near_suspension(const FlowSystem& flow, Rng& rng, const PhasePoint& x, int keep, double roof_jitter) {
  const auto& sx = std::get<SuspensionPoint>(x);
  auto seq = SymbolSequence::splice(sx.sequence, sx.offset - keep, sx.offset + keep, rng.next());
  (void)flow;
  return make_suspension_point(seq, sx.roof + rng.uniform(-roof_jitter, roof_jitter), sx.offset);
}

}  // namespace

TEST(Bands, RepAlpha) {
  EXPECT_EQ(rep_alpha_band(5, 0.2), (StepBand{4, 6}));
  EXPECT_EQ(rep_alpha_band(4, 0.1), (StepBand{4, 4}));
  EXPECT_EQ(rep_alpha_band(1, 0.9), (StepBand{1, 1}));
  EXPECT_EQ(rep_band(5, 3.0), (StepBand{1, 15}));
  EXPECT_THROW(rep_alpha_band(0, 0.5), InputError);
  EXPECT_THROW(rep_alpha_band(3, 1.0), InputError);
}

TEST(Grid, CornerIsPointDistance) {
  const auto flow = FlowSystem::suspension(2);
  Rng rng(substream(1, "corner"));
  const auto x = random_point(flow, rng);
  const auto y = random_point(flow, rng);
  const auto g = build_grid(flow, x, y, 0.1, 2.0, 3);
  EXPECT_EQ(g.at(0, 0), distance(flow, x, y));
  EXPECT_EQ(g.rows, 21u);
  EXPECT_EQ(g.cols, grid_count(4.0, 0.1 / 3) + 1);
}

TEST(Grid, TransposeSymmetry) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    Rng rng(substream(2, "transpose"));
    const auto x = random_point(flow, rng);
    const auto y = flow_map(flow, x, 0.05);
    const auto a = build_grid_shape(flow, x, y, 0.1, 1, 15, 15);
    const auto b = build_grid_shape(flow, y, x, 0.1, 1, 15, 15);
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j) ASSERT_EQ(a.at(i, j), b.at(j, i));
  }
}

TEST(Grid, TransverseOffsetClosedForm) {
  const auto flow = FlowSystem::torus(1.0, 0.0);
  const double w = 0.3;
  const PhasePoint x = TorusPoint{0.2, 0.1};
  const PhasePoint y = TorusPoint{0.2, 0.4};
  const auto g = build_grid(flow, x, y, 0.1, 3.0, 2);
  for (std::size_t i = 0; i < g.rows; ++i) {
    double best = 1e9;
    for (std::size_t j = 0; j < g.cols; ++j) {
      ASSERT_GE(g.at(i, j), w - 1e-12);
      best = std::min(best, g.at(i, j));
    }
    ASSERT_NEAR(best, w, 1e-12);
  }
}

TEST(Feasible, IdenticalOrbits) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    Rng rng(substream(3, "identical"));
    const auto x = random_point(flow, rng);
    const auto g = build_grid(flow, x, x, 0.1, 4.0, 4, 0.5);
    for (double eps : {g.slack + 1e-9, g.slack + 0.01, 0.5}) {
      const auto v = feasible(g, eps, 0.3);
      ASSERT_TRUE(v.feasible) << eps;
      ASSERT_TRUE(v.witness.has_value());
      EXPECT_LE(v.achieved_sup, eps - g.slack + 1e-12);
    }
    // At the tightest radius only the diagonal survives.
    const auto tight = feasible(g, g.slack + 1e-9, 0.3);
    for (std::size_t k = 0; k < tight.witness->size(); ++k)
      EXPECT_EQ(tight.witness->values()[k], tight.witness->knots()[k]);
    EXPECT_EQ(tight.achieved_sup, 0.0);
    EXPECT_LE(min_eps(g, 0.3, SlackPolicy::grid), 1e-4 * g.diameter + 1e-15);
    EXPECT_NEAR(min_eps(g, 0.3), g.slack, 1e-4 * g.diameter + 1e-12);
  }
}

TEST(Feasible, TransverseOffsetIsInfeasible) {
  const auto flow = FlowSystem::torus(1.0, 0.0);
  const PhasePoint x = TorusPoint{0.2, 0.1};
  const PhasePoint y = TorusPoint{0.2, 0.4};
  const auto g = build_grid(flow, x, y, 0.1, 3.0, 4);
  for (double a : {0.05, 0.3, 0.6, 0.95}) EXPECT_FALSE(feasible(g, 0.1, a).feasible);
  const double m = min_eps(g, 0.5);
  EXPECT_NEAR(m, 0.3 + g.slack, 2e-4 * g.diameter);
}

TEST(Feasible, MatchesExhaustiveEnumeration) {
  Rng rng(substream(4, "oracle"));
  int mismatches = 0;
  for (int seed = 0; seed < 300; ++seed) {
    const std::size_t rows = 1 + rng.below(6);
    const int q = 1 + static_cast<int>(rng.below(2));
    const std::size_t cols = 1 + rng.below(rows * 3 * q + 2);
    const auto g = random_grid(rng, rows, cols, q);
    const double thr = rng.uniform(0.3, 1.0);
    const double alpha = rng.uniform(0.05, 0.95);
    const StepBand band = rep_alpha_band(q, alpha);
    const auto dp = feasible(g, thr, alpha, SlackPolicy::grid);
    const auto brute = brute_path(g, thr, band);
    if (dp.feasible != brute.has_value()) ++mismatches;
    if (brute && dp.feasible) {
      const auto path = feasible_path(g, thr, band);
      ASSERT_TRUE(path.has_value());
      EXPECT_EQ(*path, *brute) << "lexicographic witness differs, seed " << seed;
    }
    // Unconstrained band as well.
    const StepBand wide = rep_band(q, 3.0);
    if (feasible_path(g, thr, wide).has_value() != brute_path(g, thr, wide).has_value()) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(Feasible, WitnessReplays) {
  const auto flow = FlowSystem::suspension(2);
  Rng rng(substream(5, "replay"));
  int feasible_count = 0;
  for (int i = 0; i < 200; ++i) {
    const auto x = random_point(flow, rng);
    const auto y = flow_map(flow, near_suspension(flow, rng, x, 12, 0.05), rng.uniform(-0.05, 0.05));
    const double alpha = 0.2;
    const auto g = build_grid(flow, x, y, 0.1, 5.0, 5, alpha);
    const double eps = 0.3;
    const auto v = feasible(g, eps, alpha);
    if (!v.feasible) continue;
    ++feasible_count;
    ASSERT_LE(slope_class(*v.witness), alpha + 1e-9);
    for (std::size_t r = 0; r < g.rows; ++r) {
      const double s = static_cast<double>(r) * g.step;
      const double d = distance(flow, flow_map(flow, x, s), flow_map(flow, y, (*v.witness)(s)));
      ASSERT_LE(d, eps - g.slack + 1e-12);
    }
  }
  EXPECT_GT(feasible_count, 20);
}

TEST(Feasible, MonotoneInEpsAndAlpha) {
  Rng rng(substream(6, "monotone"));
  for (int t = 0; t < 200; ++t) {
    const std::size_t rows = 2 + rng.below(5);
    const int q = 2 + static_cast<int>(rng.below(3));
    const auto g = random_grid(rng, rows, rows * 2 * q, q);
    const double eps = rng.uniform(0.2, 0.9), a = rng.uniform(0.05, 0.6);
    if (!feasible(g, eps, a, SlackPolicy::grid).feasible) continue;
    ASSERT_TRUE(feasible(g, eps + rng.uniform(0.0, 0.1), a, SlackPolicy::grid).feasible);
    ASSERT_TRUE(feasible(g, eps, std::min(0.99, a + rng.uniform(0.0, 0.3)), SlackPolicy::grid).feasible);
  }
}

TEST(MinEps, NonincreasingInAlpha) {
  Rng rng(substream(7, "min-eps"));
  for (int t = 0; t < 100; ++t) {
    const std::size_t rows = 2 + rng.below(5);
    const int q = 2 + static_cast<int>(rng.below(3));
    const auto g = random_grid(rng, rows, rows * 2 * q, q);
    const double a = rng.uniform(0.05, 0.45);
    const double m1 = min_eps(g, a, SlackPolicy::grid);
    const double m2 = min_eps(g, 2 * a, SlackPolicy::grid);
    ASSERT_LE(m2, m1 + 1e-12);
    // Brute force: the smallest grid value admitting a path lies within one bisection step.
    double best = 2.0;
    for (double e : g.entries)
      if (brute_path(g, e, rep_alpha_band(q, a))) best = std::min(best, e);
    ASSERT_NEAR(m1, best, 1e-4 + 1e-12);
  }
}

TEST(Membership, ClassicSelf) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    Rng rng(substream(8, "self"));
    const auto x = random_point(flow, rng);
    for (double eps : {1e-6, 0.01, 0.3}) {
      BallQuery q{x, eps, 0.2, 5.0, BallSide::two_sided, BallKind::classic};
      EXPECT_TRUE(ball_membership(flow, x, x, q, 0.1, 4, SlackPolicy::grid).feasible);
    }
    BallQuery q{x, 0.5, 0.2, 5.0, BallSide::forward, BallKind::classic};
    EXPECT_TRUE(ball_membership(flow, x, x, q, 0.1, 4).feasible);
  }
}

TEST(Membership, ClassicImpliesGeneralized) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    Rng rng(substream(9, "inclusion"));
    int classic_members = 0;
    for (int i = 0; i < 500; ++i) {
      const auto x = random_point(flow, rng);
      PhasePoint y;
      if (flow.family() == FlowFamily::torus_linear) {
        const auto& t = std::get<TorusPoint>(x);
        y = make_torus_point(t.u + rng.uniform(-0.15, 0.15), t.v + rng.uniform(-0.15, 0.15));
      } else {
        y = near_suspension(flow, rng, x, static_cast<int>(rng.below(8)), 0.2);
      }
      for (auto side : {BallSide::forward, BallSide::two_sided}) {
        BallQuery c{x, 0.2, 0.2, 3.0, side, BallKind::classic};
        BallQuery g = c;
        g.kind = BallKind::generalized;
        const bool cm = ball_membership(flow, x, y, c, 0.1, 5).feasible;
        classic_members += cm;
        if (cm) ASSERT_TRUE(ball_membership(flow, x, y, g, 0.1, 5).feasible);
      }
    }
    EXPECT_GT(classic_members, 20);
  }
}

TEST(Membership, SuspensionDivergenceHorizon) {
  const auto flow = FlowSystem::suspension(2);
  Rng rng(substream(10, "divergence"));
  for (int k = 3; k <= 8; ++k) {
    const auto x = random_point(flow, rng);
    const auto& sx = std::get<SuspensionPoint>(x);
    const auto base = make_suspension_point(sx.sequence, 0.5, sx.offset);
    const SuspensionPoint& sb = base;
    auto seq = SymbolSequence::splice(sb.sequence, sb.offset - 80, sb.offset + k - 1, rng.next());
    seq = seq.with_symbol(sb.offset + k, static_cast<std::uint8_t>(1 - sb.sequence.at(sb.offset + k)));
    const PhasePoint y = make_suspension_point(seq, 0.5, sb.offset);
    auto member = [&](double t) {
      BallQuery q{base, 0.3, 0.2, t, BallSide::forward, BallKind::classic};
      return ball_membership(flow, base, y, q, 0.1, 4, SlackPolicy::grid).feasible;
    };
    EXPECT_TRUE(member(k - 2.0)) << k;
    EXPECT_FALSE(member(k + 1.0)) << k;
  }
}

TEST(Membership, TwoSidedSeesThePast) {
  const auto flow = FlowSystem::suspension(2);
  Rng rng(substream(11, "past"));
  const auto x = random_point(flow, rng);
  const auto& sx = std::get<SuspensionPoint>(x);
  const auto base = make_suspension_point(sx.sequence, 0.5, sx.offset);
  const SuspensionPoint& sb = base;
  const int k = 5;
  auto seq = SymbolSequence::splice(sb.sequence, sb.offset - k + 1, sb.offset + 80, rng.next());
  seq = seq.with_symbol(sb.offset - k, static_cast<std::uint8_t>(1 - sb.sequence.at(sb.offset - k)));
  const PhasePoint y = make_suspension_point(seq, 0.5, sb.offset);
  BallQuery fwd{base, 0.3, 0.2, 8.0, BallSide::forward, BallKind::generalized};
  BallQuery two = fwd;
  two.side = BallSide::two_sided;
  EXPECT_TRUE(ball_membership(flow, base, y, fwd, 0.1, 5, SlackPolicy::grid).feasible);
  EXPECT_FALSE(ball_membership(flow, base, y, two, 0.1, 5, SlackPolicy::grid).feasible);
  two.horizon = 2.0;
  const auto v = ball_membership(flow, base, y, two, 0.1, 5, SlackPolicy::grid);
  ASSERT_TRUE(v.feasible);
  EXPECT_LT(v.witness->first_knot(), 0.0);
  EXPECT_LE(slope_class(*v.witness), 0.2 + 1e-9);
  EXPECT_EQ((*v.witness)(0.0), 0.0);
}

TEST(Membership, GeneralizedAbsorbsTimeShift) {
  // A small time shift of the same orbit is a generalized member but, at a
  // radius below the shift, not a classic one.
  const auto flow = FlowSystem::torus_irrational();
  const PhasePoint x = TorusPoint{0.3, 0.6};
  const PhasePoint y = flow_map(flow, x, 0.08);
  BallQuery g{x, 0.09, 0.2, 6.0, BallSide::forward, BallKind::generalized};
  BallQuery c = g;
  c.kind = BallKind::classic;
  c.eps = 0.05;
  EXPECT_FALSE(ball_membership(flow, x, y, c, 0.1, 5, SlackPolicy::grid).feasible);
  const auto v = ball_membership(flow, x, y, g, 0.1, 5, SlackPolicy::grid);
  ASSERT_TRUE(v.feasible);
  EXPECT_LE(v.achieved_sup, 0.09);
}

TEST(Membership, RejectsInvalidQueries) {
  const auto flow = FlowSystem::torus_irrational();
  const PhasePoint x = TorusPoint{0.1, 0.1};
  EXPECT_THROW(ball_membership(flow, x, x, BallQuery{x, 0.1, 1.0, 1.0}, 0.1, 4), InputError);
  EXPECT_THROW(ball_membership(flow, x, x, BallQuery{x, 0.0, 0.5, 1.0}, 0.1, 4), InputError);
  EXPECT_THROW(ball_membership(flow, x, x, BallQuery{x, 0.1, 0.5, -1.0}, 0.1, 4), InputError);
  EXPECT_THROW(ball_membership(flow, x, make_suspension_point(SymbolSequence::uniform(1, 2), 0.2),
                               BallQuery{x, 0.1, 0.5, 1.0}, 0.1, 4),
               InputError);
}

TEST(Membership, OracleReachAgreesWithVerdict) {
  const auto flow = FlowSystem::suspension(2);
  Rng rng(substream(12, "reach"));
  const auto x = random_point(flow, rng);
  BallOracle oracle(flow, x, 0.25, 0.2, BallKind::generalized, BallSide::two_sided, 0.1, 5, SlackPolicy::grid);
  oracle.prepare(60);
  for (int i = 0; i < 100; ++i) {
    const auto y = near_suspension(flow, rng, x, static_cast<int>(rng.below(7)), 0.1);
    const long r = oracle.reach(y, 60);
    for (double t : {0.5, 1.0, 2.5, 4.0, 6.0}) {
      const bool by_reach = r >= static_cast<long>(BallOracle::rows_for(t, 0.1));
      ASSERT_EQ(by_reach, oracle.verdict(y, t).feasible) << "t=" << t;
    }
  }
}

TEST(Translation, WitnessRecentres) {
  // If h aligns x with y up to T, then phi_{s0} x and phi_{h(s0)} y are
  // aligned on the remaining horizon by the shifted warp.
  const auto flow = FlowSystem::suspension(2);
  Rng rng(substream(13, "translate"));
  int tested = 0;
  for (int i = 0; i < 150; ++i) {
    const auto x = random_point(flow, rng);
    const auto y = flow_map(flow, near_suspension(flow, rng, x, 12, 0.05), rng.uniform(-0.05, 0.05));
    const double eps = 0.25, alpha = 0.2, T = 6.0;
    BallQuery q{x, eps, alpha, T, BallSide::forward, BallKind::generalized};
    const auto v = ball_membership(flow, x, y, q, 0.1, 5, SlackPolicy::grid);
    if (!v.feasible) continue;
    const double s0 = 2.0;
    const double t = (*v.witness)(s0);
    ASSERT_NEAR(invert(*v.witness)(t), s0, 1e-12);
    const auto x2 = flow_map(flow, x, s0);
    const auto y2 = flow_map(flow, y, t);
    BallQuery q2{x2, eps, alpha, T - s0, BallSide::forward, BallKind::generalized};
    EXPECT_TRUE(ball_membership(flow, x2, y2, q2, 0.1, 5, SlackPolicy::grid).feasible) << i;
    ++tested;
  }
  EXPECT_GT(tested, 20);
}

TEST(Forcing, SmallRadiusForcesEndpoint) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    const double T = 5.0, alpha = 0.2;
    const auto pairs = near_pairs(flow, 40, 0.1, T, 21);
    const auto rep = horizon_forcing(flow, pairs, {0.02, 0.05, 0.1, 0.2, 0.4}, T, alpha, 0.1, 5);
    ASSERT_TRUE(rep.eps0.has_value()) << to_string(flow.family());
    std::size_t feasible_pairs = 0;
    for (const auto& l : rep.levels) {
      if (l.eps <= *rep.eps0) {
        EXPECT_EQ(l.violations, 0u);
        feasible_pairs += l.feasible_pairs;
      }
    }
    EXPECT_GT(feasible_pairs, 0u);
  }
}

TEST(Inclusion, UnconstrainedSmallRadiusGivesConstrainedWarp) {
  // Pairs admitting an arbitrary increasing warp at radius delta also admit
  // a Rep(eps) warp at radius eps, for delta small enough.
  const auto flow = FlowSystem::suspension(2);
  const double eps = 0.3, T = 5.0, step = 0.1;
  const int q = 5;
  const auto pairs = near_pairs(flow, 60, 0.15, T, 33);
  const long m = static_cast<long>(BallOracle::rows_for(T, step));
  std::optional<double> delta0;
  for (double delta : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    bool all = true;
    int with_warp = 0;
    for (const auto& pr : pairs) {
      BallOracle loose(flow, pr.x, delta, 0.5, BallKind::generalized, BallSide::forward, step, q, SlackPolicy::grid);
      if (loose.end_columns(pr.y, m, rep_band(q, 3.0)).empty()) continue;
      ++with_warp;
      BallOracle tight(flow, pr.x, eps, eps, BallKind::generalized, BallSide::forward, step, q, SlackPolicy::grid);
      if (tight.reach(pr.y, m) < m) all = false;
    }
    if (!all) break;
    if (with_warp > 0) delta0 = delta;
  }
  ASSERT_TRUE(delta0.has_value());
  EXPECT_GE(*delta0, 0.02);
}
