#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "expanse/measures.hpp"

using namespace expanse;

namespace {

const TorusPoint& tor(const PhasePoint& p) { return std::get<TorusPoint>(p); }
const SuspensionPoint& susp(const PhasePoint& p) { return std::get<SuspensionPoint>(p); }

// Kolmogorov-Smirnov statistic of a sample against Uniform[0,1).
double ks_uniform(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    d = std::max({d, (i + 1) / n - xs[i], xs[i] - i / n});
  return d;
}

// Asymptotic 0.1% critical value of the one-sample KS statistic.
double ks_critical(std::size_t n) { return 1.95 / std::sqrt(static_cast<double>(n)); }

std::vector<double> us(const EmpiricalMeasure& mu) {
  std::vector<double> out;
  for (const auto& p : mu.samples) out.push_back(tor(p).u);
  return out;
}

BallQuery query(PhasePoint c, double eps, double alpha, double t, BallKind kind,
                BallSide side = BallSide::forward) {
  BallQuery q;
  q.center = std::move(c);
  q.eps = eps;
  q.alpha = alpha;
  q.horizon = t;
  q.kind = kind;
  q.side = side;
  return q;
}

}  // namespace

TEST(Sampling, WeightsSumToOne) {
  const auto torus = FlowSystem::torus_irrational();
  const auto shift = FlowSystem::suspension(2);
  for (const auto& mu : {sample_measure(torus, MeasureDescriptor::lebesgue(), 1000, 1),
                         sample_measure(shift, MeasureDescriptor::bernoulli({0.3, 0.7}), 777, 2),
                         sample_measure(torus, MeasureDescriptor::dirac(TorusPoint{0.1, 0.2}), 10, 3)}) {
    const double total = std::accumulate(mu.weights.begin(), mu.weights.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(mu.effective_size(), static_cast<double>(mu.size()), 1e-6);
  }
  EXPECT_THROW(sample_measure(torus, MeasureDescriptor::lebesgue(), 0, 1), InputError);
}

TEST(Sampling, LawMismatchesAreRejected) {
  const auto torus = FlowSystem::torus_irrational();
  const auto shift = FlowSystem::suspension(2);
  EXPECT_THROW(sample_measure(shift, MeasureDescriptor::lebesgue(), 10, 1), InputError);
  EXPECT_THROW(sample_measure(torus, MeasureDescriptor::bernoulli({0.5, 0.5}), 10, 1), InputError);
  EXPECT_THROW(sample_measure(shift, MeasureDescriptor::bernoulli({0.5, 0.4}), 10, 1), InputError);
  EXPECT_THROW(sample_measure(shift, MeasureDescriptor::bernoulli({1.0}), 10, 1), InputError);
}

TEST(Sampling, BernoulliSymbolFrequency) {
  const auto shift = FlowSystem::suspension(2);
  const std::size_t n = 20000;
  const double p1 = 0.9;
  const auto mu = sample_measure(shift, MeasureDescriptor::bernoulli({1.0 - p1, p1}), n, 42);
  for (int k : {0, 5, -3, 150}) {
    long ones = 0;
    for (const auto& p : mu.samples) ones += susp(p).symbol(k) == 1;
    const double sd = std::sqrt(n * p1 * (1 - p1));
    EXPECT_NEAR(static_cast<double>(ones), n * p1, 4.5 * sd) << "index " << k;
  }
  std::vector<double> roofs;
  for (const auto& p : mu.samples) roofs.push_back(susp(p).roof);
  EXPECT_LT(ks_uniform(roofs), ks_critical(n));
}

TEST(Sampling, LebesgueMarginalsAreUniform) {
  const auto torus = FlowSystem::torus_irrational();
  const auto mu = sample_measure(torus, MeasureDescriptor::lebesgue(), 20000, 7);
  EXPECT_LT(ks_uniform(us(mu)), ks_critical(mu.size()));
  std::vector<double> vs;
  for (const auto& p : mu.samples) vs.push_back(tor(p).v);
  EXPECT_LT(ks_uniform(vs), ks_critical(mu.size()));
}

TEST(Sampling, SameSeedSameSample) {
  const auto shift = FlowSystem::suspension(2);
  const auto a = sample_measure(shift, MeasureDescriptor::bernoulli({0.5, 0.5}), 300, 9);
  set_default_threads(3);
  const auto b = sample_measure(shift, MeasureDescriptor::bernoulli({0.5, 0.5}), 300, 9);
  set_default_threads(1);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(distance(shift, a.samples[i], b.samples[i]), 0.0);
}

TEST(Pushforward, ZeroTimeIsIdentity) {
  const auto torus = FlowSystem::torus_irrational();
  const auto mu = sample_measure(torus, MeasureDescriptor::lebesgue(), 500, 11);
  const auto nu = pushforward(mu, torus, 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    EXPECT_EQ(tor(nu.samples[i]).u, tor(mu.samples[i]).u);
    EXPECT_EQ(tor(nu.samples[i]).v, tor(mu.samples[i]).v);
  }
  EXPECT_EQ(nu.weights, mu.weights);
}

TEST(Pushforward, DiracMovesWithTheFlow) {
  const auto shift = FlowSystem::suspension(2);
  const PhasePoint x = make_suspension_point(SymbolSequence::periodic({0, 1, 1}, 2), 0.2);
  const auto mu = sample_measure(shift, MeasureDescriptor::dirac(x), 5, 1);
  const auto nu = pushforward(mu, shift, 2.5);
  const auto target = flow_map(shift, x, 2.5);
  for (const auto& p : nu.samples) EXPECT_EQ(distance(shift, p, target), 0.0);
  ASSERT_TRUE(nu.descriptor.point.has_value());
  EXPECT_EQ(distance(shift, *nu.descriptor.point, target), 0.0);
  for (const auto& c : draw_centers(shift, nu, 3, 4)) EXPECT_EQ(distance(shift, c, target), 0.0);
}

TEST(Pushforward, LebesgueIsInvariant) {
  const auto torus = FlowSystem::torus_irrational();
  const auto mu = sample_measure(torus, MeasureDescriptor::lebesgue(), 20000, 13);
  const auto nu = pushforward(mu, torus, 3.7);
  EXPECT_LT(ks_uniform(us(nu)), ks_critical(nu.size()));
  EXPECT_DOUBLE_EQ(nu.descriptor.pushforward, 3.7);
  // Fresh centres carry the same pushforward.
  std::vector<double> cu;
  for (const auto& c : draw_centers(torus, nu, 5000, 2)) cu.push_back(tor(c).u);
  EXPECT_LT(ks_uniform(cu), ks_critical(cu.size()));
}

TEST(BallMass, WholeSpaceAtDiameter) {
  const auto torus = FlowSystem::torus_irrational();
  const auto mu = sample_measure(torus, MeasureDescriptor::lebesgue(), 2000, 17);
  for (auto kind : {BallKind::classic, BallKind::generalized}) {
    const auto q = query(TorusPoint{0.3, 0.3}, torus.diameter(), 0.2, 4.0, kind);
    EXPECT_NEAR(ball_mass(mu, torus, q, 0.1, 5, SlackPolicy::grid), 1.0, 1e-12);
  }
}

TEST(BallMass, DiracCentreHasFullMass) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    Rng rng(substream(19, "dirac"));
    const auto x = random_point(flow, rng);
    const auto mu = sample_measure(flow, MeasureDescriptor::dirac(x), 20, 1);
    for (auto kind : {BallKind::classic, BallKind::generalized})
      for (auto side : {BallSide::forward, BallSide::two_sided})
        EXPECT_NEAR(ball_mass(mu, flow, query(x, 0.05, 0.1, 6.0, kind, side), 0.1, 5, SlackPolicy::grid), 1.0,
                    1e-12);
  }
}

TEST(BallMass, TorusClassicBallIsADisk) {
  const auto torus = FlowSystem::torus_irrational();
  const auto mu = sample_measure(torus, MeasureDescriptor::lebesgue(), 40000, 23);
  for (double eps : {0.05, 0.1, 0.15}) {
    const double m = ball_mass(mu, torus, query(TorusPoint{0.5, 0.5}, eps, 0.1, 5.0, BallKind::classic), 0.1, 5,
                               SlackPolicy::grid);
    EXPECT_GE(m, 3.0 * eps * eps) << eps;
    EXPECT_LE(m, 8.0 * eps * eps) << eps;
  }
}

TEST(BallMass, MonotoneInEpsilonAndHorizon) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    const auto desc = flow.family() == FlowFamily::torus_linear ? MeasureDescriptor::lebesgue()
                                                                : MeasureDescriptor::bernoulli({0.5, 0.5});
    const auto mu = sample_measure(flow, desc, 3000, 29);
    const auto centres = draw_centers(flow, mu, 3, 31);
    const std::vector<double> ts{0.5, 1.0, 2.0, 3.0, 5.0};
    for (const auto& c : centres) {
      std::vector<double> prev;
      for (double eps : {0.1, 0.2, 0.3}) {
        const auto m = ball_masses(mu, flow, c, eps, 0.2, BallKind::generalized, BallSide::forward, ts, 0.1, 5,
                                   SlackPolicy::grid);
        for (std::size_t k = 1; k < m.size(); ++k) EXPECT_LE(m[k], m[k - 1]);
        if (!prev.empty())
          for (std::size_t k = 0; k < m.size(); ++k) EXPECT_GE(m[k], prev[k]);
        prev = m;
        // Membership sets nest in epsilon, not just their masses.
        const auto small = ball_members(mu, flow, query(c, eps, 0.2, 2.0, BallKind::generalized), 0.1, 5);
        const auto large = ball_members(mu, flow, query(c, eps + 0.05, 0.2, 2.0, BallKind::generalized), 0.1, 5);
        for (std::size_t i = 0; i < small.size(); ++i) ASSERT_LE(small[i], large[i]);
      }
    }
  }
}

TEST(BallMass, GeneralizedContainsClassic) {
  for (const auto& flow : {FlowSystem::torus_irrational(), FlowSystem::suspension(2)}) {
    const auto desc = flow.family() == FlowFamily::torus_linear ? MeasureDescriptor::lebesgue()
                                                                : MeasureDescriptor::bernoulli({0.5, 0.5});
    const auto mu = sample_measure(flow, desc, 3000, 37);
    for (const auto& c : draw_centers(flow, mu, 4, 41)) {
      for (auto side : {BallSide::forward, BallSide::two_sided}) {
        const auto cl = ball_members(mu, flow, query(c, 0.2, 0.2, 3.0, BallKind::classic, side), 0.1, 5);
        const auto gen = ball_members(mu, flow, query(c, 0.2, 0.2, 3.0, BallKind::generalized, side), 0.1, 5);
        for (std::size_t i = 0; i < cl.size(); ++i) ASSERT_LE(cl[i], gen[i]);
        // Two-sided balls are contained in forward ones.
        if (side == BallSide::two_sided) {
          const auto fwd = ball_members(mu, flow, query(c, 0.2, 0.2, 3.0, BallKind::classic), 0.1, 5);
          for (std::size_t i = 0; i < cl.size(); ++i) ASSERT_LE(cl[i], fwd[i]);
        }
      }
    }
  }
}

TEST(BallMass, RejectsInvalidQueries) {
  const auto torus = FlowSystem::torus_irrational();
  const auto mu = sample_measure(torus, MeasureDescriptor::lebesgue(), 10, 1);
  EXPECT_THROW(ball_mass(mu, torus, query(TorusPoint{}, 0.0, 0.1, 1.0, BallKind::classic), 0.1, 5), InputError);
  EXPECT_THROW(ball_mass(mu, torus, query(TorusPoint{}, 0.1, 1.0, 1.0, BallKind::classic), 0.1, 5), InputError);
  EXPECT_THROW(ball_mass(mu, torus, query(TorusPoint{}, 0.1, 0.1, -1.0, BallKind::classic), 0.1, 5), InputError);
}

TEST(Tube, ShortArcsStayInside) {
  const auto torus = FlowSystem::torus_irrational();
  const auto r = tube_inclusion_check(torus, TorusPoint{0.1, 0.7}, 0.1, 10.0, 0.1);
  EXPECT_GT(r.theta, 0.0);
  for (const auto& s : r.samples) {
    // On the torus the flow is an isometry, so d(phi_t x, phi_{t+s} x) = |s|.
    EXPECT_TRUE(s.included) << s.s;
    EXPECT_NEAR(s.worst, std::abs(s.s), 1e-9);
  }
}

TEST(Tube, CentreIsAlwaysIncluded) {
  const auto shift = FlowSystem::suspension(2);
  Rng rng(substream(43, "tube"));
  const auto r = tube_inclusion_check(shift, random_point(shift, rng), 0.05, 6.0, 0.1, {0.0});
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_TRUE(r.samples[0].included);
  EXPECT_EQ(r.samples[0].worst, 0.0);
}

TEST(Tube, LongSuspensionArcsLeave) {
  const auto shift = FlowSystem::suspension(2);
  Rng rng(substream(47, "tube-long"));
  for (int i = 0; i < 10; ++i) {
    const auto r = tube_inclusion_check(shift, random_point(shift, rng), 0.1, 6.0, 0.1, {-3.0, 3.0});
    for (const auto& s : r.samples) EXPECT_FALSE(s.included) << s.s;
  }
}

TEST(Scan, DeterministicAcrossThreadCounts) {
  const auto shift = FlowSystem::suspension(2);
  const auto mu = sample_measure(shift, MeasureDescriptor::bernoulli({0.5, 0.5}), 2000, 53);
  ScanConfig cfg;
  cfg.eps_grid = {0.2, 0.3};
  cfg.t_grid = {1, 2, 3, 4};
  cfg.center_count = 4;
  cfg.seed = 59;
  std::ostringstream a, b;
  write_scan_csv(a, expansivity_scan(shift, mu, cfg));
  set_default_threads(4);
  write_scan_csv(b, expansivity_scan(shift, mu, cfg));
  set_default_threads(1);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "epsilon,t,center_id,mass,stderr");
}

TEST(Scan, DiracMeasureIsFloored) {
  const auto shift = FlowSystem::suspension(2);
  const PhasePoint x = make_suspension_point(SymbolSequence::periodic({0, 1}, 2), 0.5);
  const auto mu = sample_measure(shift, MeasureDescriptor::dirac(x), 50, 1);
  ScanConfig cfg;
  cfg.eps_grid = {0.1, 0.2};
  cfg.t_grid = {1, 2, 4, 8};
  cfg.center_count = 2;
  const auto r = expansivity_scan(shift, mu, cfg);
  for (const auto& s : r.summary) {
    EXPECT_EQ(s.verdict, "floored");
    EXPECT_EQ(s.floor, 1.0);
    EXPECT_NEAR(s.rate, 0.0, 1e-12);
  }
}

TEST(Scan, FullShiftDecays) {
  const auto shift = FlowSystem::suspension(2);
  const auto mu = sample_measure(shift, MeasureDescriptor::bernoulli({0.5, 0.5}), 20000, 61);
  ScanConfig cfg;
  cfg.eps_grid = {0.2};
  cfg.t_grid = {1, 2, 3, 4, 5, 6};
  cfg.center_count = 8;
  const auto r = expansivity_scan(shift, mu, cfg);
  ASSERT_EQ(r.summary.size(), 1u);
  EXPECT_EQ(r.summary[0].verdict, "decaying");
  EXPECT_GT(r.summary[0].rate, 0.4);
}

TEST(Scan, CensoredCellsAreMarkedInCsv) {
  ScanReport r;
  r.n_effective = 100;
  r.cells.push_back({0.1, 2.0, 0, 0.0, 0.0, true});
  r.cells.push_back({0.1, 1.0, 0, 0.25, 0.01, false});
  std::ostringstream os;
  write_scan_csv(os, r);
  EXPECT_EQ(os.str(), "epsilon,t,center_id,mass,stderr\n0.10000000000000001,2,0,<0.01,0\n"
                      "0.10000000000000001,1,0,0.25,0.01\n");
}
