#pragma once

// Batch experiment runner: executes one configured command and writes CSV
// results plus a JSON manifest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "entropy.hpp"
#include "measures.hpp"
#include "parallel.hpp"
#include "warp.hpp"

namespace expanse {

inline constexpr const char* kVersion = "1.0.0";

struct RunResult {
  int exit_code = 0;  ///< 0 success, 1 runtime failure, 2 invalid config
  std::string message;
  std::vector<std::string> outputs;
  Json results = Json::object();
};

namespace detail {

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  std::string write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = root_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    body(os);
    if (!os) throw std::runtime_error("failed writing " + path.string());
    files_.push_back(name);
    return path.string();
  }

  const std::vector<std::string>& files() const noexcept { return files_; }
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

inline BallSide parse_side(const std::string& s) {
  return s == "two-sided" ? BallSide::two_sided : BallSide::forward;
}
inline BallKind parse_kind(const std::string& s) {
  return s == "classic" ? BallKind::classic : BallKind::generalized;
}
inline SlackPolicy parse_policy(const std::string& s) {
  return s == "conservative" ? SlackPolicy::conservative : SlackPolicy::grid;
}

/// Random warp in Rep(alpha): knots at random spacings, slopes in [1-alpha, 1+alpha].
inline Warp random_rep_warp(Rng& rng, double alpha, double horizon) {
  std::vector<double> knots{0.0}, values{0.0};
  while (knots.back() < horizon) {
    const double len = rng.uniform(0.05, 1.5);
    const double slope = rng.uniform(1.0 - alpha, 1.0 + alpha);
    knots.push_back(knots.back() + len);
    values.push_back(values.back() + slope * len);
  }
  return Warp(std::move(knots), std::move(values));
}

/// max over knot pairs r < t of |g(t) - g(r) - (t - r)| - alpha (t - r).
inline double telescoping_excess(const Warp& g, double alpha) {
  double worst = -std::numeric_limits<double>::infinity();
  const auto& k = g.knots();
  const auto& v = g.values();
  for (std::size_t a = 0; a < k.size(); ++a)
    for (std::size_t b = a + 1; b < k.size(); ++b) {
      const double span = k[b] - k[a];
      worst = std::max(worst, std::abs(v[b] - v[a] - span) - alpha * span);
    }
  return worst;
}

}  // namespace detail

/// Runs a validated configuration. Thread count only affects speed.
inline RunResult run(const ExperimentConfig& cfg) {
  RunResult res;
  const auto violations = validate(cfg);
  if (has_errors(violations)) {
    std::ostringstream msg;
    for (const auto& v : violations)
      if (v.severity == Severity::error) msg << "invalid config: " << v.field << ": " << v.message << '\n';
    res.exit_code = 2;
    res.message = msg.str();
    return res;
  }
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t seed = *cfg.seed;
  const auto& p = cfg.params;
  Json warnings = Json::array();
  for (const auto& v : violations) warnings.push_back(v.field + ": " + v.message);

  try {
    const FlowSystem flow = make_flow(cfg.flow);
    detail::OutputDir out(cfg.output_dir);
    const auto& cmd = cfg.command;
    auto measure = [&] {
      MeasureDescriptor d = make_descriptor(flow, cfg.measure);
      d.pushforward = cfg.measure.pushforward;
      return sample_measure(flow, d, static_cast<std::size_t>(p.N), seed);
    };
    std::vector<double> t_grid = p.t;
    std::sort(t_grid.begin(), t_grid.end());

    if (cmd == "ball-mass") {
      const auto mu = measure();
      const auto centers = draw_centers(flow, mu, static_cast<std::size_t>(p.center_count), seed);
      const double n_eff = mu.effective_size();
      out.write("ball_mass.csv", [&](std::ostream& os) {
        os << "epsilon,alpha,t,center_id,mass,stderr\n";
        for (double eps : p.epsilon) {
          const std::vector<double> alphas = p.alpha.empty() ? std::vector<double>{eps} : p.alpha;
          for (double a : alphas)
            for (std::size_t c = 0; c < centers.size(); ++c) {
              const auto m = ball_masses(mu, flow, centers[c], eps, a, detail::parse_kind(p.kind),
                                         detail::parse_side(p.side), t_grid, p.step, p.q,
                                         detail::parse_policy(p.policy));
              for (std::size_t k = 0; k < t_grid.size(); ++k) {
                os << fmt_double(eps) << ',' << fmt_double(a) << ',' << fmt_double(t_grid[k]) << ',' << c << ',';
                if (m[k] > 0.0)
                  os << fmt_double(m[k]);
                else
                  os << '<' << fmt_double(1.0 / n_eff);
                os << ',' << fmt_double(std::sqrt(m[k] * (1.0 - m[k]) / n_eff)) << '\n';
              }
            }
        }
      });
    } else if (cmd == "scan") {
      const auto mu = measure();
      ScanConfig sc;
      sc.eps_grid = p.epsilon;
      sc.t_grid = t_grid;
      sc.center_count = static_cast<std::size_t>(p.center_count);
      sc.step = p.step;
      sc.q = p.q;
      sc.seed = seed;
      sc.side = detail::parse_side(p.side);
      sc.kind = detail::parse_kind(p.kind);
      sc.policy = detail::parse_policy(p.policy);
      sc.rho_min = p.rho_min;
      sc.r2_min = p.r2_min;
      const auto report = expansivity_scan(flow, mu, sc);
      out.write("scan.csv", [&](std::ostream& os) { write_scan_csv(os, report); });
      out.write("scan_summary.csv", [&](std::ostream& os) { write_scan_summary_csv(os, report); });
      res.results["slack"] = report.slack;
      for (const auto& s : report.summary)
        res.results["verdicts"].push_back({{"epsilon", s.eps}, {"rate", s.rate}, {"verdict", s.verdict}});
    } else if (cmd == "entropy") {
      const auto mu = measure();
      KatokConfig kc;
      kc.delta = p.delta;
      kc.eps_grid = p.epsilon;
      kc.n_grid = p.n;
      kc.seed = seed;
      const auto est = katok_entropy(flow, mu, kc);
      out.write("katok.csv", [&](std::ostream& os) { write_katok_csv(os, est); });
      out.write("katok_rates.csv", [&](std::ostream& os) { write_katok_rates_csv(os, est); });
      for (const auto& w : est.warnings) warnings.push_back(w);
      res.results["rate_at_smallest_eps"] = est.rate_at_smallest_eps;
      res.results["rate_spread"] = est.rate_spread;
    } else if (cmd == "bk-curve") {
      const auto mu = measure();
      const auto centers = draw_centers(flow, mu, static_cast<std::size_t>(p.center_count), seed);
      std::vector<BrinKatokCurve> curves;
      std::vector<double> eps_of;
      for (double eps : p.epsilon)
        for (const auto& x : centers) {
          curves.push_back(brin_katok_curve(flow, mu, x, eps, t_grid, p.step, p.q, detail::parse_policy(p.policy)));
          eps_of.push_back(eps);
        }
      out.write("bk_curve.csv", [&](std::ostream& os) {
        os << "epsilon,center_id,t,mass,neglog_mass_over_t,censored\n";
        for (std::size_t k = 0; k < curves.size(); ++k) {
          const auto& c = curves[k];
          for (std::size_t i = 0; i < c.t.size(); ++i) {
            os << fmt_double(eps_of[k]) << ',' << k % centers.size() << ',' << fmt_double(c.t[i]) << ',';
            if (c.censored[i])
              os << '<' << fmt_double(1.0 / c.n_effective) << ",,1\n";
            else
              os << fmt_double(c.mass[i]) << ',' << fmt_double(c.rate[i]) << ",0\n";
          }
        }
      });
      out.write("bk_summary.csv", [&](std::ostream& os) {
        os << "epsilon,center_id,slope,r2,fit_points\n";
        for (std::size_t k = 0; k < curves.size(); ++k)
          os << fmt_double(eps_of[k]) << ',' << k % centers.size() << ',' << fmt_double(curves[k].slope) << ','
             << fmt_double(curves[k].r2) << ',' << curves[k].fit_points << '\n';
      });
    } else if (cmd == "cover") {
      const auto mu = measure();
      const PhasePoint x = draw_centers(flow, mu, 1, seed).front();
      const double eps = p.epsilon.front();
      const double alpha = cover_alpha(flow, eps, p.L);
      std::vector<CoverResult> covers;
      std::vector<std::size_t> member_counts;
      for (int n : p.n) {
        const double t = n * p.L + 0.5 * p.L;
        const auto members = cover_members(flow, x, p.delta, t, alpha, static_cast<std::size_t>(p.members), p.step,
                                           p.q, substream(seed, "cover", static_cast<std::uint64_t>(n)));
        member_counts.push_back(members.size());
        covers.push_back(cover_generalized_ball(flow, x, p.delta, t, eps, p.L, members, p.step, p.q));
      }
      out.write("cover.csv", [&](std::ostream& os) {
        os << "n,representative,member_index,group_size,signature\n";
        for (std::size_t k = 0; k < covers.size(); ++k)
          for (std::size_t r = 0; r < covers[k].centers.size(); ++r)
            os << p.n[k] << ',' << r << ',' << covers[k].centers[r] << ',' << covers[k].group_sizes[r] << ','
               << signature_text(covers[k].signatures[r]) << '\n';
      });
      out.write("cover_summary.csv", [&](std::ostream& os) {
        os << "n,t,alpha,members,ell,bound,covered_fraction,flagged\n";
        for (std::size_t k = 0; k < covers.size(); ++k)
          os << p.n[k] << ',' << fmt_double(p.n[k] * p.L + 0.5 * p.L) << ',' << fmt_double(covers[k].alpha) << ','
             << member_counts[k] << ',' << covers[k].count << ',' << covers[k].bound << ','
             << fmt_double(covers[k].covered_fraction) << ',' << covers[k].flagged.size() << '\n';
      });
      bool flagged = false;
      for (const auto& c : covers) flagged |= !c.flagged.empty();
      if (flagged) {
        const auto path = out.write("cover_flagged.csv", [&](std::ostream& os) {
          os << "n,member_index,signature,reason\n";
          for (std::size_t k = 0; k < covers.size(); ++k)
            for (const auto& f : covers[k].flagged)
              os << p.n[k] << ',' << f.member << ',' << signature_text(f.signature) << ',' << f.reason << '\n';
        });
        res.exit_code = 1;
        res.message = "cover member verification failed; flagged records in " + path + "\n";
      }
    } else if (cmd == "regularize-demo") {
      const double horizon = t_grid.back();
      std::size_t failures = 0;
      out.write("regularize.csv", [&](std::ostream& os) {
        os << "alpha,trial,input_knots,output_knots,slope_class,telescoping_excess,passed\n";
        for (double a : p.alpha)
          for (long trial = 0; trial < p.trials; ++trial) {
            Rng rng(substream(seed, "regularize", static_cast<std::uint64_t>(trial)));
            const Warp h = detail::random_rep_warp(rng, a, horizon + p.block);
            const Warp g = regularize(h, p.block, a, horizon);
            const double sc = slope_class(g);
            const double ex = detail::telescoping_excess(g, a);
            const bool ok = sc <= a && ex <= 1e-12;
            failures += ok ? 0 : 1;
            os << fmt_double(a) << ',' << trial << ',' << h.size() << ',' << g.size() << ',' << fmt_double(sc) << ','
               << fmt_double(ex) << ',' << (ok ? 1 : 0) << '\n';
          }
      });
      res.results["failures"] = failures;
      if (failures) {
        res.exit_code = 1;
        res.message = "regularize produced outputs outside Rep(alpha); see " +
                      (out.root() / "regularize.csv").string() + "\n";
      }
    } else if (cmd == "tube-check") {
      const auto mu = measure();
      const auto centers = draw_centers(flow, mu, static_cast<std::size_t>(p.center_count), seed);
      std::vector<TubeReport> reports;
      for (const auto& x : centers) reports.push_back(tube_inclusion_check(flow, x, p.delta, t_grid.back(), p.step));
      out.write("tube.csv", [&](std::ostream& os) {
        os << "center_id,theta,s,included,worst\n";
        for (std::size_t c = 0; c < reports.size(); ++c)
          for (const auto& s : reports[c].samples)
            os << c << ',' << fmt_double(reports[c].theta) << ',' << fmt_double(s.s) << ',' << (s.included ? 1 : 0)
               << ',' << fmt_double(s.worst) << '\n';
      });
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    Json manifest;
    manifest["tool"] = "expanse";
    manifest["version"] = kVersion;
    manifest["command"] = cmd;
    manifest["seed"] = seed;
    manifest["threads"] = default_threads();
    manifest["wall_seconds"] = wall;
    manifest["config"] = config_json(cfg);
    manifest["outputs"] = out.files();
    manifest["results"] = res.results;
    manifest["warnings"] = warnings;
    manifest["exit_code"] = res.exit_code;
    out.write("manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    res.outputs = out.files();
  } catch (const InputError& e) {
    res.exit_code = 2;
    res.message = std::string("invalid config: ") + e.what() + "\n";
  } catch (const std::exception& e) {
    res.exit_code = 1;
    res.message = std::string("runtime failure: ") + e.what() + "\n";
  }
  return res;
}

}  // namespace expanse
