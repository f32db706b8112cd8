#pragma once

// Piecewise-linear reparametrizations h with h(0) = 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace expanse {

/// Strictly increasing piecewise-linear map through (knots[i], values[i]),
/// extended linearly beyond both end knots with the end segment slopes.
/// One knot is 0 with value 0; for forward warps that is knots[0].
class Warp {
 public:
  Warp(std::vector<double> knots, std::vector<double> values)
      : knots_(std::move(knots)), values_(std::move(values)) {
    validate();
  }

  static Warp identity() { return Warp({0.0, 1.0}, {0.0, 1.0}); }

  /// h(s) = slope * s.
  static Warp linear(double slope) {
    if (!(slope > 0.0)) throw InputError("linear warp needs a positive slope");
    return Warp({0.0, 1.0}, {0.0, slope});
  }

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return knots_.size(); }
  double first_knot() const noexcept { return knots_.front(); }
  double last_knot() const noexcept { return knots_.back(); }

  /// Exact at knots.
  double operator()(double s) const noexcept {
    const std::size_t n = knots_.size();
    if (s >= knots_[n - 1]) return values_[n - 1] + (s - knots_[n - 1]) * slope(n - 2);
    if (s < knots_[0]) return values_[0] + (s - knots_[0]) * slope(0);
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    const auto i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    return values_[i] + (s - knots_[i]) * slope(i);
  }

  /// Slope of segment i, between knots i and i+1.
  double slope(std::size_t i) const noexcept {
    return (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
  }

  friend bool operator==(const Warp&, const Warp&) = default;

 private:
  void validate() const {
    if (knots_.size() != values_.size()) throw InputError("warp knots and values differ in length");
    if (knots_.size() < 2) throw InputError("warp needs at least two knots");
    bool anchored = false;
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i]))
        throw InputError("warp knots and values must be finite");
      if (i > 0 && !(knots_[i] > knots_[i - 1])) throw InputError("warp knots must be strictly increasing");
      if (i > 0 && !(values_[i] > values_[i - 1]))
        throw InputError("warp values must be strictly increasing");
      if (knots_[i] == 0.0 && values_[i] == 0.0) anchored = true;
    }
    if (!anchored) throw InputError("warp must satisfy h(0) = 0 at a knot");
  }

  std::vector<double> knots_;
  std::vector<double> values_;
};

/// max over segments of |slope - 1|; the warp lies in Rep(alpha) iff this is
/// <= alpha, since every two-point quotient is a convex combination of
/// segment slopes.
inline double slope_class(const Warp& h) noexcept {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) worst = std::max(worst, std::abs(h.slope(i) - 1.0));
  return worst;
}

inline Warp invert(const Warp& h) { return Warp(h.values(), h.knots()); }

/// g o h on the merged knot grid.
inline Warp compose(const Warp& g, const Warp& h) {
  const Warp h_inv = invert(h);
  std::vector<double> grid = h.knots();
  for (double k : g.knots()) grid.push_back(h_inv(k));
  std::sort(grid.begin(), grid.end());
  // One extra knot on each side keeps the end segments inside the region
  // where both g and h are in their linear extensions.
  grid.insert(grid.begin(), grid.front() - 1.0);
  grid.push_back(grid.back() + 1.0);
  std::vector<double> knots;
  std::vector<double> values;
  knots.reserve(grid.size());
  values.reserve(grid.size());
  for (double s : grid) {
    if (!knots.empty() && !(s > knots.back())) continue;
    double v = (s == 0.0) ? 0.0 : g(h(s));
    if (!values.empty() && !(v > values.back())) continue;  // rounding collapse
    knots.push_back(s);
    values.push_back(v);
  }
  return Warp(std::move(knots), std::move(values));
}

/// Piecewise-linear interpolation of h on the block grid T_k = kT, covering
/// [0, horizon]. Each block must satisfy |(h(T_{k+1}) - h(T_k))/T - 1| <= alpha
/// (evaluated on the actual knot differences); the result then lies in
/// Rep(alpha) with g(T_k) = h(T_k).
inline Warp regularize(const Warp& h, double block, double alpha, double horizon) {
  if (!(block > 0.0)) throw InputError("regularize: block length T must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("regularize: alpha must lie in (0,1)");
  if (!(horizon > 0.0)) throw InputError("regularize: horizon must be positive");
  const double r = horizon / block;
  auto blocks = static_cast<std::size_t>(std::ceil(r - 1e-9 * std::max(1.0, r)));
  blocks = std::max<std::size_t>(blocks, 1);
  std::vector<double> knots(blocks + 1);
  std::vector<double> values(blocks + 1);
  for (std::size_t k = 0; k <= blocks; ++k) {
    knots[k] = static_cast<double>(k) * block;
    values[k] = k == 0 ? 0.0 : h(knots[k]);
  }
  for (std::size_t k = 0; k < blocks; ++k) {
    const double dk = knots[k + 1] - knots[k];
    const double dv = values[k + 1] - values[k];
    // Tolerates rounding of increments given exactly at the class boundary.
    if (!(std::abs(dv / dk - 1.0) <= alpha * (1.0 + 1e-12) + 1e-15)) {
      std::ostringstream msg;
      msg << "regularize: block " << k << " [" << knots[k] << ", " << knots[k + 1]
          << "] has increment ratio " << dv / dk << " outside [1-alpha, 1+alpha]";
      throw ConstructionError(msg.str(), static_cast<long>(k));
    }
  }
  return Warp(std::move(knots), std::move(values));
}

/// Quantized drift of a warp per block: entries[k] = floor((h(kL) - kL)/(alpha L)).
struct GammaSignature {
  std::vector<std::int64_t> entries;
  friend bool operator==(const GammaSignature&, const GammaSignature&) = default;
  friend auto operator<=>(const GammaSignature&, const GammaSignature&) = default;
};

/// `horizon` is the range on which h is known to be meaningful (e.g. the
/// alignment horizon of a witness); beyond the knots h follows its linear
/// extension.
inline GammaSignature gamma_signature(const Warp& h, double block, double alpha, int n,
                                      double horizon = std::numeric_limits<double>::infinity()) {
  if (!(block > 0.0)) throw InputError("gamma_signature: L must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("gamma_signature: alpha must lie in (0,1)");
  if (n < 1) throw InputError("gamma_signature: n must be positive");
  const double need = n * block;
  if (need > horizon * (1.0 + 1e-12)) throw InputError("gamma_signature: horizon shorter than nL");
  GammaSignature sig;
  sig.entries.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double s = k * block;
    const double q = (h(s) - s) / (alpha * block);
    // Snap ratios within rounding of an integer before taking the floor.
    const double r = std::round(q);
    sig.entries[static_cast<std::size_t>(k)] =
        static_cast<std::int64_t>(std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q)) ? r : std::floor(q));
  }
  return sig;
}

// Two-column text format: one "knot value" pair per line, '#' comments.

inline void write_warp(std::ostream& os, const Warp& h) {
  os << "# knot value\n";
  char buf[64];
  for (std::size_t i = 0; i < h.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", h.knots()[i], h.values()[i]);
    os << buf;
  }
}

inline Warp read_warp(std::istream& is) {
  std::vector<double> knots;
  std::vector<double> values;
  std::string line;
  while (std::getline(is, line)) {
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream row(line);
    double k = 0.0;
    double v = 0.0;
    if (!(row >> k >> v)) throw InputError("warp text: malformed line '" + line + "'");
    knots.push_back(k);
    values.push_back(v);
  }
  return Warp(std::move(knots), std::move(values));
}

}  // namespace expanse
