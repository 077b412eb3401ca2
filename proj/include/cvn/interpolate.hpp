#pragma once

// Edge set of an unobserved graph interpolated from a fitted model.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cvn/adjacency.hpp"
#include "cvn/errors.hpp"
#include "cvn/matrix.hpp"
#include "cvn/solver.hpp"

namespace cvn {

enum class InterpolationMode {
  sum,        // lambda1 |x| + lambda2 sum_i w_i |y_i - x|
  aggregate,  // lambda1 |x| + lambda2 |w^T y - x|
};

inline std::string to_string(InterpolationMode m) { return m == InterpolationMode::sum ? "sum" : "aggregate"; }

inline InterpolationMode parse_interpolation_mode(const std::string& s) {
  if (s == "sum") return InterpolationMode::sum;
  if (s == "aggregate") return InterpolationMode::aggregate;
  throw Error("unknown interpolation mode '" + s + "' (expected sum or aggregate)");
}

struct InterpolationSpec {
  std::vector<double> omegas;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  InterpolationMode mode = InterpolationMode::sum;

  void validate() const {
    if (omegas.empty()) throw Error("InterpolationSpec: no smoothing coefficients");
    bool positive = false;
    for (double w : omegas) {
      if (!std::isfinite(w) || w < 0.0) throw Error("InterpolationSpec: coefficients must be finite and >= 0");
      positive = positive || w > 0.0;
    }
    if (!positive) throw Error("InterpolationSpec: at least one coefficient must be positive");
    // lambda1 = 0 is accepted: the objective stays convex and piecewise linear.
    if (!std::isfinite(lambda1) || lambda1 < 0.0) throw Error("InterpolationSpec: lambda1 must be >= 0");
    if (!std::isfinite(lambda2) || lambda2 < 0.0) throw Error("InterpolationSpec: lambda2 must be >= 0");
  }
};

inline double interpolation_objective(double x, const std::vector<double>& y, const InterpolationSpec& spec) {
  if (y.size() != spec.omegas.size()) throw DimensionError("interpolation_objective: size mismatch");
  double smooth = 0.0;
  if (spec.mode == InterpolationMode::sum) {
    for (std::size_t i = 0; i < y.size(); ++i) smooth += spec.omegas[i] * std::abs(y[i] - x);
  } else {
    double agg = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) agg += spec.omegas[i] * y[i];
    smooth = std::abs(agg - x);
  }
  return spec.lambda1 * std::abs(x) + spec.lambda2 * smooth;
}

struct BrentResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

/// Brent's derivative-free minimizer on [a, b]: golden-section steps mixed
/// with parabolic interpolation. `tol` is the absolute tolerance on x.
template <class F>
BrentResult brent_minimize(F f, double a, double b, double tol = 1e-8, int max_iter = 500) {
  if (!(a < b)) throw Error("brent_minimize: empty interval");
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  const double rel = std::sqrt(std::numeric_limits<double>::epsilon());
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  int evals = 1;
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (a + b);
    const double tol1 = rel * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double pp = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) pp = -pp;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(pp) < std::abs(0.5 * q * e_prev) && pp > q * (a - x) && pp < q * (b - x)) {
        d = pp / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < mid ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < mid ? b : a) - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    ++evals;
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

/// Minimizer of the per-edge interpolation objective. Brent searches
/// [-r, r] with r = max|y| + 1 (widened to cover w^T y in aggregate mode).
/// The objective is piecewise linear with breakpoints at 0 and the y values,
/// so the Brent point is then compared against those breakpoints and the best
/// one is returned when it is at least as good; ties go to the breakpoint
/// closest to zero.
inline double interpolate_edge(const std::vector<double>& y, const InterpolationSpec& spec) {
  spec.validate();
  if (y.size() != spec.omegas.size())
    throw DimensionError("interpolate_edge: " + std::to_string(y.size()) + " values vs " +
                         std::to_string(spec.omegas.size()) + " coefficients");
  double r = 0.0, agg = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw NumericError("interpolate_edge: non-finite input");
    r = std::max(r, std::abs(y[i]));
    agg += spec.omegas[i] * y[i];
  }
  if (spec.mode == InterpolationMode::aggregate) r = std::max(r, std::abs(agg));
  r += 1.0;

  auto f = [&](double x) { return interpolation_objective(x, y, spec); };
  const BrentResult br = brent_minimize(f, -r, r, 1e-8);

  std::vector<double> kinks{0.0};
  if (spec.mode == InterpolationMode::sum) kinks.insert(kinks.end(), y.begin(), y.end());
  else kinks.push_back(agg);
  const double slack = 1e-12 * (1.0 + std::abs(br.fx));
  double best = br.x, best_f = br.fx;
  bool have_kink = false;
  for (double k : kinks) {
    const double fk = f(k);
    if (fk > br.fx + slack) continue;
    const bool take = !have_kink || fk < best_f - slack || (fk <= best_f + slack && std::abs(k) < std::abs(best));
    if (take) {
      best = k;
      best_f = fk;
      have_kink = true;
    }
  }
  return best;
}

/// Interpolated adjacency from the fitted Z values of a converged fit.
inline Adjacency interpolate_graph(const CvnFit& fit, const InterpolationSpec& spec, double tau) {
  spec.validate();
  if (!fit.converged) throw Error("interpolate_graph: the fit did not converge");
  if (static_cast<int>(spec.omegas.size()) != fit.m)
    throw DimensionError("interpolate_graph: " + std::to_string(spec.omegas.size()) + " coefficients for m=" +
                         std::to_string(fit.m));
  if (!(tau >= 0.0)) throw Error("interpolate_graph: tau must be >= 0");
  Adjacency out(fit.p);
  std::vector<double> y(static_cast<std::size_t>(fit.m));
  for (int s = 0; s < fit.p; ++s) {
    for (int t = s + 1; t < fit.p; ++t) {
      for (int i = 0; i < fit.m; ++i) y[static_cast<std::size_t>(i)] = fit.z[static_cast<std::size_t>(i)](s, t);
      if (std::abs(interpolate_edge(y, spec)) > tau) out.set(s, t, true);
    }
  }
  return out;
}

}  // namespace cvn
