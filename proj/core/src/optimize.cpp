#include "exhaz/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "exhaz/error.hpp"

namespace exhaz::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Probe {
  double f = kInf;
  Eigen::VectorXd g;
  bool ok = false;
};

class Counted {
 public:
  Counted(const Objective& f, int cap) : f_(f), cap_(cap) {}

  Probe operator()(const Eigen::VectorXd& x) {
    ++count_;
    Probe p;
    try {
      p.f = f_(x, &p.g);
      p.ok = std::isfinite(p.f) && p.g.allFinite();
    } catch (const Error&) {
      p.ok = false;
    }
    if (!p.ok) p.f = kInf;
    return p;
  }

  int count() const { return count_; }
  bool exhausted() const { return count_ >= cap_; }

 private:
  const Objective& f_;
  int cap_;
  int count_ = 0;
};

struct LineSearchResult {
  double step = 0.0;
  Probe probe;
  bool found = false;
};

// Strong-Wolfe line search (bracketing then zoom with safeguarded
// quadratic interpolation).
LineSearchResult wolfe_search(Counted& eval, const Eigen::VectorXd& x, double f0,
                              const Eigen::VectorXd& d, double slope0, double step0) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  LineSearchResult best;
  best.probe.f = f0;

  auto remember = [&](double a, const Probe& p) {
    if (p.ok && p.f < best.probe.f && p.f <= f0 + c1 * a * slope0) {
      best.step = a;
      best.probe = p;
      best.found = true;
    }
  };

  auto zoom = [&](double lo, double f_lo, double s_lo, double hi, double f_hi) {
    for (int it = 0; it < 40 && !eval.exhausted(); ++it) {
      const double width = hi - lo;
      double a = 0.5 * (lo + hi);
      if (std::isfinite(f_hi)) {
        // Minimiser of the quadratic through (lo, f_lo, s_lo) and (hi, f_hi).
        const double denom = 2.0 * (f_hi - f_lo - s_lo * width);
        if (denom > 0.0) a = lo - s_lo * width * width / denom;
      }
      const double lo_edge = std::min(lo, hi) + 0.1 * std::abs(width);
      const double hi_edge = std::max(lo, hi) - 0.1 * std::abs(width);
      a = std::clamp(a, lo_edge, hi_edge);
      const Probe p = eval(x + a * d);
      remember(a, p);
      if (!p.ok || p.f > f0 + c1 * a * slope0 || p.f >= f_lo) {
        hi = a;
        f_hi = p.f;
        continue;
      }
      const double s = p.g.dot(d);
      if (std::abs(s) <= -c2 * slope0) {
        return LineSearchResult{a, p, true};
      }
      if (s * (hi - lo) >= 0.0) {
        hi = lo;
        f_hi = f_lo;
      }
      lo = a;
      f_lo = p.f;
      s_lo = s;
      if (std::abs(hi - lo) < 1e-14 * std::max(1.0, std::abs(lo))) break;
    }
    return best;
  };

  double a_prev = 0.0, f_prev = f0, s_prev = slope0;
  double a = step0;
  for (int it = 0; it < 30 && !eval.exhausted(); ++it) {
    const Probe p = eval(x + a * d);
    remember(a, p);
    if (!p.ok || p.f > f0 + c1 * a * slope0 || (it > 0 && p.f >= f_prev)) {
      return zoom(a_prev, f_prev, s_prev, a, p.f);
    }
    const double s = p.g.dot(d);
    if (std::abs(s) <= -c2 * slope0) return LineSearchResult{a, p, true};
    if (s >= 0.0) return zoom(a, p.f, s, a_prev, f_prev);
    a_prev = a;
    f_prev = p.f;
    s_prev = s;
    a *= 2.0;
  }
  return best;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                         const BfgsOptions& options) {
  Counted eval(f, options.max_evaluations);
  BfgsResult r;
  r.x = x0;
  Probe cur = eval(x0);
  r.evaluations = eval.count();
  if (!cur.ok) {
    r.f = kInf;
    r.termination = Termination::BadStart;
    return r;
  }
  const auto n = x0.size();
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd x = x0;

  auto converged = [&](const Probe& p) {
    return p.g.lpNorm<Eigen::Infinity>() <= options.gradient_tol * (1.0 + std::abs(p.f));
  };

  r.termination = Termination::EvaluationLimit;
  while (true) {
    if (converged(cur)) {
      r.termination = Termination::GradientTol;
      break;
    }
    if (eval.exhausted()) {
      r.termination = Termination::EvaluationLimit;
      break;
    }
    Eigen::VectorXd d = -inv_h * cur.g;
    double slope = cur.g.dot(d);
    if (!(slope < 0.0)) {
      inv_h.setIdentity();
      scaled = false;
      d = -cur.g;
      slope = cur.g.dot(d);
    }
    double step0 = 1.0;
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax * step0 > options.max_step) step0 = options.max_step / dmax;

    LineSearchResult ls = wolfe_search(eval, x, cur.f, d, slope, step0);
    if (!ls.found && !scaled) {
      // Retry once along steepest descent before giving up.
      inv_h.setIdentity();
      d = -cur.g;
      slope = cur.g.dot(d);
      const double gmax = d.lpNorm<Eigen::Infinity>();
      ls = wolfe_search(eval, x, cur.f, d, slope, std::min(1.0, options.max_step / gmax));
    }
    if (!ls.found) {
      r.termination = eval.exhausted() ? Termination::EvaluationLimit
                                       : Termination::LineSearchStalled;
      break;
    }
    const Eigen::VectorXd s = ls.step * d;
    const Eigen::VectorXd y = ls.probe.g - cur.g;
    if (ls.probe.f > cur.f) r.monotone = false;
    x += s;
    cur = std::move(ls.probe);
    ++r.iterations;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_h *= sy / y.dot(y);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = inv_h * y;
      inv_h += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
               rho * (hy * s.transpose() + s * hy.transpose());
    }
    if (s.lpNorm<Eigen::Infinity>() < options.step_tol) {
      r.termination = converged(cur) ? Termination::GradientTol : Termination::StepTol;
      break;
    }
  }
  r.x = x;
  r.f = cur.f;
  r.grad = cur.g;
  r.evaluations = eval.count();
  return r;
}

BrentResult minimize_brent(const std::function<double(double)>& f, double lo, double hi,
                           double tol, int max_evaluations) {
  constexpr double golden = 0.3819660112501051;
  BrentResult r;
  auto eval = [&](double x) {
    ++r.evaluations;
    double v = kInf;
    try {
      v = f(x);
    } catch (const Error&) {
      v = kInf;
    }
    return std::isfinite(v) ? v : kInf;
  };

  double a = lo, b = hi;
  double x = a + golden * (b - a), w = x, v = x;
  double fx = eval(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  while (r.evaluations < max_evaluations) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-10;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::abs(e) > tol1 && std::isfinite(fx) && std::isfinite(fw) && std::isfinite(fv)) {
      double rr = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * rr;
      q = 2.0 * (q - rr);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < m ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < m ? b : a) - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = eval(u);
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  r.x = x;
  r.f = fx;
  return r;
}

Eigen::MatrixXd hessian_from_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  const auto n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd gp, gm;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    f(xp, &gp);
    f(xm, &gm);
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(xp, nullptr) - f(xm, nullptr)) / (2.0 * h);
  }
  return g;
}

}  // namespace exhaz::opt
