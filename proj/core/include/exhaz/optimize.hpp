#pragma once

#include <functional>

#include <Eigen/Core>

namespace exhaz::opt {

// Objective to minimise. Writes the gradient when grad is non-null. May throw
// exhaz::Error (e.g. NonFiniteLikelihood); such points are treated as +inf.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
  double gradient_tol = 1e-6;  // on max|g| / (1 + |f|)
  double step_tol = 1e-9;      // on max|dx|
  int max_evaluations = 2000;
  double max_step = 2.0;       // cap on max|dx| of the first trial step
};

enum class Termination { GradientTol, StepTol, LineSearchStalled, EvaluationLimit, BadStart };

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  Termination termination = Termination::BadStart;
  bool monotone = true;  // every accepted step decreased f
};

// Quasi-Newton minimisation with a strong-Wolfe line search.
BfgsResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                         const BfgsOptions& options = {});

struct BrentResult {
  double x = 0.0;
  double f = 0.0;
  int evaluations = 0;
};

// Brent's method on [lo, hi]; non-finite values count as +inf.
BrentResult minimize_brent(const std::function<double(double)>& f, double lo, double hi,
                           double tol = 1e-6, int max_evaluations = 100);

// Central-difference Hessian from an analytic gradient, symmetrised.
Eigen::MatrixXd hessian_from_gradient(const Objective& f, const Eigen::VectorXd& x, double h);

// Central-difference gradient of the objective value alone.
Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double h);

}  // namespace exhaz::opt
