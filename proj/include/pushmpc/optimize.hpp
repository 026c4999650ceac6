#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>

namespace pushmpc {

// Box-constrained quasi-Newton minimizer (limited-memory BFGS with gradient
// projection and Armijo backtracking).  Small and deterministic; used for
// hyperparameter optimization where the objective supplies its gradient.
struct LbfgsOptions {
  int max_evals = 60;
  int memory = 5;
  double grad_tol = 1e-6;  // on the projected gradient, relative to 1+|f|
  double f_tol = 1e-10;    // relative decrease considered converged
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// f(x, grad_out) returns the objective value and fills the gradient.
inline LbfgsResult minimize_lbfgs_box(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, const LbfgsOptions& opts = {}) {
  const auto dim = x0.size();
  auto clamp = [&](Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      v[i] = std::min(hi[i], std::max(lo[i], v[i]));
    }
    return v;
  };
  auto projected_grad = [&](const Eigen::VectorXd& x,
                            const Eigen::VectorXd& g) {
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < dim; ++i) {
      if ((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)) {
        pg[i] = 0.0;
      }
    }
    return pg;
  };

  LbfgsResult res;
  Eigen::VectorXd x = clamp(x0);
  Eigen::VectorXd g(dim);
  double fx = f(x, g);
  res.evals = 1;

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  while (res.evals < opts.max_evals) {
    const Eigen::VectorXd pg = projected_grad(x, g);
    if (pg.cwiseAbs().maxCoeff() <= opts.grad_tol * (1.0 + std::abs(fx))) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd d = -pg;
    if (!s_hist.empty()) {
      std::vector<double> a(s_hist.size());
      for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
        a[i] = rho_hist[i] * s_hist[i].dot(d);
        d -= a[i] * y_hist[i];
      }
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
      for (size_t i = 0; i < s_hist.size(); ++i) {
        const double b = rho_hist[i] * y_hist[i].dot(d);
        d += (a[i] - b) * s_hist[i];
      }
      // Linearity of the recursion keeps d = -H^-1 pg.
    }
    if (d.dot(pg) >= -1e-12 * d.norm() * pg.norm()) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -pg;
    }

    // Backtracking line search on the projected path.
    double step = s_hist.empty() ? 1.0 / std::max(1.0, pg.cwiseAbs().maxCoeff())
                                 : 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, g_new(dim);
    double f_new = fx;
    for (int ls = 0; ls < 25 && res.evals < opts.max_evals; ++ls) {
      x_new = clamp(x + step * d);
      const Eigen::VectorXd dx = x_new - x;
      if (dx.cwiseAbs().maxCoeff() == 0.0) break;
      f_new = f(x_new, g_new);
      ++res.evals;
      if (f_new <= fx + 1e-4 * g.dot(dx)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double df = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    if (df <= opts.f_tol * (1.0 + std::abs(fx))) {
      res.converged = true;
      break;
    }
  }

  res.x = x;
  res.f = fx;
  return res;
}

}  // namespace pushmpc
