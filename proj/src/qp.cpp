#include "pushmpc/qp.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace pushmpc::qp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::MaxIter:
      return "max_iter";
  }
  return "unknown";
}

void QProblem::validate() const {
  const int n = num_vars();
  if (hessian.rows() != n || hessian.cols() != n) {
    throw std::invalid_argument("QProblem: hessian/gradient size mismatch");
  }
  if (a_eq.rows() != b_eq.size() || (a_eq.rows() > 0 && a_eq.cols() != n)) {
    throw std::invalid_argument("QProblem: equality block size mismatch");
  }
  if (a_ineq.rows() != b_ineq.size() ||
      (a_ineq.rows() > 0 && a_ineq.cols() != n)) {
    throw std::invalid_argument("QProblem: inequality block size mismatch");
  }
  const double scale = std::max(1.0, hessian.cwiseAbs().maxCoeff());
  if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("QProblem: hessian not symmetric");
  }
}

double kkt_residual(const QProblem& p, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& eq_duals,
                    const Eigen::VectorXd& ineq_duals) {
  double r = 0.0;

  // Stationarity: H z + g + A_eq^T nu + A_ineq^T lambda = 0.
  Eigen::VectorXd st = p.hessian * z + p.gradient;
  double st_scale = 1.0 + std::max(inf_norm(p.hessian * z), inf_norm(p.gradient));
  if (p.num_eq() > 0) {
    const Eigen::VectorXd c = p.a_eq.transpose() * eq_duals;
    st += c;
    st_scale = std::max(st_scale, inf_norm(c));
  }
  if (p.num_ineq() > 0) {
    const Eigen::VectorXd c = p.a_ineq.transpose() * ineq_duals;
    st += c;
    st_scale = std::max(st_scale, inf_norm(c));
  }
  r = std::max(r, inf_norm(st) / st_scale);

  // Primal feasibility.
  if (p.num_eq() > 0) {
    const Eigen::VectorXd resid = p.a_eq * z - p.b_eq;
    r = std::max(r, inf_norm(resid) / (1.0 + inf_norm(p.b_eq)));
  }
  Eigen::VectorXd slack;
  if (p.num_ineq() > 0) {
    slack = p.a_ineq * z - p.b_ineq;
    r = std::max(r, std::max(0.0, slack.maxCoeff()) / (1.0 + inf_norm(p.b_ineq)));
    // Dual feasibility and complementarity.
    r = std::max(r, std::max(0.0, -ineq_duals.minCoeff()) /
                        (1.0 + inf_norm(ineq_duals)));
    for (int i = 0; i < slack.size(); ++i) {
      r = std::max(r, std::abs(ineq_duals[i] * slack[i]) /
                          (1.0 + std::abs(ineq_duals[i]) + std::abs(slack[i])));
    }
  }
  return r;
}

void dump(const QProblem& p, std::ostream& os) {
  os << "QProblem n=" << p.num_vars() << " eq=" << p.num_eq()
     << " ineq=" << p.num_ineq() << "\nH=\n"
     << p.hessian << "\ng=" << p.gradient.transpose() << "\nA_eq=\n"
     << p.a_eq << "\nb_eq=" << p.b_eq.transpose() << "\nA_ineq=\n"
     << p.a_ineq << "\nb_ineq=" << p.b_ineq.transpose() << "\n";
}

namespace {

// Working state of the dual active-set iteration.  Constraints are held in
// ">=" orientation: index k < p is the k-th equality (normal a_eq_k, kept in
// the active set forever), index k >= p is inequality k-p with normal
// -a_ineq row (so a z <= b becomes n z >= -b).
class ActiveSetSolver {
 public:
  explicit ActiveSetSolver(const QProblem& p) : p_(p), n_(p.num_vars()) {
    Eigen::MatrixXd h = p.hessian;
    llt_.compute(h);
    if (llt_.info() != Eigen::Success) {
      // The builder is expected to regularize; as a last resort escalate a
      // tiny diagonal jitter before giving up.
      const double base = h.trace() / n_;
      double jitter = 1e-12 * base;
      while (jitter <= 1e-6 * base) {
        llt_.compute(h + jitter * Eigen::MatrixXd::Identity(n_, n_));
        if (llt_.info() == Eigen::Success) break;
        jitter *= 100.0;
      }
      if (llt_.info() != Eigen::Success) {
        throw std::invalid_argument("qp::solve: hessian not positive definite");
      }
    }
    x_ = -llt_.solve(p.gradient);
    normals_.resize(n_, n_);
    hinv_normals_.resize(n_, n_);
    gram_.resize(n_, n_);
    duals_ = Eigen::VectorXd::Zero(n_);
  }

  QSolution run(int max_iter);

 private:
  Eigen::VectorXd normal_of(int k) const {
    if (k < p_.num_eq()) return p_.a_eq.row(k).transpose();
    return -p_.a_ineq.row(k - p_.num_eq()).transpose();
  }
  double rhs_of(int k) const {
    if (k < p_.num_eq()) return p_.b_eq[k];
    return -p_.b_ineq[k - p_.num_eq()];
  }
  bool is_eq(int k) const { return k < p_.num_eq(); }

  double slack_of(int k) const { return normal_of(k).dot(x_) - rhs_of(k); }

  // Step directions for a candidate normal: y = H^-1 np,
  // r = (N^T H^-1 N)^-1 X^T np (dual step), z = y - X r (primal step).
  void compute_step(const Eigen::VectorXd& np, Eigen::VectorXd* y,
                    Eigen::VectorXd* r, Eigen::VectorXd* z) const {
    *y = llt_.solve(np);
    if (q_ == 0) {
      r->resize(0);
      *z = *y;
      return;
    }
    const auto x_block = hinv_normals_.leftCols(q_);
    *r = gram_.topLeftCorner(q_, q_)
             .ldlt()
             .solve(x_block.transpose() * np);
    *z = *y - x_block * (*r);
  }

  void append_active(int k, const Eigen::VectorXd& np, const Eigen::VectorXd& y,
                     double dual) {
    normals_.col(q_) = np;
    hinv_normals_.col(q_) = y;
    // Grow the Gram matrix N^T H^-1 N by one row/column.
    for (int i = 0; i < q_; ++i) {
      const double v = normals_.col(i).dot(y);
      gram_(i, q_) = v;
      gram_(q_, i) = v;
    }
    gram_(q_, q_) = np.dot(y);
    duals_[q_] = dual;
    active_.push_back(k);
    ++q_;
  }

  void drop_active(int idx) {
    for (int j = idx; j + 1 < q_; ++j) {
      normals_.col(j) = normals_.col(j + 1);
      hinv_normals_.col(j) = hinv_normals_.col(j + 1);
      duals_[j] = duals_[j + 1];
      active_[j] = active_[j + 1];
    }
    // Remove row/column idx from the Gram block.
    for (int i = idx; i + 1 < q_; ++i) {
      for (int j = 0; j < q_; ++j) gram_(i, j) = gram_(i + 1, j);
    }
    for (int j = idx; j + 1 < q_; ++j) {
      for (int i = 0; i + 1 < q_; ++i) gram_(i, j) = gram_(i, j + 1);
    }
    active_.pop_back();
    --q_;
  }

  QSolution finish(SolveStatus status);

  const QProblem& p_;
  int n_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd normals_;       // N, columns 0..q-1
  Eigen::MatrixXd hinv_normals_;  // H^-1 N
  Eigen::MatrixXd gram_;          // N^T H^-1 N
  Eigen::VectorXd duals_;
  std::vector<int> active_;
  int q_ = 0;
};

QSolution ActiveSetSolver::finish(SolveStatus status) {
  QSolution sol;
  sol.status = status;
  sol.z = x_;
  sol.eq_duals = Eigen::VectorXd::Zero(p_.num_eq());
  sol.ineq_duals = Eigen::VectorXd::Zero(p_.num_ineq());
  for (int i = 0; i < q_; ++i) {
    const int k = active_[i];
    if (is_eq(k)) {
      // Internal convention H x + g = sum u n; external stationarity uses
      // +A^T nu, so the sign flips for equalities (normal = +a_eq row).
      sol.eq_duals[k] = -duals_[i];
    } else {
      sol.ineq_duals[k - p_.num_eq()] = duals_[i];
    }
  }
  if (status == SolveStatus::Optimal) {
    sol.objective = 0.5 * x_.dot(p_.hessian * x_) + p_.gradient.dot(x_) +
                    p_.constant;
    sol.kkt_residual = kkt_residual(p_, sol.z, sol.eq_duals, sol.ineq_duals);
  } else {
    sol.objective = kInf;
    sol.kkt_residual = kInf;
  }
  return sol;
}

QSolution ActiveSetSolver::run(int max_iter) {
  const int n_eq = p_.num_eq();
  const int n_ineq = p_.num_ineq();
  const int cap =
      max_iter > 0 ? max_iter : 50 * (n_ + n_eq + n_ineq) + 100;

  const double tol_zero = 1e-12;
  const double tol_feas = 1e-10;

  Eigen::VectorXd y, r, z;

  // Phase 1: install the equalities (free-sign duals, never removed).
  for (int k = 0; k < n_eq; ++k) {
    const Eigen::VectorXd np = normal_of(k);
    compute_step(np, &y, &r, &z);
    const double resid = rhs_of(k) - np.dot(x_);
    const double z_scale = 1.0 + inf_norm(y) + inf_norm(x_);
    if (inf_norm(z) <= tol_zero * z_scale) {
      // Linearly dependent on the current active set: consistent -> skip,
      // inconsistent -> no solution.
      if (std::abs(resid) > tol_feas * (1.0 + std::abs(rhs_of(k)))) {
        return finish(SolveStatus::Infeasible);
      }
      continue;
    }
    const double t = resid / z.dot(np);
    x_ += t * z;
    if (q_ > 0) duals_.head(q_) -= t * r;
    append_active(k, np, y, t);
  }

  // Phase 2: dual active-set iteration over the inequalities.
  std::vector<char> in_active(n_eq + n_ineq, 0);
  for (int i = 0; i < q_; ++i) in_active[active_[i]] = 1;

  Eigen::VectorXd slacks(n_ineq);
  for (int iter = 0; iter < cap; ++iter) {
    // Most violated inactive inequality (internal ">=" slack is b - a.x).
    if (n_ineq > 0) slacks = p_.b_ineq - p_.a_ineq * x_;
    int ip = -1;
    double worst = -tol_feas * (1.0 + inf_norm(x_));
    for (int k = n_eq; k < n_eq + n_ineq; ++k) {
      if (in_active[k]) continue;
      const double s = slacks[k - n_eq];
      if (s < worst) {
        worst = s;
        ip = k;
      }
    }
    if (ip < 0) return finish(SolveStatus::Optimal);

    const Eigen::VectorXd np = normal_of(ip);
    double u_plus = 0.0;

    for (int inner = 0; inner <= cap; ++inner) {
      compute_step(np, &y, &r, &z);
      const double z_scale = 1.0 + inf_norm(y) + inf_norm(x_);
      // A full active basis spans R^n, so no primal step exists even if
      // roundoff leaves z marginally nonzero.
      const bool have_z = q_ < n_ && inf_norm(z) > tol_zero * z_scale;

      // Partial step bound: first active inequality whose dual hits zero.
      double t1 = kInf;
      int drop = -1;
      for (int i = 0; i < q_; ++i) {
        if (is_eq(active_[i])) continue;
        if (r.size() == 0 || r[i] <= tol_zero) continue;
        const double cand = duals_[i] / r[i];
        if (cand < t1) {
          t1 = cand;
          drop = i;
        }
      }
      // Full step: distance until the new constraint becomes tight.
      const double slack = slack_of(ip);
      const double t2 = have_z ? -slack / z.dot(np) : kInf;

      if (t1 == kInf && t2 == kInf) {
        return finish(SolveStatus::Infeasible);
      }

      if (t2 <= t1) {
        x_ += t2 * z;
        if (q_ > 0) duals_.head(q_) -= t2 * r;
        u_plus += t2;
        append_active(ip, np, y, u_plus);
        in_active[ip] = 1;
        break;
      }

      // Partial step: move as far as the blocking dual allows, then drop it.
      if (have_z) x_ += t1 * z;
      duals_.head(q_) -= t1 * r;
      u_plus += t1;
      in_active[active_[drop]] = 0;
      drop_active(drop);
    }
  }
  return finish(SolveStatus::MaxIter);
}

}  // namespace

QSolution solve(const QProblem& problem, int max_iter) {
  problem.validate();
  ActiveSetSolver solver(problem);
  return solver.run(max_iter);
}

}  // namespace pushmpc::qp
