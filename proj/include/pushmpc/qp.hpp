#pragma once

#include <Eigen/Dense>
#include <iosfwd>

namespace pushmpc::qp {

// Convex quadratic program
//   minimize    0.5 z^T H z + g^T z + constant
//   subject to  a_eq z = b_eq,  a_ineq z <= b_ineq
// H must be symmetric positive (semi-)definite; callers regularize upstream.
struct QProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a_ineq;
  Eigen::VectorXd b_ineq;
  double constant = 0.0;

  int num_vars() const { return static_cast<int>(gradient.size()); }
  int num_eq() const { return static_cast<int>(b_eq.size()); }
  int num_ineq() const { return static_cast<int>(b_ineq.size()); }

  // Throws std::invalid_argument on dimension mismatch or an asymmetric
  // Hessian (tolerance 1e-12 relative).
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter };

const char* to_string(SolveStatus s);

struct QSolution {
  Eigen::VectorXd z;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  double kkt_residual = 0.0;
  // Lagrange multipliers: stationarity is
  //   H z + g + a_eq^T eq_duals + a_ineq^T ineq_duals = 0,  ineq_duals >= 0.
  Eigen::VectorXd eq_duals;
  Eigen::VectorXd ineq_duals;
};

// Dual active-set method (Goldfarb-Idnani scheme): starts from the
// unconstrained minimizer and adds violated constraints one at a time,
// keeping dual feasibility throughout.  Deterministic: identical inputs give
// bit-identical outputs.  max_iter <= 0 selects an automatic cap.
QSolution solve(const QProblem& problem, int max_iter = 0);

// Independent stationarity/feasibility/complementarity check used by tests
// and by the solver itself to fill in QSolution::kkt_residual.  Returns the
// largest scaled residual across all KKT conditions.
double kkt_residual(const QProblem& problem, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& eq_duals,
                    const Eigen::VectorXd& ineq_duals);

// Human-readable dump for debugging failed solves.
void dump(const QProblem& problem, std::ostream& os);

}  // namespace pushmpc::qp
