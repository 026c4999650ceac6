#include "pushmpc/mpc.hpp"

#include <cmath>
#include <stdexcept>

namespace pushmpc {
namespace {

// d/dtheta of the rotation matrix applied to a plane vector.
Eigen::Vector2d rot2_dtheta(double theta, const Eigen::Vector2d& v) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {-s * v.x() - c * v.y(), c * v.x() - s * v.y()};
}

}  // namespace

Linearization linearize_analytical(const SliderParams& p, const State& x,
                                   const Eigen::Vector3d& u_m) {
  const double alpha = 2.0 / (p.f_max * p.f_max);
  const double beta = 2.0 / (p.tau_max * p.tau_max);
  const double f_n = u_m[0], f_t = u_m[1];
  const Eigen::Vector2d t_xy{alpha * f_n, alpha * f_t};

  Linearization lin;
  lin.b.setZero(4, 3);

  lin.a.col(2).head<2>() = rot2_dtheta(x.theta, t_xy);
  lin.a(2, 3) = -beta * f_n;  // torque arm of the normal force

  const Eigen::Matrix2d r = rot2(x.theta);
  lin.b.col(0).head<2>() = r * Eigen::Vector2d{alpha, 0.0};
  lin.b.col(1).head<2>() = r * Eigen::Vector2d{0.0, alpha};
  lin.b(2, 0) = -beta * x.p_y;
  lin.b(2, 1) = beta * p.p_x;
  lin.b(3, 2) = 1.0;
  return lin;
}

Linearization linearize_learned(const LearnedDynamics& dyn, const State& x,
                                const Eigen::Vector2d& u_d) {
  const double nv = u_d.norm();
  if (nv == 0.0)
    throw ZeroVelocityError("linearize_learned: zero pusher velocity");
  const double p_x = dyn.params.p_x;
  const double rate = 1.0 / (dyn.gp.v_nom * dyn.gp.dt);
  const double s = nv * rate;

  const Eigen::Vector2d z{x.p_y, beta_of(u_d)};
  const Eigen::Vector3d g = dyn.gp.predict_mean(z);
  const Eigen::Matrix<double, 3, 2> dg = dyn.gp.predict_mean_gradient(z);

  Linearization lin;
  lin.b.setZero(4, 2);
  const Eigen::Matrix2d r = rot2(x.theta);

  // State columns: heading rotates the planar twist, p_y enters the GP.
  lin.a.col(2).head<2>() = rot2_dtheta(x.theta, s * g.head<2>());
  const Eigen::Vector3d dt_py = s * dg.col(0);
  lin.a.col(3).head<2>() = r * dt_py.head<2>();
  lin.a(2, 3) = dt_py[2];
  lin.a(3, 3) = -(dt_py[1] + p_x * dt_py[2]);

  // Input columns through the speed scale and the push angle.
  const Eigen::Vector2d ds = rate * u_d / nv;
  const Eigen::Vector2d dbeta{-u_d[1] / (nv * nv), u_d[0] / (nv * nv)};
  for (int j = 0; j < 2; ++j) {
    const Eigen::Vector3d dt = ds[j] * g + s * dg.col(1) * dbeta[j];
    lin.b.col(j).head<2>() = r * dt.head<2>();
    lin.b(2, j) = dt[2];
    lin.b(3, j) = (j == 1 ? 1.0 : 0.0) - (dt[1] + p_x * dt[2]);
  }
  return lin;
}

MpcWeights MpcWeights::analytical() {
  MpcWeights w;
  w.q = Eigen::Vector4d{6000.0, 3000.0, 10.0, 0.0};
  w.q_terminal = w.q;
  w.r = Eigen::Vector3d{0.1, 1e-3, 1e-3};
  return w;
}

MpcWeights MpcWeights::learned() {
  MpcWeights w;
  w.q = Eigen::Vector4d{6000.0, 3000.0, 10.0, 3000.0};
  w.q_terminal = w.q;
  w.r = Eigen::Vector2d{10.0, 1e-3};
  return w;
}

Condensed condense(const LtvProblem& ltv) {
  const int horizon = static_cast<int>(ltv.a.size());
  if (horizon == 0 || ltv.b.size() != ltv.a.size())
    throw std::invalid_argument("condense: empty or mismatched horizon");
  const int m = static_cast<int>(ltv.b[0].cols());
  if (static_cast<int>(ltv.r.size()) != m)
    throw std::invalid_argument("condense: r does not match input size");

  Condensed out;
  out.s.setZero(4 * horizon, m * horizon);
  out.t.setZero(4 * horizon, 4);

  // Forward accumulation: row block k holds xt_{k+1} = prod(a) x0 + ...
  Eigen::Matrix4d phi = Eigen::Matrix4d::Identity();
  for (int k = 0; k < horizon; ++k) {
    if (ltv.b[k].cols() != m || ltv.b[k].rows() != 4)
      throw std::invalid_argument("condense: inconsistent input matrix");
    if (k > 0) {
      out.s.middleRows(4 * k, 4) = ltv.a[k] * out.s.middleRows(4 * (k - 1), 4);
    }
    out.s.block(4 * k, m * k, 4, m) = ltv.b[k];
    phi = ltv.a[k] * phi;
    out.t.middleRows(4 * k, 4) = phi;
  }

  Eigen::VectorXd q_bar(4 * horizon);
  for (int k = 0; k < horizon; ++k) q_bar.segment<4>(4 * k) = ltv.q;
  q_bar.tail<4>() += ltv.q_terminal;
  Eigen::VectorXd r_bar(m * horizon);
  for (int k = 0; k < horizon; ++k) r_bar.segment(m * k, m) = ltv.r;

  const Eigen::MatrixXd qs = q_bar.asDiagonal() * out.s;
  out.problem.hessian = 2.0 * (out.s.transpose() * qs);
  out.problem.hessian.diagonal() += 2.0 * r_bar;
  const Eigen::Vector4d qtx = (out.t.transpose() * (q_bar.asDiagonal() * (out.t * ltv.x0)));
  out.problem.gradient = 2.0 * (qs.transpose() * (out.t * ltv.x0));
  out.problem.constant = ltv.x0.dot(qtx);

  // Symmetrize and lift the diagonal: long horizons leave the condensed
  // Hessian ill-conditioned.
  out.problem.hessian =
      0.5 * (out.problem.hessian + out.problem.hessian.transpose()).eval();
  const int n = static_cast<int>(out.problem.hessian.rows());
  out.problem.hessian.diagonal().array() +=
      ltv.regularization * out.problem.hessian.trace() / n;
  return out;
}

namespace {

// Dense constraint assembly over the stacked input deviations.
struct RowSet {
  std::vector<Eigen::VectorXd> a;
  std::vector<double> b;

  void add(Eigen::VectorXd row, double rhs) {
    a.push_back(std::move(row));
    b.push_back(rhs);
  }
  void pack(Eigen::MatrixXd* mat, Eigen::VectorXd* vec, int cols) const {
    mat->setZero(static_cast<int>(a.size()), cols);
    vec->resize(static_cast<int>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      mat->row(static_cast<int>(i)) = a[i].transpose();
      (*vec)[static_cast<int>(i)] = b[i];
    }
  }
};

Eigen::VectorXd block_row(int cols, int offset, const Eigen::VectorXd& coeff) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(cols);
  row.segment(offset, coeff.size()) = coeff;
  return row;
}

// |p_y| <= side/2 along the horizon, expressed over the stacked inputs.
void add_face_rows(const Condensed& cond, const Eigen::Vector4d& x0,
                   const NominalTrajectory& traj, double t, double half_face,
                   int horizon, RowSet* ineq) {
  for (int k = 0; k < horizon; ++k) {
    const int idx = 4 * k + 3;
    const double ref = lookup(traj, t + (k + 1) * traj.step_h).x.p_y;
    const double drift = cond.t.row(idx).dot(x0);
    ineq->add(cond.s.row(idx).transpose(), half_face - ref - drift);
    ineq->add(-cond.s.row(idx).transpose(), half_face + ref + drift);
  }
}

ControlResult solve_condensed(qp::QProblem problem, const RowSet& eq,
                              const RowSet& ineq,
                              const Eigen::VectorXd& u_nominal, int m) {
  const int cols = static_cast<int>(problem.gradient.size());
  eq.pack(&problem.a_eq, &problem.b_eq, cols);
  ineq.pack(&problem.a_ineq, &problem.b_ineq, cols);
  const qp::QSolution sol = qp::solve(problem);
  ControlResult res;
  res.status = sol.status;
  if (sol.status != qp::SolveStatus::Optimal) return res;
  res.ok = true;
  res.u = u_nominal + sol.z.head(m);
  res.objective = sol.objective;
  return res;
}

}  // namespace

AnalyticalMpc::AnalyticalMpc(SliderParams params, NominalTrajectory reference,
                             MpcWeights weights, MpcOptions options)
    : params_(std::move(params)),
      traj_(std::move(reference)),
      weights_(std::move(weights)),
      options_(options) {
  params_.validate();
  if (options_.horizon < 1) throw std::invalid_argument("horizon < 1");
  if (options_.sliding_steps < 1 || options_.sliding_steps > options_.horizon)
    throw std::invalid_argument("sliding_steps out of range");
  if (weights_.r.size() != 3)
    throw std::invalid_argument("analytical weights need 3 input costs");

  const int n = options_.horizon;
  sequences_[0].assign(n, ContactMode::Sticking);
  sequences_[1].assign(n, ContactMode::Sticking);
  sequences_[2].assign(n, ContactMode::Sticking);
  for (int k = 0; k < options_.sliding_steps; ++k) {
    sequences_[1][k] = ContactMode::SlidingLeft;
    sequences_[2][k] = ContactMode::SlidingRight;
  }
}

ControlResult AnalyticalMpc::control(const State& x, double t) {
  const int n = options_.horizon;
  const double h = traj_.step_h;

  LtvProblem ltv;
  ltv.q = weights_.q;
  ltv.q_terminal = weights_.q_terminal;
  ltv.r = weights_.r;
  ltv.regularization = options_.regularization;
  ltv.a.reserve(n);
  ltv.b.reserve(n);
  std::vector<Eigen::Vector3d> u_ref(n);
  for (int k = 0; k < n; ++k) {
    const NominalPoint np = lookup(traj_, t + k * h);
    u_ref[k] = np.u_m;
    const Linearization lin = linearize_analytical(params_, np.x, np.u_m);
    ltv.a.push_back(Eigen::Matrix4d::Identity() + h * lin.a);
    ltv.b.push_back(h * lin.b);
  }
  ltv.x0 = x.vec() - lookup(traj_, t).x.vec();

  const Condensed cond = condense(ltv);
  const int cols = static_cast<int>(cond.s.cols());
  const double f_n_max = options_.f_n_scale * params_.f_max;

  ControlResult best;
  for (const auto& seq : sequences_) {
    RowSet eq, ineq;
    for (int k = 0; k < n; ++k) {
      const LinearConstraintSet set = mode_constraints(params_, seq[k]);
      for (const auto& [a, b] : set.eq)
        eq.add(block_row(cols, 3 * k, a), b - a.dot(u_ref[k]));
      for (const auto& [a, b] : set.ineq)
        ineq.add(block_row(cols, 3 * k, a), b - a.dot(u_ref[k]));
      const Eigen::Vector3d fn{1, 0, 0}, pd{0, 0, 1};
      ineq.add(block_row(cols, 3 * k, fn), f_n_max - u_ref[k][0]);
      if (seq[k] != ContactMode::Sticking) {
        ineq.add(block_row(cols, 3 * k, pd), options_.pdot_y_max - u_ref[k][2]);
        ineq.add(block_row(cols, 3 * k, -pd),
                 options_.pdot_y_max + u_ref[k][2]);
      }
    }
    add_face_rows(cond, ltv.x0, traj_, t, params_.side_a / 2.0, n, &ineq);

    ControlResult res =
        solve_condensed(cond.problem, eq, ineq, u_ref[0], 3);
    res.mode = seq[0];
    if (res.ok && res.objective < best.objective) best = res;
  }
  if (!best.ok) best.u = u_ref[0];
  return best;
}

Eigen::Vector2d AnalyticalMpc::to_pusher_velocity(
    const State& x, const Eigen::VectorXd& u) const {
  return pusher_velocity_for_command(params_, x.p_y, u.head<3>());
}

Eigen::VectorXd AnalyticalMpc::nominal_input(double t) const {
  return lookup(traj_, t).u_m;
}

LearnedMpc::LearnedMpc(LearnedDynamics dynamics, NominalTrajectory reference,
                       MpcWeights weights, MpcOptions options)
    : dyn_(std::move(dynamics)),
      traj_(std::move(reference)),
      weights_(std::move(weights)),
      options_(options) {
  dyn_.params.validate();
  if (options_.horizon < 1) throw std::invalid_argument("horizon < 1");
  if (weights_.r.size() != 2)
    throw std::invalid_argument("learned weights need 2 input costs");
}

ControlResult LearnedMpc::control(const State& x, double t) {
  const int n = options_.horizon;
  const double h = traj_.step_h;

  LtvProblem ltv;
  ltv.q = weights_.q;
  ltv.q_terminal = weights_.q_terminal;
  ltv.r = weights_.r;
  ltv.regularization = options_.regularization;
  ltv.a.reserve(n);
  ltv.b.reserve(n);
  std::vector<Eigen::Vector2d> u_ref(n);
  for (int k = 0; k < n; ++k) {
    const NominalPoint np = lookup(traj_, t + k * h);
    u_ref[k] = np.u_d;
    const Linearization lin = linearize_learned(dyn_, np.x, np.u_d);
    ltv.a.push_back(Eigen::Matrix4d::Identity() + h * lin.a);
    ltv.b.push_back(h * lin.b);
  }
  ltv.x0 = x.vec() - lookup(traj_, t).x.vec();

  const Condensed cond = condense(ltv);
  const int cols = static_cast<int>(cond.s.cols());
  const double v_max = options_.v_scale * traj_.speed;

  RowSet eq, ineq;
  const Eigen::Vector2d vn{1, 0}, vt{0, 1};
  for (int k = 0; k < n; ++k) {
    ineq.add(block_row(cols, 2 * k, -vn), u_ref[k][0]);  // v_n >= 0
    ineq.add(block_row(cols, 2 * k, vn), v_max - u_ref[k][0]);
    ineq.add(block_row(cols, 2 * k, vt), v_max - u_ref[k][1]);
    ineq.add(block_row(cols, 2 * k, -vt), v_max + u_ref[k][1]);
  }
  add_face_rows(cond, ltv.x0, traj_, t, dyn_.params.side_a / 2.0, n, &ineq);

  ControlResult res = solve_condensed(cond.problem, eq, ineq, u_ref[0], 2);
  if (!res.ok) res.u = u_ref[0];
  return res;
}

Eigen::Vector2d LearnedMpc::to_pusher_velocity(const State&,
                                               const Eigen::VectorXd& u) const {
  return u.head<2>();
}

Eigen::VectorXd LearnedMpc::nominal_input(double t) const {
  return lookup(traj_, t).u_d;
}

}  // namespace pushmpc
