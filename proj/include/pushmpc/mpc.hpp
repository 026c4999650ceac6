#pragma once

#include <Eigen/Dense>
#include <array>
#include <limits>
#include <vector>

#include "pushmpc/learned_model.hpp"
#include "pushmpc/qp.hpp"
#include "pushmpc/slider_model.hpp"
#include "pushmpc/tracks.hpp"

namespace pushmpc {

// First-order expansion of a state derivative: f(x, u) ~ f0 + a (x - x0)
// + b (u - u0).  b has one column per input.
struct Linearization {
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  Eigen::Matrix<double, 4, Eigen::Dynamic> b;
};

Linearization linearize_analytical(const SliderParams& p, const State& x,
                                   const Eigen::Vector3d& u_m);

// Requires a nonzero pusher velocity (the learned twist has a conic point at
// v_p = 0); throws ZeroVelocityError otherwise.
Linearization linearize_learned(const LearnedDynamics& dyn, const State& x,
                                const Eigen::Vector2d& u_d);

struct MpcWeights {
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Eigen::Vector4d q_terminal = Eigen::Vector4d::Zero();
  Eigen::VectorXd r;

  static MpcWeights analytical();
  static MpcWeights learned();
};

struct MpcOptions {
  int horizon = 35;
  int sliding_steps = 5;   // leading sliding steps of the sliding sequences
  double f_n_scale = 10.0; // f_n <= f_n_scale * f_max
  double pdot_y_max = 0.1; // m/s, contact point slip bound
  double v_scale = 3.0;    // learned input bound, multiple of track speed
  double regularization = 1e-9;  // relative Hessian diagonal lift
};

// Discrete-time LTV tracking problem over the deviation variables
// xt_{k+1} = a[k] xt_k + b[k] ut_k, with stage cost
// xt' diag(q) xt + ut' diag(r) ut and terminal cost xt_N' diag(q +
// q_terminal) xt_N.
struct LtvProblem {
  std::vector<Eigen::Matrix4d> a;
  std::vector<Eigen::MatrixXd> b;
  Eigen::Vector4d x0 = Eigen::Vector4d::Zero();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Eigen::Vector4d q_terminal = Eigen::Vector4d::Zero();
  Eigen::VectorXd r;
  double regularization = 1e-9;
};

// Condensed quadratic objective over the stacked inputs U:
// states = s U + t x0, cost = 0.5 U' H U + g' U + constant.  The constraint
// blocks of `problem` are left empty for the caller to fill.
struct Condensed {
  qp::QProblem problem;
  Eigen::MatrixXd s;  // 4N x mN
  Eigen::MatrixXd t;  // 4N x 4
};

Condensed condense(const LtvProblem& ltv);

struct ControlResult {
  bool ok = false;
  Eigen::VectorXd u;  // absolute first input (empty on failure)
  double objective = std::numeric_limits<double>::infinity();
  ContactMode mode = ContactMode::Sticking;  // first step of the winner
  qp::SolveStatus status = qp::SolveStatus::Infeasible;
};

// Receding-horizon tracking controller interface.  `t` is time along the
// periodic reference; states use the world frame with unwrapped heading.
class PushController {
 public:
  virtual ~PushController() = default;

  virtual int input_dim() const = 0;
  virtual ControlResult control(const State& x, double t) = 0;
  // Body-frame pusher velocity that executes the input on the ground truth.
  virtual Eigen::Vector2d to_pusher_velocity(const State& x,
                                             const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd nominal_input(double t) const = 0;
  virtual const NominalTrajectory& reference() const = 0;
};

// MPC on the analytical model with input u_m = [f_n, f_t, pdot_y].  Each
// step solves one QP per candidate contact-mode sequence (sticking, slide
// left then stick, slide right then stick) and keeps the cheapest.
class AnalyticalMpc : public PushController {
 public:
  AnalyticalMpc(SliderParams params, NominalTrajectory reference,
                MpcWeights weights = MpcWeights::analytical(),
                MpcOptions options = {});

  int input_dim() const override { return 3; }
  ControlResult control(const State& x, double t) override;
  Eigen::Vector2d to_pusher_velocity(const State& x,
                                     const Eigen::VectorXd& u) const override;
  Eigen::VectorXd nominal_input(double t) const override;
  const NominalTrajectory& reference() const override { return traj_; }

 private:
  SliderParams params_;
  NominalTrajectory traj_;
  MpcWeights weights_;
  MpcOptions options_;
  std::array<std::vector<ContactMode>, 3> sequences_;
};

// MPC on the learned model with input u_d = [v_n, v_t] (body-frame pusher
// velocity).  Single QP per step; contact modes are implicit in the data.
class LearnedMpc : public PushController {
 public:
  LearnedMpc(LearnedDynamics dynamics, NominalTrajectory reference,
             MpcWeights weights = MpcWeights::learned(),
             MpcOptions options = {});

  int input_dim() const override { return 2; }
  ControlResult control(const State& x, double t) override;
  Eigen::Vector2d to_pusher_velocity(const State& x,
                                     const Eigen::VectorXd& u) const override;
  Eigen::VectorXd nominal_input(double t) const override;
  const NominalTrajectory& reference() const override { return traj_; }

 private:
  LearnedDynamics dyn_;
  NominalTrajectory traj_;
  MpcWeights weights_;
  MpcOptions options_;
};

}  // namespace pushmpc
