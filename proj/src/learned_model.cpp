#include "pushmpc/learned_model.hpp"

#include <cmath>

namespace pushmpc {

double beta_of(const Eigen::Vector2d& v_p) {
  if (v_p[0] == 0.0 && v_p[1] == 0.0) {
    throw ZeroVelocityError("beta_of: direction undefined for zero velocity");
  }
  return std::atan2(v_p[1], v_p[0]);
}

BodyTwist LearnedDynamics::body_twist(double p_y,
                                      const Eigen::Vector2d& v_p) const {
  const double s = rate_scale(v_p);
  if (s == 0.0) return {};
  const Eigen::Vector3d d =
      gp.predict_mean(Eigen::Vector2d(p_y, beta_of(v_p)));
  return {s * d[0], s * d[1], s * d[2]};
}

Eigen::Vector4d LearnedDynamics::motion_equations(
    const State& x, const Eigen::Vector2d& u_d) const {
  if (u_d[0] == 0.0 && u_d[1] == 0.0) return Eigen::Vector4d::Zero();
  const BodyTwist t = body_twist(x.p_y, u_d);
  const Eigen::Vector2d pdot = contact_point_rate(params, x.p_y, u_d, t);
  const Eigen::Vector2d v_world = rot2(x.theta) * Eigen::Vector2d(t.vx, t.vy);
  return {v_world[0], v_world[1], t.omega, pdot[1]};
}

Eigen::Vector2d contact_point_rate(const SliderParams& p, double p_y,
                                   const Eigen::Vector2d& v_p,
                                   const BodyTwist& twist) {
  return v_p - contact_jacobian(p.p_x, p_y) * twist.vec();
}

}  // namespace pushmpc
