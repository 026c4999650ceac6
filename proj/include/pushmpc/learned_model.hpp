#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "pushmpc/gp.hpp"
#include "pushmpc/slider_model.hpp"

namespace pushmpc {

class ZeroVelocityError : public std::runtime_error {
 public:
  explicit ZeroVelocityError(const std::string& what)
      : std::runtime_error(what) {}
};

// Push direction relative to the contact normal: beta = 0 is a straight push
// into the face, positive beta tilts toward +y.  Undefined for a zero
// velocity (throws ZeroVelocityError).
double beta_of(const Eigen::Vector2d& v_p);

// Data-driven slider dynamics: a GP maps (p_y, beta) to the body-frame
// displacement of a nominal-speed, fixed-duration push; rates follow by
// scaling with the commanded speed.
struct LearnedDynamics {
  GpModel gp;
  SliderParams params;

  // Speed scale factor applied to the GP displacement prediction.
  double rate_scale(const Eigen::Vector2d& v_p) const {
    return v_p.norm() / (gp.v_nom * gp.dt);
  }

  // Body-frame slider twist under pusher velocity v_p at contact offset p_y.
  BodyTwist body_twist(double p_y, const Eigen::Vector2d& v_p) const;

  // Full state derivative for input u_d = v_p (body-frame pusher velocity).
  // Identically zero at v_p = 0.
  Eigen::Vector4d motion_equations(const State& x,
                                   const Eigen::Vector2d& u_d) const;
};

// Body-frame velocity of the contact point implied by a pusher velocity and
// a slider twist: pdot = v_p - J * twist.  Row 0 is the (nominally zero)
// penetration rate, row 1 the tangential slip consumed as pdot_y.
Eigen::Vector2d contact_point_rate(const SliderParams& p, double p_y,
                                   const Eigen::Vector2d& v_p,
                                   const BodyTwist& twist);

}  // namespace pushmpc
