#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace pushmpc {

// Hybrid contact mode of the pusher against the slider face.
enum class ContactMode { Sticking, SlidingLeft, SlidingRight };

const char* to_string(ContactMode mode);

// Physical description of a square slider pushed on its left face
// (the face at body x = -side_a/2).  The limit-surface bounds f_max
// (maximum friction force) and tau_max (maximum friction torque) follow
// from the support friction coefficient; tau_max uses the mean contact
// radius c of a uniform pressure distribution over the square footprint,
// computed by numerical integration.
struct SliderParams {
  double mass = 0.827;    // kg
  double side_a = 0.09;   // m, square side length
  double mu_p = 0.3;      // pusher-slider friction coefficient
  double mu_g = 0.35;     // slider-ground friction coefficient
  double gravity = 9.81;  // m/s^2

  double f_max = 0.0;    // N, max support friction force
  double tau_max = 0.0;  // N*m, max support friction torque
  double p_x = 0.0;      // m, pusher body-frame x (fixed at -side_a/2)

  // Build a validated parameter set with derived quantities filled in.
  static SliderParams square(double mass, double side, double mu_p,
                             double mu_g, double gravity = 9.81);
  static SliderParams defaults() { return square(0.827, 0.09, 0.3, 0.35); }

  void validate() const;
};

// Mean distance of the footprint points from the center of a square of the
// given side length, for a uniform pressure distribution (the `c` in
// tau_max = c * f_max).  Evaluated by quadrature.
double mean_contact_radius(double side);

struct State {
  double x = 0.0;      // m, slider position (world)
  double y = 0.0;      // m
  double theta = 0.0;  // rad, slider heading (world, unwrapped)
  double p_y = 0.0;    // m, pusher contact point along the face (body frame)

  Eigen::Vector4d vec() const { return {x, y, theta, p_y}; }
  static State from_vec(const Eigen::Vector4d& v) {
    return {v[0], v[1], v[2], v[3]};
  }
};

// Contact wrench on the slider in the body frame: normal force, tangential
// force, torque about the center.
struct Wrench {
  double f_n = 0.0;
  double f_t = 0.0;
  double tau = 0.0;

  Eigen::Vector3d vec() const { return {f_n, f_t, tau}; }
};

// Body-frame slider twist (vx, vy about the center, angular rate omega).
struct BodyTwist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Eigen::Vector3d vec() const { return {vx, vy, omega}; }
};

inline Eigen::Matrix2d rot2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// Jacobian mapping a body twist to the body-frame velocity of the contact
// point: v_contact = J * [vx, vy, omega].
Eigen::Matrix<double, 2, 3> contact_jacobian(double p_x, double p_y);

// Wrench produced by a contact force (f_n along body x, f_t along body y)
// applied at (p_x, p_y): w = J^T [f_n, f_t].
Wrench wrench_from_contact_force(const SliderParams& p, double p_y, double f_n,
                                 double f_t);

// Slider twist aligned with the gradient of the ellipsoidal limit surface
// at the given wrench (quasi-static motion hypothesis).
BodyTwist limit_surface_twist(const SliderParams& p, const Wrench& w);

// 2x2 mobility of the contact point: maps contact force [f_n, f_t] to the
// contact-point velocity it induces through the limit surface,
// M(p_y) = J diag(alpha, alpha, beta) J^T.  Symmetric positive definite.
Eigen::Matrix2d contact_mobility(const SliderParams& p, double p_y);

// Analytical state derivative for input u_m = [f_n, f_t, pdot_y]:
// world-frame slider velocity from the body twist, plus the commanded
// contact-point drift.
Eigen::Vector4d motion_equations_analytical(const SliderParams& p,
                                            const State& x,
                                            const Eigen::Vector3d& u_m);

// Affine constraint rows over u_m = [f_n, f_t, pdot_y] describing one
// contact mode (Coulomb friction at the pusher contact).
struct LinearConstraintSet {
  // a . u == b
  std::vector<std::pair<Eigen::Vector3d, double>> eq;
  // a . u <= b
  std::vector<std::pair<Eigen::Vector3d, double>> ineq;
};

LinearConstraintSet mode_constraints(const SliderParams& p, ContactMode mode);

bool satisfies(const LinearConstraintSet& set, const Eigen::Vector3d& u,
               double tol);

// Thrown when no contact mode yields a consistent quasi-static solution.
class NoConsistentModeError : public std::runtime_error {
 public:
  explicit NoConsistentModeError(const std::string& what)
      : std::runtime_error(what) {}
};

// Ground-truth contact resolution: given the pusher velocity in the body
// frame (v_n along body x into the face, v_t along body y), determine the
// contact mode, the resulting slider twist, the contact force and the
// pusher slip rate.  Requires v_n >= 0 (the pusher cannot pull).
struct PushResolution {
  ContactMode mode = ContactMode::Sticking;
  BodyTwist twist;
  double pdot_y = 0.0;
  double f_n = 0.0;
  double f_t = 0.0;
};

PushResolution resolve_push(const SliderParams& p, const State& x,
                            const Eigen::Vector2d& v_p);

// Pusher body-frame velocity that realizes the analytical command
// u_m = [f_n, f_t, pdot_y]: the contact-point velocity of the induced twist
// plus the commanded slip.  Used to execute force commands on the
// velocity-controlled ground truth.
Eigen::Vector2d pusher_velocity_for_command(const SliderParams& p, double p_y,
                                            const Eigen::Vector3d& u_m);

}  // namespace pushmpc
