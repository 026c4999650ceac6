#include "pushmpc/slider_model.hpp"

#include <cmath>

#include "pushmpc/util.hpp"

namespace pushmpc {
namespace {

// Acceptance tolerance for the sticking friction-cone test inside
// resolve_push; sticking wins ties at mode boundaries.
constexpr double kModeTol = 1e-9;

// Limit-surface curvature coefficients: twist = diag(alpha, alpha, beta) * w.
double alpha_of(const SliderParams& p) { return 2.0 / (p.f_max * p.f_max); }
double beta_of(const SliderParams& p) { return 2.0 / (p.tau_max * p.tau_max); }

}  // namespace

const char* to_string(ContactMode mode) {
  switch (mode) {
    case ContactMode::Sticking:
      return "sticking";
    case ContactMode::SlidingLeft:
      return "sliding_left";
    case ContactMode::SlidingRight:
      return "sliding_right";
  }
  return "unknown";
}

double mean_contact_radius(double side) {
  // c = (1/A) * integral of sqrt(x^2 + y^2) over the square, reduced to a
  // 1-D integral with the inner integral done in closed form:
  //   g(y) = int_0^h sqrt(x^2 + y^2) dx
  //        = (h*sqrt(h^2+y^2) + y^2*log((h + sqrt(h^2+y^2))/y)) / 2.
  const double h = 0.5 * side;
  auto inner = [h](double y) {
    if (y <= 0.0) return 0.5 * h * h;
    const double r = std::sqrt(h * h + y * y);
    return 0.5 * (h * r + y * y * std::log((h + r) / y));
  };
  const double integral = integrate(inner, 0.0, h, 64);  // quarter square
  return 4.0 * integral / (side * side);
}

SliderParams SliderParams::square(double mass, double side, double mu_p,
                                  double mu_g, double gravity) {
  SliderParams p;
  p.mass = mass;
  p.side_a = side;
  p.mu_p = mu_p;
  p.mu_g = mu_g;
  p.gravity = gravity;
  p.f_max = mu_g * mass * gravity;
  p.tau_max = mean_contact_radius(side) * p.f_max;
  p.p_x = -0.5 * side;
  p.validate();
  return p;
}

void SliderParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) {
      throw std::invalid_argument(std::string("SliderParams: ") + name +
                                  " must be positive");
    }
  };
  positive(mass, "mass");
  positive(side_a, "side_a");
  positive(mu_p, "mu_p");
  positive(mu_g, "mu_g");
  positive(gravity, "gravity");
  positive(f_max, "f_max");
  positive(tau_max, "tau_max");
  if (!(p_x == -0.5 * side_a)) {
    throw std::invalid_argument(
        "SliderParams: pusher must act on the left face (p_x = -side_a/2)");
  }
}

Eigen::Matrix<double, 2, 3> contact_jacobian(double p_x, double p_y) {
  Eigen::Matrix<double, 2, 3> j;
  j << 1.0, 0.0, -p_y,  //
      0.0, 1.0, p_x;
  return j;
}

Wrench wrench_from_contact_force(const SliderParams& p, double p_y, double f_n,
                                 double f_t) {
  return {f_n, f_t, -p_y * f_n + p.p_x * f_t};
}

BodyTwist limit_surface_twist(const SliderParams& p, const Wrench& w) {
  const double a = alpha_of(p);
  const double b = beta_of(p);
  return {a * w.f_n, a * w.f_t, b * w.tau};
}

Eigen::Matrix2d contact_mobility(const SliderParams& p, double p_y) {
  const double a = alpha_of(p);
  const double b = beta_of(p);
  Eigen::Matrix2d m;
  m << a + b * p_y * p_y, -b * p.p_x * p_y,  //
      -b * p.p_x * p_y, a + b * p.p_x * p.p_x;
  return m;
}

Eigen::Vector4d motion_equations_analytical(const SliderParams& p,
                                            const State& x,
                                            const Eigen::Vector3d& u_m) {
  const Wrench w = wrench_from_contact_force(p, x.p_y, u_m[0], u_m[1]);
  const BodyTwist t = limit_surface_twist(p, w);
  const Eigen::Vector2d v_world = rot2(x.theta) * Eigen::Vector2d(t.vx, t.vy);
  return {v_world[0], v_world[1], t.omega, u_m[2]};
}

LinearConstraintSet mode_constraints(const SliderParams& p, ContactMode mode) {
  LinearConstraintSet set;
  const Eigen::Vector3d fn(1, 0, 0), ft(0, 1, 0), pd(0, 0, 1);
  // Unilateral contact in every mode.
  set.ineq.emplace_back(-fn, 0.0);  // f_n >= 0
  switch (mode) {
    case ContactMode::Sticking:
      set.eq.emplace_back(pd, 0.0);                     // pdot_y = 0
      set.ineq.emplace_back(ft - p.mu_p * fn, 0.0);     // f_t <= mu f_n
      set.ineq.emplace_back(-ft - p.mu_p * fn, 0.0);    // -f_t <= mu f_n
      break;
    case ContactMode::SlidingLeft:
      set.eq.emplace_back(ft - p.mu_p * fn, 0.0);       // f_t = mu f_n
      set.ineq.emplace_back(-pd, 0.0);                  // pdot_y >= 0
      break;
    case ContactMode::SlidingRight:
      set.eq.emplace_back(ft + p.mu_p * fn, 0.0);       // f_t = -mu f_n
      set.ineq.emplace_back(pd, 0.0);                   // pdot_y <= 0
      break;
  }
  return set;
}

bool satisfies(const LinearConstraintSet& set, const Eigen::Vector3d& u,
               double tol) {
  for (const auto& [a, b] : set.eq) {
    if (std::abs(a.dot(u) - b) > tol) return false;
  }
  for (const auto& [a, b] : set.ineq) {
    if (a.dot(u) - b > tol) return false;
  }
  return true;
}

PushResolution resolve_push(const SliderParams& p, const State& x,
                            const Eigen::Vector2d& v_p) {
  const double v_n = v_p[0];
  const double v_t = v_p[1];
  if (v_n < 0.0) {
    throw std::invalid_argument("resolve_push: v_n < 0 (pusher withdrawing)");
  }
  if (std::abs(x.p_y) > 0.5 * p.side_a + 1e-12) {
    throw std::invalid_argument("resolve_push: contact point off the face");
  }

  auto finish = [&](ContactMode mode, double f_n, double f_t,
                    double pdot) -> PushResolution {
    const Wrench w = wrench_from_contact_force(p, x.p_y, f_n, f_t);
    return {mode, limit_surface_twist(p, w), pdot, f_n, f_t};
  };

  if (v_n == 0.0) {
    // Degenerate grazing contact: no force can be transmitted without
    // penetration, so the slider stays put and the pusher slides freely.
    return finish(ContactMode::Sticking, 0.0, 0.0, v_t);
  }

  const Eigen::Matrix2d m = contact_mobility(p, x.p_y);

  // Sticking first (wins ties at mode boundaries): contact point moves with
  // the pusher, M f = v_p.
  {
    const Eigen::Vector2d f = m.inverse() * v_p;
    if (f[0] >= -kModeTol && std::abs(f[1]) <= p.mu_p * f[0] + kModeTol) {
      return finish(ContactMode::Sticking, f[0], f[1], 0.0);
    }
  }

  // Sliding: the force pins to one cone edge, f_t = s * mu * f_n; the normal
  // direction still tracks the pusher while the tangential residual becomes
  // slip: v_n = (M11 + s mu M12) f_n, pdot_y = v_t - (M21 + s mu M22) f_n.
  for (const double s : {+1.0, -1.0}) {
    const double denom = m(0, 0) + s * p.mu_p * m(0, 1);
    if (denom <= 0.0) continue;  // cannot happen for physical parameters
    const double f_n = v_n / denom;
    const double pdot = v_t - (m(1, 0) + s * p.mu_p * m(1, 1)) * f_n;
    if (f_n >= -kModeTol && s * pdot >= -kModeTol) {
      return finish(s > 0 ? ContactMode::SlidingLeft : ContactMode::SlidingRight,
                    f_n, s * p.mu_p * f_n, pdot);
    }
  }

  throw NoConsistentModeError("resolve_push: no consistent contact mode");
}

Eigen::Vector2d pusher_velocity_for_command(const SliderParams& p, double p_y,
                                            const Eigen::Vector3d& u_m) {
  const Wrench w = wrench_from_contact_force(p, p_y, u_m[0], u_m[1]);
  const BodyTwist t = limit_surface_twist(p, w);
  const Eigen::Vector2d contact_vel =
      contact_jacobian(p.p_x, p_y) * t.vec();
  return contact_vel + Eigen::Vector2d(0.0, u_m[2]);
}

}  // namespace pushmpc
