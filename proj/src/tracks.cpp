#include "pushmpc/tracks.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pushmpc {
namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

void TrackSpec::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("TrackSpec: radius > 0");
  if (!(side > 0.0)) throw std::invalid_argument("TrackSpec: side > 0");
  if (!(corner_radius > 0.0))
    throw std::invalid_argument("TrackSpec: corner_radius > 0");
  if (!(speed > 0.0)) throw std::invalid_argument("TrackSpec: speed > 0");
  if (!(step_h > 0.0)) throw std::invalid_argument("TrackSpec: step_h > 0");
}

double ArcPath::length() const {
  double total = 0.0;
  for (const auto& seg : segments) total += seg.length;
  return total;
}

ArcPath::Sample ArcPath::at(double s) const {
  if (segments.empty()) throw std::logic_error("ArcPath: empty path");
  if (s < 0.0) s = 0.0;
  const double total = length();
  if (s > total) s = total;

  double s0 = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    const bool last = i + 1 == segments.size();
    if (s <= s0 + seg.length || last) {
      const double ds = s - s0;
      Sample out;
      out.curvature = seg.curvature;
      if (seg.curvature == 0.0) {
        const Eigen::Vector2d dir{std::cos(seg.heading0),
                                  std::sin(seg.heading0)};
        out.pos = seg.start + ds * dir;
        out.heading = seg.heading0;
      } else {
        // Constant-curvature arc: p(ds) = p0 + (1/k) [sin(psi0 + k ds) -
        // sin(psi0), cos(psi0) - cos(psi0 + k ds)].
        const double k = seg.curvature;
        const double psi0 = seg.heading0;
        const double psi = psi0 + k * ds;
        out.pos = seg.start + Eigen::Vector2d{(std::sin(psi) - std::sin(psi0)),
                                              (std::cos(psi0) - std::cos(psi))} /
                                  k;
        out.heading = psi;
      }
      return out;
    }
    s0 += seg.length;
  }
  throw std::logic_error("ArcPath: unreachable");
}

ArcPath make_path(const TrackSpec& spec) {
  spec.validate();
  ArcPath path;
  if (spec.kind == TrackSpec::Kind::EightTrack) {
    // Two tangent circles of radius r centered at (-r, 0) and (r, 0),
    // crossing at the origin heading +y: a full CCW left lobe followed by a
    // full CW right lobe.  Net heading change over a lap is zero.
    const double r = spec.radius;
    PathSegment left;
    left.start = Eigen::Vector2d::Zero();
    left.heading0 = kPi / 2.0;
    left.curvature = 1.0 / r;
    left.length = 2.0 * kPi * r;
    PathSegment right;
    right.start = Eigen::Vector2d::Zero();
    right.heading0 = kPi / 2.0 + 2.0 * kPi;
    right.curvature = -1.0 / r;
    right.length = 2.0 * kPi * r;
    path.segments = {left, right};
  } else {
    // Square with rounded corners, traversed CCW from the middle of the
    // bottom edge: four straights of the given side length joined by
    // quarter arcs.  Net heading change over a lap is 2*pi.
    const double rc = spec.corner_radius;
    const double edge = spec.side;
    Eigen::Vector2d pos{0.0, 0.0};
    double heading = 0.0;
    for (int i = 0; i < 4; ++i) {
      PathSegment straight;
      straight.start = pos;
      straight.heading0 = heading;
      straight.curvature = 0.0;
      straight.length = edge;
      path.segments.push_back(straight);
      pos += edge * Eigen::Vector2d{std::cos(heading), std::sin(heading)};

      PathSegment corner;
      corner.start = pos;
      corner.heading0 = heading;
      corner.curvature = 1.0 / rc;
      corner.length = kPi / 2.0 * rc;
      path.segments.push_back(corner);
      const double psi = heading + kPi / 2.0;
      pos += Eigen::Vector2d{std::sin(psi) - std::sin(heading),
                             std::cos(heading) - std::cos(psi)} *
             rc;
      heading = psi;
    }
  }
  return path;
}

NominalTrajectory generate_nominal(const TrackSpec& spec,
                                   const SliderParams& params) {
  spec.validate();
  params.validate();
  const ArcPath path = make_path(spec);

  // Sticking-mode reference: the slider keeps body x on the path tangent, so
  // the twist is [v, 0, kappa v].  The limit surface then fixes the inputs:
  //   f_n = v fmax^2 / 2,  f_t = 0,  pdot_y = 0,
  // and the torque balance pins the contact offset p_y = -kappa c^2 with
  // c = tau_max / f_max.
  const double c = params.tau_max / params.f_max;
  const double c2 = c * c;
  const double f_n_star = spec.speed * params.f_max * params.f_max / 2.0;
  for (const auto& seg : path.segments) {
    const double p_y_star = -seg.curvature * c2;
    if (std::abs(p_y_star) > params.side_a / 2.0) {
      throw InfeasibleCurvatureError(
          "track curvature " + std::to_string(seg.curvature) +
          " 1/m needs contact offset " + std::to_string(p_y_star) +
          " m beyond the slider face (half side " +
          std::to_string(params.side_a / 2.0) + " m)");
    }
  }

  NominalTrajectory traj;
  traj.step_h = spec.step_h;
  traj.speed = spec.speed;
  traj.lap_length = path.length();
  traj.lap_time = traj.lap_length / spec.speed;
  traj.theta_per_lap =
      path.at(traj.lap_length).heading - path.at(0.0).heading;

  const auto n = static_cast<std::size_t>(
      std::ceil(traj.lap_time / spec.step_h - 1e-9));
  traj.states.reserve(n);
  traj.inputs_analytical.reserve(n);
  traj.inputs_learned.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = spec.speed * (static_cast<double>(i) * spec.step_h);
    const ArcPath::Sample sample = path.at(s);
    State x;
    x.x = sample.pos.x();
    x.y = sample.pos.y();
    x.theta = sample.heading;
    x.p_y = -sample.curvature * c2;
    const Eigen::Vector3d u_m{f_n_star, 0.0, 0.0};
    traj.states.push_back(x);
    traj.inputs_analytical.push_back(u_m);
    traj.inputs_learned.push_back(
        pusher_velocity_for_command(params, x.p_y, u_m));
  }
  return traj;
}

NominalPoint lookup(const NominalTrajectory& traj, double t) {
  if (traj.states.empty()) throw std::logic_error("lookup: empty trajectory");
  const double T = traj.lap_time;
  const double h = traj.step_h;
  const auto n = traj.states.size();

  double laps = std::floor(t / T);
  double tau = t - laps * T;
  if (tau >= T) {  // guard roundoff at lap boundaries
    tau -= T;
    laps += 1.0;
  }
  if (tau < 0.0) tau = 0.0;

  auto i = static_cast<std::size_t>(std::floor(tau / h));
  if (i >= n) i = n - 1;

  // Interpolation endpoints: sample i and either sample i+1 or the virtual
  // lap-closure sample (state 0 advanced by one lap of heading).
  const State& a = traj.states[i];
  State b;
  double span;
  if (i + 1 < n) {
    b = traj.states[i + 1];
    span = h;
  } else {
    b = traj.states[0];
    b.theta += traj.theta_per_lap;
    span = T - static_cast<double>(i) * h;
  }
  double w = (tau - static_cast<double>(i) * h) / span;
  if (w < 0.0) w = 0.0;
  if (w > 1.0) w = 1.0;

  NominalPoint out;
  out.x.x = (1.0 - w) * a.x + w * b.x;
  out.x.y = (1.0 - w) * a.y + w * b.y;
  out.x.theta = (1.0 - w) * a.theta + w * b.theta + laps * traj.theta_per_lap;
  out.x.p_y = (1.0 - w) * a.p_y + w * b.p_y;
  out.u_m = traj.inputs_analytical[i];
  out.u_d = traj.inputs_learned[i];
  return out;
}

}  // namespace pushmpc
