#include "pushmpc/sim.hpp"

#include <chrono>
#include <cmath>

#include "pushmpc/tracks.hpp"
#include "pushmpc/util.hpp"

namespace pushmpc {
namespace {

// State derivative under the resolved contact, with the contact point
// clamped to the face for the evaluation.
Eigen::Vector4d ground_truth_rate(const SliderParams& p, const State& x,
                                  const Eigen::Vector2d& v_p, bool* clamped) {
  State xc = x;
  const double half = 0.5 * p.side_a;
  if (std::abs(xc.p_y) > half) {
    xc.p_y = xc.p_y > 0.0 ? half : -half;
    *clamped = true;
  }
  const PushResolution res = resolve_push(p, xc, v_p);
  const Eigen::Vector2d world_v =
      rot2(xc.theta) * Eigen::Vector2d{res.twist.vx, res.twist.vy};
  return {world_v.x(), world_v.y(), res.twist.omega, res.pdot_y};
}

}  // namespace

StepResult step_ground_truth(const SliderParams& p, const State& x,
                             const Eigen::Vector2d& v_p, double h) {
  StepResult out;
  bool clamped = false;

  const Eigen::Vector4d x0 = x.vec();
  const Eigen::Vector4d k1 = ground_truth_rate(p, x, v_p, &clamped);
  const Eigen::Vector4d k2 = ground_truth_rate(
      p, State::from_vec(x0 + 0.5 * h * k1), v_p, &clamped);
  const Eigen::Vector4d k3 = ground_truth_rate(
      p, State::from_vec(x0 + 0.5 * h * k2), v_p, &clamped);
  const Eigen::Vector4d k4 =
      ground_truth_rate(p, State::from_vec(x0 + h * k3), v_p, &clamped);
  Eigen::Vector4d x1 = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  const double half = 0.5 * p.side_a;
  if (std::abs(x1[3]) > half) {
    x1[3] = x1[3] > 0.0 ? half : -half;
    clamped = true;
  }
  out.x = State::from_vec(x1);
  out.clamped = clamped;
  return out;
}

PushDataset generate_pushes(const SliderParams& p,
                            const PushGenOptions& options) {
  p.validate();
  if (options.v_nom <= 0.0 || options.dt <= 0.0 || options.substep_h <= 0.0)
    throw std::invalid_argument("generate_pushes: nonpositive rate options");
  if (options.p_y_span <= 0.0 || options.p_y_span > 1.0)
    throw std::invalid_argument("generate_pushes: p_y_span outside (0, 1]");

  PushDataset data;
  data.v_nom = options.v_nom;
  data.dt = options.dt;
  data.seed = options.seed;
  data.beta_max = options.beta_max;
  data.noise_std = options.noise_std;
  data.rows.reserve(options.count);

  Rng rng(options.seed);
  const double p_y_max = options.p_y_span * 0.5 * p.side_a;
  const auto substeps = static_cast<int>(
      std::round(options.dt / options.substep_h));

  while (data.rows.size() < options.count) {
    const double p_y0 = rng.uniform(-p_y_max, p_y_max);
    const double beta = rng.uniform(-options.beta_max, options.beta_max);
    const Eigen::Vector2d v_p =
        options.v_nom * Eigen::Vector2d{std::cos(beta), std::sin(beta)};

    State x;
    x.p_y = p_y0;
    bool lost = false;
    for (int k = 0; k < substeps && !lost; ++k) {
      const StepResult step = step_ground_truth(p, x, v_p, options.substep_h);
      lost = step.clamped;
      x = step.x;
    }
    if (lost) {
      ++data.resampled;  // pusher left the face: not a valid training push
      continue;
    }

    PushSample row;
    row.p_y = p_y0;
    row.beta = beta;
    // the push starts at theta = 0, so the world displacement is already in
    // the initial body frame
    row.dx_b = x.x + options.noise_std[0] * rng.gaussian();
    row.dy_b = x.y + options.noise_std[1] * rng.gaussian();
    row.dtheta_b = x.theta + options.noise_std[2] * rng.gaussian();
    data.rows.push_back(row);
  }
  return data;
}

RunResult run_closed_loop(PushController& controller,
                          const SliderParams& params,
                          const RunOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  const NominalTrajectory& traj = controller.reference();
  const double h = traj.step_h;
  const double duration =
      options.duration > 0.0 ? options.duration : traj.lap_time;
  const auto n_steps = static_cast<std::size_t>(std::round(duration / h));

  State x = lookup(traj, 0.0).x;
  bool perturbation_pending =
      options.perturbation.kind != PerturbationSpec::Kind::None;
  double approach_gap = 0.0;  // m left to close after a normal detach

  RunResult result;
  result.step_h = h;
  result.duration = duration;
  result.trace.reserve(n_steps);

  int consecutive_failures = 0;
  int pinned_steps = 0;
  const int pinned_limit =
      std::max(1, static_cast<int>(std::round(options.pinned_timeout / h)));
  double err_sum = 0.0, err_sq_sum = 0.0;

  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = static_cast<double>(i) * h;

    if (perturbation_pending && t >= options.perturbation.time) {
      perturbation_pending = false;
      if (options.perturbation.kind == PerturbationSpec::Kind::Tangential) {
        x.p_y += options.perturbation.magnitude;
      } else {
        // slider jumps away from the pusher along its own x axis
        x.x += options.perturbation.magnitude * std::cos(x.theta);
        x.y += options.perturbation.magnitude * std::sin(x.theta);
        approach_gap = options.perturbation.magnitude;
      }
    }

    TraceRow row;
    row.t = t;
    row.x_ref = lookup(traj, t).x;
    row.x = x;  // state the controller acts on, post-perturbation
    const double ex = x.x - row.x_ref.x;
    const double ey = x.y - row.x_ref.y;
    row.position_error = std::hypot(ex, ey);
    err_sum += row.position_error;
    err_sq_sum += row.position_error * row.position_error;
    result.max_error = std::max(result.max_error, row.position_error);

    if (approach_gap > 0.0) {
      // contact lost: the pusher re-approaches at the track speed while the
      // slider stays put
      row.u = controller.nominal_input(t);
      row.v_p = Eigen::Vector2d{traj.speed, 0.0};
      approach_gap -= traj.speed * h;
      consecutive_failures = 0;
      pinned_steps = 0;
    } else {
      const ControlResult res = controller.control(x, t);
      row.ok = res.ok;
      row.mode = res.mode;
      row.u = res.u;
      if (!res.ok) {
        ++result.fallbacks;
        if (++consecutive_failures > options.max_consecutive_failures) {
          throw RunAborted("controller failed " +
                           std::to_string(consecutive_failures) +
                           " consecutive steps at t = " + std::to_string(t));
        }
      } else {
        consecutive_failures = 0;
      }
      Eigen::Vector2d v_p = controller.to_pusher_velocity(x, row.u);
      if (v_p[0] < 0.0 && v_p[0] > -1e-9) v_p[0] = 0.0;  // solver roundoff
      row.v_p = v_p;

      const StepResult step = step_ground_truth(params, x, v_p, h);
      x = step.x;
      pinned_steps = step.clamped ? pinned_steps + 1 : 0;
      if (pinned_steps >= pinned_limit) {
        throw RunAborted("pusher pinned at a face edge at t = " +
                         std::to_string(t));
      }
    }

    result.trace.push_back(row);
  }

  const auto n = static_cast<double>(result.trace.size());
  if (n > 0) {
    result.mean_error = err_sum / n;
    result.rms_error = std::sqrt(err_sq_sum / n);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

double mean_position_error(const RunResult& result, double t0, double t1) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& row : result.trace) {
    if (row.t < t0 || row.t > t1) continue;
    sum += row.position_error;
    ++count;
  }
  if (count == 0)
    throw std::invalid_argument("mean_position_error: empty window");
  return sum / static_cast<double>(count);
}

}  // namespace pushmpc
