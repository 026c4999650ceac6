#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pushmpc/gp.hpp"
#include "pushmpc/mpc.hpp"
#include "pushmpc/slider_model.hpp"

namespace pushmpc {

// One integration step of the ground-truth contact resolution under a
// body-frame pusher velocity held constant for the step (classic RK4; the
// stage evaluations clamp the contact point to the face so the hybrid
// dynamics stay defined).  `clamped` reports that the pusher ran into a face
// edge during the step.
struct StepResult {
  State x;
  bool clamped = false;
};

StepResult step_ground_truth(const SliderParams& p, const State& x,
                             const Eigen::Vector2d& v_p, double h);

// Random push experiments for training data: each push starts at the origin
// with a uniformly drawn contact offset and push direction, runs at v_nom
// for dt seconds, and records the body-frame slider displacement.  Pushes
// that slide off the face are redrawn (counted in PushDataset::resampled).
struct PushGenOptions {
  std::size_t count = 5000;
  std::uint64_t seed = 1;
  double v_nom = 0.02;        // m/s
  double dt = 1.0;            // s
  double beta_max = std::numbers::pi / 3.0;  // rad, push direction range
  double p_y_span = 0.9;      // fraction of the half face sampled
  double substep_h = 0.01;    // s, integration substep
  Eigen::Vector3d noise_std = Eigen::Vector3d::Zero();
};

PushDataset generate_pushes(const SliderParams& p,
                            const PushGenOptions& options);

// Scripted disturbance for the closed-loop runs.  Tangential: the contact
// point jumps along the face at the given time.  Normal: the slider is
// teleported away from the pusher along body x; the pusher then closes the
// gap at the track speed while the reference keeps moving.
struct PerturbationSpec {
  enum class Kind { None, Tangential, Normal };
  Kind kind = Kind::None;
  double time = 0.0;       // s
  double magnitude = 0.0;  // m
};

struct RunOptions {
  double duration = 0.0;  // s; <= 0 runs exactly one lap
  PerturbationSpec perturbation;
  int max_consecutive_failures = 10;
  double pinned_timeout = 0.1;  // s at a face edge before giving up
};

class RunAborted : public std::runtime_error {
 public:
  explicit RunAborted(const std::string& what) : std::runtime_error(what) {}
};

struct TraceRow {
  double t = 0.0;
  State x;
  State x_ref;
  Eigen::VectorXd u;        // applied input (controller's space)
  Eigen::Vector2d v_p = Eigen::Vector2d::Zero();  // executed pusher velocity
  bool ok = true;           // controller solve succeeded
  ContactMode mode = ContactMode::Sticking;
  double position_error = 0.0;  // m
};

struct RunResult {
  std::vector<TraceRow> trace;
  double step_h = 0.0;
  double duration = 0.0;
  double mean_error = 0.0;  // m, mean Euclidean position error
  double rms_error = 0.0;
  double max_error = 0.0;
  int fallbacks = 0;        // controller failures covered by feed-forward
  double wall_seconds = 0.0;
};

// Closed-loop tracking of the controller's reference trajectory on the
// ground-truth dynamics.  Throws RunAborted when the controller fails too
// many consecutive steps or the pusher stays pinned at a face edge.
RunResult run_closed_loop(PushController& controller,
                          const SliderParams& params,
                          const RunOptions& options);

// Mean position error over trace rows with t in [t0, t1].
double mean_position_error(const RunResult& result, double t0, double t1);

}  // namespace pushmpc
