#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "pushmpc/slider_model.hpp"

namespace pushmpc {

// Reference track layouts.  The eight-track is two tangent circles crossed
// at the origin; the square track has rounded corners.
struct TrackSpec {
  enum class Kind { EightTrack, SquareTrack };
  Kind kind = Kind::EightTrack;
  double radius = 0.15;         // m, eight-track lobe radius
  double side = 0.30;           // m, square straight length
  double corner_radius = 0.08;  // m, square corner radius
  double speed = 0.05;          // m/s, progression speed along the path
  double step_h = 0.01;         // s, sampling interval

  void validate() const;
};

// Piecewise constant-curvature path.  Heading is kept cumulative
// (unwrapped) so that downstream state references stay continuous.
struct PathSegment {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  double heading0 = 0.0;
  double curvature = 0.0;  // 1/m, 0 for straights
  double length = 0.0;     // m
};

struct ArcPath {
  std::vector<PathSegment> segments;

  struct Sample {
    Eigen::Vector2d pos;
    double heading;
    double curvature;
  };

  double length() const;
  // Evaluate at arc length s (clamped to [0, length]).
  Sample at(double s) const;
};

ArcPath make_path(const TrackSpec& spec);

// Raised when a track demands a contact offset beyond the slider face.
class InfeasibleCurvatureError : public std::runtime_error {
 public:
  explicit InfeasibleCurvatureError(const std::string& what)
      : std::runtime_error(what) {}
};

// Time-sampled nominal trajectory: states plus the sticking-mode inputs that
// reproduce them under the analytical model (forces) and under the learned
// model (pusher velocities).
struct NominalTrajectory {
  double step_h = 0.0;
  double speed = 0.0;
  double lap_time = 0.0;
  double lap_length = 0.0;
  double theta_per_lap = 0.0;  // heading gained per lap (0 for the eight)
  std::vector<State> states;
  std::vector<Eigen::Vector3d> inputs_analytical;  // [f_n, f_t, pdot_y]
  std::vector<Eigen::Vector2d> inputs_learned;     // [v_n, v_t]

  std::size_t size() const { return states.size(); }
};

struct NominalPoint {
  State x;
  Eigen::Vector3d u_m;
  Eigen::Vector2d u_d;
};

// Sample the track at step_h intervals and attach the sticking-mode nominal
// inputs.  Throws InfeasibleCurvatureError if any segment needs |p_y| beyond
// the face.
NominalTrajectory generate_nominal(const TrackSpec& spec,
                                   const SliderParams& params);

// Periodic lookup with linear interpolation of states (heading accumulated
// across laps) and zero-order hold of inputs.  t may exceed one lap.
NominalPoint lookup(const NominalTrajectory& traj, double t);

}  // namespace pushmpc
