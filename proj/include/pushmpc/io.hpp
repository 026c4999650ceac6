#pragma once

#include <stdexcept>
#include <string>

#include "pushmpc/gp.hpp"
#include "pushmpc/sim.hpp"
#include "pushmpc/tracks.hpp"

namespace pushmpc::io {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Push datasets live as a CSV (header p_y,beta,dx_b,dy_b,dtheta_b, one row
// per push, full double precision) plus a <path>.meta.json sidecar with the
// collection metadata.  Loading requires both files; values round-trip
// exactly.
void save_dataset(const PushDataset& data, const std::string& path);
PushDataset load_dataset(const std::string& path);

// Trained model as a single JSON document: shared inputs, per-output
// hyperparameters, targets, jitter and precomputed weights.  Loading
// restores the regressors without refactorizing, bit for bit.
void save_gp_model(const GpModel& model, const std::string& path);
GpModel load_gp_model(const std::string& path);

// Closed-loop trace as CSV: time, state, reference, applied input, executed
// pusher velocity, solver status, contact mode and position error.
void save_trace(const RunResult& result, const std::string& path);

// Reference trajectory as CSV: time, state and both nominal input
// parameterizations.
void save_nominal(const NominalTrajectory& traj, const std::string& path);

// Plain text artifacts (summaries, configs, small CSVs); a trailing newline
// is added when missing.
void save_text(const std::string& text, const std::string& path);
std::string load_text(const std::string& path);

// Create the directory (and parents) if needed; errors become IoError.
void ensure_directory(const std::string& path);

}  // namespace pushmpc::io
