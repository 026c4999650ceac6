#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pushmpc/config.hpp"
#include "pushmpc/gp.hpp"
#include "pushmpc/mpc.hpp"
#include "pushmpc/sim.hpp"

namespace pushmpc {

// Everything assembled for one closed-loop run: physical parameters, the
// reference, the controller, and (for the learned controller) whatever data
// and model were produced along the way.
struct ExperimentSetup {
  SliderParams params;
  NominalTrajectory trajectory;
  std::unique_ptr<PushController> controller;
  std::optional<PushDataset> dataset;  // set when pushes were generated here
  std::optional<GpModel> model;        // set when a model was fitted here
};

ExperimentSetup build_experiment(const ExperimentConfig& config);

// Fit a model on (a prefix of) the dataset with deterministic restarts.
GpModel train_model(const PushDataset& data, std::size_t subset = 0);

struct TrackingOutcome {
  RunResult run;
  std::string summary_json;
};

// Closed-loop tracking per the config.  When out_dir is set, writes
// trace.csv, nominal.csv, summary.json and any dataset/model produced.
TrackingOutcome run_tracking(const ExperimentConfig& config);

// One point of the data-complexity study.
struct SweepPoint {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double mean_error = 0.0;  // NaN when the run aborted
  double rms_error = 0.0;
  int fallbacks = 0;
  bool completed = false;
  double wall_seconds = 0.0;
};

// For each seed, generate one master dataset and run the learned controller
// with models fitted on prefixes of the given sizes.  Tracking runs cover
// one lap each.  Results are ordered by (seed, size).
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const std::vector<std::size_t>& sizes,
                                  const std::vector<std::uint64_t>& seeds);

std::string sweep_to_csv(const std::vector<SweepPoint>& points);

// Median of the mean errors across seeds at one dataset size.  NaN if any
// contributing run failed.
double median_error(const std::vector<SweepPoint>& points, std::size_t n);

}  // namespace pushmpc
