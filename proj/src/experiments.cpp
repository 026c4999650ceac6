#include "pushmpc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pushmpc/io.hpp"
#include "pushmpc/learned_model.hpp"

namespace pushmpc {
namespace {

using nlohmann::json;

json model_to_json_meta(const GpModel& model) {
  json outputs = json::array();
  static const char* kNames[3] = {"dx_b", "dy_b", "dtheta_b"};
  for (int d = 0; d < 3; ++d) {
    const GpRegressor& reg = model.outputs[d];
    outputs.push_back({{"name", kNames[d]},
                       {"n", reg.n()},
                       {"sigma_f2", reg.hyper().sigma_f2},
                       {"lambda", {reg.hyper().lambda[0], reg.hyper().lambda[1]}},
                       {"sigma_n2", reg.hyper().sigma_n2},
                       {"jitter", reg.jitter()},
                       {"lml", reg.log_marginal_likelihood()}});
  }
  return outputs;
}

}  // namespace

GpModel train_model(const PushDataset& data, std::size_t subset) {
  const PushDataset working =
      (subset > 0 && subset < data.size()) ? data.prefix(subset) : data;
  FitOptions options;  // deterministic: fixed restart seed
  return fit_gp(working, options);
}

ExperimentSetup build_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentSetup setup;
  setup.params = config.slider;
  setup.trajectory = generate_nominal(config.track, setup.params);

  if (config.controller == "analytical") {
    setup.controller = std::make_unique<AnalyticalMpc>(
        setup.params, setup.trajectory, config.resolved_weights(),
        config.options);
    return setup;
  }

  GpModel model;
  if (!config.model_path.empty()) {
    model = io::load_gp_model(config.model_path);
  } else {
    PushDataset data;
    if (!config.data_path.empty()) {
      data = io::load_dataset(config.data_path);
    } else {
      data = generate_pushes(setup.params, config.dataset);
      setup.dataset = data;
    }
    model = train_model(data, config.subset);
    setup.model = model;
  }
  setup.controller = std::make_unique<LearnedMpc>(
      LearnedDynamics{std::move(model), setup.params}, setup.trajectory,
      config.resolved_weights(), config.options);
  return setup;
}

TrackingOutcome run_tracking(const ExperimentConfig& config) {
  ExperimentSetup setup = build_experiment(config);
  TrackingOutcome outcome;
  outcome.run = run_closed_loop(*setup.controller, setup.params, config.run);

  json summary;
  summary["config"] = json::parse(config.to_json_text());
  summary["controller"] = config.controller;
  summary["track"] = {{"kind", config.track.kind == TrackSpec::Kind::EightTrack
                                   ? "eight"
                                   : "square"},
                      {"speed", config.track.speed},
                      {"lap_time", setup.trajectory.lap_time},
                      {"lap_length", setup.trajectory.lap_length}};
  summary["duration"] = outcome.run.duration;
  summary["steps"] = outcome.run.trace.size();
  summary["mean_error"] = outcome.run.mean_error;
  summary["rms_error"] = outcome.run.rms_error;
  summary["max_error"] = outcome.run.max_error;
  summary["fallbacks"] = outcome.run.fallbacks;
  summary["wall_seconds"] = outcome.run.wall_seconds;
  if (setup.dataset) {
    summary["dataset"] = {{"count", setup.dataset->size()},
                          {"seed", setup.dataset->seed},
                          {"resampled", setup.dataset->resampled}};
  }
  if (config.subset > 0) summary["subset"] = config.subset;
  if (setup.model) summary["model"] = model_to_json_meta(*setup.model);
  outcome.summary_json = summary.dump(2);

  if (!config.out_dir.empty()) {
    io::ensure_directory(config.out_dir);
    const std::string base = config.out_dir + "/";
    io::save_trace(outcome.run, base + "trace.csv");
    io::save_nominal(setup.trajectory, base + "nominal.csv");
    io::save_text(outcome.summary_json, base + "summary.json");
    if (setup.dataset) io::save_dataset(*setup.dataset, base + "dataset.csv");
    if (setup.model) io::save_gp_model(*setup.model, base + "model.json");
  }
  return outcome;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const std::vector<std::size_t>& sizes,
                                  const std::vector<std::uint64_t>& seeds) {
  if (sizes.empty() || seeds.empty())
    throw ConfigError("sweep needs at least one size and one seed");
  ExperimentConfig config = base;
  config.controller = "learned";
  config.model_path.clear();
  config.data_path.clear();
  config.out_dir.clear();
  config.subset = 0;
  config.validate();

  const std::size_t master_count =
      std::max(*std::max_element(sizes.begin(), sizes.end()),
               config.dataset.count);

  std::vector<SweepPoint> points;
  points.reserve(sizes.size() * seeds.size());
  for (const std::uint64_t seed : seeds) {
    PushGenOptions gen = config.dataset;
    gen.count = master_count;
    gen.seed = seed;
    const PushDataset master = generate_pushes(config.slider, gen);

    for (const std::size_t n : sizes) {
      SweepPoint point;
      point.n = n;
      point.seed = seed;
      try {
        const GpModel model = train_model(master, n);
        LearnedMpc mpc(LearnedDynamics{model, config.slider},
                       generate_nominal(config.track, config.slider),
                       config.resolved_weights(), config.options);
        const RunResult run =
            run_closed_loop(mpc, config.slider, config.run);
        point.mean_error = run.mean_error;
        point.rms_error = run.rms_error;
        point.fallbacks = run.fallbacks;
        point.wall_seconds = run.wall_seconds;
        point.completed = true;
      } catch (const RunAborted&) {
        point.mean_error = std::numeric_limits<double>::quiet_NaN();
        point.rms_error = std::numeric_limits<double>::quiet_NaN();
      }
      points.push_back(point);
    }
  }

  if (!base.out_dir.empty()) {
    io::ensure_directory(base.out_dir);
    io::save_text(sweep_to_csv(points), base.out_dir + "/sweep.csv");
  }
  return points;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "n,seed,mean_error,rms_error,fallbacks,completed,wall_seconds\n";
  for (const auto& p : points) {
    out << p.n << ',' << p.seed << ',' << p.mean_error << ',' << p.rms_error
        << ',' << p.fallbacks << ',' << (p.completed ? 1 : 0) << ','
        << p.wall_seconds << '\n';
  }
  return out.str();
}

double median_error(const std::vector<SweepPoint>& points, std::size_t n) {
  std::vector<double> errors;
  for (const auto& p : points) {
    if (p.n != n) continue;
    if (!p.completed || !std::isfinite(p.mean_error))
      return std::numeric_limits<double>::quiet_NaN();
    errors.push_back(p.mean_error);
  }
  if (errors.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(errors.begin(), errors.end());
  const std::size_t mid = errors.size() / 2;
  if (errors.size() % 2 == 1) return errors[mid];
  return 0.5 * (errors[mid - 1] + errors[mid]);
}

}  // namespace pushmpc
