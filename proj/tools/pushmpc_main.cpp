#include <cstdlib>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pushmpc/config.hpp"
#include "pushmpc/experiments.hpp"
#include "pushmpc/io.hpp"

namespace {

using namespace pushmpc;

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitSimulation = 4;
constexpr int kExitIo = 5;

struct GenerateArgs {
  std::size_t count = 5000;
  std::uint64_t seed = 1;
  double v_nom = 0.02;
  double dt = 1.0;
  double beta_max_deg = 60.0;
  std::vector<double> noise;
  std::string out = "dataset.csv";
};

struct TrainArgs {
  std::string data;
  std::string out = "model.json";
  std::size_t subset = 0;
};

// Flags shared by `track` and `sweep` that overlay a config file.
struct TrackArgs {
  std::string config;
  std::string controller;
  std::string track;
  std::optional<double> speed;
  std::optional<double> duration;
  std::string perturb;
  std::optional<double> magnitude;
  std::optional<double> perturb_time;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subset;
  std::string data;
  std::string model;
  std::string out;
};

std::string default_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  const char* env = std::getenv("PUSHMPC_OUT");
  return env != nullptr ? std::string(env) : std::string();
}

ExperimentConfig assemble_config(const TrackArgs& args) {
  ExperimentConfig cfg;
  if (!args.config.empty()) cfg = load_config(args.config);
  if (!args.controller.empty()) cfg.controller = args.controller;
  if (!args.track.empty()) {
    if (args.track == "eight")
      cfg.track.kind = TrackSpec::Kind::EightTrack;
    else if (args.track == "square")
      cfg.track.kind = TrackSpec::Kind::SquareTrack;
    else
      throw ConfigError("unknown track '" + args.track + "' (eight|square)");
  }
  if (args.speed) cfg.track.speed = *args.speed;
  if (args.duration) cfg.run.duration = *args.duration;
  if (!args.perturb.empty()) {
    if (args.perturb == "none")
      cfg.run.perturbation.kind = PerturbationSpec::Kind::None;
    else if (args.perturb == "tangential")
      cfg.run.perturbation.kind = PerturbationSpec::Kind::Tangential;
    else if (args.perturb == "normal")
      cfg.run.perturbation.kind = PerturbationSpec::Kind::Normal;
    else
      throw ConfigError("unknown perturbation '" + args.perturb +
                        "' (none|tangential|normal)");
    if (cfg.run.perturbation.kind != PerturbationSpec::Kind::None &&
        cfg.run.perturbation.magnitude == 0.0) {
      cfg.run.perturbation.magnitude =
          cfg.run.perturbation.kind == PerturbationSpec::Kind::Tangential
              ? 0.01
              : 0.03;
    }
  }
  if (args.magnitude) cfg.run.perturbation.magnitude = *args.magnitude;
  if (args.perturb_time) cfg.run.perturbation.time = *args.perturb_time;
  if (args.count) cfg.dataset.count = *args.count;
  if (args.seed) cfg.dataset.seed = *args.seed;
  if (args.subset) cfg.subset = *args.subset;
  if (!args.data.empty()) cfg.data_path = args.data;
  if (!args.model.empty()) cfg.model_path = args.model;
  cfg.out_dir = default_out_dir(args.out);
  cfg.validate();
  return cfg;
}

int cmd_generate(const GenerateArgs& args) {
  PushGenOptions options;
  options.count = args.count;
  options.seed = args.seed;
  options.v_nom = args.v_nom;
  options.dt = args.dt;
  options.beta_max = args.beta_max_deg * std::numbers::pi / 180.0;
  if (!args.noise.empty()) {
    if (args.noise.size() != 3)
      throw ConfigError("--noise needs 3 values: dx dy dtheta");
    options.noise_std = Eigen::Vector3d{args.noise[0], args.noise[1],
                                        args.noise[2]};
  }
  const PushDataset data = generate_pushes(SliderParams::defaults(), options);
  io::save_dataset(data, args.out);
  const nlohmann::json summary{{"path", args.out},
                               {"count", data.size()},
                               {"seed", data.seed},
                               {"resampled", data.resampled}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_train(const TrainArgs& args) {
  const PushDataset data = io::load_dataset(args.data);
  const GpModel model = train_model(data, args.subset);
  io::save_gp_model(model, args.out);
  nlohmann::json summary{{"path", args.out},
                         {"rows_used", model.outputs[0].n()},
                         {"rows_available", data.size()}};
  for (int d = 0; d < 3; ++d) {
    const auto& h = model.outputs[d].hyper();
    summary["hyper"].push_back({{"sigma_f2", h.sigma_f2},
                                {"lambda", {h.lambda[0], h.lambda[1]}},
                                {"sigma_n2", h.sigma_n2}});
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_track(const TrackArgs& args) {
  const ExperimentConfig cfg = assemble_config(args);
  const TrackingOutcome outcome = run_tracking(cfg);
  std::cout << outcome.summary_json << '\n';
  return 0;
}

int cmd_sweep(const TrackArgs& args, const std::vector<std::size_t>& sizes,
              const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig cfg = assemble_config(args);
  cfg.controller = "learned";
  const auto points = run_sweep(cfg, sizes, seeds);
  std::cout << sweep_to_csv(points);
  return 0;
}

void add_track_flags(CLI::App* sub, TrackArgs* args) {
  sub->add_option("--config", args->config, "JSON config file");
  sub->add_option("--controller", args->controller,
                  "analytical|learned");
  sub->add_option("--track", args->track, "eight|square");
  sub->add_option("--speed", args->speed, "path speed [m/s]");
  sub->add_option("--duration", args->duration,
                  "run length [s] (default: one lap)");
  sub->add_option("--perturb", args->perturb, "none|tangential|normal");
  sub->add_option("--magnitude", args->magnitude, "perturbation size [m]");
  sub->add_option("--perturb-time", args->perturb_time,
                  "perturbation time [s]");
  sub->add_option("--n", args->count, "training pushes to generate");
  sub->add_option("--seed", args->seed, "training data seed");
  sub->add_option("--subset", args->subset, "train on the first n pushes");
  sub->add_option("--data", args->data, "reuse a saved dataset (CSV)");
  sub->add_option("--model", args->model, "reuse a trained model (JSON)");
  sub->add_option("--out", args->out,
                  "artifact directory (default: $PUSHMPC_OUT)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-predictive control of planar pushing"};
  app.require_subcommand(1);

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand("generate", "record random training pushes");
  gen->add_option("--n", gen_args.count, "number of pushes");
  gen->add_option("--seed", gen_args.seed, "random seed");
  gen->add_option("--v-nom", gen_args.v_nom, "push speed [m/s]");
  gen->add_option("--dt", gen_args.dt, "push duration [s]");
  gen->add_option("--beta-max", gen_args.beta_max_deg,
                  "push direction range [deg]");
  gen->add_option("--noise", gen_args.noise,
                  "measurement noise std: dx dy dtheta")
      ->expected(3);
  gen->add_option("--out", gen_args.out, "output CSV path");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "fit the push model on a dataset");
  train->add_option("--data", train_args.data, "dataset CSV")->required();
  train->add_option("--subset", train_args.subset,
                    "train on the first n pushes");
  train->add_option("--out", train_args.out, "output model path");

  TrackArgs track_args;
  auto* track = app.add_subcommand("track", "closed-loop trajectory tracking");
  add_track_flags(track, &track_args);

  TrackArgs sweep_args;
  std::vector<std::size_t> sweep_sizes{10,  20,  50,   100,  200,
                                       500, 1000, 2000, 5000};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};
  auto* sweep = app.add_subcommand(
      "sweep", "tracking error as a function of dataset size");
  add_track_flags(sweep, &sweep_args);
  sweep->add_option("--sizes", sweep_sizes, "dataset sizes to test");
  sweep->add_option("--seeds", sweep_seeds, "dataset seeds to test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (track->parsed()) return cmd_track(track_args);
    return cmd_sweep(sweep_args, sweep_sizes, sweep_seeds);
  } catch (const io::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const RunAborted& e) {
    std::cerr << "simulation aborted: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const SingularKernelError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const NoConsistentModeError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InfeasibleCurvatureError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
