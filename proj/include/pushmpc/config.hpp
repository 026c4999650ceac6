#pragma once

#include <optional>
#include <string>

#include "pushmpc/mpc.hpp"
#include "pushmpc/sim.hpp"
#include "pushmpc/slider_model.hpp"
#include "pushmpc/tracks.hpp"

namespace pushmpc {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Everything one tracking or sweep experiment needs.  JSON configs override
// fields selectively; anything absent keeps its default.
struct ExperimentConfig {
  SliderParams slider = SliderParams::defaults();
  TrackSpec track;
  std::string controller = "analytical";  // "analytical" | "learned"

  // Controller tuning; weights default per controller kind when unset.
  std::optional<MpcWeights> weights;
  MpcOptions options;

  // Training data for the learned controller.
  PushGenOptions dataset;
  std::size_t subset = 0;  // use only the first n pushes (0 = all)
  std::string data_path;   // reuse a saved dataset instead of generating
  std::string model_path;  // reuse a trained model instead of fitting

  RunOptions run;
  std::string out_dir;  // artifacts land here when nonempty

  MpcWeights resolved_weights() const;
  void validate() const;

  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

ExperimentConfig load_config(const std::string& path);

}  // namespace pushmpc
