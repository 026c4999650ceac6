#include "pushmpc/config.hpp"

#include "json.hpp"
#include "pushmpc/io.hpp"

namespace pushmpc {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

template <typename T>
void maybe(const json& j, const char* key, T* out) {
  if (!j.contains(key)) return;
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename Derived>
void maybe_vec(const json& j, const char* key,
               Eigen::MatrixBase<Derived>* out) {
  if (!j.contains(key)) return;
  const auto& arr = j.at(key);
  if (!arr.is_array() ||
      arr.size() != static_cast<std::size_t>(out->size()))
    throw ConfigError(std::string("'") + key + "' must be an array of " +
                      std::to_string(out->size()) + " numbers");
  for (Eigen::Index i = 0; i < out->size(); ++i) {
    if (!arr.at(i).is_number())
      throw ConfigError(std::string("'") + key + "' must hold numbers");
    (*out)[i] = arr.at(i).get<double>();
  }
}

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

TrackSpec::Kind kind_from_string(const std::string& s) {
  if (s == "eight") return TrackSpec::Kind::EightTrack;
  if (s == "square") return TrackSpec::Kind::SquareTrack;
  throw ConfigError("unknown track kind '" + s + "' (use eight|square)");
}

const char* kind_to_string(TrackSpec::Kind kind) {
  return kind == TrackSpec::Kind::EightTrack ? "eight" : "square";
}

PerturbationSpec::Kind perturbation_from_string(const std::string& s) {
  if (s == "none") return PerturbationSpec::Kind::None;
  if (s == "tangential") return PerturbationSpec::Kind::Tangential;
  if (s == "normal") return PerturbationSpec::Kind::Normal;
  throw ConfigError("unknown perturbation '" + s +
                    "' (use none|tangential|normal)");
}

const char* perturbation_to_string(PerturbationSpec::Kind kind) {
  switch (kind) {
    case PerturbationSpec::Kind::Tangential:
      return "tangential";
    case PerturbationSpec::Kind::Normal:
      return "normal";
    default:
      return "none";
  }
}

}  // namespace

MpcWeights ExperimentConfig::resolved_weights() const {
  if (weights) return *weights;
  return controller == "learned" ? MpcWeights::learned()
                                 : MpcWeights::analytical();
}

void ExperimentConfig::validate() const {
  if (controller != "analytical" && controller != "learned")
    throw ConfigError("controller must be 'analytical' or 'learned'");
  try {
    track.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  SliderParams derived;
  try {
    derived = SliderParams::square(slider.mass, slider.side_a, slider.mu_p,
                                   slider.mu_g, slider.gravity);
    derived.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (options.horizon < 1) throw ConfigError("options.horizon must be >= 1");
  if (options.sliding_steps < 1 || options.sliding_steps > options.horizon)
    throw ConfigError("options.sliding_steps must be in [1, horizon]");
  const MpcWeights w = resolved_weights();
  const Eigen::Index want = controller == "learned" ? 2 : 3;
  if (w.r.size() != want)
    throw ConfigError("weights.r must have " + std::to_string(want) +
                      " entries for the " + controller + " controller");
  if ((w.q.array() < 0).any() || (w.q_terminal.array() < 0).any() ||
      (w.r.array() < 0).any())
    throw ConfigError("weights must be nonnegative");
  if (dataset.count == 0) throw ConfigError("dataset.count must be positive");
  if (subset > dataset.count && data_path.empty())
    throw ConfigError("subset exceeds dataset.count");
  if (run.duration < 0) throw ConfigError("run.duration must be >= 0");
  if (run.perturbation.kind != PerturbationSpec::Kind::None &&
      run.perturbation.magnitude < 0)
    throw ConfigError("perturbation.magnitude must be >= 0");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  require_object(j, "config");

  ExperimentConfig cfg;
  if (j.contains("slider")) {
    const auto& s = j.at("slider");
    require_object(s, "slider");
    double mass = cfg.slider.mass, side = cfg.slider.side_a;
    double mu_p = cfg.slider.mu_p, mu_g = cfg.slider.mu_g;
    double gravity = cfg.slider.gravity;
    maybe(s, "mass", &mass);
    maybe(s, "side", &side);
    maybe(s, "mu_p", &mu_p);
    maybe(s, "mu_g", &mu_g);
    maybe(s, "gravity", &gravity);
    try {
      cfg.slider = SliderParams::square(mass, side, mu_p, mu_g, gravity);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("track")) {
    const auto& t = j.at("track");
    require_object(t, "track");
    if (t.contains("kind"))
      cfg.track.kind = kind_from_string(t.at("kind").get<std::string>());
    maybe(t, "speed", &cfg.track.speed);
    maybe(t, "radius", &cfg.track.radius);
    maybe(t, "side", &cfg.track.side);
    maybe(t, "corner_radius", &cfg.track.corner_radius);
    maybe(t, "step_h", &cfg.track.step_h);
  }
  maybe(j, "controller", &cfg.controller);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    require_object(w, "weights");
    MpcWeights weights = cfg.resolved_weights();
    maybe_vec(w, "q", &weights.q);
    maybe_vec(w, "q_terminal", &weights.q_terminal);
    if (w.contains("r")) {
      const auto r = w.at("r").get<std::vector<double>>();
      weights.r = Eigen::Map<const Eigen::VectorXd>(
          r.data(), static_cast<Eigen::Index>(r.size()));
    }
    cfg.weights = weights;
  }
  if (j.contains("options")) {
    const auto& o = j.at("options");
    require_object(o, "options");
    maybe(o, "horizon", &cfg.options.horizon);
    maybe(o, "sliding_steps", &cfg.options.sliding_steps);
    maybe(o, "f_n_scale", &cfg.options.f_n_scale);
    maybe(o, "pdot_y_max", &cfg.options.pdot_y_max);
    maybe(o, "v_scale", &cfg.options.v_scale);
    maybe(o, "regularization", &cfg.options.regularization);
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    require_object(d, "dataset");
    maybe(d, "count", &cfg.dataset.count);
    maybe(d, "seed", &cfg.dataset.seed);
    maybe(d, "v_nom", &cfg.dataset.v_nom);
    maybe(d, "dt", &cfg.dataset.dt);
    maybe(d, "beta_max", &cfg.dataset.beta_max);
    maybe(d, "p_y_span", &cfg.dataset.p_y_span);
    maybe(d, "substep_h", &cfg.dataset.substep_h);
    maybe_vec(d, "noise_std", &cfg.dataset.noise_std);
  }
  maybe(j, "subset", &cfg.subset);
  maybe(j, "data_path", &cfg.data_path);
  maybe(j, "model_path", &cfg.model_path);
  if (j.contains("run")) {
    const auto& r = j.at("run");
    require_object(r, "run");
    maybe(r, "duration", &cfg.run.duration);
    maybe(r, "max_consecutive_failures", &cfg.run.max_consecutive_failures);
    maybe(r, "pinned_timeout", &cfg.run.pinned_timeout);
    if (r.contains("perturbation")) {
      const auto& p = r.at("perturbation");
      require_object(p, "perturbation");
      if (p.contains("kind"))
        cfg.run.perturbation.kind =
            perturbation_from_string(p.at("kind").get<std::string>());
      maybe(p, "time", &cfg.run.perturbation.time);
      maybe(p, "magnitude", &cfg.run.perturbation.magnitude);
    }
  }
  maybe(j, "out_dir", &cfg.out_dir);
  cfg.validate();
  return cfg;
}

std::string ExperimentConfig::to_json_text() const {
  const MpcWeights w = resolved_weights();
  const json j{
      {"slider",
       {{"mass", slider.mass},
        {"side", slider.side_a},
        {"mu_p", slider.mu_p},
        {"mu_g", slider.mu_g},
        {"gravity", slider.gravity}}},
      {"track",
       {{"kind", kind_to_string(track.kind)},
        {"speed", track.speed},
        {"radius", track.radius},
        {"side", track.side},
        {"corner_radius", track.corner_radius},
        {"step_h", track.step_h}}},
      {"controller", controller},
      {"weights",
       {{"q", vec_to_json(w.q)},
        {"q_terminal", vec_to_json(w.q_terminal)},
        {"r", vec_to_json(w.r)}}},
      {"options",
       {{"horizon", options.horizon},
        {"sliding_steps", options.sliding_steps},
        {"f_n_scale", options.f_n_scale},
        {"pdot_y_max", options.pdot_y_max},
        {"v_scale", options.v_scale},
        {"regularization", options.regularization}}},
      {"dataset",
       {{"count", dataset.count},
        {"seed", dataset.seed},
        {"v_nom", dataset.v_nom},
        {"dt", dataset.dt},
        {"beta_max", dataset.beta_max},
        {"p_y_span", dataset.p_y_span},
        {"substep_h", dataset.substep_h},
        {"noise_std", vec_to_json(dataset.noise_std)}}},
      {"subset", subset},
      {"data_path", data_path},
      {"model_path", model_path},
      {"run",
       {{"duration", run.duration},
        {"max_consecutive_failures", run.max_consecutive_failures},
        {"pinned_timeout", run.pinned_timeout},
        {"perturbation",
         {{"kind", perturbation_to_string(run.perturbation.kind)},
          {"time", run.perturbation.time},
          {"magnitude", run.perturbation.magnitude}}}}},
      {"out_dir", out_dir}};
  return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
  return ExperimentConfig::from_json_text(io::load_text(path));
}

}  // namespace pushmpc
