#include "pushmpc/io.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace pushmpc::io {
namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(std::numeric_limits<double>::max_digits10);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

json parse_json_file(const std::string& path) {
  auto in = open_in(path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw IoError("invalid JSON in " + path);
  return j;
}

std::vector<double> split_csv_row(const std::string& line,
                                  const std::string& path) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw IoError("bad numeric cell '" + cell + "' in " + path);
    }
  }
  return values;
}

json hyper_to_json(const Hyperparams& h) {
  return json{{"sigma_f2", h.sigma_f2},
              {"lambda", {h.lambda[0], h.lambda[1]}},
              {"sigma_n2", h.sigma_n2}};
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.sigma_f2 = j.at("sigma_f2").get<double>();
  h.lambda[0] = j.at("lambda").at(0).get<double>();
  h.lambda[1] = j.at("lambda").at(1).get<double>();
  h.sigma_n2 = j.at("sigma_n2").get<double>();
  return h;
}

}  // namespace

void save_dataset(const PushDataset& data, const std::string& path) {
  auto out = open_out(path);
  out << "p_y,beta,dx_b,dy_b,dtheta_b\n";
  for (const auto& row : data.rows) {
    out << row.p_y << ',' << row.beta << ',' << row.dx_b << ',' << row.dy_b
        << ',' << row.dtheta_b << '\n';
  }
  if (!out) throw IoError("short write to " + path);

  const json meta{{"v_nom", data.v_nom},
                  {"dt", data.dt},
                  {"seed", data.seed},
                  {"beta_max", data.beta_max},
                  {"noise_std",
                   {data.noise_std[0], data.noise_std[1], data.noise_std[2]}},
                  {"resampled", data.resampled},
                  {"count", data.rows.size()}};
  auto meta_out = open_out(path + ".meta.json");
  meta_out << meta.dump(2) << '\n';
}

PushDataset load_dataset(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "p_y,beta,dx_b,dy_b,dtheta_b")
    throw IoError("unexpected dataset header in " + path);

  PushDataset data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto values = split_csv_row(line, path);
    if (values.size() != 5)
      throw IoError("expected 5 columns per row in " + path);
    data.rows.push_back(
        {values[0], values[1], values[2], values[3], values[4]});
  }

  const json meta = parse_json_file(path + ".meta.json");
  data.v_nom = meta.at("v_nom").get<double>();
  data.dt = meta.at("dt").get<double>();
  data.seed = meta.at("seed").get<std::uint64_t>();
  data.beta_max = meta.at("beta_max").get<double>();
  for (int i = 0; i < 3; ++i)
    data.noise_std[i] = meta.at("noise_std").at(i).get<double>();
  data.resampled = meta.at("resampled").get<int>();
  if (meta.contains("count") &&
      meta.at("count").get<std::size_t>() != data.rows.size())
    throw IoError("row count mismatch between CSV and sidecar for " + path);
  return data;
}

void save_gp_model(const GpModel& model, const std::string& path) {
  const Eigen::MatrixXd& inputs = model.outputs[0].inputs();
  json j;
  j["v_nom"] = model.v_nom;
  j["dt"] = model.dt;
  j["inputs"] = json::array();
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    j["inputs"].push_back({inputs(i, 0), inputs(i, 1)});

  static const char* kNames[3] = {"dx_b", "dy_b", "dtheta_b"};
  j["outputs"] = json::array();
  for (int d = 0; d < 3; ++d) {
    const GpRegressor& reg = model.outputs[d];
    if (reg.inputs().rows() != inputs.rows())
      throw IoError("model outputs trained on different inputs");
    json out;
    out["name"] = kNames[d];
    out["hyper"] = hyper_to_json(reg.hyper());
    out["jitter"] = reg.jitter();
    out["targets"] = std::vector<double>(
        reg.targets().data(), reg.targets().data() + reg.targets().size());
    out["alpha"] = std::vector<double>(
        reg.alpha().data(), reg.alpha().data() + reg.alpha().size());
    j["outputs"].push_back(std::move(out));
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("short write to " + path);
}

GpModel load_gp_model(const std::string& path) {
  const json j = parse_json_file(path);
  GpModel model;
  model.v_nom = j.at("v_nom").get<double>();
  model.dt = j.at("dt").get<double>();

  const auto& rows = j.at("inputs");
  Eigen::MatrixXd inputs(rows.size(), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    inputs(static_cast<Eigen::Index>(i), 0) = rows.at(i).at(0).get<double>();
    inputs(static_cast<Eigen::Index>(i), 1) = rows.at(i).at(1).get<double>();
  }

  const auto& outputs = j.at("outputs");
  if (outputs.size() != 3)
    throw IoError("expected 3 output blocks in " + path);
  for (int d = 0; d < 3; ++d) {
    const auto& block = outputs.at(d);
    const auto targets_v = block.at("targets").get<std::vector<double>>();
    const auto alpha_v = block.at("alpha").get<std::vector<double>>();
    if (targets_v.size() != static_cast<std::size_t>(inputs.rows()) ||
        alpha_v.size() != targets_v.size())
      throw IoError("inconsistent model arrays in " + path);
    const Eigen::VectorXd targets = Eigen::Map<const Eigen::VectorXd>(
        targets_v.data(), static_cast<Eigen::Index>(targets_v.size()));
    const Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(
        alpha_v.data(), static_cast<Eigen::Index>(alpha_v.size()));
    model.outputs[d] =
        GpRegressor::restore(inputs, targets, hyper_from_json(block.at("hyper")),
                             block.at("jitter").get<double>(), alpha);
  }
  return model;
}

void save_trace(const RunResult& result, const std::string& path) {
  auto out = open_out(path);
  const int m = result.trace.empty()
                    ? 0
                    : static_cast<int>(result.trace.front().u.size());
  out << "t,x,y,theta,p_y,ref_x,ref_y,ref_theta,ref_p_y";
  for (int j = 0; j < m; ++j) out << ",u_" << j;
  out << ",v_n,v_t,ok,mode,position_error\n";
  for (const auto& row : result.trace) {
    out << row.t << ',' << row.x.x << ',' << row.x.y << ',' << row.x.theta
        << ',' << row.x.p_y << ',' << row.x_ref.x << ',' << row.x_ref.y << ','
        << row.x_ref.theta << ',' << row.x_ref.p_y;
    for (int j = 0; j < m; ++j)
      out << ',' << (j < row.u.size() ? row.u[j] : 0.0);
    out << ',' << row.v_p[0] << ',' << row.v_p[1] << ',' << (row.ok ? 1 : 0)
        << ',' << to_string(row.mode) << ',' << row.position_error << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

void save_nominal(const NominalTrajectory& traj, const std::string& path) {
  auto out = open_out(path);
  out << "t,x,y,theta,p_y,f_n,f_t,pdot_y,v_n,v_t\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const State& x = traj.states[i];
    const Eigen::Vector3d& um = traj.inputs_analytical[i];
    const Eigen::Vector2d& ud = traj.inputs_learned[i];
    out << static_cast<double>(i) * traj.step_h << ',' << x.x << ',' << x.y
        << ',' << x.theta << ',' << x.p_y << ',' << um[0] << ',' << um[1]
        << ',' << um[2] << ',' << ud[0] << ',' << ud[1] << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

void save_text(const std::string& text, const std::string& path) {
  auto out = open_out(path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw IoError("short write to " + path);
}

std::string load_text(const std::string& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_directory(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace pushmpc::io
