#include "pushmpc/gp.hpp"

#include <cmath>
#include <limits>

#include "pushmpc/optimize.hpp"
#include "pushmpc/util.hpp"

namespace pushmpc {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

// Scaled squared-distance matrix for one input dimension: D(i,j) =
// (x_i - x_j)^2 / lambda_d.
Eigen::MatrixXd scaled_sqdist(const Eigen::VectorXd& x, double lambda) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d.col(j) = (x.array() - x[j]).square() / lambda;
  }
  return d;
}

// Noiseless kernel matrix.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& inputs,
                              const Hyperparams& h) {
  Eigen::MatrixXd e = scaled_sqdist(inputs.col(0), h.lambda[0]);
  e += scaled_sqdist(inputs.col(1), h.lambda[1]);
  return h.sigma_f2 * (-e.array()).exp().matrix();
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

// Cholesky of K + (sigma_n2 + jitter) I with the documented jitter
// escalation.
Factorization factorize(Eigen::MatrixXd k, const Hyperparams& h) {
  const Eigen::Index n = k.rows();
  Factorization f;
  double jitter = 0.0;
  while (true) {
    Eigen::MatrixXd kt = k;
    kt.diagonal().array() += h.sigma_n2 + jitter;
    f.llt.compute(kt);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
    if (jitter == 0.0) {
      jitter = 1e-10 * h.sigma_f2;
    } else if (jitter < 1e-6 * h.sigma_f2) {
      jitter *= 10.0;
    } else {
      throw SingularKernelError(
          "kernel matrix not positive definite after jitter escalation");
    }
  }
}

double lml_from_factorization(const Eigen::LLT<Eigen::MatrixXd>& llt,
                              const Eigen::VectorXd& y,
                              const Eigen::VectorXd& alpha) {
  const double n = static_cast<double>(y.size());
  return -0.5 * y.dot(alpha) -
         llt.matrixLLT().diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

double variance_of(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

}  // namespace

void Hyperparams::validate() const {
  if (!(sigma_f2 > 0.0) || !(lambda[0] > 0.0) || !(lambda[1] > 0.0) ||
      !(sigma_n2 >= 0.0) || !std::isfinite(sigma_f2) ||
      !std::isfinite(lambda[0]) || !std::isfinite(lambda[1]) ||
      !std::isfinite(sigma_n2)) {
    throw std::invalid_argument("Hyperparams: values out of range");
  }
}

double ard_se_kernel(const Hyperparams& h, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = a - b;
  return h.sigma_f2 *
         std::exp(-(d[0] * d[0] / h.lambda[0] + d[1] * d[1] / h.lambda[1]));
}

PushDataset PushDataset::prefix(std::size_t n) const {
  PushDataset out = *this;
  if (n < rows.size()) {
    out.rows.assign(rows.begin(), rows.begin() + static_cast<long>(n));
  }
  return out;
}

Eigen::MatrixXd PushDataset::inputs() const {
  Eigen::MatrixXd x(rows.size(), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = rows[i].p_y;
    x(static_cast<Eigen::Index>(i), 1) = rows[i].beta;
  }
  return x;
}

Eigen::MatrixXd PushDataset::targets() const {
  Eigen::MatrixXd y(rows.size(), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y.row(static_cast<Eigen::Index>(i)) << rows[i].dx_b, rows[i].dy_b,
        rows[i].dtheta_b;
  }
  return y;
}

GpRegressor::GpRegressor(Eigen::MatrixXd inputs, Eigen::VectorXd targets,
                         Hyperparams hyper) {
  hyper.validate();
  if (inputs.rows() != targets.size() || inputs.cols() != 2) {
    throw std::invalid_argument("GpRegressor: input/target size mismatch");
  }
  inputs_ = std::move(inputs);
  targets_ = std::move(targets);
  hyper_ = hyper;
  Factorization f = factorize(kernel_matrix(inputs_, hyper_), hyper_);
  jitter_ = f.jitter;
  alpha_ = f.llt.solve(targets_);
  lml_ = lml_from_factorization(f.llt, targets_, alpha_);
}

GpRegressor GpRegressor::restore(Eigen::MatrixXd inputs,
                                 Eigen::VectorXd targets, Hyperparams hyper,
                                 double jitter, Eigen::VectorXd alpha) {
  hyper.validate();
  if (inputs.rows() != targets.size() || inputs.rows() != alpha.size()) {
    throw std::invalid_argument("GpRegressor::restore: size mismatch");
  }
  GpRegressor g;
  g.inputs_ = std::move(inputs);
  g.targets_ = std::move(targets);
  g.hyper_ = hyper;
  g.jitter_ = jitter;
  g.alpha_ = std::move(alpha);
  // The cached marginal likelihood requires the factorization; recompute the
  // quadratic part cheaply is impossible without it, so mark it NaN until
  // someone refits.  Serialized models are used for prediction only.
  g.lml_ = std::numeric_limits<double>::quiet_NaN();
  return g;
}

void GpRegressor::mean_and_gradient(const Eigen::Vector2d& q, double* mean,
                                    Eigen::Vector2d* grad) const {
  const Eigen::ArrayXd d0 = inputs_.col(0).array() - q[0];
  const Eigen::ArrayXd d1 = inputs_.col(1).array() - q[1];
  const Eigen::ArrayXd k = hyper_.sigma_f2 *
                           (-(d0.square() / hyper_.lambda[0] +
                              d1.square() / hyper_.lambda[1]))
                               .exp();
  const Eigen::ArrayXd w = k * alpha_.array();
  if (mean != nullptr) *mean = w.sum();
  if (grad != nullptr) {
    // d mean / d q_d = sum_i w_i * 2 (x_id - q_d) / lambda_d.
    (*grad)[0] = 2.0 / hyper_.lambda[0] * (w * d0).sum();
    (*grad)[1] = 2.0 / hyper_.lambda[1] * (w * d1).sum();
  }
}

double GpRegressor::mean(const Eigen::Vector2d& q) const {
  double m = 0.0;
  mean_and_gradient(q, &m, nullptr);
  return m;
}

Eigen::Vector2d GpRegressor::mean_gradient(const Eigen::Vector2d& q) const {
  Eigen::Vector2d g;
  mean_and_gradient(q, nullptr, &g);
  return g;
}

double GpRegressor::lml(const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets,
                        const Hyperparams& hyper, Eigen::Vector4d* grad) {
  hyper.validate();
  const Eigen::Index n = inputs.rows();
  const Eigen::MatrixXd d2a = scaled_sqdist(inputs.col(0), hyper.lambda[0]);
  const Eigen::MatrixXd d2b = scaled_sqdist(inputs.col(1), hyper.lambda[1]);
  const Eigen::MatrixXd k =
      hyper.sigma_f2 * (-(d2a + d2b).array()).exp().matrix();

  Factorization f = factorize(k, hyper);
  const Eigen::VectorXd alpha = f.llt.solve(targets);
  const double value = lml_from_factorization(f.llt, targets, alpha);
  if (grad != nullptr) {
    // d lml / d theta_j = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta_j) for
    // log-parameters theta; dK/dlog sigma_f2 = K, dK/dlog lambda_d =
    // K .* D2_d (scaled), dK/dlog sigma_n2 = sigma_n2 I.
    const Eigen::MatrixXd kinv =
        f.llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
    (*grad)[0] = 0.5 * w.cwiseProduct(k).sum();
    (*grad)[1] = 0.5 * w.cwiseProduct(k.cwiseProduct(d2a)).sum();
    (*grad)[2] = 0.5 * w.cwiseProduct(k.cwiseProduct(d2b)).sum();
    (*grad)[3] = 0.5 * hyper.sigma_n2 * w.trace();
  }
  return value;
}

Eigen::Vector3d GpModel::predict_mean(const Eigen::Vector2d& q) const {
  Eigen::Vector3d m;
  for (int i = 0; i < 3; ++i) m[i] = outputs[i].mean(q);
  return m;
}

Eigen::Matrix<double, 3, 2> GpModel::predict_mean_gradient(
    const Eigen::Vector2d& q) const {
  Eigen::Matrix<double, 3, 2> g;
  for (int i = 0; i < 3; ++i) g.row(i) = outputs[i].mean_gradient(q);
  return g;
}

void GpModel::predict(const Eigen::Vector2d& q, Eigen::Vector3d* mean,
                      Eigen::Matrix<double, 3, 2>* grad) const {
  for (int i = 0; i < 3; ++i) {
    double m = 0.0;
    Eigen::Vector2d g;
    outputs[i].mean_and_gradient(q, mean ? &m : nullptr, grad ? &g : nullptr);
    if (mean) (*mean)[i] = m;
    if (grad) grad->row(i) = g;
  }
}

Hyperparams default_init(const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets) {
  Hyperparams h;
  const double vy = std::max(variance_of(targets), 1e-12);
  h.sigma_f2 = vy;
  h.sigma_n2 = 1e-4 * vy;
  for (int d = 0; d < 2; ++d) {
    h.lambda[d] = std::max(variance_of(inputs.col(d)), 1e-8);
  }
  return h;
}

GpModel fit_gp(const PushDataset& data, const FitOptions& opts) {
  if (data.size() == 0) {
    throw std::invalid_argument("fit_gp: empty dataset");
  }
  const Eigen::MatrixXd x = data.inputs();
  const Eigen::MatrixXd y = data.targets();
  const Eigen::Index n = x.rows();
  const Eigen::Index n_sub = std::min<Eigen::Index>(n, opts.subset_cap);

  GpModel model;
  model.v_nom = data.v_nom;
  model.dt = data.dt;

  for (int out = 0; out < 3; ++out) {
    const Eigen::VectorXd yd = y.col(out);
    const Hyperparams init = opts.init_override.value_or(default_init(x, yd));
    Hyperparams chosen = init;

    if (opts.optimize) {
      const Eigen::MatrixXd xs = x.topRows(n_sub);
      const Eigen::VectorXd ys = yd.head(n_sub);

      // Work in log-hyperparameter space, bounded to 1e+-4 around the
      // data-driven scales.
      auto pack = [](const Hyperparams& h) {
        Eigen::VectorXd v(4);
        v << std::log(h.sigma_f2), std::log(h.lambda[0]),
            std::log(h.lambda[1]), std::log(h.sigma_n2);
        return v;
      };
      auto unpack = [](const Eigen::VectorXd& v) {
        Hyperparams h;
        h.sigma_f2 = std::exp(v[0]);
        h.lambda = {std::exp(v[1]), std::exp(v[2])};
        h.sigma_n2 = std::exp(v[3]);
        return h;
      };
      const Hyperparams scale = default_init(x, yd);
      const double span = std::log(1e4);
      Eigen::VectorXd lo = pack(scale).array() - span;
      Eigen::VectorXd hi = pack(scale).array() + span;
      // Noise floor: keep sigma_n2 >= 1e-4 * target variance so the
      // optimization stays well conditioned; exact conditioning with zero
      // noise remains available through the GpRegressor constructor.
      lo[3] = std::log(scale.sigma_n2);

      auto objective = [&](const Eigen::VectorXd& v,
                           Eigen::VectorXd& grad) -> double {
        Eigen::Vector4d g4;
        double value;
        try {
          value = GpRegressor::lml(xs, ys, unpack(v), &g4);
        } catch (const SingularKernelError&) {
          grad = Eigen::VectorXd::Zero(4);
          return 1e30;
        }
        grad = -g4;
        return -value;
      };

      LbfgsOptions lopts;
      lopts.max_evals = opts.max_evals;
      double best_f = std::numeric_limits<double>::infinity();
      Eigen::VectorXd best_v;
      for (int r = 0; r < std::max(1, opts.restarts); ++r) {
        Eigen::VectorXd v0 = pack(init);
        if (r > 0) {
          Rng rng(Rng::mix(opts.restart_seed, 97 * out + r));
          for (int i = 0; i < 4; ++i) v0[i] += rng.uniform(-2.0, 2.0);
        }
        v0 = v0.cwiseMax(lo).cwiseMin(hi);
        const LbfgsResult res =
            minimize_lbfgs_box(objective, v0, lo, hi, lopts);
        if (res.f < best_f) {
          best_f = res.f;
          best_v = res.x;
        }
      }
      chosen = unpack(best_v);

      // For moderate sizes verify on the full data that the subset optimum
      // beats the initialization; otherwise keep the initialization.
      if (n > n_sub && n <= opts.full_check_cap) {
        if (GpRegressor::lml(x, yd, chosen) < GpRegressor::lml(x, yd, init)) {
          chosen = init;
        }
      }
    }

    model.outputs[out] = GpRegressor(x, yd, chosen);
  }
  return model;
}

}  // namespace pushmpc
