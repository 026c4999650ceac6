#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pushmpc {

// ARD squared-exponential kernel hyperparameters for a 2-D input space.
// `lambda` holds the squared length-scales per input dimension; sigma_f2 and
// sigma_n2 are the signal and noise variances.
struct Hyperparams {
  double sigma_f2 = 1.0;
  Eigen::Vector2d lambda{1.0, 1.0};
  double sigma_n2 = 1e-4;

  void validate() const;
};

// k(x, x') = sigma_f2 * exp(-(x - x')^T Lambda^-1 (x - x')).
double ard_se_kernel(const Hyperparams& h, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b);

// Raised when the kernel matrix cannot be factorized even after the diagonal
// jitter escalation.
class SingularKernelError : public std::runtime_error {
 public:
  explicit SingularKernelError(const std::string& what)
      : std::runtime_error(what) {}
};

// One recorded push: contact offset p_y, push direction beta (rad, relative
// to the contact normal), and the resulting slider displacement in the body
// frame at the start of the push.
struct PushSample {
  double p_y = 0.0;
  double beta = 0.0;
  double dx_b = 0.0;
  double dy_b = 0.0;
  double dtheta_b = 0.0;
};

struct PushDataset {
  std::vector<PushSample> rows;
  double v_nom = 0.02;  // m/s, pusher speed during collection
  double dt = 1.0;      // s, push duration
  std::uint64_t seed = 0;
  double beta_max = 0.0;  // rad, sampling range of the push direction
  Eigen::Vector3d noise_std = Eigen::Vector3d::Zero();
  int resampled = 0;  // pushes redrawn because contact was lost

  std::size_t size() const { return rows.size(); }
  PushDataset prefix(std::size_t n) const;
  Eigen::MatrixXd inputs() const;   // n x 2: (p_y, beta)
  Eigen::MatrixXd targets() const;  // n x 3: (dx_b, dy_b, dtheta_b)
};

// Exact GP regressor for a single output dimension.
class GpRegressor {
 public:
  GpRegressor() = default;

  // Condition on the data with fixed hyperparameters.  If the kernel matrix
  // is not positive definite the diagonal jitter escalates from
  // 1e-10*sigma_f2 by decades up to 1e-6*sigma_f2 before giving up with
  // SingularKernelError.  Only alpha and the cached marginal likelihood are
  // retained; the factor itself is transient, keeping large models small.
  GpRegressor(Eigen::MatrixXd inputs, Eigen::VectorXd targets,
              Hyperparams hyper);

  // Rebuild from serialized state without refactorizing.
  static GpRegressor restore(Eigen::MatrixXd inputs, Eigen::VectorXd targets,
                             Hyperparams hyper, double jitter,
                             Eigen::VectorXd alpha);

  double mean(const Eigen::Vector2d& q) const;
  Eigen::Vector2d mean_gradient(const Eigen::Vector2d& q) const;
  void mean_and_gradient(const Eigen::Vector2d& q, double* mean,
                         Eigen::Vector2d* grad) const;

  // log p(y | X, hyper), cached at construction.
  double log_marginal_likelihood() const { return lml_; }

  // Static evaluation used by the optimizer and the tests: value and, if
  // grad != nullptr, the gradient with respect to the log-hyperparameters
  // [log sigma_f2, log lambda_1, log lambda_2, log sigma_n2].
  static double lml(const Eigen::MatrixXd& inputs,
                    const Eigen::VectorXd& targets, const Hyperparams& hyper,
                    Eigen::Vector4d* grad = nullptr);

  int n() const { return static_cast<int>(targets_.size()); }
  const Eigen::MatrixXd& inputs() const { return inputs_; }
  const Eigen::VectorXd& targets() const { return targets_; }
  const Hyperparams& hyper() const { return hyper_; }
  double jitter() const { return jitter_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

 private:
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd targets_;
  Hyperparams hyper_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  Eigen::VectorXd alpha_;
};

// Independent GPs for the three body-frame displacement components, plus the
// data-collection metadata needed to turn displacements into rates.
struct GpModel {
  std::array<GpRegressor, 3> outputs;
  double v_nom = 0.02;
  double dt = 1.0;

  Eigen::Vector3d predict_mean(const Eigen::Vector2d& q) const;
  Eigen::Matrix<double, 3, 2> predict_mean_gradient(
      const Eigen::Vector2d& q) const;
  void predict(const Eigen::Vector2d& q, Eigen::Vector3d* mean,
               Eigen::Matrix<double, 3, 2>* grad) const;
};

struct FitOptions {
  bool optimize = true;
  int restarts = 5;
  int max_evals = 60;
  // Hyperparameters are tuned on a prefix of at most this many rows; exact
  // conditioning afterwards always uses the full dataset.
  int subset_cap = 300;
  // Up to this size, additionally guard the subset optimum against the
  // data-driven initialization on the full-data marginal likelihood.
  int full_check_cap = 2000;
  std::uint64_t restart_seed = 0x5eed5eedULL;
  std::optional<Hyperparams> init_override;
};

// Data-driven initialization: lambda from the input variances, sigma_f2 from
// the target variance, sigma_n2 = 1e-4 * target variance.
Hyperparams default_init(const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets);

GpModel fit_gp(const PushDataset& data, const FitOptions& opts = {});

}  // namespace pushmpc
