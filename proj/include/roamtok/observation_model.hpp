#ifndef ROAMTOK_OBSERVATION_MODEL_HPP
#define ROAMTOK_OBSERVATION_MODEL_HPP

// Linear measurement model y_i(t) = H_i θ + w_i(t), its Fisher information
// and the centralized (oracle) estimator.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roamtok/errors.hpp"
#include "roamtok/linalg.hpp"
#include "roamtok/random.hpp"

namespace roamtok {

inline constexpr double kInvertibilityFloor = 1e-10;

/// Zero-mean noise families. All are scaled to have covariance C_i exactly;
/// None is the deterministic (zero-noise) mode.
enum class NoiseKind { Gaussian, Uniform, None };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::None: return "none";
  }
  return "?";
}

class AgentModel {
 public:
  AgentModel(std::size_t id, Matrix h, Matrix c) : id_(id), h_(std::move(h)), c_(std::move(c)) {
    if (h_.rows() == 0 || h_.cols() == 0) {
      throw InvalidModel("agent " + std::to_string(id_) + ": empty observation matrix");
    }
    if (c_.rows() != h_.rows() || c_.cols() != h_.rows()) {
      throw InvalidModel("agent " + std::to_string(id_) + ": noise covariance must be " +
                         std::to_string(h_.rows()) + "x" + std::to_string(h_.rows()));
    }
    if (!is_symmetric(c_) || min_eigenvalue(c_) <= 0.0) {
      throw InvalidModel("agent " + std::to_string(id_) +
                         ": noise covariance is not symmetric positive definite");
    }
    Eigen::LLT<Matrix> llt(c_);
    if (llt.info() != Eigen::Success) {
      throw InvalidModel("agent " + std::to_string(id_) + ": Cholesky of C failed");
    }
    noise_factor_ = llt.matrixL();
    // G = H^T C^{-1} from solves against C, never an explicit inverse.
    gain_ = llt.solve(h_).transpose();
    b_ = gain_ * h_;
    b_ = 0.5 * (b_ + b_.transpose());
  }

  std::size_t id() const noexcept { return id_; }
  Eigen::Index dim() const noexcept { return h_.cols(); }
  Eigen::Index rows() const noexcept { return h_.rows(); }
  const Matrix& H() const noexcept { return h_; }
  const Matrix& C() const noexcept { return c_; }
  /// B_i = H_i^T C_i^{-1} H_i.
  const Matrix& B() const noexcept { return b_; }
  /// H_i^T C_i^{-1}, maps a measurement to its information-weighted statistic.
  const Matrix& info_gain() const noexcept { return gain_; }
  /// Lower Cholesky factor of C_i.
  const Matrix& noise_factor() const noexcept { return noise_factor_; }

 private:
  std::size_t id_;
  Matrix h_;
  Matrix c_;
  Matrix b_;
  Matrix gain_;
  Matrix noise_factor_;
};

/// Σ_c = Σ_i B_i. Throws SingularModel when its smallest eigenvalue is at or
/// below `floor`.
inline Matrix fisher_information(std::span<const AgentModel> agents,
                                 double floor = kInvertibilityFloor) {
  if (agents.empty()) throw InvalidModel("fisher_information needs at least one agent");
  const Eigen::Index dim = agents.front().dim();
  Matrix sigma = Matrix::Zero(dim, dim);
  for (const auto& a : agents) {
    if (a.dim() != dim) throw InvalidModel("agents disagree on parameter dimension");
    sigma += a.B();
  }
  sigma = 0.5 * (sigma + sigma.transpose());
  const double lmin = min_eigenvalue(sigma);
  if (!(lmin > floor)) {
    throw SingularModel("Fisher information is singular: smallest eigenvalue " +
                        std::to_string(lmin) + " <= floor " + std::to_string(floor));
  }
  return sigma;
}

class GlobalModel {
 public:
  GlobalModel(std::vector<AgentModel> agents, Vector theta, NoiseKind noise = NoiseKind::Gaussian,
              double floor = kInvertibilityFloor)
      : agents_(std::move(agents)), theta_(std::move(theta)), noise_(noise), floor_(floor) {
    if (agents_.empty()) throw InvalidModel("model needs at least one agent");
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (agents_[i].id() != i) throw InvalidModel("agent ids must be 0..n-1 in order");
      if (agents_[i].dim() != theta_.size()) {
        throw InvalidModel("agent " + std::to_string(i) + ": H has " +
                           std::to_string(agents_[i].dim()) + " columns, theta has " +
                           std::to_string(theta_.size()) + " entries");
      }
    }
    // Global observability: H^T H invertible.
    Matrix hth = Matrix::Zero(theta_.size(), theta_.size());
    for (const auto& a : agents_) hth += a.H().transpose() * a.H();
    const double lmin = min_eigenvalue(hth);
    if (!(lmin > floor_)) {
      throw SingularModel("H^T H is singular: smallest eigenvalue " + std::to_string(lmin) +
                          " <= floor " + std::to_string(floor_));
    }
    sigma_c_ = fisher_information(agents_, floor_);
    sigma_llt_.compute(sigma_c_);
  }

  std::size_t n() const noexcept { return agents_.size(); }
  Eigen::Index dim() const noexcept { return theta_.size(); }
  const std::vector<AgentModel>& agents() const noexcept { return agents_; }
  const AgentModel& agent(std::size_t i) const { return agents_.at(i); }
  const Vector& theta() const noexcept { return theta_; }
  const Matrix& sigma_c() const noexcept { return sigma_c_; }
  NoiseKind noise() const noexcept { return noise_; }
  double floor() const noexcept { return floor_; }

  /// Σ_c^{-1} v through the cached factorization, with a residual check.
  Vector solve_fisher(const Vector& v) const {
    Vector x = sigma_llt_.solve(v);
    const double err = backward_error(sigma_c_, x, v);
    if (!(err <= kSolveResidualTol)) {
      throw SingularModel("Fisher solve residual " + std::to_string(err) + " too large");
    }
    return x;
  }

  /// trace(Σ_c^{-1}): the oracle's per-sample MSE scale.
  double fisher_inverse_trace() const {
    return spd_inverse_via_solves(sigma_c_).trace();
  }

 private:
  std::vector<AgentModel> agents_;
  Vector theta_;
  NoiseKind noise_;
  double floor_;
  Matrix sigma_c_;
  Eigen::LLT<Matrix> sigma_llt_;
};

struct MeasurementBatch {
  long t = 0;
  std::vector<Vector> y;
};

/// Draws w_i with covariance C_i into `out` (already sized).
inline void sample_noise(const AgentModel& agent, NoiseKind kind, Rng& rng, Vector& out) {
  const Eigen::Index m = agent.rows();
  out.resize(m);
  switch (kind) {
    case NoiseKind::None:
      out.setZero();
      return;
    case NoiseKind::Gaussian:
      for (Eigen::Index k = 0; k < m; ++k) out[k] = standard_normal(rng);
      break;
    case NoiseKind::Uniform: {
      // U(-sqrt3, sqrt3) has unit variance.
      const double half_width = std::sqrt(3.0);
      for (Eigen::Index k = 0; k < m; ++k) out[k] = half_width * (2.0 * uniform01(rng) - 1.0);
      break;
    }
  }
  out = agent.noise_factor().triangularView<Eigen::Lower>() * out;
}

/// In-place variant of sample_measurements; reuses the batch storage.
inline void sample_measurements_into(const GlobalModel& model, long t, Rng& rng,
                                     MeasurementBatch& batch) {
  batch.t = t;
  batch.y.resize(model.n());
  for (std::size_t i = 0; i < model.n(); ++i) {
    const auto& a = model.agent(i);
    sample_noise(a, model.noise(), rng, batch.y[i]);
    batch.y[i].noalias() += a.H() * model.theta();
  }
}

inline MeasurementBatch sample_measurements(const GlobalModel& model, long t, Rng& rng) {
  MeasurementBatch b;
  sample_measurements_into(model, t, rng, b);
  return b;
}

/// θ̂_c = Σ_c^{-1} Σ_i H_i^T C_i^{-1} ȳ_i.
inline Vector central_estimate(const GlobalModel& model, std::span<const Vector> running_means) {
  if (running_means.size() != model.n()) {
    throw InvalidModel("central_estimate: expected " + std::to_string(model.n()) +
                       " running means, got " + std::to_string(running_means.size()));
  }
  Vector rhs = Vector::Zero(model.dim());
  for (std::size_t i = 0; i < model.n(); ++i) {
    const auto& a = model.agent(i);
    if (running_means[i].size() != a.rows()) {
      throw InvalidModel("central_estimate: running mean " + std::to_string(i) +
                         " has wrong size");
    }
    rhs.noalias() += a.info_gain() * running_means[i];
  }
  return model.solve_fisher(rhs);
}

/// Model-A style generator: n agents with 1×L observation rows drawn N(0,1),
/// noise variance `noise_var`. Resamples rows until H^T H clears the floor.
inline GlobalModel make_gaussian_rows_model(std::size_t n, Vector theta, double noise_var,
                                            Rng& rng, NoiseKind noise = NoiseKind::Gaussian) {
  const Eigen::Index dim = theta.size();
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<AgentModel> agents;
    agents.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Matrix h(1, dim);
      for (Eigen::Index k = 0; k < dim; ++k) h(0, k) = standard_normal(rng);
      agents.emplace_back(i, std::move(h), Matrix::Constant(1, 1, noise_var));
    }
    try {
      return GlobalModel(std::move(agents), theta, noise);
    } catch (const SingularModel&) {
    }
  }
  throw GenerationFailed("could not draw an observable Gaussian-row model");
}

}  // namespace roamtok

#endif  // ROAMTOK_OBSERVATION_MODEL_HPP
