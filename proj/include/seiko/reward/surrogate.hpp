#pragma once

#include "seiko/grad/adam.hpp"
#include "seiko/grad/mlp.hpp"
#include "seiko/reward/world.hpp"

#include <iosfwd>
#include <variant>

namespace seiko::reward {

// Theory default for the confidence scale:
//   C1 = B sqrt(lambda) + sqrt(sigma^2 (log(1/delta^2) + d log(1 + K B^2 / (d lambda)))).
double c1_of_delta(double delta, double feature_bound, double lambda, double noise_std, int feature_dim,
                   long total_queries);

// Ridge regression on a feature map with the elliptical confidence bonus
// g(x) = C1 min(1, sqrt(phi^T Gram^{-1} phi)), Gram = lambda I + sum phi phi^T.
class LinearRewardModel {
 public:
  LinearRewardModel() = default;

  static LinearRewardModel fit(const FeedbackDataset& data, FeatureMap features, double lambda,
                               double c1, double delta);
  // core ERM on raw feature rows (one per observation)
  static LinearRewardModel fit_raw(Matrix phi_rows, const Vector& y, FeatureMap features,
                                   double lambda, double c1, double delta);

  double predict(const Vector& x) const;
  double bonus(const Vector& x) const;
  Vector predict_gradient(const Vector& x) const;
  Vector bonus_gradient(const Vector& x) const;

  const Vector& theta() const { return theta_hat_; }
  const Matrix& gram() const { return gram_; }
  double log_det_gram() const;
  double c1() const { return c1_; }
  double lambda() const { return lambda_; }
  double delta() const { return delta_; }
  const FeatureMap& features() const { return features_; }

  void save(std::ostream& out) const;
  static LinearRewardModel load(std::istream& in);

 private:
  FeatureMap features_;
  Vector theta_hat_;
  Matrix gram_;
  Eigen::LLT<Matrix> gram_llt_;
  double lambda_ = 1.0;
  double c1_ = 1.0;
  double delta_ = 0.05;
};

struct BootstrapTrainConfig {
  int epochs = 400;
  int batch_size = 32;
  grad::AdamHyper adam{1e-2, 0.9, 0.999, 1e-8};
};

// With-replacement resampled MLP regressors; the optimistic value is the max
// over heads, uncertainty comes from their disagreement.
class BootstrapEnsemble {
 public:
  BootstrapEnsemble() = default;

  static BootstrapEnsemble fit(const FeedbackDataset& data, const grad::MlpSpec& head_spec,
                               int heads, const BootstrapTrainConfig& train, std::uint64_t seed);

  double head_value(int head, const Vector& x) const;
  int head_count() const { return static_cast<int>(heads_.size()); }
  double max_value(const Vector& x) const;
  double mean_value(const Vector& x) const;
  Vector max_gradient(const Vector& x) const;   // argmax head's gradient
  Vector mean_gradient(const Vector& x) const;

  const grad::MlpSpec& head_spec() const { return spec_; }
  const std::vector<grad::ParamVector>& heads() const { return heads_; }

  void save(std::ostream& out) const;
  static BootstrapEnsemble load(std::istream& in);

 private:
  grad::MlpSpec spec_;
  std::vector<grad::ParamVector> heads_;
};

// Tagged union exposing the optimistic reward r_hat + g and its x-gradient,
// plus the mean prediction used by guidance.
class RewardSurrogate {
 public:
  RewardSurrogate() = default;
  explicit RewardSurrogate(LinearRewardModel linear) : model_(std::move(linear)) {}
  explicit RewardSurrogate(BootstrapEnsemble ensemble) : model_(std::move(ensemble)) {}

  bool is_linear() const { return std::holds_alternative<LinearRewardModel>(model_); }
  const LinearRewardModel& linear() const { return std::get<LinearRewardModel>(model_); }
  const BootstrapEnsemble& bootstrap() const { return std::get<BootstrapEnsemble>(model_); }

  double optimistic(const Vector& x) const;
  Vector optimistic_gradient(const Vector& x) const;
  double mean(const Vector& x) const;
  Vector mean_gradient(const Vector& x) const;

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static RewardSurrogate load(std::istream& in);
  static RewardSurrogate load_file(const std::string& path);

 private:
  std::variant<std::monostate, LinearRewardModel, BootstrapEnsemble> model_;
};

}  // namespace seiko::reward
