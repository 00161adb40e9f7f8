#pragma once

#include "seiko/diffusion/pretrained.hpp"
#include "seiko/reward/features.hpp"

namespace seiko::reward {

struct Bump {
  Vector center;
  double width = 0.5;
  double height = 1.0;
};

// Ground-truth reward landscape. Values are clamped to [0, 1] and forced to 0
// outside the feasibility super-level set of the pretrained model.
struct RewardSpec {
  enum class Kind { LinearInFeatures, GaussianBump, MultiBump };

  Kind kind = Kind::GaussianBump;
  std::vector<Bump> bumps;          // gaussian_bump (one) / multi_bump
  FeatureMap features;              // linear_in_features
  Vector theta_star;                // linear_in_features
  std::uint64_t theta_seed = 0;     // used when theta_star is generated
  double target_lo = 0.1;           // range the generated linear reward is scaled into
  double target_hi = 0.9;

  void validate() const;
};

class World {
 public:
  World(const diffusion::PretrainedModel* pretrained, RewardSpec spec);

  double true_reward(const Vector& x) const;
  // raw landscape before the feasibility clamp (used by oracles)
  double raw_reward(const Vector& x) const;
  bool feasible(const Vector& x) const { return pretrained_->feasible(x); }
  const diffusion::PretrainedModel& pretrained() const { return *pretrained_; }
  const RewardSpec& spec() const { return spec_; }

  // Scales a generated linear reward into [target_lo, target_hi] over the
  // feasible region (deterministic grid scan); called by the constructor when
  // theta_star is empty.
  void calibrate_linear_theta();

 private:
  const diffusion::PretrainedModel* pretrained_;
  RewardSpec spec_;
};

// Budgeted noisy feedback channel; the only consumer of ground-truth queries.
class FeedbackChannel {
 public:
  FeedbackChannel(double noise_std, long budget, std::uint64_t seed);

  std::vector<double> query(const World& world, const std::vector<Vector>& xs);
  long remaining() const { return budget_ - queries_used_; }
  long queries_used() const { return queries_used_; }
  long budget() const { return budget_; }
  double noise_std() const { return noise_std_; }

 private:
  double noise_std_;
  long budget_;
  long queries_used_ = 0;
  Rng rng_;
};

struct FeedbackEntry {
  Vector x;
  double y = 0.0;
  int iteration = 0;
};

// Append-only dataset D^(i); iteration tags preserve the temporal order.
struct FeedbackDataset {
  std::vector<FeedbackEntry> entries;

  void append(const std::vector<Vector>& xs, const std::vector<double>& ys, int iteration);
  std::size_t size() const { return entries.size(); }
};

}  // namespace seiko::reward
