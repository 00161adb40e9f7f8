#include "seiko/reward/world.hpp"

#include <cmath>

namespace seiko::reward {

void RewardSpec::validate() const {
  switch (kind) {
    case Kind::GaussianBump:
      if (bumps.size() != 1) throw ConfigError("gaussian_bump needs exactly one bump");
      break;
    case Kind::MultiBump:
      if (bumps.empty()) throw ConfigError("multi_bump needs at least one bump");
      break;
    case Kind::LinearInFeatures:
      if (!features.built()) throw ConfigError("linear_in_features needs a built feature map");
      break;
  }
  for (const auto& b : bumps) {
    if (!(b.width > 0.0)) throw ConfigError("bump width must be positive");
    if (b.height < 0.0 || b.height > 1.0) throw ConfigError("bump height must lie in [0, 1]");
  }
  if (!(target_lo < target_hi) || target_lo < 0.0 || target_hi > 1.0) {
    throw ConfigError("linear reward target range must satisfy 0 <= lo < hi <= 1");
  }
}

World::World(const diffusion::PretrainedModel* pretrained, RewardSpec spec)
    : pretrained_(pretrained), spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == RewardSpec::Kind::LinearInFeatures && spec_.theta_star.size() == 0) {
    calibrate_linear_theta();
  }
}

double World::raw_reward(const Vector& x) const {
  switch (spec_.kind) {
    case RewardSpec::Kind::GaussianBump:
    case RewardSpec::Kind::MultiBump: {
      double best = 0.0;
      for (const auto& b : spec_.bumps) {
        const double d2 = (x - b.center).squaredNorm();
        best = std::max(best, b.height * std::exp(-0.5 * d2 / (b.width * b.width)));
      }
      return best;
    }
    case RewardSpec::Kind::LinearInFeatures:
      return spec_.theta_star.dot(spec_.features.phi(x));
  }
  return 0.0;
}

double World::true_reward(const Vector& x) const {
  if (!pretrained_->feasible(x)) return 0.0;
  return std::clamp(raw_reward(x), 0.0, 1.0);
}

void World::calibrate_linear_theta() {
  // Draw a direction, then scale and shift (through the constant feature) so
  // the raw reward spans [target_lo, target_hi] over the feasible region. The
  // clamp is then inactive on-feasible-set, which keeps the linear model
  // exactly realizable there.
  if (!spec_.features.constant_feature) {
    throw ConfigError("generated linear rewards need the constant feature to absorb the offset");
  }
  Rng rng(seed_hash(spec_.theta_seed, 0x746873 /*"ths"*/));
  Vector raw(spec_.features.dim);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = rng.normal();
  raw[0] = 0.0;  // direction only; the offset comes from the scan below
  raw.normalize();

  const int d = pretrained_->gmm.dim();
  const Vector lo = pretrained_->domain_lo();
  const Vector hi = pretrained_->domain_hi();
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  auto visit = [&](const Vector& x) {
    if (!pretrained_->feasible(x)) return;
    const double v = raw.dot(spec_.features.phi(x));
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  };
  if (d == 1) {
    const int cells = 2048;
    for (int i = 0; i < cells; ++i) {
      visit(Vector::Constant(1, lo[0] + (i + 0.5) * (hi[0] - lo[0]) / cells));
    }
  } else {
    const int cells = 256;
    for (int i = 0; i < cells; ++i) {
      for (int j = 0; j < cells; ++j) {
        Vector x(2);
        x[0] = lo[0] + (i + 0.5) * (hi[0] - lo[0]) / cells;
        x[1] = lo[1] + (j + 0.5) * (hi[1] - lo[1]) / cells;
        visit(x);
      }
    }
  }
  if (!(vmax > vmin)) throw ConfigError("degenerate linear reward: flat over the feasible region");

  const double a = (spec_.target_hi - spec_.target_lo) / (vmax - vmin);
  const double b = spec_.target_lo - a * vmin;
  // phi[0] is the constant feature with value norm_bound/sqrt(dim)
  const double const_feature = spec_.features.norm_bound / std::sqrt(static_cast<double>(spec_.features.dim));
  spec_.theta_star = a * raw;
  spec_.theta_star[0] += b / const_feature;
}

FeedbackChannel::FeedbackChannel(double noise_std, long budget, std::uint64_t seed)
    : noise_std_(noise_std), budget_(budget), rng_(seed_hash(seed, 0x6668 /*"fh"*/)) {
  if (noise_std < 0.0) throw ConfigError("feedback noise must be nonnegative");
  if (budget < 0) throw ConfigError("feedback budget must be nonnegative");
}

std::vector<double> FeedbackChannel::query(const World& world, const std::vector<Vector>& xs) {
  if (queries_used_ + static_cast<long>(xs.size()) > budget_) {
    throw BudgetError("feedback budget exceeded: " + std::to_string(queries_used_) + " used of " +
                      std::to_string(budget_) + ", batch of " + std::to_string(xs.size()) + " requested");
  }
  std::vector<double> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) {
    ys.push_back(world.true_reward(x) + noise_std_ * rng_.normal());
  }
  queries_used_ += static_cast<long>(xs.size());
  return ys;
}

void FeedbackDataset::append(const std::vector<Vector>& xs, const std::vector<double>& ys,
                             int iteration) {
  if (xs.size() != ys.size()) throw ShapeError("feedback append: xs/ys length mismatch");
  if (!entries.empty() && entries.back().iteration > iteration) {
    throw ConfigError("feedback append: iteration tags must be non-decreasing");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    entries.push_back({xs[i], ys[i], iteration});
  }
}

}  // namespace seiko::reward
