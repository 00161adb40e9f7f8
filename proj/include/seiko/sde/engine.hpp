#pragma once

#include "seiko/sde/drift_stack.hpp"

namespace seiko::sde {

// Discretized path with pathwise KL accumulators:
//   z tracks int ||f - f_pre||^2 / (2 sigma^2) dt   (vs iteration 0)
//   kl_prev tracks the same against the previous iterate (last residual).
// Both are stored cumulatively on the grid; the terminal entries are the
// Girsanov KL contributions of the path.
struct Trajectory {
  Matrix states;  // d x (n_steps + 1)
  Vector z;       // n_steps + 1 cumulative, vs pretrained
  Vector kl_prev; // n_steps + 1 cumulative, vs previous iterate
  std::uint64_t noise_seed = 0;

  Vector terminal() const { return states.col(states.cols() - 1); }
  double z_terminal() const { return z[z.size() - 1]; }
  double kl_prev_terminal() const { return kl_prev[kl_prev.size() - 1]; }
};

struct SimOptions {
  int n_threads = 0;       // 0: SEIKO_THREADS env or hardware
  bool keep_paths = true;  // false: states keeps only the terminal column
};

std::vector<Trajectory> simulate(const DriftStack& stack, const diffusion::NoiseSchedule& schedule,
                                 int n, std::uint64_t master_seed, const SimOptions& options = {});

// Terminal-only sampling for bulk draws; returns one column per sample.
Matrix sample_terminal(const DriftStack& stack, const diffusion::NoiseSchedule& schedule, int n,
                       std::uint64_t master_seed, int n_threads = 0);

// Means of the terminal accumulators: (A1 estimate, A2 estimate).
std::pair<double, double> pathwise_kl(const std::vector<Trajectory>& trajectories);

// Differentiable scalar of the terminal state.
struct TerminalFn {
  virtual ~TerminalFn() = default;
  virtual double value(const Vector& x) const = 0;
  virtual Vector grad(const Vector& x) const = 0;
};

struct LinearTerminal final : TerminalFn {
  Vector direction;
  double offset = 0.0;
  double value(const Vector& x) const override { return direction.dot(x) + offset; }
  Vector grad(const Vector& x) const override {
    (void)x;
    return direction;
  }
};

struct RolloutResult {
  double objective = 0.0;   // mean terminal - alpha z - beta kl_prev
  Vector gradient;          // w.r.t. the active residual parameters
  double mean_terminal = 0.0;
  double mean_z = 0.0;
  double mean_kl_prev = 0.0;
};

// Monte Carlo objective and its reparameterized (pathwise) gradient through
// the unrolled Euler chain; noise is frozen per path. The stack's active
// residual must be its last one.
RolloutResult differentiable_rollout(const DriftStack& stack, const diffusion::NoiseSchedule& schedule,
                                     int n, std::uint64_t master_seed, const TerminalFn& terminal,
                                     double alpha, double beta, const SimOptions& options = {});

// Objective-only evaluation with the same seeding (for finite differences and
// training curves).
RolloutResult rollout_objective(const DriftStack& stack, const diffusion::NoiseSchedule& schedule,
                                int n, std::uint64_t master_seed, const TerminalFn& terminal,
                                double alpha, double beta, const SimOptions& options = {});

// Trajectory dump rows: (traj_id, step, t, x[0..d-1], z, Z).
void write_trajectories_csv(const std::vector<Trajectory>& trajectories,
                            const diffusion::NoiseSchedule& schedule, std::ostream& out);

}  // namespace seiko::sde
