#include "seiko/sde/engine.hpp"

#include <cmath>
#include <ostream>

namespace seiko::sde {

namespace {

struct PathScratch {
  Vector x;
  double z = 0.0;
  double kl_prev = 0.0;
};

// One Euler-Maruyama path. The draw order (x0, then one noise vector per
// step) is the contract shared with the differentiable rollout so that both
// see identical paths for a given seed.
void run_path(const DriftStack& stack, const diffusion::DriftGrid& grid,
              const diffusion::NoiseSchedule& schedule, std::uint64_t seed, Trajectory* traj,
              PathScratch* scratch, bool keep_path) {
  const int d = stack.state_dim();
  const int n_steps = schedule.n_steps;
  const double dt = schedule.dt();
  const double sqrt_dt = std::sqrt(dt);
  const bool has_residuals = !stack.residuals.empty();
  const std::size_t last = stack.residuals.size() - 1;

  Rng rng(seed);
  Vector x = rng.normal_vector(d);
  double z = 0.0;
  double kl_prev = 0.0;

  if (traj != nullptr) {
    traj->noise_seed = seed;
    traj->states.resize(d, keep_path ? n_steps + 1 : 1);
    traj->z.resize(n_steps + 1);
    traj->kl_prev.resize(n_steps + 1);
    if (keep_path) traj->states.col(0) = x;
    traj->z[0] = 0.0;
    traj->kl_prev[0] = 0.0;
  }

  for (int k = 0; k < n_steps; ++k) {
    const double t = schedule.grid_time(k);
    const double sigma2 = grid.sigma2(k);
    Vector f = grid.drift(k, x);
    if (has_residuals) {
      Vector g_all = Vector::Zero(d);
      for (std::size_t j = 0; j < stack.residuals.size(); ++j) {
        const Vector r = stack.residuals[j].eval(t, x);
        g_all += r;
        if (j == last) kl_prev += r.squaredNorm() / (2.0 * sigma2) * dt;
      }
      z += g_all.squaredNorm() / (2.0 * sigma2) * dt;
      f += g_all;
    }
    x += f * dt + std::sqrt(sigma2) * sqrt_dt * rng.normal_vector(d);
    if (!x.allFinite()) {
      throw SimulationError("simulation blew up at step " + std::to_string(k + 1) + " (t=" +
                            std::to_string(schedule.grid_time(k + 1)) + ")");
    }
    if (traj != nullptr) {
      if (keep_path) traj->states.col(k + 1) = x;
      traj->z[k + 1] = z;
      traj->kl_prev[k + 1] = kl_prev;
    }
  }
  if (traj != nullptr && !keep_path) traj->states.col(0) = x;
  if (scratch != nullptr) {
    scratch->x = x;
    scratch->z = z;
    scratch->kl_prev = kl_prev;
  }
}

}  // namespace

std::vector<Trajectory> simulate(const DriftStack& stack, const diffusion::NoiseSchedule& schedule,
                                 int n, std::uint64_t master_seed, const SimOptions& options) {
  if (n < 1) throw ConfigError("simulate: need at least one trajectory");
  schedule.validate();
  const diffusion::DriftGrid grid(*stack.base, schedule);
  std::vector<Trajectory> out(static_cast<std::size_t>(n));
  parallel_for(n, options.n_threads, [&](int i) {
    run_path(stack, grid, schedule, seed_hash(master_seed, static_cast<std::uint64_t>(i)),
             &out[static_cast<std::size_t>(i)], nullptr, options.keep_paths);
  });
  return out;
}

Matrix sample_terminal(const DriftStack& stack, const diffusion::NoiseSchedule& schedule, int n,
                       std::uint64_t master_seed, int n_threads) {
  if (n < 1) throw ConfigError("sample_terminal: need at least one sample");
  schedule.validate();
  const diffusion::DriftGrid grid(*stack.base, schedule);
  Matrix xs(stack.state_dim(), n);
  parallel_for(n, n_threads, [&](int i) {
    PathScratch scratch;
    run_path(stack, grid, schedule, seed_hash(master_seed, static_cast<std::uint64_t>(i)), nullptr,
             &scratch, false);
    xs.col(i) = scratch.x;
  });
  return xs;
}

std::pair<double, double> pathwise_kl(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw ConfigError("pathwise_kl: empty trajectory set");
  double a1 = 0.0;
  double a2 = 0.0;
  for (const auto& t : trajectories) {
    a1 += t.z_terminal();
    a2 += t.kl_prev_terminal();
  }
  const double n = static_cast<double>(trajectories.size());
  return {a1 / n, a2 / n};
}

namespace {

struct PathEval {
  double terminal = 0.0;
  double z = 0.0;
  double kl_prev = 0.0;
  double objective = 0.0;
  Vector gradient;
};

PathEval rollout_path_tape(const DriftStack& stack, const diffusion::DriftGrid& grid,
                           const diffusion::NoiseSchedule& schedule, std::uint64_t seed,
                           const TerminalFn& terminal, double alpha, double beta, grad::Tape& tape) {
  const int d = stack.state_dim();
  const int n_steps = schedule.n_steps;
  const double dt = schedule.dt();
  const double sqrt_dt = std::sqrt(dt);
  const std::size_t active = static_cast<std::size_t>(*stack.active_trainable);

  Rng rng(seed);
  tape.reset();
  grad::Tape::NodeId x = tape.constant(rng.normal_vector(d));
  grad::Tape::NodeId z_acc = tape.constant(Vector::Zero(1));
  grad::Tape::NodeId kl_prev_acc = tape.constant(Vector::Zero(1));

  for (int k = 0; k < n_steps; ++k) {
    const double t = schedule.grid_time(k);
    const double sigma2 = grid.sigma2(k);
    const Vector x_val = tape.value(x);

    grad::Tape::NodeId f_pre = tape.custom(
        grid.drift(k, x_val), x, [&grid, k, x_val](const Vector& up, Vector& dx) {
          dx.noalias() += grid.drift_jacobian(k, x_val).transpose() * up;
        });

    grad::Tape::NodeId g_all = -1;
    grad::Tape::NodeId g_active = -1;
    for (std::size_t j = 0; j < stack.residuals.size(); ++j) {
      const grad::Tape::NodeId r = stack.residuals[j].forward(tape, t, x, j == active);
      if (j == active) g_active = r;
      g_all = (g_all < 0) ? r : tape.add(g_all, r);
    }

    const double kl_scale = dt / (2.0 * sigma2);
    z_acc = tape.add(z_acc, tape.scale(tape.squared_norm(g_all), kl_scale));
    kl_prev_acc = tape.add(kl_prev_acc, tape.scale(tape.squared_norm(g_active), kl_scale));

    grad::Tape::NodeId f = tape.add(f_pre, g_all);
    x = tape.add(tape.add(x, tape.scale(f, dt)),
                 tape.constant(std::sqrt(sigma2) * sqrt_dt * rng.normal_vector(d)));
  }

  const Vector x_T = tape.value(x);
  grad::Tape::NodeId term =
      tape.custom(Vector::Constant(1, terminal.value(x_T)), x, [&terminal, x_T](const Vector& up, Vector& dx) {
        dx += up[0] * terminal.grad(x_T);
      });
  grad::Tape::NodeId objective =
      tape.sub(term, tape.add(tape.scale(z_acc, alpha), tape.scale(kl_prev_acc, beta)));

  PathEval eval;
  eval.terminal = tape.scalar(term);
  eval.z = tape.scalar(z_acc);
  eval.kl_prev = tape.scalar(kl_prev_acc);
  eval.objective = tape.scalar(objective);
  eval.gradient = tape.gradient(objective);
  return eval;
}

}  // namespace

RolloutResult differentiable_rollout(const DriftStack& stack, const diffusion::NoiseSchedule& schedule,
                                     int n, std::uint64_t master_seed, const TerminalFn& terminal,
                                     double alpha, double beta, const SimOptions& options) {
  if (n < 1) throw ConfigError("differentiable_rollout: need at least one path");
  if (!stack.active_trainable) throw ConfigError("differentiable_rollout: no trainable residual");
  if (*stack.active_trainable != static_cast<int>(stack.residuals.size()) - 1) {
    throw ConfigError("differentiable_rollout: trainable residual must be the last one");
  }
  schedule.validate();
  const diffusion::DriftGrid grid(*stack.base, schedule);
  const Eigen::Index n_params = stack.active().params.values.size();

  std::vector<PathEval> evals(static_cast<std::size_t>(n));
  parallel_for(n, options.n_threads, [&](int i) {
    grad::Tape tape;
    evals[static_cast<std::size_t>(i)] =
        rollout_path_tape(stack, grid, schedule, seed_hash(master_seed, static_cast<std::uint64_t>(i)),
                          terminal, alpha, beta, tape);
  });

  RolloutResult result;
  result.gradient = Vector::Zero(n_params);
  for (const auto& e : evals) {
    result.objective += e.objective;
    result.mean_terminal += e.terminal;
    result.mean_z += e.z;
    result.mean_kl_prev += e.kl_prev;
    result.gradient += e.gradient;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  result.objective *= inv_n;
  result.mean_terminal *= inv_n;
  result.mean_z *= inv_n;
  result.mean_kl_prev *= inv_n;
  result.gradient *= inv_n;
  if (!std::isfinite(result.objective)) throw NumericError("rollout objective is non-finite");
  return result;
}

RolloutResult rollout_objective(const DriftStack& stack, const diffusion::NoiseSchedule& schedule,
                                int n, std::uint64_t master_seed, const TerminalFn& terminal,
                                double alpha, double beta, const SimOptions& options) {
  if (n < 1) throw ConfigError("rollout_objective: need at least one path");
  schedule.validate();
  const diffusion::DriftGrid grid(*stack.base, schedule);
  std::vector<PathEval> evals(static_cast<std::size_t>(n));
  parallel_for(n, options.n_threads, [&](int i) {
    PathScratch scratch;
    run_path(stack, grid, schedule, seed_hash(master_seed, static_cast<std::uint64_t>(i)), nullptr,
             &scratch, false);
    PathEval& e = evals[static_cast<std::size_t>(i)];
    e.terminal = terminal.value(scratch.x);
    e.z = scratch.z;
    e.kl_prev = scratch.kl_prev;
    e.objective = e.terminal - alpha * e.z - beta * e.kl_prev;
  });
  RolloutResult result;
  for (const auto& e : evals) {
    result.objective += e.objective;
    result.mean_terminal += e.terminal;
    result.mean_z += e.z;
    result.mean_kl_prev += e.kl_prev;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  result.objective *= inv_n;
  result.mean_terminal *= inv_n;
  result.mean_z *= inv_n;
  result.mean_kl_prev *= inv_n;
  if (!std::isfinite(result.objective)) throw NumericError("rollout objective is non-finite");
  return result;
}

void write_trajectories_csv(const std::vector<Trajectory>& trajectories,
                            const diffusion::NoiseSchedule& schedule, std::ostream& out) {
  const int d = trajectories.empty() ? 0 : static_cast<int>(trajectories.front().states.rows());
  out << "traj_id,step,t";
  for (int j = 0; j < d; ++j) out << ",x" << j;
  out << ",z,Z\n";
  char buf[64];
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    for (Eigen::Index k = 0; k < traj.states.cols(); ++k) {
      out << i << ',' << k << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", schedule.grid_time(static_cast<int>(k)));
      out << buf;
      for (int j = 0; j < d; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", traj.states(j, k));
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g", traj.z[k]);
      out << ',' << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", traj.kl_prev[k]);
      out << ',' << buf << '\n';
    }
  }
}

}  // namespace seiko::sde
