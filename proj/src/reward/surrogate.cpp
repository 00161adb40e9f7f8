#include "seiko/reward/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace seiko::reward {

namespace {

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_vec(std::ostream& out, const Vector& v) {
  write_i32(out, static_cast<std::int32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(8 * v.size()));
}
void write_mat(std::ostream& out, const Matrix& m) {
  write_i32(out, static_cast<std::int32_t>(m.rows()));
  write_i32(out, static_cast<std::int32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(8 * m.size()));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::int32_t read_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
Vector read_vec(std::istream& in) {
  const std::int32_t n = read_i32(in);
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(8 * n));
  return v;
}
Matrix read_mat(std::istream& in) {
  const std::int32_t r = read_i32(in);
  const std::int32_t c = read_i32(in);
  Matrix m(r, c);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(8 * m.size()));
  return m;
}

void write_features(std::ostream& out, const FeatureMap& f) {
  write_i32(out, f.kind == FeatureMap::Kind::RandomFourier ? 0 : 1);
  write_i32(out, f.input_dim);
  write_i32(out, f.dim);
  write_f64(out, f.norm_bound);
  write_f64(out, f.lengthscale);
  write_i32(out, f.degree);
  write_i32(out, f.constant_feature ? 1 : 0);
  write_u64(out, f.seed);
}

FeatureMap read_features(std::istream& in) {
  FeatureMap f;
  f.kind = read_i32(in) == 0 ? FeatureMap::Kind::RandomFourier : FeatureMap::Kind::Polynomial;
  f.input_dim = read_i32(in);
  f.dim = read_i32(in);
  f.norm_bound = read_f64(in);
  f.lengthscale = read_f64(in);
  f.degree = read_i32(in);
  f.constant_feature = read_i32(in) != 0;
  f.seed = read_u64(in);
  f.build();
  return f;
}

constexpr std::uint64_t kMagic = 0x53454b4f53555231ULL;  // "SEKOSUR1"

}  // namespace

double c1_of_delta(double delta, double feature_bound, double lambda, double noise_std, int feature_dim,
                   long total_queries) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("c1_of_delta: delta must lie in (0, 1)");
  if (!(feature_bound > 0.0) || !(lambda > 0.0) || noise_std < 0.0 || feature_dim < 1 ||
      total_queries < 1) {
    throw ConfigError("c1_of_delta: arguments must be positive");
  }
  const double d = static_cast<double>(feature_dim);
  const double k = static_cast<double>(total_queries);
  const double inside = std::log(1.0 / (delta * delta)) +
                        d * std::log(1.0 + k * feature_bound * feature_bound / (d * lambda));
  return feature_bound * std::sqrt(lambda) + std::sqrt(noise_std * noise_std * inside);
}

LinearRewardModel LinearRewardModel::fit(const FeedbackDataset& data, FeatureMap features,
                                         double lambda, double c1, double delta) {
  if (!features.built()) features.build();
  Matrix phi_rows(static_cast<Eigen::Index>(data.size()), features.dim);
  Vector y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    phi_rows.row(static_cast<Eigen::Index>(i)) = features.phi(data.entries[i].x).transpose();
    y[static_cast<Eigen::Index>(i)] = data.entries[i].y;
  }
  return fit_raw(std::move(phi_rows), y, std::move(features), lambda, c1, delta);
}

LinearRewardModel LinearRewardModel::fit_raw(Matrix phi_rows, const Vector& y, FeatureMap features,
                                             double lambda, double c1, double delta) {
  if (!(lambda > 0.0)) throw ConfigError("ridge weight must be positive");
  if (phi_rows.rows() != y.size()) throw ShapeError("ridge fit: feature/label count mismatch");
  LinearRewardModel m;
  m.features_ = std::move(features);
  m.lambda_ = lambda;
  m.c1_ = c1;
  m.delta_ = delta;
  const Eigen::Index d = phi_rows.cols();
  m.gram_ = lambda * Matrix::Identity(d, d);
  m.gram_.noalias() += phi_rows.transpose() * phi_rows;
  m.gram_llt_ = Eigen::LLT<Matrix>(m.gram_);
  if (m.gram_llt_.info() != Eigen::Success) throw NumericError("ridge gram factorization failed");
  m.theta_hat_ = m.gram_llt_.solve(phi_rows.transpose() * y);
  return m;
}

double LinearRewardModel::predict(const Vector& x) const {
  return theta_hat_.dot(features_.phi(x));
}

double LinearRewardModel::bonus(const Vector& x) const {
  const Vector phi = features_.phi(x);
  const double q = phi.dot(gram_llt_.solve(phi));
  return c1_ * std::min(1.0, std::sqrt(std::max(q, 0.0)));
}

Vector LinearRewardModel::predict_gradient(const Vector& x) const {
  return features_.phi_jacobian(x).transpose() * theta_hat_;
}

Vector LinearRewardModel::bonus_gradient(const Vector& x) const {
  const Vector phi = features_.phi(x);
  const Vector solved = gram_llt_.solve(phi);
  const double q = phi.dot(solved);
  const double root = std::sqrt(std::max(q, 0.0));
  // min(1, sqrt(q)): zero subgradient on the clipped branch
  if (root >= 1.0 || root <= 0.0) return Vector::Zero(x.size());
  return (c1_ / root) * (features_.phi_jacobian(x).transpose() * solved);
}

double LinearRewardModel::log_det_gram() const {
  return 2.0 * gram_llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

void LinearRewardModel::save(std::ostream& out) const {
  write_features(out, features_);
  write_f64(out, lambda_);
  write_f64(out, c1_);
  write_f64(out, delta_);
  write_vec(out, theta_hat_);
  write_mat(out, gram_);
}

LinearRewardModel LinearRewardModel::load(std::istream& in) {
  LinearRewardModel m;
  m.features_ = read_features(in);
  m.lambda_ = read_f64(in);
  m.c1_ = read_f64(in);
  m.delta_ = read_f64(in);
  m.theta_hat_ = read_vec(in);
  m.gram_ = read_mat(in);
  m.gram_llt_ = Eigen::LLT<Matrix>(m.gram_);
  if (m.gram_llt_.info() != Eigen::Success) throw NumericError("loaded gram is not SPD");
  return m;
}

BootstrapEnsemble BootstrapEnsemble::fit(const FeedbackDataset& data, const grad::MlpSpec& head_spec,
                                         int heads, const BootstrapTrainConfig& train,
                                         std::uint64_t seed) {
  if (data.size() < 1) throw ConfigError("bootstrap fit: empty dataset");
  if (heads < 2) throw ConfigError("bootstrap fit: need at least 2 heads");
  head_spec.validate();
  if (head_spec.output_dim() != 1) throw ConfigError("bootstrap heads must be scalar regressors");

  BootstrapEnsemble ens;
  ens.spec_ = head_spec;
  const std::size_t n = data.size();

  for (int h = 0; h < heads; ++h) {
    Rng rng(seed_hash(seed, static_cast<std::uint64_t>(h), 0xb007));
    // resample with replacement, exactly |D| entries
    std::vector<std::size_t> resample(n);
    for (std::size_t i = 0; i < n; ++i) resample[i] = rng.below(n);

    grad::ParamVector params = grad::mlp_init(head_spec, seed_hash(seed, static_cast<std::uint64_t>(h), 0x1417));
    // independent non-zero final layer so heads disagree away from the data
    {
      const int last = head_spec.layer_count() - 1;
      auto W = params.matrix(params.layout.index_of("W" + std::to_string(last)));
      auto b = params.vector(params.layout.index_of("b" + std::to_string(last)));
      const double bound = 1.0 / std::sqrt(static_cast<double>(W.cols()));
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-bound, bound);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    }

    grad::AdamState opt = grad::AdamState::init(params.values.size(), train.adam);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    grad::Tape tape;
    for (int epoch = 0; epoch < train.epochs; ++epoch) {
      // deterministic Fisher-Yates reshuffle per epoch
      for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
      }
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(train.batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(train.batch_size));
        tape.reset();
        grad::Tape::NodeId loss = -1;
        for (std::size_t i = start; i < stop; ++i) {
          const auto& entry = data.entries[resample[order[i]]];
          auto x = tape.constant(entry.x);
          auto pred = grad::mlp_forward(tape, head_spec, params, 0.0, x, true);
          auto err = tape.sub(pred, tape.constant(Vector::Constant(1, entry.y)));
          auto sq = tape.square(err);
          loss = (loss < 0) ? sq : tape.add(loss, sq);
        }
        loss = tape.scale(loss, 1.0 / static_cast<double>(stop - start));
        const Vector grad = tape.gradient(loss);
        grad::adam_step(params, grad, opt, grad::StepDirection::Descent);
      }
    }
    ens.heads_.push_back(std::move(params));
  }
  return ens;
}

double BootstrapEnsemble::head_value(int head, const Vector& x) const {
  return grad::mlp_eval(spec_, heads_[static_cast<std::size_t>(head)], 0.0, x)[0];
}

double BootstrapEnsemble::max_value(const Vector& x) const {
  double best = -std::numeric_limits<double>::infinity();
  for (int h = 0; h < head_count(); ++h) best = std::max(best, head_value(h, x));
  return best;
}

double BootstrapEnsemble::mean_value(const Vector& x) const {
  double acc = 0.0;
  for (int h = 0; h < head_count(); ++h) acc += head_value(h, x);
  return acc / head_count();
}

Vector BootstrapEnsemble::max_gradient(const Vector& x) const {
  int argmax = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int h = 0; h < head_count(); ++h) {
    const double v = head_value(h, x);
    if (v > best) {
      best = v;
      argmax = h;
    }
  }
  return grad::mlp_input_gradient(spec_, heads_[static_cast<std::size_t>(argmax)], 0.0, x,
                                  Vector::Ones(1));
}

Vector BootstrapEnsemble::mean_gradient(const Vector& x) const {
  Vector g = Vector::Zero(x.size());
  for (int h = 0; h < head_count(); ++h) {
    g += grad::mlp_input_gradient(spec_, heads_[static_cast<std::size_t>(h)], 0.0, x, Vector::Ones(1));
  }
  return g / head_count();
}

void BootstrapEnsemble::save(std::ostream& out) const {
  write_i32(out, static_cast<std::int32_t>(spec_.layer_widths.size()));
  for (int w : spec_.layer_widths) write_i32(out, w);
  write_i32(out, static_cast<std::int32_t>(spec_.activation));
  write_i32(out, spec_.time_embedding_dim);
  write_i32(out, head_count());
  for (const auto& h : heads_) write_vec(out, h.values);
}

BootstrapEnsemble BootstrapEnsemble::load(std::istream& in) {
  BootstrapEnsemble ens;
  const std::int32_t n_widths = read_i32(in);
  ens.spec_.layer_widths.resize(static_cast<std::size_t>(n_widths));
  for (auto& w : ens.spec_.layer_widths) w = read_i32(in);
  ens.spec_.activation = static_cast<grad::Activation>(read_i32(in));
  ens.spec_.time_embedding_dim = read_i32(in);
  const std::int32_t heads = read_i32(in);
  for (std::int32_t h = 0; h < heads; ++h) {
    grad::ParamVector pv = grad::ParamVector::zeros(ens.spec_.layout());
    pv.values = read_vec(in);
    ens.heads_.push_back(std::move(pv));
  }
  return ens;
}

double RewardSurrogate::optimistic(const Vector& x) const {
  if (is_linear()) {
    const auto& m = linear();
    return m.predict(x) + m.bonus(x);
  }
  return bootstrap().max_value(x);
}

Vector RewardSurrogate::optimistic_gradient(const Vector& x) const {
  if (is_linear()) {
    const auto& m = linear();
    return m.predict_gradient(x) + m.bonus_gradient(x);
  }
  return bootstrap().max_gradient(x);
}

double RewardSurrogate::mean(const Vector& x) const {
  if (is_linear()) return linear().predict(x);
  return bootstrap().mean_value(x);
}

Vector RewardSurrogate::mean_gradient(const Vector& x) const {
  if (is_linear()) return linear().predict_gradient(x);
  return bootstrap().mean_gradient(x);
}

void RewardSurrogate::save(std::ostream& out) const {
  write_u64(out, kMagic);
  if (std::holds_alternative<std::monostate>(model_)) throw ConfigError("saving an empty surrogate");
  write_i32(out, is_linear() ? 0 : 1);
  if (is_linear()) {
    linear().save(out);
  } else {
    bootstrap().save(out);
  }
}

RewardSurrogate RewardSurrogate::load(std::istream& in) {
  if (read_u64(in) != kMagic) throw ConfigError("not a surrogate checkpoint");
  const std::int32_t kind = read_i32(in);
  if (kind == 0) return RewardSurrogate(LinearRewardModel::load(in));
  return RewardSurrogate(BootstrapEnsemble::load(in));
}

void RewardSurrogate::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open surrogate checkpoint for writing: " + path);
  save(out);
}

RewardSurrogate RewardSurrogate::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open surrogate checkpoint: " + path);
  return load(in);
}

}  // namespace seiko::reward
