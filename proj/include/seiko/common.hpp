#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seiko {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error taxonomy shared by all modules. Everything derives from Error so
// callers can catch the whole family when persisting partial results.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct BudgetError : Error {
  using Error::Error;
};
struct SimulationError : Error {
  using Error::Error;
};
struct DegenerateDensityError : Error {
  using Error::Error;
};

// splitmix64: the canonical 64-bit mixing function. Used for seed derivation
// so that per-trajectory seeds are stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t seed_hash(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (index + 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

inline std::uint64_t seed_hash(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return seed_hash(seed_hash(master, a), b);
}

// Deterministic Gaussian/uniform source. std::mt19937_64 has a standardized
// output sequence; the distributions below avoid the implementation-defined
// std::normal_distribution so streams are bit-identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x1234567899abcdefULL : seed) {
    // warm up the mixer so nearby seeds decorrelate
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller with a cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a content hash, used for manifest regression pinning.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Runs fn(i) for i in [0, n). Results must be written to per-index slots by
// the callee; reductions happen afterwards in index order so the outcome is
// independent of the thread count.
void parallel_for(int n, int n_threads, const std::function<void(int)>& fn);

// Thread count resolution: explicit > SEIKO_THREADS > hardware.
int resolve_threads(int requested);

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace seiko
