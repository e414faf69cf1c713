// Shared scalar/matrix aliases, seeding, hashing, and small runtime helpers.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace distcap {

using Scalar = double;

template <class S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VecT<Scalar>;
using Mat = MatT<Scalar>;

using TokenId = int;
using SceneId = int;

// Raised for problems the user can fix (bad flags, missing files, bad config
// values). The CLI maps these to exit code 1; everything else is exit code 2.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent sub-seed for a named stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// Deterministic generator: same seed gives the same stream on every platform
// (normal() is hand-rolled so no standard-library distribution is involved).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0xD1B54A32D192ED03ull)) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::int64_t uniform_int(std::int64_t n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xCBF29CE484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::uint64_t hash_string(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t hash_matrix(const Mat& m, std::uint64_t h = 0xCBF29CE484222325ull) {
  std::int64_t dims[2] = {m.rows(), m.cols()};
  h = fnv1a(dims, sizeof(dims), h);
  return fnv1a(m.data(), sizeof(Scalar) * static_cast<std::size_t>(m.size()), h);
}

inline std::uint64_t hash_vector(const Vec& v, std::uint64_t h = 0xCBF29CE484222325ull) {
  std::int64_t n = v.size();
  h = fnv1a(&n, sizeof(n), h);
  return fnv1a(v.data(), sizeof(Scalar) * static_cast<std::size_t>(v.size()), h);
}

// Shortest decimal form that round-trips a double exactly.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Worker cap: DISTCAP_THREADS if set, otherwise the hardware thread count.
int worker_count();

// Runs fn(i) for i in [0, n), fanning out over at most worker_count() threads.
// Each index writes only its own output slot, so results join deterministically.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace distcap
