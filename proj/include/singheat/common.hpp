#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace singheat {

// Points live in R^2; one-dimensional domains use the first coordinate only.
using Vec = Eigen::Vector2d;
using Mat = Eigen::Matrix2d;

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Platform-independent generator: splitmix-seeded xoshiro256**.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                     // [0,1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();                      // Box-Muller, no cached state

private:
  std::uint64_t s_[4];
};

// Runs body(i) for i in [0,n) on up to `workers` threads. Each index is
// processed exactly once; callers write results into per-index slots.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

int default_workers();

// Shortest round-trip decimal form, locale independent.
std::string fmt(double v);
std::string fmt_point(const Vec& x, int dim);

} // namespace singheat
