#pragma once

#include "singheat/common.hpp"

#include <string>
#include <vector>

namespace singheat {

enum class GeometryKind { interval, tangent_disk, parabola_cap };

std::string to_string(GeometryKind k);

// Canonical domain with the singular point 0 on its boundary and outward
// normal -e_N there.
class Geometry {
public:
  static Geometry interval(double length);
  static Geometry tangent_disk(double radius);
  static Geometry parabola_cap(double curvature, double cap_radius);

  GeometryKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double length() const { return L_; }
  double radius() const { return R_; }
  Vec center() const { return Vec(0.0, R_); }
  double curvature() const { return beta_; }
  double cap_radius() const { return rcap_; }

  double r_omega() const { return r_omega_; }
  double collar_width() const { return beta0_; }
  double tangency_constant() const { return c_omega_; }
  double tangency_sampled() const { return c_omega_raw_; }
  double projection_growth_constant() const { return e_omega_; }
  double projection_growth_sampled() const { return e_omega_raw_; }

  bool contains(const Vec& x, double tol = 0.0) const;
  bool on_boundary(const Vec& x, double tol) const;

  double distance_to_boundary(const Vec& x) const;
  Vec project_to_boundary(const Vec& x) const;
  Vec outward_normal(const Vec& p) const;

  // pr(x) . n(pr(x)) for x in the collar, evaluated without cancellation.
  double projection_normal_dot(const Vec& x) const;

  // Uniform sample in the closed domain.
  Vec sample_interior(Rng& rng) const;
  // Deterministic, evenly parametrised boundary points (both ends included).
  std::vector<Vec> boundary_samples(std::size_t n) const;
  // Collar points: uniform interior samples with rho < beta0 plus a
  // log-radial cloud approaching the origin.
  std::vector<Vec> collar_samples(std::size_t n, std::uint64_t seed) const;

  // Largest |x| over the closed domain and a bounding box.
  Vec box_lo() const;
  Vec box_hi() const;

private:
  Geometry() = default;
  void finish();
  double parabola_half_width() const;
  // nearest boundary point without the collar restriction
  Vec nearest_boundary_point(const Vec& x, double* dist) const;
  double parabola_reach() const;

  GeometryKind kind_ = GeometryKind::interval;
  int dim_ = 1;
  double L_ = 0, R_ = 0, beta_ = 0, rcap_ = 0;
  double r_omega_ = 0, beta0_ = 0;
  double c_omega_ = 0, c_omega_raw_ = 0, e_omega_ = 0, e_omega_raw_ = 0;
};

// An open interval (dimension 1) or open ball (dimension 2).
struct Region {
  enum class Shape { interval, ball };
  Shape shape = Shape::interval;
  double lo = 0, hi = 0;
  Vec center = Vec::Zero();
  double radius = 0;

  static Region make_interval(double lo, double hi);
  static Region make_ball(const Vec& c, double r);

  bool contains(const Vec& x) const;         // open set
  bool closure_contains(const Vec& x) const; // closed set
  Vec centroid() const;
  // Returns true when the closure of this region sits inside `outer`.
  bool closure_inside(const Region& outer) const;
  double closure_distance_to_origin() const;
  std::string describe() const;
};

enum class Zone { near_singularity, control_core, bulk, control_ring };
std::string to_string(Zone z);

struct Regions {
  Region omega;
  Region omega0;
  double r0 = 0;
  bool unit_clearance = false; // omega-bar stays outside the closed unit ball
};

// Validates the nesting and origin requirements; throws ConfigError.
Regions make_regions(const Geometry& g, const Region& omega, const Region& omega0);

Zone region_classify(const Geometry& g, const Vec& x, const Regions& regions);

} // namespace singheat
