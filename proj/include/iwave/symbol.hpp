#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace iwave {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.141592653589793238462643383279;

/// Reduces an angle to [0, 2pi).
double wrap_angle(double a);

/// Signed distance between two angles, in (-pi, pi].
double angle_diff(double a, double b);

/// One product term a(x) * b(theta) of a separable symbol. The quantizer uses
/// these to build sparse mode-coupling stencils.
struct SeparableTerm {
  std::function<double(double x1, double x2)> spatial;
  std::function<double(double theta)> angular;
};

/// Degree-0 homogeneous real symbol p(x, theta) on T^2 x S^1, theta being the
/// direction of the covector xi = |xi| (cos theta, sin theta). The radial
/// variable never enters the interface, so homogeneity holds by construction.
class HomogeneousSymbol {
 public:
  using Scalar3 = std::function<double(double, double, double)>;
  using Gradient3 = std::function<std::array<double, 2>(double, double, double)>;

  HomogeneousSymbol(std::string name, std::map<std::string, double> params,
                    Scalar3 eval, Gradient3 grad_x, Scalar3 grad_theta,
                    std::vector<SeparableTerm> terms = {});

  double operator()(double x1, double x2, double theta) const { return eval_(x1, x2, theta); }
  std::array<double, 2> grad_x(double x1, double x2, double theta) const {
    return grad_x_(x1, x2, theta);
  }
  double grad_theta(double x1, double x2, double theta) const {
    return grad_theta_(x1, x2, theta);
  }

  const std::string& name() const { return name_; }
  const std::map<std::string, double>& params() const { return params_; }

  /// Empty when the symbol has no known product decomposition.
  const std::vector<SeparableTerm>& separable_terms() const { return terms_; }
  bool separable() const { return !terms_.empty(); }

  /// Upper bound of |d_x p| on a fine sample grid.
  double max_spatial_gradient() const;

 private:
  std::string name_;
  std::map<std::string, double> params_;
  Scalar3 eval_;
  Gradient3 grad_x_;
  Scalar3 grad_theta_;
  std::vector<SeparableTerm> terms_;
};

/// Q = I - Laplacian on T^2, a positive Fourier multiplier of order 2.
struct ViscositySymbol {
  static constexpr int order = 2;
  static double multiplier(int k1, int k2) {
    return 1.0 + static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
  }
};

/// A point (x, theta, rho = log|xi|) of the homogenized phase space.
struct FlowPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double theta = 0.0;
  double rho = 0.0;

  /// Copy with all three angles reduced mod 2pi.
  FlowPoint reduced() const;
};

struct FlowTangent {
  double dx1 = 0.0;
  double dx2 = 0.0;
  double dtheta = 0.0;
  double drho = 0.0;
};

double eval_symbol(const HomogeneousSymbol& sym, double x1, double x2, double theta);

/// Rescaled Hamilton field |xi| H_p written in (x, theta, rho) coordinates:
///   dx = (d_theta p) theta_perp,  dtheta = -(d_x p).theta_perp,  drho = -(d_x p).theta
/// with theta = (cos, sin) and theta_perp = (-sin, cos). Independent of rho.
FlowTangent rescaled_field(const HomogeneousSymbol& sym, const FlowPoint& q);

HomogeneousSymbol free_symbol();
HomogeneousSymbol shear_symbol(double eps);
HomogeneousSymbol two_param_symbol(double eps1, double eps2, double phase);

/// Catalog with default parameters: free, shear (eps = 0.3),
/// two-param (eps1 = 0.3, eps2 = 0.1, phi = 0).
std::vector<HomogeneousSymbol> builtin_library();

/// Builds a catalog symbol by name. Missing parameters take catalog defaults.
/// Throws std::invalid_argument for unknown names or parameters.
HomogeneousSymbol make_symbol(const std::string& name,
                              const std::map<std::string, double>& params = {});

}  // namespace iwave
