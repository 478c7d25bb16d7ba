#include "iwave/symbol.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace iwave {

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double angle_diff(double a, double b) {
  double d = std::remainder(a - b, kTwoPi);
  if (d <= -kPi) d += kTwoPi;
  return d;
}

HomogeneousSymbol::HomogeneousSymbol(std::string name, std::map<std::string, double> params,
                                     Scalar3 eval, Gradient3 grad_x, Scalar3 grad_theta,
                                     std::vector<SeparableTerm> terms)
    : name_(std::move(name)),
      params_(std::move(params)),
      eval_(std::move(eval)),
      grad_x_(std::move(grad_x)),
      grad_theta_(std::move(grad_theta)),
      terms_(std::move(terms)) {}

double HomogeneousSymbol::max_spatial_gradient() const {
  constexpr int n = 48;
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        const auto g = grad_x(kTwoPi * i / n, kTwoPi * j / n, kTwoPi * l / n);
        best = std::max(best, std::hypot(g[0], g[1]));
      }
  return best;
}

FlowPoint FlowPoint::reduced() const {
  return {wrap_angle(x1), wrap_angle(x2), wrap_angle(theta), rho};
}

double eval_symbol(const HomogeneousSymbol& sym, double x1, double x2, double theta) {
  return sym(x1, x2, theta);
}

FlowTangent rescaled_field(const HomogeneousSymbol& sym, const FlowPoint& q) {
  const double c = std::cos(q.theta);
  const double s = std::sin(q.theta);
  const double pt = sym.grad_theta(q.x1, q.x2, q.theta);
  const auto px = sym.grad_x(q.x1, q.x2, q.theta);
  FlowTangent v;
  v.dx1 = -pt * s;
  v.dx2 = pt * c;
  v.dtheta = -(-px[0] * s + px[1] * c);
  v.drho = -(px[0] * c + px[1] * s);
  return v;
}

namespace {

SeparableTerm angular_sine() {
  return {[](double, double) { return 1.0; }, [](double t) { return std::sin(t); }};
}

}  // namespace

HomogeneousSymbol free_symbol() {
  return HomogeneousSymbol(
      "free", {}, [](double, double, double t) { return std::sin(t); },
      [](double, double, double) { return std::array<double, 2>{0.0, 0.0}; },
      [](double, double, double t) { return std::cos(t); }, {angular_sine()});
}

HomogeneousSymbol shear_symbol(double eps) {
  return HomogeneousSymbol(
      "shear", {{"eps", eps}},
      [eps](double x1, double, double t) { return std::sin(t) + eps * std::cos(x1); },
      [eps](double x1, double, double) { return std::array<double, 2>{-eps * std::sin(x1), 0.0}; },
      [](double, double, double t) { return std::cos(t); },
      {angular_sine(),
       {[eps](double x1, double) { return eps * std::cos(x1); }, [](double) { return 1.0; }}});
}

HomogeneousSymbol two_param_symbol(double eps1, double eps2, double phase) {
  return HomogeneousSymbol(
      "two-param", {{"eps1", eps1}, {"eps2", eps2}, {"phi", phase}},
      [=](double x1, double x2, double t) {
        return std::sin(t) + eps1 * std::cos(x1) + eps2 * std::cos(x2 + phase);
      },
      [=](double x1, double x2, double) {
        return std::array<double, 2>{-eps1 * std::sin(x1), -eps2 * std::sin(x2 + phase)};
      },
      [](double, double, double t) { return std::cos(t); },
      {angular_sine(),
       {[=](double x1, double x2) { return eps1 * std::cos(x1) + eps2 * std::cos(x2 + phase); },
        [](double) { return 1.0; }}});
}

std::vector<HomogeneousSymbol> builtin_library() {
  return {free_symbol(), shear_symbol(0.3), two_param_symbol(0.3, 0.1, 0.0)};
}

HomogeneousSymbol make_symbol(const std::string& name, const std::map<std::string, double>& params) {
  auto take = [&](std::map<std::string, double> defaults) {
    for (const auto& [key, value] : params) {
      auto it = defaults.find(key);
      if (it == defaults.end())
        throw std::invalid_argument("symbol '" + name + "' has no parameter '" + key + "'");
      it->second = value;
    }
    return defaults;
  };
  if (name == "free") {
    take({});
    return free_symbol();
  }
  if (name == "shear") {
    auto p = take({{"eps", 0.3}});
    return shear_symbol(p["eps"]);
  }
  if (name == "two-param") {
    auto p = take({{"eps1", 0.3}, {"eps2", 0.1}, {"phi", 0.0}});
    return two_param_symbol(p["eps1"], p["eps2"], p["phi"]);
  }
  throw std::invalid_argument("unknown symbol '" + name + "'");
}

}  // namespace iwave
