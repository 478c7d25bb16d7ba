#include "iwave/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include "iwave/errors.hpp"
#include "iwave/parallel.hpp"
#include "union_find.hpp"

namespace iwave {

FlowTangent SymbolFlow::field(const FlowPoint& q) const {
  FlowTangent v = rescaled_field(sym_, q);
  v.dx1 *= sign_;
  v.dx2 *= sign_;
  v.dtheta *= sign_;
  v.drho *= sign_;
  return v;
}

FlowTangent CircleToyFlow::field(const FlowPoint& q) const {
  return {0.0, 0.0, -std::sin(q.theta), std::cos(q.theta)};
}

double CircleToyFlow::energy(const FlowPoint&) const { return std::numeric_limits<double>::quiet_NaN(); }

const char* to_string(SetKind kind) {
  switch (kind) {
    case SetKind::Attractor: return "attractor";
    case SetKind::Repulsor: return "repulsor";
    case SetKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

namespace {

using State4 = std::array<double, 4>;
using State5 = std::array<double, 5>;
namespace odeint = boost::numeric::odeint;

FlowPoint to_point(const State4& s) { return {s[0], s[1], s[2], s[3]}; }

struct FlowSystem {
  const FlowModel& model;
  void operator()(const State4& s, State4& ds, double) const {
    const FlowTangent v = model.field(to_point(s));
    ds = {v.dx1, v.dx2, v.dtheta, v.drho};
  }
};

/// Integrates for time T (sign gives direction) with the requested step,
/// halving it on energy drift. The observer sees (t, point) after each step
/// and once at t = 0; it may be invoked again from scratch after a restart.
template <class Observer>
double integrate_core(const FlowModel& model, const FlowPoint& start, double T, double dt, const FlowOptions& opts,
                      Observer&& observe, double& max_drift) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (T == 0.0) throw std::invalid_argument("integration time must be non-zero");
  const double e0 = model.energy(start);
  odeint::runge_kutta_fehlberg78<State4> stepper;
  FlowSystem sys{model};
  for (double h = dt;; h *= 0.5) {
    if (h < opts.min_dt) throw StepUnderflow("required step fell below " + std::to_string(opts.min_dt));
    const auto n = static_cast<long long>(std::ceil(std::abs(T) / h - 1e-9));
    const double step = T / static_cast<double>(n);
    State4 s{start.x1, start.x2, start.theta, start.rho};
    observe.reset();
    observe(0.0, to_point(s));
    bool ok = true;
    max_drift = 0.0;
    for (long long i = 0; i < n; ++i) {
      stepper.do_step(sys, s, step * static_cast<double>(i), step);
      if (!std::isnan(e0)) {
        const double drift = std::abs(model.energy(to_point(s)) - e0);
        max_drift = std::max(max_drift, drift);
        if (drift > opts.drift_tol) {
          ok = false;
          break;
        }
      }
      observe(step * static_cast<double>(i + 1), to_point(s));
    }
    if (ok) return std::abs(step);
  }
}

struct StoreAll {
  Trajectory& traj;
  std::size_t every;
  std::size_t count = 0;
  FlowPoint last;
  double last_t = 0.0;
  void reset() {
    traj.points.clear();
    traj.times.clear();
    count = 0;
  }
  void operator()(double t, const FlowPoint& q) {
    last = q;
    last_t = t;
    if (count++ % every == 0) {
      traj.points.push_back(q.reduced());
      traj.times.push_back(t);
    }
  }
};

struct StoreTail {
  double from;
  double spacing;
  std::vector<FlowPoint> points;
  double next = 0.0;
  void reset() {
    points.clear();
    next = from;
  }
  void operator()(double t, const FlowPoint& q) {
    if (std::abs(t) + 1e-9 >= next) {
      points.push_back(q.reduced());
      next += spacing;
    }
  }
};

std::vector<FlowPoint> integrate_tail(const FlowModel& model, const FlowPoint& start, double T, double dt,
                                      double window, double spacing) {
  StoreTail tail{std::max(0.0, std::abs(T) - window), spacing, {}, 0.0};
  double drift = 0.0;
  integrate_core(model, start, T, dt, FlowOptions{}, tail, drift);
  return std::move(tail.points);
}

FlowPoint flow_to(const FlowModel& model, const FlowPoint& start, double T, double dt) {
  struct Last {
    FlowPoint q;
    void reset() {}
    void operator()(double, const FlowPoint& p) { q = p; }
  } last;
  double drift = 0.0;
  integrate_core(model, start, T, dt, FlowOptions{}, last, drift);
  return last.q;
}

double torus_distance(const FlowPoint& a, const FlowPoint& b) {
  const double d1 = angle_diff(a.x1, b.x1), d2 = angle_diff(a.x2, b.x2), d3 = angle_diff(a.theta, b.theta);
  return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
}

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Spatial hash over the (x1, x2, theta) torus; rho is ignored.
class TorusHash {
 public:
  explicit TorusHash(double radius) : cells_(std::max(1, static_cast<int>(std::floor(kTwoPi / radius)))) {}

  int cells() const { return cells_; }
  std::array<int, 3> cell_of(const FlowPoint& q) const {
    auto c = [&](double a) { return std::min(cells_ - 1, static_cast<int>(wrap_angle(a) / kTwoPi * cells_)); };
    return {c(q.x1), c(q.x2), c(q.theta)};
  }
  long long key(int a, int b, int c) const {
    auto w = [&](int i) { return static_cast<long long>(((i % cells_) + cells_) % cells_); };
    return (w(a) * cells_ + w(b)) * cells_ + w(c);
  }

  void insert(const FlowPoint& q, int id) {
    const auto c = cell_of(q);
    map_[key(c[0], c[1], c[2])].push_back(id);
  }
  std::size_t cell_count(const FlowPoint& q) const {
    const auto c = cell_of(q);
    auto it = map_.find(key(c[0], c[1], c[2]));
    return it == map_.end() ? 0 : it->second.size();
  }

  template <class Visit>
  void neighbors(const FlowPoint& q, Visit&& visit) const {
    const auto c = cell_of(q);
    const int span = cells_ >= 3 ? 1 : 0;
    for (int a = -span; a <= span; ++a)
      for (int b = -span; b <= span; ++b)
        for (int d = -span; d <= span; ++d) {
          auto it = map_.find(key(c[0] + a, c[1] + b, c[2] + d));
          if (it == map_.end()) continue;
          for (int id : it->second) visit(id);
        }
  }

 private:
  int cells_;
  std::unordered_map<long long, std::vector<int>> map_;
};

/// Clusters points within `radius`, linking each point to a bounded set of
/// anchors per cell so dense limit sets stay cheap.
std::vector<int> cluster_points(const std::vector<FlowPoint>& pts, double radius) {
  constexpr std::size_t kAnchorsPerCell = 16;
  TorusHash hash(radius);
  detail::UnionFind uf(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool near_own_anchor = false;
    const auto own = hash.cell_of(pts[i]);
    hash.neighbors(pts[i], [&](int j) {
      if (torus_distance(pts[i], pts[j]) <= radius) {
        uf.unite(i, static_cast<std::size_t>(j));
        if (hash.cell_of(pts[j]) == own) near_own_anchor = true;
      }
    });
    if (!near_own_anchor && hash.cell_count(pts[i]) < kAnchorsPerCell) hash.insert(pts[i], static_cast<int>(i));
  }
  std::vector<int> label(pts.size());
  std::unordered_map<std::size_t, int> ids;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto root = uf.find(i);
    auto it = ids.find(root);
    if (it == ids.end()) it = ids.emplace(root, static_cast<int>(ids.size())).first;
    label[i] = it->second;
  }
  return label;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<FlowPoint> thin(const std::vector<FlowPoint>& pts, std::size_t cap) {
  if (pts.size() <= cap) return pts;
  std::vector<FlowPoint> out;
  out.reserve(cap);
  const double stride = static_cast<double>(pts.size()) / static_cast<double>(cap);
  for (std::size_t i = 0; i < cap; ++i) out.push_back(pts[static_cast<std::size_t>(i * stride)]);
  return out;
}

constexpr double kRateFloor = 1e-6;
constexpr std::size_t kMaxRepresentatives = 4000;

struct ClusterStats {
  SetKind kind = SetKind::Degenerate;
  std::vector<double> rates;
  std::vector<FlowPoint> points;
};

/// Clusters tail points of one direction and classifies every cluster.
/// `forward` selects attractor (true) or repulsor (false) candidates.
std::vector<ClusterStats> classify_tails(const FlowModel& model, const std::vector<std::vector<FlowPoint>>& tails,
                                         bool forward, double radius, std::vector<int>& sample_cluster) {
  std::vector<FlowPoint> pts;
  std::vector<int> owner;
  for (std::size_t s = 0; s < tails.size(); ++s)
    for (const auto& q : tails[s]) {
      pts.push_back(q);
      owner.push_back(static_cast<int>(s));
    }
  const std::vector<int> label = cluster_points(pts, radius);
  const int n_clusters = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
  std::vector<ClusterStats> stats(n_clusters);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    stats[label[i]].points.push_back(pts[i]);
    FlowPoint q = pts[i];
    q.rho = 0.0;
    stats[label[i]].rates.push_back(model.field(q).drho);
  }
  for (auto& c : stats) {
    const double mean = std::accumulate(c.rates.begin(), c.rates.end(), 0.0) / static_cast<double>(c.rates.size());
    std::vector<double> oriented = c.rates;
    if (!forward)
      for (auto& r : oriented) r = -r;
    const double beta = percentile(oriented, 0.05);
    const bool hyperbolic = (forward ? mean : -mean) > kRateFloor && beta > 0.0;
    c.kind = hyperbolic ? (forward ? SetKind::Attractor : SetKind::Repulsor) : SetKind::Degenerate;
  }
  // A sample belongs to the cluster holding its last tail point.
  sample_cluster.assign(tails.size(), -1);
  for (std::size_t i = 0; i < pts.size(); ++i) sample_cluster[owner[i]] = label[i];
  return stats;
}

InvariantSet merge_clusters(const std::vector<ClusterStats>& stats, SetKind kind, double energy) {
  InvariantSet set;
  set.kind = kind;
  set.energy = energy;
  std::vector<double> rates;
  std::vector<FlowPoint> pts;
  for (const auto& c : stats)
    if (c.kind == kind) {
      rates.insert(rates.end(), c.rates.begin(), c.rates.end());
      pts.insert(pts.end(), c.points.begin(), c.points.end());
    }
  if (rates.empty()) return set;
  set.radial_rate = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
  if (kind == SetKind::Repulsor)
    for (auto& r : rates) r = -r;
  set.beta = kind == SetKind::Degenerate ? 0.0 : percentile(rates, 0.05);
  set.representatives = thin(pts, kMaxRepresentatives);
  return set;
}

bool near_any(const TorusHash& hash, const std::vector<FlowPoint>& reps, const FlowPoint& q, double radius) {
  bool hit = false;
  hash.neighbors(q, [&](int j) { hit = hit || torus_distance(q, reps[j]) <= radius; });
  return hit;
}

}  // namespace

Trajectory integrate_flow(const FlowModel& model, const FlowPoint& start, double T, double dt,
                          const FlowOptions& opts) {
  Trajectory traj;
  traj.energy = model.energy(start);
  StoreAll store{traj, std::max<std::size_t>(1, opts.store_every), 0, FlowPoint{}, 0.0};
  traj.dt_used = integrate_core(model, start, T, dt, opts, store, traj.max_drift);
  if (traj.times.back() != store.last_t) {
    traj.points.push_back(store.last.reduced());
    traj.times.push_back(store.last_t);
  }
  return traj;
}

Trajectory integrate_flow(const HomogeneousSymbol& sym, const FlowPoint& start, double T, double dt,
                          const FlowOptions& opts) {
  return integrate_flow(SymbolFlow(sym), start, T, dt, opts);
}

std::vector<FlowPoint> sample_energy_shell(const HomogeneousSymbol& sym, double omega, std::size_t n,
                                           std::uint64_t seed) {
  constexpr int kBracket = 64;
  constexpr int kMaxAttempts = 10000;
  std::mt19937_64 rng(seed);
  std::vector<FlowPoint> out;
  out.reserve(n);
  int failures = 0;
  while (out.size() < n) {
    const double x1 = kTwoPi * uniform01(rng), x2 = kTwoPi * uniform01(rng);
    auto g = [&](double t) { return sym(x1, x2, t) - omega; };
    std::vector<double> roots;
    for (int j = 0; j < kBracket; ++j) {
      double a = kTwoPi * j / kBracket, b = kTwoPi * (j + 1) / kBracket;
      double ga = g(a), gb = g(b);
      if (ga == 0.0) {
        roots.push_back(a);
        continue;
      }
      if (ga * gb > 0.0) continue;
      for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        const double mid = 0.5 * (a + b), gm = g(mid);
        if ((gm < 0.0) == (ga < 0.0)) {
          a = mid;
          ga = gm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    if (roots.empty()) {
      if (++failures > kMaxAttempts) throw std::invalid_argument("energy level is not attained by the symbol");
      continue;
    }
    const double theta = roots[std::min(roots.size() - 1, static_cast<std::size_t>(uniform01(rng) * roots.size()))];
    const auto gx = sym.grad_x(x1, x2, theta);
    const double gt = sym.grad_theta(x1, x2, theta);
    const double grad = std::sqrt(gx[0] * gx[0] + gx[1] * gx[1] + gt * gt);
    if (grad < 1e-8) {
      std::ostringstream msg;
      msg << "gradient " << grad << " at (" << x1 << ", " << x2 << ", " << theta << ") on p = " << omega;
      throw NotRegularValue(msg.str());
    }
    out.push_back(FlowPoint{x1, x2, wrap_angle(theta), 0.0});
  }
  return out;
}

const InvariantSet* Detection::find(SetKind kind) const {
  for (const auto& s : sets)
    if (s.kind == kind) return &s;
  return nullptr;
}

Detection detect_invariant_sets(const HomogeneousSymbol& sym, double omega, std::size_t n_samples, double T,
                                const DetectionOptions& opts) {
  if (!(T > 0.0)) throw std::invalid_argument("detection horizon must be positive");
  const SymbolFlow model(sym, opts.reverse_time ? -1.0 : 1.0);
  Detection det;
  det.report.n_samples = n_samples;
  if (n_samples == 0) return det;
  const std::vector<FlowPoint> starts = sample_energy_shell(sym, omega, n_samples, opts.seed);

  std::vector<std::vector<FlowPoint>> fwd(n_samples), bwd(n_samples);
  std::vector<std::size_t> pending(n_samples);
  std::iota(pending.begin(), pending.end(), std::size_t{0});
  std::vector<ClusterStats> fstats, bstats;
  std::vector<int> fcl, bcl;
  double horizon = T;
  for (;;) {
    parallel_for(pending.size(), opts.jobs, [&](std::size_t i) {
      const std::size_t s = pending[i];
      fwd[s] = integrate_tail(model, starts[s], horizon, opts.dt, opts.tail_window, opts.tail_spacing);
      bwd[s] = integrate_tail(model, starts[s], -horizon, opts.dt, opts.tail_window, opts.tail_spacing);
    });
    fstats = classify_tails(model, fwd, true, opts.radius, fcl);
    bstats = classify_tails(model, bwd, false, opts.radius, bcl);
    pending.clear();
    bool any_hyperbolic = false;
    for (const auto& c : fstats) any_hyperbolic = any_hyperbolic || c.kind != SetKind::Degenerate;
    for (const auto& c : bstats) any_hyperbolic = any_hyperbolic || c.kind != SetKind::Degenerate;
    for (std::size_t s = 0; s < n_samples; ++s)
      if (fstats[fcl[s]].kind != SetKind::Attractor || bstats[bcl[s]].kind != SetKind::Repulsor) pending.push_back(s);
    // Longer horizons only help when some orbits do settle.
    if (pending.empty() || !any_hyperbolic || 2.0 * horizon > opts.T_max) break;
    horizon *= 2.0;
  }

  InvariantSet attractor = merge_clusters(fstats, SetKind::Attractor, omega);
  InvariantSet repulsor = merge_clusters(bstats, SetKind::Repulsor, omega);
  std::vector<ClusterStats> degenerate;
  for (const auto& c : fstats)
    if (c.kind == SetKind::Degenerate) degenerate.push_back(c);
  for (const auto& c : bstats)
    if (c.kind == SetKind::Degenerate) degenerate.push_back(c);
  if (!attractor.representatives.empty()) det.sets.push_back(attractor);
  if (!repulsor.representatives.empty()) det.sets.push_back(repulsor);
  if (!degenerate.empty()) det.sets.push_back(merge_clusters(degenerate, SetKind::Degenerate, omega));

  TorusHash ahash(opts.radius), rhash(opts.radius);
  for (std::size_t i = 0; i < attractor.representatives.size(); ++i)
    ahash.insert(attractor.representatives[i], static_cast<int>(i));
  for (std::size_t i = 0; i < repulsor.representatives.size(); ++i)
    rhash.insert(repulsor.representatives[i], static_cast<int>(i));

  std::size_t nf = 0, nb = 0, nu = 0, none = 0;
  det.samples.resize(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    auto& o = det.samples[s];
    o.start = starts[s];
    o.forward_converged = fstats[fcl[s]].kind == SetKind::Attractor;
    o.backward_converged = bstats[bcl[s]].kind == SetKind::Repulsor;
    o.on_attractor = near_any(ahash, attractor.representatives, o.start, opts.radius);
    o.on_repulsor = near_any(rhash, repulsor.representatives, o.start, opts.radius);
    nf += o.forward_converged;
    nb += o.backward_converged;
    nu += o.forward_converged || o.backward_converged;
    none += !o.forward_converged && !o.backward_converged;
  }
  const double n = static_cast<double>(n_samples);
  det.report.forward_coverage = nf / n;
  det.report.backward_coverage = nb / n;
  det.report.basin_coverage = nu / n;
  det.report.no_convergence = none;
  det.report.horizon = horizon;
  det.report.clusters = fstats.size() + bstats.size();
  return det;
}

// ---------------------------------------------------------------------------
// Escape functions

double radial_bump(double d, double r_in, double r_out) {
  if (d <= r_in) return 1.0;
  if (d >= r_out) return 0.0;
  const double t = (d - r_in) / (r_out - r_in);
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  return a / (a + b);
}

EscapeConstruction::EscapeConstruction(std::shared_ptr<const FlowModel> model, Seed seed0, Seed m0,
                                       EscapeOptions opts)
    : model_(std::move(model)), seed0_(std::move(seed0)), m0_(std::move(m0)), opts_(opts) {}

double EscapeConstruction::value(const FlowPoint& q) const {
  // Homogeneity: evaluate on rho = 0 and rescale.
  FlowPoint q0 = q;
  q0.rho = 0.0;
  auto sys = [this](const State5& s, State5& ds, double) {
    const FlowPoint p{s[0], s[1], s[2], s[3]};
    const FlowTangent v = model_->field(p);
    ds = {v.dx1, v.dx2, v.dtheta, v.drho, std::exp(s[3]) * m0_(p)};
  };
  odeint::runge_kutta_fehlberg78<State5> stepper;
  State5 s{q0.x1, q0.x2, q0.theta, 0.0, 0.0};
  auto current = [&]() {
    const FlowPoint p{s[0], s[1], s[2], s[3]};
    return std::exp(s[3]) * seed0_(p) - s[4];
  };
  const auto per_unit = static_cast<int>(std::lround(1.0 / opts_.dt));
  const double h = 1.0 / per_unit;
  double prev = current();
  for (int unit = 1; unit <= static_cast<int>(opts_.T_max); ++unit) {
    for (int i = 0; i < per_unit; ++i) stepper.do_step(sys, s, 0.0, h);
    const double now = current();
    if (std::abs(now - prev) < opts_.increment_tol * std::max(1.0, std::exp(s[3])))
      return std::exp(q.rho) * now;
    prev = now;
  }
  std::ostringstream msg;
  msg << "escape limit not settled by t = " << opts_.T_max << " from (" << q.x1 << ", " << q.x2 << ", " << q.theta
      << ")";
  throw LimitNotConverged(msg.str());
}

double EscapeConstruction::shifted_value(const FlowPoint& q, double s) const {
  if (s == 0.0) return value(q);
  return value(flow_to(*model_, q, s, opts_.dt));
}

double EscapeConstruction::derivative(const FlowPoint& q) const {
  const double h = opts_.fd_step;
  const FlowPoint plus = flow_to(*model_, q, h, std::min(opts_.dt, h));
  const FlowPoint minus = flow_to(*model_, q, -h, std::min(opts_.dt, h));
  return (value(plus) - value(minus)) / (2.0 * h);
}

EscapeFunction build_escape_function(const HomogeneousSymbol& sym, const std::vector<InvariantSet>& sets,
                                     double delta, const EscapeOptions& opts) {
  std::vector<const InvariantSet*> attractors;
  for (const auto& s : sets)
    if (s.kind == SetKind::Attractor && s.beta > 0.0 && std::abs(s.energy) <= delta + 1e-12)
      attractors.push_back(&s);
  if (attractors.empty()) throw std::invalid_argument("escape construction needs an attractor with beta > 0");

  EscapeFunction out;
  out.beta = std::numeric_limits<double>::infinity();
  for (const auto* a : attractors) out.beta = std::min(out.beta, a->beta);
  const double beta = out.beta;
  auto model = std::make_shared<const SymbolFlow>(sym);

  const std::size_t per_set = std::max<std::size_t>(1, opts.n_samples / attractors.size());
  for (std::size_t ai = 0; ai < attractors.size(); ++ai) {
    const InvariantSet& att = *attractors[ai];
    auto hash = std::make_shared<TorusHash>(opts.r_out);
    for (std::size_t i = 0; i < att.representatives.size(); ++i) hash->insert(att.representatives[i], static_cast<int>(i));
    const auto* reps = &att.representatives;
    auto dist = [hash, reps, r_out = opts.r_out](const FlowPoint& q) {
      double d = r_out;
      hash->neighbors(q, [&](int j) { d = std::min(d, torus_distance(q, (*reps)[j])); });
      return d;
    };
    auto seed0 = [dist, opts](const FlowPoint& q) { return radial_bump(dist(q), opts.r_in, opts.r_out); };
    auto m0 = [dist, opts, model, beta](const FlowPoint& q) {
      const double b = radial_bump(dist(q), opts.r_in, opts.r_out);
      FlowPoint q0 = q;
      q0.rho = 0.0;
      return b * model->field(q0).drho + (1.0 - b) * beta;
    };
    const EscapeConstruction k(model, seed0, m0, opts);
    const std::vector<FlowPoint> pts = sample_energy_shell(sym, att.energy, per_set, opts.seed + ai);
    std::vector<EscapeSample> samples(pts.size());
    parallel_for(pts.size(), opts.jobs, [&](std::size_t i) {
      EscapeSample& e = samples[i];
      e.point = pts[i];
      e.energy = att.energy;
      e.m = k.m(pts[i]);
      try {
        e.value = k.value(pts[i]);
        e.derivative = k.derivative(pts[i]);
        e.converged = true;
        if (dist(pts[i]) <= opts.r_in)
          for (double s = 1.0; e.value <= 0.0 && s <= opts.T_max; s *= 2.0) {
            e.value = k.shifted_value(pts[i], s);
            e.shift = s;
          }
      } catch (const LimitNotConverged&) {
        e.converged = false;
      }
    });
    out.samples.insert(out.samples.end(), samples.begin(), samples.end());
  }
  std::size_t converged = 0, monotone = 0;
  for (const auto& e : out.samples) {
    if (!e.converged) {
      ++out.unconverged;
      continue;
    }
    ++converged;
    monotone += e.derivative > 0.5 * beta;
  }
  out.monotone_fraction = converged ? static_cast<double>(monotone) / converged : 0.0;
  if (static_cast<double>(out.unconverged) > opts.max_unconverged * static_cast<double>(out.samples.size()))
    throw LimitNotConverged(std::to_string(out.unconverged) + " of " + std::to_string(out.samples.size()) +
                            " escape samples did not settle");
  return out;
}

// ---------------------------------------------------------------------------
// Simple structure

SimpleStructureReport verify_simple_structure(const HomogeneousSymbol& sym, double delta, std::size_t n_samples,
                                              const SimpleStructureOptions& opts) {
  SimpleStructureReport rep;
  if (n_samples == 0) {
    rep.verdict = "insufficient-data";
    return rep;
  }
  const int n_omega = std::max(1, opts.n_omega);
  const std::size_t per = std::max<std::size_t>(1, n_samples / n_omega);
  bool pass = true;
  double cov_sum = 0.0, ss_sum = 0.0, total = 0.0;
  for (int i = 0; i < n_omega; ++i) {
    const double omega = n_omega == 1 ? 0.0 : -delta + 2.0 * delta * i / (n_omega - 1);
    DetectionOptions dopt = opts.detection;
    dopt.seed = opts.detection.seed + static_cast<std::uint64_t>(i);
    const Detection det = detect_invariant_sets(sym, omega, per, opts.T, dopt);
    OmegaBreakdown row;
    row.omega = omega;
    row.coverage = det.report.basin_coverage;
    std::size_t ss_ok = 0;
    for (const auto& s : det.samples) {
      const bool a = !(s.forward_converged && !s.on_attractor) || s.backward_converged;
      const bool b = !(s.backward_converged && !s.on_repulsor) || s.forward_converged;
      ss_ok += a && b;
    }
    row.ss_fraction = det.samples.empty() ? 0.0 : static_cast<double>(ss_ok) / det.samples.size();
    if (const auto* a = det.find(SetKind::Attractor)) {
      row.has_attractor = true;
      row.beta_attractor = a->beta;
      rep.attractors.push_back(*a);
    }
    if (const auto* r = det.find(SetKind::Repulsor)) {
      row.has_repulsor = true;
      row.beta_repulsor = r->beta;
    }
    pass = pass && row.has_attractor && row.has_repulsor && row.coverage >= opts.min_coverage &&
           row.ss_fraction >= opts.min_coverage;
    cov_sum += row.coverage * per;
    ss_sum += row.ss_fraction * per;
    total += per;
    rep.per_omega.push_back(row);
  }
  rep.coverage = cov_sum / total;
  rep.ss_fraction = ss_sum / total;
  rep.verdict = pass ? "pass" : "fail";
  return rep;
}

}  // namespace iwave
