#include "iwave/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "iwave/dynamics.hpp"
#include "iwave/errors.hpp"
#include "iwave/evolution.hpp"
#include "iwave/parallel.hpp"
#include "iwave/resolvent.hpp"
#include "iwave/symbol.hpp"

namespace iwave {

const char* const kCodeVersion = "iwave 0.1.0";

using nlohmann::json;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"dynamics", "la1",       "spectrum", "scaling",
                                              "decomposition", "timescale", "limiting"};
  return names;
}

// ---------------------------------------------------------------------------
// Config

std::vector<double> expand_grid(const json& desc) {
  if (desc.is_number()) return {desc.get<double>()};
  if (desc.is_array()) {
    std::vector<double> out;
    for (const auto& v : desc) {
      if (!v.is_number()) throw std::invalid_argument("grid entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  if (desc.is_object() && desc.size() == 1) {
    const auto& [key, arg] = *desc.items().begin();
    if (!arg.is_array()) throw std::invalid_argument("grid generator expects an array");
    if (key == "linspace" || key == "geomspace") {
      if (arg.size() != 3) throw std::invalid_argument(key + " expects [lo, hi, n]");
      const double lo = arg[0].get<double>(), hi = arg[1].get<double>();
      const int n = arg[2].get<int>();
      if (n < 1) throw std::invalid_argument(key + " needs n >= 1");
      if (key == "geomspace" && !(lo > 0.0 && hi > 0.0)) throw std::invalid_argument("geomspace needs positive ends");
      std::vector<double> out;
      for (int i = 0; i < n; ++i) {
        const double u = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        out.push_back(key == "linspace" ? lo + u * (hi - lo) : lo * std::pow(hi / lo, u));
      }
      return out;
    }
    if (key == "halving") {
      if (arg.size() != 2) throw std::invalid_argument("halving expects [start, count]");
      double v = arg[0].get<double>();
      const int n = arg[1].get<int>();
      if (n < 1) throw std::invalid_argument("halving needs count >= 1");
      std::vector<double> out;
      for (int i = 0; i < n; ++i, v *= 0.5) out.push_back(v);
      return out;
    }
  }
  throw std::invalid_argument("unrecognised grid descriptor");
}

namespace {

struct Requirements {
  bool nu = false, omega = false, t = false, certificate = false;
};

Requirements requirements(const std::string& experiment) {
  Requirements r;
  if (experiment == "la1" || experiment == "scaling" || experiment == "limiting") r.nu = r.omega = true;
  if (experiment == "spectrum" || experiment == "timescale") r.nu = true;
  if (experiment == "decomposition") r.nu = r.t = true;
  r.certificate = experiment == "scaling" || experiment == "timescale";
  return r;
}

bool same_params(const std::map<std::string, double>& a, const json& b) {
  if (!b.is_object() || b.size() != a.size()) return false;
  for (const auto& [k, v] : a)
    if (!b.contains(k) || !b[k].is_number() || b[k].get<double>() != v) return false;
  return true;
}

/// Empty string when the certificate is a passing dynamics record for the
/// same symbol and parameters.
std::string certificate_problem(const std::string& path, const std::string& symbol,
                                const std::map<std::string, double>& params) {
  std::ifstream in(path);
  if (!in) return "cannot open " + path;
  json rec;
  try {
    in >> rec;
  } catch (const std::exception& e) {
    return std::string("not valid JSON: ") + e.what();
  }
  if (rec.value("experiment", "") != "dynamics") return "not a dynamics record";
  if (!rec.contains("verdicts") || !rec["verdicts"].value("simple_structure", false))
    return "record does not carry a passing simple-structure verdict";
  const json& c = rec.value("config", json::object());
  if (c.value("symbol", "") != symbol || !same_params(params, c.value("params", json::object())))
    return "certificate was issued for a different symbol or parameters";
  return {};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  if (!j.is_object()) throw InvalidConfig("config: expected a JSON object");

  static const std::set<std::string> known{
      "experiment", "symbol",        "params",    "N",          "delta",          "s",
      "nu_grid",    "omega_grid",    "t_spec",    "t_grid",     "seed",           "output_dir",
      "budget",     "jobs",          "certificate", "waive_certificate", "n_samples", "horizon",
      "inner_fraction", "delta1",    "omega0",    "points_per_decade", "slope_bound_Hs", "slope_bound_L2",
      "forcing"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) errors.push_back(key + ": unknown field");

  auto field = [&](const char* name, auto& target) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(target);
    } catch (const std::exception&) {
      errors.push_back(std::string(name) + ": wrong type");
    }
  };

  if (!j.contains("experiment") || !j["experiment"].is_string()) {
    errors.push_back("experiment: required, one of dynamics|la1|spectrum|scaling|decomposition|timescale|limiting");
  } else {
    cfg.experiment = j["experiment"].get<std::string>();
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
      errors.push_back("experiment: unknown experiment '" + cfg.experiment + "'");
  }

  if (j.contains("symbol")) {
    const json& s = j["symbol"];
    if (s.is_string()) {
      cfg.symbol = s.get<std::string>();
    } else if (s.is_object() && s.contains("name") && s["name"].is_string()) {
      cfg.symbol = s["name"].get<std::string>();
      if (s.contains("params")) {
        try {
          s["params"].get_to(cfg.params);
        } catch (const std::exception&) {
          errors.push_back("symbol.params: expected an object of numbers");
        }
      }
    } else {
      errors.push_back("symbol: expected a name or {name, params}");
    }
  }
  if (j.contains("params")) {
    try {
      j["params"].get_to(cfg.params);
    } catch (const std::exception&) {
      errors.push_back("params: expected an object of numbers");
    }
  }
  try {
    cfg.params = make_symbol(cfg.symbol, cfg.params).params();
  } catch (const std::exception& e) {
    errors.push_back(std::string("symbol: ") + e.what());
  }

  field("N", cfg.N);
  field("delta", cfg.delta);
  field("s", cfg.s);
  field("seed", cfg.seed);
  field("output_dir", cfg.output_dir);
  field("budget", cfg.budget);
  field("jobs", cfg.jobs);
  field("certificate", cfg.certificate);
  field("waive_certificate", cfg.waive_certificate);
  field("n_samples", cfg.n_samples);
  field("horizon", cfg.horizon);
  field("inner_fraction", cfg.inner_fraction);
  field("delta1", cfg.delta1);
  field("omega0", cfg.omega0);
  field("points_per_decade", cfg.points_per_decade);
  field("slope_bound_Hs", cfg.slope_bound_Hs);
  field("slope_bound_L2", cfg.slope_bound_L2);

  if (j.contains("forcing")) {
    const json& f = j["forcing"];
    if (!f.is_object()) {
      errors.push_back("forcing: expected an object");
    } else {
      cfg.forcing.kind = f.value("kind", cfg.forcing.kind);
      cfg.forcing.width = f.value("width", cfg.forcing.width);
      cfg.forcing.k1 = f.value("k1", cfg.forcing.k1);
      cfg.forcing.k2 = f.value("k2", cfg.forcing.k2);
      if (cfg.forcing.kind != "gaussian" && cfg.forcing.kind != "mode")
        errors.push_back("forcing.kind: expected gaussian or mode");
      if (!(cfg.forcing.width > 0.0)) errors.push_back("forcing.width: must be positive");
    }
  }

  auto grid = [&](const char* name, std::vector<double>& target) {
    if (!j.contains(name)) return;
    try {
      target = expand_grid(j[name]);
      if (target.empty()) errors.push_back(std::string(name) + ": grid must be non-empty");
    } catch (const std::exception& e) {
      errors.push_back(std::string(name) + ": " + e.what());
    }
  };
  grid("nu_grid", cfg.nu_grid);
  grid("omega_grid", cfg.omega_grid);
  grid("t_spec", cfg.t_grid);
  grid("t_grid", cfg.t_grid);

  if (cfg.N < 1) errors.push_back("N: must be >= 1");
  if (cfg.budget < 1) errors.push_back("budget: must be >= 1");
  if (cfg.jobs < 1) errors.push_back("jobs: must be >= 1");
  if (!(cfg.delta > 0.0)) errors.push_back("delta: must be positive");
  if (!(cfg.inner_fraction > 0.0 && cfg.inner_fraction < 1.0)) errors.push_back("inner_fraction: must lie in (0, 1)");
  if (cfg.points_per_decade < 1) errors.push_back("points_per_decade: must be >= 1");

  const Requirements req = requirements(cfg.experiment);
  if (req.nu && cfg.nu_grid.empty()) errors.push_back("nu_grid: required for " + cfg.experiment);
  if (req.omega && cfg.omega_grid.empty()) errors.push_back("omega_grid: required for " + cfg.experiment);
  if (req.t && cfg.t_grid.empty()) errors.push_back("t_spec: required for " + cfg.experiment);
  for (double nu : cfg.nu_grid) {
    const bool ok = cfg.experiment == "spectrum" ? nu >= 0.0 : nu > 0.0;
    if (!ok) {
      errors.push_back("nu_grid: values must be positive");
      break;
    }
  }
  for (double t : cfg.t_grid)
    if (!(t > 0.0)) {
      errors.push_back("t_spec: times must be positive");
      break;
    }
  if (cfg.experiment == "limiting" && cfg.nu_grid.size() < 2)
    errors.push_back("nu_grid: limiting needs at least two values");
  if (cfg.experiment == "scaling" && cfg.N < 2) errors.push_back("N: scaling needs N >= 2 for the doubling check");

  if (req.certificate && !cfg.waive_certificate) {
    if (cfg.certificate.empty()) {
      errors.push_back("certificate: " + cfg.experiment +
                       " requires a passing simple-structure certificate or waive_certificate = true");
    } else {
      const std::string problem = certificate_problem(cfg.certificate, cfg.symbol, cfg.params);
      if (!problem.empty()) errors.push_back("certificate: " + problem);
    }
  }

  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration";
    for (const auto& e : errors) msg << "\n  " << e;
    throw InvalidConfig(msg.str());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InvalidConfig(std::string("config: not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j{{"experiment", c.experiment},
              {"symbol", c.symbol},
              {"params", c.params},
              {"N", c.N},
              {"delta", c.delta},
              {"s", c.s},
              {"nu_grid", c.nu_grid},
              {"omega_grid", c.omega_grid},
              {"t_spec", c.t_grid},
              {"seed", c.seed},
              {"output_dir", c.output_dir},
              {"budget", c.budget},
              {"jobs", c.jobs},
              {"certificate", c.certificate},
              {"waive_certificate", c.waive_certificate},
              {"n_samples", c.n_samples},
              {"horizon", c.horizon},
              {"inner_fraction", c.inner_fraction},
              {"delta1", c.delta1},
              {"omega0", c.omega0},
              {"points_per_decade", c.points_per_decade},
              {"slope_bound_Hs", c.slope_bound_Hs},
              {"slope_bound_L2", c.slope_bound_L2},
              {"forcing", {{"kind", c.forcing.kind}, {"width", c.forcing.width}, {"k1", c.forcing.k1},
                           {"k2", c.forcing.k2}}}};
  for (const char* grid : {"nu_grid", "omega_grid", "t_spec"})
    if (j[grid].empty()) j.erase(grid);
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  // Fields that do not change metrics.
  j.erase("output_dir");
  j.erase("jobs");
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

SpectralField make_forcing(const ForcingSpec& fs, int N) {
  const ModeSet modes(N);
  if (fs.kind == "mode") {
    if (!modes.contains(fs.k1, fs.k2)) throw InvalidConfig("forcing: mode outside the truncation");
    return SpectralField::single_mode(N, fs.k1, fs.k2);
  }
  SpectralField f = SpectralField::zeros(N);
  for (int i = 0; i < static_cast<int>(modes.size()); ++i) {
    const double k2 = static_cast<double>(modes.k1(i)) * modes.k1(i) + static_cast<double>(modes.k2(i)) * modes.k2(i);
    f.coeffs[i] = std::exp(-k2 / (fs.width * fs.width));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Records

bool ResultRecord::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& kv) { return kv.second; });
}

json ResultRecord::to_json() const {
  json pts = json::array();
  for (const auto& p : points) pts.push_back(p);
  return json{{"config_hash", config_hash}, {"experiment", experiment}, {"code_version", code_version},
              {"timestamp", timestamp},     {"config", config},         {"points", pts},
              {"summary", summary},         {"flags", flags},           {"verdicts", verdicts},
              {"series", series}};
}

std::string points_csv(const std::vector<json>& points) {
  std::set<std::string> keys;
  for (const auto& p : points)
    for (const auto& [k, _] : p.items()) keys.insert(k);
  std::ostringstream os;
  bool first = true;
  for (const auto& k : keys) {
    os << (first ? "" : ",") << k;
    first = false;
  }
  os << '\n';
  for (const auto& p : points) {
    first = true;
    for (const auto& k : keys) {
      if (!first) os << ',';
      first = false;
      if (!p.contains(k)) continue;
      const json& v = p[k];
      if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") != std::string::npos) {
          std::string quoted = "\"";
          for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
          s = quoted + "\"";
        }
        os << s;
      } else if (v.is_null()) {
        os << "nan";
      } else {
        os << v.dump();
      }
    }
    os << '\n';
  }
  return os.str();
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void add_flag(std::vector<std::string>& flags, const std::string& f) {
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

/// Evaluates grid points concurrently; failures become per-point error entries.
template <class Task>
std::vector<json> run_points(std::size_t n, unsigned jobs, Task&& task, std::vector<std::string>& flags) {
  std::vector<json> out(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    try {
      out[i] = task(i);
    } catch (const std::exception& e) {
      out[i] = json{{"error", e.what()}};
    }
  });
  for (const auto& p : out)
    if (p.contains("error")) add_flag(flags, "point-errors");
  return out;
}

double num(const json& p, const char* key) {
  return p.contains(key) && p[key].is_number() ? p[key].get<double>() : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Experiments

void run_dynamics(const ExperimentConfig& cfg, const HomogeneousSymbol& sym, ResultRecord& rec) {
  SimpleStructureOptions so;
  so.T = cfg.horizon;
  so.detection.seed = cfg.seed;
  so.detection.jobs = cfg.jobs;
  const SimpleStructureReport rep = verify_simple_structure(sym, cfg.delta, cfg.n_samples, so);
  for (const auto& o : rep.per_omega)
    rec.points.push_back({{"omega", o.omega},
                          {"coverage", o.coverage},
                          {"ss_fraction", o.ss_fraction},
                          {"has_attractor", o.has_attractor},
                          {"has_repulsor", o.has_repulsor},
                          {"beta_attractor", o.beta_attractor},
                          {"beta_repulsor", o.beta_repulsor}});
  rec.summary["coverage"] = rep.coverage;
  rec.summary["ss_fraction"] = rep.ss_fraction;
  rec.series["verdict"] = rep.verdict;
  rec.verdicts["simple_structure"] = rep.verdict == "pass";
  if (rep.verdict != "pass") return;
  EscapeOptions eo;
  eo.seed = cfg.seed + 10;
  eo.jobs = cfg.jobs;
  try {
    const EscapeFunction k = build_escape_function(sym, rep.attractors, cfg.delta, eo);
    rec.summary["escape_beta"] = k.beta;
    rec.summary["escape_monotone_fraction"] = k.monotone_fraction;
    rec.summary["escape_unconverged"] = static_cast<double>(k.unconverged);
    rec.verdicts["escape_positive"] = k.monotone_fraction >= 0.99;
  } catch (const Error& e) {
    add_flag(rec.flags, "escape-failed");
    rec.series["escape_error"] = e.what();
    rec.verdicts["escape_positive"] = false;
  }
}

void run_la1(const ExperimentConfig& cfg, const TruncatedOperator& P, const TruncatedOperator& Q,
             ResultRecord& rec) {
  const std::size_t no = cfg.omega_grid.size();
  SolverOptions so;
  so.dense_budget = cfg.budget;
  rec.points = run_points(
      no * cfg.nu_grid.size(), cfg.jobs,
      [&](std::size_t i) {
        const double omega = cfg.omega_grid[i % no], nu = cfg.nu_grid[i / no];
        const La1Report r = check_la1(P, Q, omega, nu, so);
        return json{{"omega", omega},
                    {"nu", nu},
                    {"measured", r.measured},
                    {"bound", r.bound},
                    {"identity_error", r.identity_error}};
      },
      rec.flags);
  bool ok = true;
  double worst = 0.0;
  for (const auto& p : rec.points) {
    if (p.contains("error")) {
      ok = false;
      continue;
    }
    worst = std::max(worst, num(p, "measured") / num(p, "bound"));
    ok = ok && num(p, "measured") <= num(p, "bound") * (1.0 + 1e-10);
  }
  rec.summary["max_measured_over_bound"] = worst;
  rec.verdicts["la1_bound"] = ok;
}

void run_spectrum(const ExperimentConfig& cfg, const TruncatedOperator& P, const TruncatedOperator& Q,
                  ResultRecord& rec) {
  const double norm_P = operator_norm(P, 0.0, 0.0);
  double worst_im = -std::numeric_limits<double>::infinity(), worst_re = -std::numeric_limits<double>::infinity();
  bool ok = true;
  for (double nu : cfg.nu_grid) {
    try {
      for (cplx l : spectrum_Pnu(P, Q, nu, cfg.budget)) {
        rec.points.push_back({{"nu", nu}, {"re", l.real()}, {"im", l.imag()}});
        worst_im = std::max(worst_im, l.imag() + nu);
        worst_re = std::max(worst_re, std::abs(l.real()) - norm_P);
        ok = ok && l.imag() <= -nu + 1e-10 && std::abs(l.real()) <= norm_P + 1e-10;
      }
    } catch (const std::exception& e) {
      rec.points.push_back({{"nu", nu}, {"error", e.what()}});
      add_flag(rec.flags, "point-errors");
      ok = false;
    }
  }
  rec.summary["norm_P"] = norm_P;
  rec.summary["max_im_plus_nu"] = worst_im;
  rec.summary["max_abs_re_minus_norm"] = worst_re;
  rec.verdicts["containment"] = ok;
}

void run_scaling(const ExperimentConfig& cfg, const HomogeneousSymbol& sym, const TruncatedOperator& P,
                 const TruncatedOperator& Q, bool verified, ResultRecord& rec) {
  AssemblyOptions ao;
  ao.dense_budget = cfg.budget;
  const TruncatedOperator Pc = assemble_P(sym, cfg.N / 2, ao);
  const TruncatedOperator Qc = assemble_Q(cfg.N / 2);
  ScalingScanOptions so;
  so.P_coarse = &Pc;
  so.Q_coarse = &Qc;
  so.hypothesis_verified = verified;
  so.jobs = cfg.jobs;
  so.solver.dense_budget = cfg.budget;
  const ScalingScanResult res = resolvent_scaling_scan(P, Q, cfg.omega_grid, cfg.nu_grid, cfg.s, so);
  for (const auto& r : res.records) {
    json p{{"symbol", r.symbol},
           {"N", r.N},
           {"omega", r.omega},
           {"nu", r.nu},
           {"s", r.s},
           {"norm_Hs", r.norm_Hs},
           {"norm_L2_to_Hs", r.norm_L2_to_Hs},
           {"residual", r.residual},
           {"coarse_norm_Hs", r.coarse_norm_Hs},
           {"coarse_norm_L2_to_Hs", r.coarse_norm_L2_to_Hs},
           {"converged", r.converged}};
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
    p["flags"] = flags;
    if (!r.error.empty()) {
      p["error"] = r.error;
      add_flag(rec.flags, "point-errors");
    }
    rec.points.push_back(p);
  }
  for (const auto& f : res.flags) add_flag(rec.flags, f);
  rec.summary["slope_Hs"] = res.slope_Hs;
  rec.summary["slope_L2_to_Hs"] = res.slope_L2_to_Hs;
  rec.summary["fit_points"] = static_cast<double>(res.fit_nus.size());
  rec.series["fit_nus"] = res.fit_nus;
  rec.series["per_omega_slope_Hs"] = res.per_omega_slope_Hs;
  rec.series["per_omega_slope_L2_to_Hs"] = res.per_omega_slope_L2_to_Hs;
  rec.verdicts["slope_Hs"] = res.slope_Hs <= cfg.slope_bound_Hs;
  rec.verdicts["slope_L2_to_Hs"] = res.slope_L2_to_Hs <= cfg.slope_bound_L2;
}

void run_decomposition(const ExperimentConfig& cfg, const TruncatedOperator& P, const TruncatedOperator& Q,
                       ResultRecord& rec) {
  const SpectralField f = make_forcing(cfg.forcing, cfg.N);
  const std::size_t nt = cfg.t_grid.size();
  DecompositionOptions dopt;
  dopt.dense_budget = cfg.budget;
  dopt.contour.delta = cfg.delta;
  rec.points = run_points(
      nt * cfg.nu_grid.size(), cfg.jobs,
      [&](std::size_t i) {
        const double t = cfg.t_grid[i % nt], nu = cfg.nu_grid[i / nt];
        const DecompositionResult d = decompose(P, Q, nu, t, f, cfg.delta, cfg.inner_fraction, dopt);
        json p{{"nu", nu}, {"t", t}, {"identity_error", d.identity_error}};
        for (const auto& [k, v] : d.norms) p[k] = v;
        return p;
      },
      rec.flags);
  double worst = 0.0;
  bool ok = true;
  for (const auto& p : rec.points) {
    if (p.contains("error")) {
      ok = false;
      continue;
    }
    worst = std::max(worst, num(p, "identity_error"));
  }
  rec.summary["max_identity_error"] = worst;
  rec.verdicts["identity"] = ok && worst < 1e-8;
}

void run_timescale(const ExperimentConfig& cfg, const HomogeneousSymbol& sym, const TruncatedOperator& P,
                   const TruncatedOperator& Q, bool verified, ResultRecord& rec) {
  const SpectralField f = make_forcing(cfg.forcing, cfg.N);
  TimescaleOptions to;
  to.omega0 = cfg.omega0;
  to.delta = cfg.delta;
  to.inner_fraction = cfg.inner_fraction;
  to.points_per_decade = cfg.points_per_decade;
  to.max_spatial_gradient = sym.max_spatial_gradient();
  to.jobs = cfg.jobs;
  to.hypothesis_verified = verified;
  to.dense_budget = cfg.budget;
  to.contour.delta = cfg.delta;
  const TimescaleResult res = timescale_scan(P, Q, f, cfg.delta1, cfg.nu_grid, cfg.s, to);
  for (const auto& r : res.records)
    rec.points.push_back({{"symbol", r.symbol},
                          {"N", r.N},
                          {"nu", r.nu},
                          {"t", r.t},
                          {"norm_e_s", r.norm_e_s},
                          {"norm_b_L2", r.norm_b_L2},
                          {"norm_u_minus_ref_s", r.norm_u_minus_ref_s},
                          {"norm_u_minus_stationary_s", r.norm_u_minus_stationary_s},
                          {"window_flag", r.window_flag}});
  for (const auto& fl : res.flags) add_flag(rec.flags, fl);
  rec.summary["delta2"] = res.delta2;
  rec.summary["delta2_tstar"] = res.delta2_tstar;
  rec.summary["max_b_over_f1"] = res.max_b_over_f1;
  rec.summary["T_max"] = res.T_max;
  rec.series["e_at_tstar"] = res.e_at_tstar;
  rec.series["sup_discrepancy"] = res.sup_discrepancy;
  rec.series["sup_stationary"] = res.sup_stationary;
  rec.verdicts["delta2_positive"] = res.delta2 > 0.0;
  bool monotone = !res.sup_discrepancy.empty();
  for (std::size_t i = 1; i < res.sup_discrepancy.size(); ++i)
    monotone = monotone && res.sup_discrepancy[i].second < res.sup_discrepancy[i - 1].second;
  rec.verdicts["discrepancy_monotone"] = monotone;
}

void run_limiting(const ExperimentConfig& cfg, const TruncatedOperator& P, ResultRecord& rec) {
  const SpectralField f = make_forcing(cfg.forcing, cfg.N);
  std::vector<double> nus = cfg.nu_grid;
  std::sort(nus.begin(), nus.end(), std::greater<>());
  LimitingOptions lo;
  lo.s = cfg.s;
  lo.require_cauchy = false;
  lo.dense_budget = cfg.budget;
  rec.points = run_points(
      cfg.omega_grid.size(), cfg.jobs,
      [&](std::size_t i) {
        const double omega = cfg.omega_grid[i];
        const LimitingResult r = limiting_resolvent(P, omega, f, nus, lo);
        return json{{"omega", omega},
                    {"estimate", r.estimate},
                    {"cauchy", r.cauchy},
                    {"last_increment", r.increments.empty() ? 0.0 : r.increments.back()},
                    {"norm_s", sobolev_norm(r.field, cfg.s)}};
      },
      rec.flags);
  bool ok = true;
  for (const auto& p : rec.points) ok = ok && !p.contains("error") && p.value("cauchy", false);
  rec.verdicts["cauchy"] = ok;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

ResultRecord run(const ExperimentConfig& cfg, const RunOptions& opts) {
  ResultRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.experiment = cfg.experiment;
  rec.code_version = kCodeVersion;
  rec.timestamp = utc_timestamp();
  rec.config = to_json(cfg);
  // Kept out of the record so that it depends only on the config hash.
  rec.config.erase("output_dir");
  rec.config.erase("jobs");

  const bool certified = !cfg.certificate.empty() &&
                         certificate_problem(cfg.certificate, cfg.symbol, cfg.params).empty();
  if (requirements(cfg.experiment).certificate && !certified) add_flag(rec.flags, "hypothesis-unverified");

  const HomogeneousSymbol sym = make_symbol(cfg.symbol, cfg.params);
  if (cfg.experiment == "dynamics") {
    run_dynamics(cfg, sym, rec);
  } else {
    AssemblyOptions ao;
    ao.dense_budget = cfg.budget;
    const TruncatedOperator P = assemble_P(sym, cfg.N, ao);
    const TruncatedOperator Q = assemble_Q(cfg.N);
    if (cfg.experiment == "la1") run_la1(cfg, P, Q, rec);
    else if (cfg.experiment == "spectrum") run_spectrum(cfg, P, Q, rec);
    else if (cfg.experiment == "scaling") run_scaling(cfg, sym, P, Q, certified, rec);
    else if (cfg.experiment == "decomposition") run_decomposition(cfg, P, Q, rec);
    else if (cfg.experiment == "timescale") run_timescale(cfg, sym, P, Q, certified, rec);
    else if (cfg.experiment == "limiting") run_limiting(cfg, P, rec);
    else throw InvalidConfig("experiment: unknown experiment '" + cfg.experiment + "'");
  }

  if (opts.persist) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(cfg.output_dir) / (cfg.experiment + "-" + rec.config_hash);
    fs::create_directories(dir);
    json body = rec.to_json();
    body.erase("timestamp");
    write_file(dir / "record.json", body.dump(2) + "\n");
    write_file(dir / "points.csv", points_csv(rec.points));
    write_file(dir / "run_info.json",
               json{{"timestamp", rec.timestamp}, {"code_version", rec.code_version}, {"config_hash", rec.config_hash}}
                       .dump(2) +
                   "\n");
    rec.directory = dir.string();
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

void require_metrics(const ResultRecord& rec, const std::vector<std::string>& keys, const std::string& kind) {
  std::size_t usable = 0;
  for (const auto& p : rec.points) {
    bool all = true;
    for (const auto& k : keys) all = all && p.contains(k);
    if (all) ++usable;
  }
  if (usable == 0) {
    std::string list;
    for (const auto& k : keys) list += (list.empty() ? "" : ", ") + k;
    throw MissingMetric("plot kind '" + kind + "' needs points with " + list);
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> emit_plot_data(const ResultRecord& rec, const std::string& kind, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(directory) / name;
    write_file(path, content);
    written.push_back(path.string());
  };

  if (kind == "scaling") {
    require_metrics(rec, {"omega", "nu", "norm_Hs", "norm_L2_to_Hs"}, kind);
    std::ostringstream os;
    os << "omega,log_inv_nu,log_norm_Hs,log_norm_L2_to_Hs\n";
    for (const auto& p : rec.points) {
      if (!p.contains("norm_Hs")) continue;
      os << fmt(num(p, "omega")) << ',' << fmt(std::log(1.0 / num(p, "nu"))) << ',' << fmt(std::log(num(p, "norm_Hs")))
         << ',' << fmt(std::log(num(p, "norm_L2_to_Hs"))) << '\n';
    }
    emit("scaling.csv", os.str());
  } else if (kind == "timescale") {
    require_metrics(rec, {"nu", "t", "norm_e_s", "window_flag"}, kind);
    std::map<double, std::ostringstream, std::greater<>> per_nu;
    for (const auto& p : rec.points) {
      if (p.value("window_flag", "") != "decay") continue;
      auto& os = per_nu[num(p, "nu")];
      if (os.tellp() == 0) os << "t,norm_e_s\n";
      os << fmt(num(p, "t")) << ',' << fmt(num(p, "norm_e_s")) << '\n';
    }
    if (per_nu.empty()) throw MissingMetric("plot kind 'timescale' needs decay-window points");
    std::size_t idx = 0;
    for (auto& [nu, os] : per_nu) emit("timescale_nu" + std::to_string(idx++) + ".csv", os.str());
  } else if (kind == "spectrum") {
    require_metrics(rec, {"nu", "re", "im"}, kind);
    std::ostringstream os;
    os << "nu,re,im\n";
    for (const auto& p : rec.points)
      if (p.contains("re")) os << fmt(num(p, "nu")) << ',' << fmt(num(p, "re")) << ',' << fmt(num(p, "im")) << '\n';
    emit("spectrum.csv", os.str());
  } else if (kind == "la1") {
    require_metrics(rec, {"nu", "measured", "bound"}, kind);
    std::ostringstream os;
    os << "log_inv_nu,log_measured,log_bound\n";
    for (const auto& p : rec.points)
      if (p.contains("measured"))
        os << fmt(std::log(1.0 / num(p, "nu"))) << ',' << fmt(std::log(num(p, "measured"))) << ','
           << fmt(std::log(num(p, "bound"))) << '\n';
    emit("la1.csv", os.str());
  } else if (kind == "decomposition") {
    require_metrics(rec, {"nu", "t", "e.H-0.6", "b.L2"}, kind);
    std::ostringstream os;
    os << "nu,t,norm_e_H-0.6,norm_b_L2\n";
    for (const auto& p : rec.points)
      if (p.contains("e.H-0.6"))
        os << fmt(num(p, "nu")) << ',' << fmt(num(p, "t")) << ',' << fmt(num(p, "e.H-0.6")) << ','
           << fmt(num(p, "b.L2")) << '\n';
    emit("decomposition.csv", os.str());
  } else if (kind == "dynamics") {
    require_metrics(rec, {"omega", "coverage"}, kind);
    std::ostringstream os;
    os << "omega,coverage,ss_fraction\n";
    for (const auto& p : rec.points)
      os << fmt(num(p, "omega")) << ',' << fmt(num(p, "coverage")) << ',' << fmt(num(p, "ss_fraction")) << '\n';
    emit("dynamics.csv", os.str());
  } else {
    throw std::invalid_argument("unknown plot kind '" + kind + "'");
  }
  return written;
}

}  // namespace iwave
