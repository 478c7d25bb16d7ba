#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "iwave/errors.hpp"
#include "iwave/harness.hpp"
#include "iwave/symbol.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitVerdict = 3;

iwave::ExperimentConfig with_overrides(const std::string& path, const std::string& output_dir, unsigned jobs,
                                       std::size_t budget) {
  iwave::ExperimentConfig cfg = iwave::load_config(path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  if (jobs > 0) cfg.jobs = jobs;
  if (budget > 0) cfg.budget = budget;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Viscous internal-wave experiments on the torus"};
  app.require_subcommand(1);

  std::string output_dir;
  unsigned jobs = 0;
  std::size_t budget = 0;
  bool strict = false;
  app.add_option("--output-dir", output_dir, "Directory for result artifacts");
  app.add_option("--jobs", jobs, "Worker threads");
  app.add_option("--budget", budget, "Largest dense block dimension");
  app.add_flag("--strict", strict, "Exit with code 3 when a verdict fails");

  std::string config_path;
  std::string plot_kind;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
  run_cmd->add_option("config", config_path, "JSON config")->required();
  run_cmd->add_option("--plot", plot_kind, "Also emit plot data of this kind");
  auto* verify_cmd = app.add_subcommand("verify", "Validate a config file without running it");
  verify_cmd->add_option("config", config_path, "JSON config")->required();
  auto* catalog_cmd = app.add_subcommand("catalog", "List the built-in symbols");

  CLI11_PARSE(app, argc, argv);

  try {
    if (catalog_cmd->parsed()) {
      for (const auto& sym : iwave::builtin_library()) {
        std::cout << sym.name();
        for (const auto& [k, v] : sym.params()) std::cout << ' ' << k << '=' << v;
        std::cout << (sym.separable() ? "  separable" : "") << '\n';
      }
      return 0;
    }
    const iwave::ExperimentConfig cfg = with_overrides(config_path, output_dir, jobs, budget);
    if (verify_cmd->parsed()) {
      std::cout << "config ok: " << cfg.experiment << " on " << cfg.symbol << " (hash " << iwave::config_hash(cfg)
                << ")\n";
      return 0;
    }
    const iwave::ResultRecord rec = iwave::run(cfg);
    std::cout << "experiment " << rec.experiment << "  hash " << rec.config_hash << "\n";
    for (const auto& [k, v] : rec.summary) std::cout << "  " << k << " = " << v << '\n';
    for (const auto& f : rec.flags) std::cout << "  flag " << f << '\n';
    for (const auto& [k, v] : rec.verdicts) std::cout << "  verdict " << k << ": " << (v ? "pass" : "fail") << '\n';
    std::cout << "  written to " << rec.directory << '\n';
    if (!plot_kind.empty())
      for (const auto& path : iwave::emit_plot_data(rec, plot_kind, rec.directory + "/plot"))
        std::cout << "  plot " << path << '\n';
    if (strict && !rec.passed()) return kExitVerdict;
    return 0;
  } catch (const iwave::InvalidConfig& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
