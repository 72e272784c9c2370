#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "isb/app.hpp"
#include "isb/errors.hpp"

namespace {

int report_error(const std::string& category, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", category}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Interaction-sideband spectroscopy simulator"};
  cli.set_version_flag("--version", isb::app::kVersion);
  cli.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  auto add_common = [&](CLI::App* sub, bool with_outputs) {
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    if (with_outputs) {
      sub->add_option("--out", out_dir, "Output directory (overrides the config)");
      sub->add_option("--seed", seed, "Random seed (overrides the config)");
      sub->add_option("--threads", threads, "Worker threads, 0 = all cores (overrides the config)");
    }
  };
  auto* simulate = cli.add_subcommand("simulate", "Compute a model spectrum");
  auto* analyze = cli.add_subcommand("analyze", "Bin, center and reflect measured scans");
  auto* fit = cli.add_subcommand("fit", "Fit the scattering length to measured scans");
  auto* validate = cli.add_subcommand("validate", "Check a configuration without running it");
  add_common(simulate, true);
  add_common(analyze, true);
  add_common(fit, true);
  add_common(validate, false);
  validate->add_option("--mode", "Mode to validate for (simulate, analyze, fit); defaults to the config's mode");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }

  isb::app::RunConfig cfg;
  try {
    cfg = isb::app::load_config(config_path);
  } catch (const isb::IoError& e) {
    return report_error("io", e.what(), 4);
  } catch (const isb::ConfigError& e) {
    return report_error("config", e.what(), 2);
  }
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;

  if (validate->parsed()) {
    isb::app::Mode mode = cfg.mode.value_or(isb::app::Mode::Simulate);
    if (auto opt = validate->get_option("--mode"); opt->count() > 0) {
      const auto m = opt->as<std::string>();
      if (m == "simulate") mode = isb::app::Mode::Simulate;
      else if (m == "analyze") mode = isb::app::Mode::Analyze;
      else if (m == "fit") mode = isb::app::Mode::Fit;
      else return report_error("config", "unknown mode '" + m + "'", 2);
    }
    const auto report = isb::app::validate(cfg, mode);
    std::cout << report.to_json() << '\n';
    return report.ok() ? 0 : 2;
  }

  const isb::app::Mode mode = simulate->parsed() ? isb::app::Mode::Simulate
                              : analyze->parsed() ? isb::app::Mode::Analyze
                                                  : isb::app::Mode::Fit;
  const auto outcome = isb::app::run(cfg, mode, out_dir.value_or(cfg.output));
  for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
  if (outcome.exit_code != 0) return report_error(outcome.error_category, outcome.message, outcome.exit_code);
  for (const auto& f : outcome.outputs) std::cout << f << '\n';
  return 0;
}
