// Command line driver for the multilevel MCMC experiments: synthetic data,
// reference solutions, replicated estimator runs and burn-in reports.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "btmc/errors.hpp"
#include "btmc/experiment.hpp"

namespace {

struct CommonFlags {
  std::string preset;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> burn_in;
  std::optional<std::string> levels;
  std::optional<int> replicates;
  std::optional<int> threads;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--preset", flags.preset, "start from a named preset (paper-1d, paper-2d, desk-1d, desk-2d)");
  cmd->add_option("--config", flags.config_path, "key = value config file, overlays the preset");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--burn-in", flags.burn_in, "burn-in mode: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--levels", flags.levels, "level range A..B");
  cmd->add_option("--replicates", flags.replicates, "number of independent estimator replicates");
  cmd->add_option("--threads", flags.threads, "worker pool size (0 = hardware)");
}

btmc::ExperimentConfig resolve_config(const CommonFlags& flags) {
  btmc::ExperimentConfig config;
  if (!flags.preset.empty()) config = btmc::preset_config(flags.preset);
  if (!flags.config_path.empty()) config = btmc::load_config_file(flags.config_path, config);
  if (flags.preset.empty() && flags.config_path.empty()) {
    throw btmc::ConfigError("either --preset or --config is required");
  }
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.burn_in) config.burn_in = *flags.burn_in == "on";
  if (flags.replicates) config.replicates = *flags.replicates;
  if (flags.threads) config.threads = *flags.threads;
  if (flags.levels) {
    const auto split = flags.levels->find("..");
    if (split == std::string::npos) {
      throw btmc::ConfigError("--levels expects a range A..B");
    }
    try {
      config.level_min = std::stoi(flags.levels->substr(0, split));
      config.level_max = std::stoi(flags.levels->substr(split + 2));
    } catch (const std::exception&) {
      throw btmc::ConfigError("--levels expects a range A..B");
    }
  }
  return config;
}

std::filesystem::path default_path(const btmc::ExperimentConfig& config,
                                   const std::string& name, const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  return std::filesystem::path(config.out_dir) / name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel MCMC for elliptic Bayesian inversion with random tree priors"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string data_path, reference_path, with_path, without_path, field_path, trace_path;
  int level = 0;
  long samples = 1000;
  int trunc = 6, grid_level = 8;
  double eps = 0.0;
  std::optional<int> schedule_levels;

  auto* synthesize = app.add_subcommand("synthesize", "draw ground truth, solve, write noisy data");
  add_common_flags(synthesize, flags);

  auto* reference = app.add_subcommand("reference", "prior ratio estimator reference value");
  add_common_flags(reference, flags);
  reference->add_option("--data", data_path, "data file (default <out>/data.json)");

  auto* mlmcmc = app.add_subcommand("mlmcmc", "replicated multilevel estimator runs + RMSE table");
  add_common_flags(mlmcmc, flags);
  mlmcmc->add_option("--data", data_path, "data file (default <out>/data.json)");
  mlmcmc->add_option("--reference", reference_path, "reference file (default <out>/reference.json)");

  auto* singlelevel = app.add_subcommand("singlelevel", "plain single-level chain estimate");
  add_common_flags(singlelevel, flags);
  singlelevel->add_option("--data", data_path, "data file (default <out>/data.json)");
  singlelevel->add_option("--level", level, "posterior level index")->required();
  singlelevel->add_option("--samples", samples, "chain length")->required();
  singlelevel->add_option("--trace", trace_path, "optional chain trace CSV");

  auto* report = app.add_subcommand("report", "burn-in vs no-burn-in RMSE/time ratios");
  add_common_flags(report, flags);
  report->add_option("--with", with_path, "runs CSV with burn-in")->required();
  report->add_option("--without", without_path, "runs CSV without burn-in")->required();
  report->add_option("--reference", reference_path, "reference file (default <out>/reference.json)");

  auto* dump_schedule = app.add_subcommand("dump-schedule", "emit the level schedule as JSON");
  add_common_flags(dump_schedule, flags);
  dump_schedule->add_option("--level", schedule_levels, "number of levels L");
  dump_schedule->add_option("--epsilon", eps, "target accuracy (overrides --level)");

  auto* sample_prior = app.add_subcommand("sample-prior", "draw one prior field and dump it as CSV");
  add_common_flags(sample_prior, flags);
  sample_prior->add_option("--trunc", trunc, "truncation level N");
  sample_prior->add_option("--grid-level", grid_level, "dyadic grid level G");
  sample_prior->add_option("--field", field_path, "output CSV (default <out>/field.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    const btmc::ExperimentConfig config = resolve_config(flags);

    if (synthesize->parsed()) {
      const btmc::ObservationSetup data = btmc::cmd_synthesize(config);
      std::cout << "wrote " << (std::filesystem::path(config.out_dir) / "data.json").string()
                << " (" << data.points.size() << " observations)\n";
    } else if (reference->parsed()) {
      const auto data = btmc::read_data_file(default_path(config, "data.json", data_path));
      const btmc::ReferenceRecord record = btmc::cmd_reference(config, data);
      std::cout << "reference " << btmc::to_string(config.qoi) << " = "
                << btmc::format_double(record.value(config.qoi)) << " +- "
                << btmc::format_double(record.std_error(config.qoi)) << " (" << record.samples
                << " samples)\n";
    } else if (mlmcmc->parsed()) {
      const auto data = btmc::read_data_file(default_path(config, "data.json", data_path));
      const auto record =
          btmc::read_reference_file(default_path(config, "reference.json", reference_path));
      const btmc::MlmcmcOutput output = btmc::cmd_mlmcmc(config, data, record);
      std::cout << "level,rmse,median_abs_error,mean_time,total_time\n";
      for (const btmc::RmseRow& row : output.table) {
        std::cout << row.level << "," << btmc::format_double(row.rmse) << ","
                  << btmc::format_double(row.median_abs_error) << ","
                  << btmc::format_double(row.mean_time) << ","
                  << btmc::format_double(row.total_time) << "\n";
      }
    } else if (singlelevel->parsed()) {
      const auto data = btmc::read_data_file(default_path(config, "data.json", data_path));
      std::optional<std::filesystem::path> trace;
      if (!trace_path.empty()) trace = trace_path;
      const btmc::SingleLevelResult result =
          btmc::cmd_singlelevel(config, data, level, samples, trace);
      std::cout << "estimate = " << btmc::format_double(result.estimate)
                << " acceptance = " << btmc::format_double(result.acceptance) << "\n";
    } else if (report->parsed()) {
      const auto record =
          btmc::read_reference_file(default_path(config, "reference.json", reference_path));
      const auto runs_on = btmc::read_runs_csv(with_path);
      const auto runs_off = btmc::read_runs_csv(without_path);
      const auto rows = btmc::cmd_report(config, runs_on, runs_off, record);
      std::cout << "level,rmse_ratio,time_ratio\n";
      for (const btmc::ReportRow& row : rows) {
        std::cout << row.level << "," << btmc::format_double(row.rmse_ratio) << ","
                  << btmc::format_double(row.time_ratio) << "\n";
      }
    } else if (dump_schedule->parsed()) {
      const int levels = schedule_levels.value_or(config.level_max);
      std::cout << btmc::cmd_dump_schedule(config, levels, eps);
    } else if (sample_prior->parsed()) {
      const auto path = default_path(config, "field.csv", field_path);
      btmc::cmd_sample_prior(config, trunc, grid_level, path);
      std::cout << "wrote " << path.string() << "\n";
    }
  } catch (const btmc::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const btmc::NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
