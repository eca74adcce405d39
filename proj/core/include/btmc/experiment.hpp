#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "btmc/bayes.hpp"
#include "btmc/mlmcmc.hpp"

namespace btmc {

// Flat key-value experiment configuration.  Keys are documented in the
// README; presets paper-1d/paper-2d/desk-1d/desk-2d ship with the library.
struct ExperimentConfig {
  int dim = 1;
  QoiKind qoi = QoiKind::energy;
  double s = 1.6, p = 5.0 / 3.0, beta = 0.8, kappa = 1.0;
  int n_max = 11;
  double sigma = 0.1;
  std::vector<double> obs_x, obs_y;
  int h0_exp = 3;
  double r = 1.0, t = 1.0, eta_obs = 1.0, eta_qoi = 1.0;
  double alpha_poly = 3.0, alpha_geo = 0.0, alpha_decay = 0.5, stab = 1.0;
  int level_min = 2, level_max = 4;
  int replicates = 16;
  int ref_mesh = 9, ref_trunc = 9;
  long ref_samples = 65536;
  int truth_mesh = 11, truth_trunc = 11;
  int wavelet_order = 5, wavelet_eval_level = 12;
  bool burn_in = false;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = "out";

  double source = 10.0;  // constant right-hand side of both experiments

  PriorParams prior_params() const;
  ScheduleParams schedule_params(int levels) const;
  ObservationSetup observation_proto() const;
  std::vector<std::array<double, 2>> observation_points() const;

  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
// Overlay form: starts from `base` and applies the keys present in `text`.
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base);
ExperimentConfig load_config_file(const std::filesystem::path& path);
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base);

const std::vector<std::string>& preset_names();
const std::string& preset_text(const std::string& name);
ExperimentConfig preset_config(const std::string& name);

// ---- command layer -------------------------------------------------------

// Ground-truth draw, fine solve, noisy observations; writes data.json.
ObservationSetup cmd_synthesize(const ExperimentConfig& config);

struct ReferenceRecord {
  int trunc = 0, mesh = 0;
  long samples = 0;
  double energy = 0, energy_std_error = 0;
  double mean = 0, mean_std_error = 0;
  double max_log_weight = 0;

  double value(QoiKind kind) const { return kind == QoiKind::energy ? energy : mean; }
  double std_error(QoiKind kind) const {
    return kind == QoiKind::energy ? energy_std_error : mean_std_error;
  }
};

// Self-normalized prior ratio estimator at the reference level; writes
// reference.json.
ReferenceRecord cmd_reference(const ExperimentConfig& config, const ObservationSetup& data);

struct RunRecord {
  int level = 0;
  long replicate = 0;
  double estimate = 0.0;
  double seconds = 0.0;
  double acceptance_min = 0.0;
  double acceptance_mean = 0.0;
};

struct RmseRow {
  int level = 0;
  double rmse = 0.0;
  double median_abs_error = 0.0;
  double mean_time = 0.0;
  double total_time = 0.0;
};

struct MlmcmcOutput {
  std::vector<RunRecord> runs;
  std::vector<RmseRow> table;
  bool burn_in = false;
};

// Replicated multilevel runs over the configured level range; writes
// runs-burnin-{on,off}.csv/.json and rmse-burnin-{on,off}.csv.
MlmcmcOutput cmd_mlmcmc(const ExperimentConfig& config, const ObservationSetup& data,
                        const ReferenceRecord& reference);

struct SingleLevelResult {
  int level = 0;
  int trunc = 0, mesh = 0;
  long samples = 0;
  long burn_in = 0;
  double estimate = 0.0;
  double acceptance = 0.0;
};

// Plain single-level chain estimate of the configured QoI; optional trace
// CSV (step, accepted, phi, qoi).
SingleLevelResult cmd_singlelevel(const ExperimentConfig& config,
                                  const ObservationSetup& data, int level, long samples,
                                  const std::optional<std::filesystem::path>& trace);

struct ReportRow {
  int level = 0;
  double rmse_ratio = 0.0;  // RMSE(no burn-in) / RMSE(burn-in)
  double time_ratio = 0.0;  // CPU(burn-in) / CPU(no burn-in)
  double rmse_on = 0.0, rmse_off = 0.0;
  double mean_time_on = 0.0, mean_time_off = 0.0;
};

// Burn-in vs no-burn-in comparison as per-level RMSE and CPU-time ratios;
// writes report.csv.
std::vector<ReportRow> cmd_report(const ExperimentConfig& config,
                                  const std::vector<RunRecord>& with_burn_in,
                                  const std::vector<RunRecord>& without_burn_in,
                                  const ReferenceRecord& reference);

std::string cmd_dump_schedule(const ExperimentConfig& config, int levels, double eps);

void cmd_sample_prior(const ExperimentConfig& config, int trunc, int grid_level,
                      const std::filesystem::path& path);

// ---- file formats ----------------------------------------------------------

void write_reference_file(const std::filesystem::path& path, const ReferenceRecord& record);
ReferenceRecord read_reference_file(const std::filesystem::path& path);

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs);
std::vector<RunRecord> read_runs_csv(const std::filesystem::path& path);
void write_rmse_csv(const std::filesystem::path& path, const std::vector<RmseRow>& rows);
void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows);

std::vector<RmseRow> rmse_table(const std::vector<RunRecord>& runs, double reference);

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

std::string format_double(double value);  // shortest round-trip representation

// Runs tasks on a bounded pool; results must be written to pre-allocated
// slots so aggregation does not depend on execution order.
void run_parallel(int threads, const std::vector<std::function<void()>>& tasks);

}  // namespace btmc
