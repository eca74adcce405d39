#include "btmc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "btmc/errors.hpp"

namespace btmc {

std::string format_double(double value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

void run_parallel(int threads, const std::vector<std::function<void()>>& tasks) {
  if (tasks.empty()) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= tasks.size()) return;
      try {
        tasks[index]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& thread : pool) thread.join();
  if (failure) std::rethrow_exception(failure);
}

// ---- configuration ---------------------------------------------------------

namespace {

double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  const auto to_double = [](const std::string& piece) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(piece, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad numeric value '" + piece + "'");
    }
    if (used != piece.size()) throw ConfigError("bad numeric value '" + piece + "'");
    return value;
  };
  if (slash == std::string::npos) return to_double(text);
  const double den = to_double(text.substr(slash + 1));
  if (den == 0.0) throw ConfigError("zero denominator in '" + text + "'");
  return to_double(text.substr(0, slash)) / den;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::string piece;
  std::stringstream stream(text);
  while (stream >> piece) {
    if (!piece.empty() && piece.back() == ',') piece.pop_back();
    if (!piece.empty()) values.push_back(parse_number(piece));
  }
  return values;
}

bool parse_bool(const std::string& text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("bad boolean value '" + text + "' (expected on/off)");
}

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  const auto end = text.find_last_not_of(" \t\r");
  return begin == std::string::npos ? std::string() : text.substr(begin, end - begin + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  return parse_config_text(text, ExperimentConfig{});
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig config) {
  std::istringstream stream(text);
  std::string line;
  int line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto equals = line.find('=');
    if (equals == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, equals));
    const std::string value = trim(line.substr(equals + 1));
    if (value.empty()) throw ConfigError("config key '" + key + "' has no value");

    if (key == "dim") config.dim = static_cast<int>(parse_number(value));
    else if (key == "qoi") config.qoi = qoi_from_string(value);
    else if (key == "s") config.s = parse_number(value);
    else if (key == "p") config.p = parse_number(value);
    else if (key == "beta") config.beta = parse_number(value);
    else if (key == "kappa") config.kappa = parse_number(value);
    else if (key == "n_max") config.n_max = static_cast<int>(parse_number(value));
    else if (key == "sigma") config.sigma = parse_number(value);
    else if (key == "obs_x") config.obs_x = parse_list(value);
    else if (key == "obs_y") config.obs_y = parse_list(value);
    else if (key == "h0_exp") config.h0_exp = static_cast<int>(parse_number(value));
    else if (key == "r") config.r = parse_number(value);
    else if (key == "t") config.t = parse_number(value);
    else if (key == "eta_obs") config.eta_obs = parse_number(value);
    else if (key == "eta_qoi") config.eta_qoi = parse_number(value);
    else if (key == "alpha_poly") config.alpha_poly = parse_number(value);
    else if (key == "alpha_geo") config.alpha_geo = parse_number(value);
    else if (key == "alpha_decay") config.alpha_decay = parse_number(value);
    else if (key == "stab") config.stab = parse_number(value);
    else if (key == "level_min") config.level_min = static_cast<int>(parse_number(value));
    else if (key == "level_max") config.level_max = static_cast<int>(parse_number(value));
    else if (key == "replicates") config.replicates = static_cast<int>(parse_number(value));
    else if (key == "ref_mesh") config.ref_mesh = static_cast<int>(parse_number(value));
    else if (key == "ref_trunc") config.ref_trunc = static_cast<int>(parse_number(value));
    else if (key == "ref_samples") config.ref_samples = static_cast<long>(parse_number(value));
    else if (key == "truth_mesh") config.truth_mesh = static_cast<int>(parse_number(value));
    else if (key == "truth_trunc") config.truth_trunc = static_cast<int>(parse_number(value));
    else if (key == "wavelet_order") config.wavelet_order = static_cast<int>(parse_number(value));
    else if (key == "wavelet_eval_level")
      config.wavelet_eval_level = static_cast<int>(parse_number(value));
    else if (key == "burn_in") config.burn_in = parse_bool(value);
    else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_number(value));
    else if (key == "threads") config.threads = static_cast<int>(parse_number(value));
    else if (key == "out") config.out_dir = value;
    else if (key == "source") config.source = parse_number(value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return config;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  return load_config_file(path, ExperimentConfig{});
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), std::move(base));
}

namespace {

const std::map<std::string, std::string>& preset_table() {
  static const std::map<std::string, std::string> presets = {
      {"paper-1d", R"(# 1d experiment at publication scale (hours of CPU time)
dim = 1
qoi = energy
s = 8/5
p = 5/3
beta = 4/5
kappa = 1
n_max = 11
sigma = 0.1
obs_x = 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9
h0_exp = 3
r = 1
t = 1
eta_obs = 1
eta_qoi = 1
alpha_poly = 3
stab = 1
level_min = 2
level_max = 6
replicates = 64
ref_mesh = 11
ref_trunc = 11
ref_samples = 4194304
truth_mesh = 11
truth_trunc = 11
wavelet_order = 5
wavelet_eval_level = 12
burn_in = off
seed = 7101
threads = 0
)"},
      {"desk-1d", R"(# 1d experiment at desk scale (minutes)
dim = 1
qoi = energy
s = 8/5
p = 5/3
beta = 4/5
kappa = 1
n_max = 11
sigma = 0.1
obs_x = 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8 0.9
h0_exp = 3
r = 1
t = 1
eta_obs = 1
eta_qoi = 1
alpha_poly = 3
stab = 1
level_min = 2
level_max = 4
replicates = 16
ref_mesh = 9
ref_trunc = 9
ref_samples = 65536
truth_mesh = 11
truth_trunc = 11
wavelet_order = 5
wavelet_eval_level = 12
burn_in = off
seed = 3
threads = 0
)"},
      {"paper-2d", R"(# 2d experiment at publication scale (days of CPU time)
dim = 2
qoi = mean
s = 12/5
p = 5/3
beta = 1/2
kappa = 1
n_max = 12
sigma = 0.1
obs_x = 0.1 0.26 0.42 0.58 0.74 0.9
obs_y = 0.1 0.26 0.42 0.58 0.74 0.9
h0_exp = 3
r = 1
t = 1
eta_obs = 1
eta_qoi = 2
alpha_poly = 6
stab = 3
level_min = 2
level_max = 5
replicates = 64
ref_mesh = 9
ref_trunc = 9
ref_samples = 262144
truth_mesh = 10
truth_trunc = 12
wavelet_order = 5
wavelet_eval_level = 12
burn_in = on
seed = 9202
threads = 0
)"},
      {"desk-2d", R"(# 2d experiment at desk scale (minutes)
dim = 2
qoi = mean
s = 12/5
p = 5/3
beta = 1/2
kappa = 1
n_max = 10
sigma = 0.1
obs_x = 0.1 0.26 0.42 0.58 0.74 0.9
obs_y = 0.1 0.26 0.42 0.58 0.74 0.9
h0_exp = 3
r = 1
t = 1
eta_obs = 1
eta_qoi = 2
alpha_poly = 6
stab = 3
level_min = 2
level_max = 3
replicates = 8
ref_mesh = 7
ref_trunc = 7
ref_samples = 8192
truth_mesh = 8
truth_trunc = 10
wavelet_order = 5
wavelet_eval_level = 12
burn_in = on
seed = 9202
threads = 0
)"},
  };
  return presets;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> list;
    for (const auto& [name, text] : preset_table()) list.push_back(name);
    return list;
  }();
  return names;
}

const std::string& preset_text(const std::string& name) {
  const auto it = preset_table().find(name);
  if (it == preset_table().end()) {
    std::string known;
    for (const auto& option : preset_names()) known += " " + option;
    throw ConfigError("unknown preset '" + name + "'; available:" + known);
  }
  return it->second;
}

ExperimentConfig preset_config(const std::string& name) {
  return parse_config_text(preset_text(name));
}

PriorParams ExperimentConfig::prior_params() const {
  PriorParams params;
  params.smoothness = s;
  params.shape = p;
  params.density = beta;
  params.kappa = kappa;
  params.dim = dim;
  return params;
}

ScheduleParams ExperimentConfig::schedule_params(int levels) const {
  ScheduleParams params;
  params.levels = levels;
  params.h0_exp = h0_exp;
  params.rate_r = r;
  params.rate_t = t;
  params.eta_obs = eta_obs;
  params.eta_qoi = eta_qoi;
  params.dim = dim;
  params.alpha_poly = alpha_poly;
  params.alpha_geo = alpha_geo;
  params.alpha_decay = alpha_decay;
  params.stab = stab;
  return params;
}

std::vector<std::array<double, 2>> ExperimentConfig::observation_points() const {
  std::vector<std::array<double, 2>> points;
  if (dim == 1) {
    for (const double x : obs_x) points.push_back({x, 0.0});
  } else {
    for (const double y : obs_y) {
      for (const double x : obs_x) points.push_back({x, y});
    }
  }
  return points;
}

ObservationSetup ExperimentConfig::observation_proto() const {
  ObservationSetup setup;
  setup.dim = dim;
  setup.sigma = sigma;
  setup.points = observation_points();
  return setup;
}

void ExperimentConfig::validate() const {
  prior_params().validate();
  observation_proto().validate();
  if (level_min < 0 || level_min > level_max) {
    throw ConfigError("level range must satisfy 0 <= level_min <= level_max");
  }
  if (replicates < 2) throw ConfigError("replicates must be >= 2 for RMSE estimation");
  if (ref_samples < 1) throw ConfigError("ref_samples must be >= 1");

  const LevelSchedule finest = build_schedule(schedule_params(level_max));
  if (finest.max_trunc() > n_max) {
    throw ConfigError("schedule truncation " + std::to_string(finest.max_trunc()) +
                      " exceeds n_max " + std::to_string(n_max));
  }
  if (ref_trunc > n_max) throw ConfigError("ref_trunc exceeds n_max");
  if (truth_trunc < std::max(finest.max_trunc(), ref_trunc)) {
    throw ConfigError("truth_trunc must be at least as fine as every estimator level");
  }
  if (truth_mesh < std::max(finest.max_mesh(), ref_mesh)) {
    throw ConfigError("truth_mesh must be at least as fine as every estimator level");
  }
  const int deepest_grid = std::max({truth_mesh, ref_mesh, finest.max_mesh()}) + 1;
  if (deepest_grid > wavelet_eval_level) {
    throw ConfigError("wavelet_eval_level must be at least " + std::to_string(deepest_grid));
  }
}

// ---- commands ---------------------------------------------------------------

namespace {

constexpr std::uint64_t kTruthTag = 0x7472757468ULL;
constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;
constexpr std::uint64_t kRefTag = 0x726566ULL;
constexpr std::uint64_t kSingleTag = 0x736cULL;

std::shared_ptr<const WaveletFamily> make_family(const ExperimentConfig& config) {
  return std::make_shared<const WaveletFamily>(
      build_family(config.wavelet_order, config.wavelet_eval_level));
}

std::filesystem::path out_path(const ExperimentConfig& config, const std::string& name) {
  return std::filesystem::path(config.out_dir) / name;
}

std::string burnin_suffix(bool burn_in) { return burn_in ? "on" : "off"; }

}  // namespace

ObservationSetup cmd_synthesize(const ExperimentConfig& config) {
  config.validate();
  const auto family = make_family(config);

  Rng truth_rng = make_rng(derive_stream(config.seed, kTruthTag));
  const PriorSample truth = draw_prior_sample(config.prior_params(), config.truth_trunc, truth_rng);

  Rng noise_rng = make_rng(derive_stream(config.seed, kNoiseTag));
  const ObservationSetup data =
      synthesize_data(truth, config.truth_trunc, config.truth_mesh, *family, config.source,
                      config.observation_proto(), config.seed, noise_rng);
  write_data_file(out_path(config, "data.json"), data);
  return data;
}

ReferenceRecord cmd_reference(const ExperimentConfig& config, const ObservationSetup& data) {
  config.validate();
  const auto family = make_family(config);
  const ForwardModel model(family, data, config.prior_params(), config.source);
  const LevelPair level{config.ref_trunc, config.ref_mesh};

  // one forward solve per draw serves the potential and both QoIs
  struct Drawn {
    double phi;
    std::vector<double> qois;
  };
  const auto draw_eval = [&](Rng& r) {
    const PriorSample sample = model.propose(config.ref_trunc, r);
    const LevelEval eval = model.evaluate_one(sample, level);
    return Drawn{eval.phi, {eval.energy, eval.mean}};
  };

  // fixed shard count: the result does not depend on the worker pool size
  const int shards = static_cast<int>(std::min<long>(8, config.ref_samples));
  std::vector<RatioAccumulator> partials(shards, RatioAccumulator(2));
  std::vector<std::function<void()>> tasks;
  for (int shard = 0; shard < shards; ++shard) {
    tasks.push_back([&, shard] {
      const long base = config.ref_samples / shards;
      const long count = base + (shard < config.ref_samples % shards ? 1 : 0);
      Rng rng = make_rng(derive_stream(config.seed, kRefTag, shard));
      partials[shard] = ratio_accumulate(
          count, 2, draw_eval, [](const Drawn& d) { return d.phi; },
          [](const Drawn& d) { return d.qois; }, rng);
    });
  }
  run_parallel(config.threads, tasks);
  RatioAccumulator combined(2);
  for (RatioAccumulator& partial : partials) combined.merge(std::move(partial));
  const RatioResult ratio = combined.finalize();

  ReferenceRecord record;
  record.trunc = config.ref_trunc;
  record.mesh = config.ref_mesh;
  record.samples = config.ref_samples;
  record.energy = ratio.values[0];
  record.energy_std_error = ratio.std_errors[0];
  record.mean = ratio.values[1];
  record.mean_std_error = ratio.std_errors[1];
  record.max_log_weight = ratio.max_log_weight;
  write_reference_file(out_path(config, "reference.json"), record);
  return record;
}

std::vector<RmseRow> rmse_table(const std::vector<RunRecord>& runs, double reference) {
  std::map<int, std::vector<const RunRecord*>> by_level;
  for (const RunRecord& run : runs) by_level[run.level].push_back(&run);

  std::vector<RmseRow> rows;
  for (const auto& [level, records] : by_level) {
    RmseRow row;
    row.level = level;
    std::vector<double> abs_errors;
    for (const RunRecord* run : records) {
      const double err = run->estimate - reference;
      row.rmse += err * err;
      row.mean_time += run->seconds;
      abs_errors.push_back(std::abs(err));
    }
    row.total_time = row.mean_time;
    const double count = static_cast<double>(records.size());
    row.rmse = std::sqrt(row.rmse / count);
    row.mean_time /= count;
    std::sort(abs_errors.begin(), abs_errors.end());
    const std::size_t n = abs_errors.size();
    row.median_abs_error =
        n % 2 == 1 ? abs_errors[n / 2] : 0.5 * (abs_errors[n / 2 - 1] + abs_errors[n / 2]);
    rows.push_back(row);
  }
  return rows;
}

MlmcmcOutput cmd_mlmcmc(const ExperimentConfig& config, const ObservationSetup& data,
                        const ReferenceRecord& reference) {
  config.validate();
  const auto family = make_family(config);
  const ForwardModel model(family, data, config.prior_params(), config.source);

  std::vector<LevelSchedule> schedules;
  for (int level = config.level_min; level <= config.level_max; ++level) {
    schedules.push_back(build_schedule(config.schedule_params(level)));
  }

  const int level_count = config.level_max - config.level_min + 1;
  const std::size_t total = static_cast<std::size_t>(level_count) * config.replicates;
  std::vector<RunRecord> runs(total);
  std::vector<EstimateResult> results(total);
  std::vector<std::function<void()>> tasks;
  for (int li = 0; li < level_count; ++li) {
    for (int rep = 0; rep < config.replicates; ++rep) {
      const std::size_t slot = static_cast<std::size_t>(li) * config.replicates + rep;
      tasks.push_back([&, li, rep, slot] {
        const PosteriorProblem problem(&model, &schedules[li], config.qoi);
        EstimatorOptions options;
        options.burn_in = config.burn_in;
        options.seed = config.seed;
        // one stream family per (level, replicate) estimator instance
        options.replicate = static_cast<long>(rep) * 1000 + config.level_min + li;
        const EstimateResult result = mlmcmc_estimate(problem, schedules[li], options);
        RunRecord record;
        record.level = config.level_min + li;
        record.replicate = rep;
        record.estimate = result.value;
        record.seconds = result.seconds;
        record.acceptance_min = result.min_acceptance();
        record.acceptance_mean = result.mean_acceptance();
        runs[slot] = record;
        results[slot] = result;
      });
    }
  }
  run_parallel(config.threads, tasks);

  MlmcmcOutput output;
  output.burn_in = config.burn_in;
  output.runs = std::move(runs);
  output.table = rmse_table(output.runs, reference.value(config.qoi));

  const std::string suffix = burnin_suffix(config.burn_in);
  write_runs_csv(out_path(config, "runs-burnin-" + suffix + ".csv"), output.runs);
  write_rmse_csv(out_path(config, "rmse-burnin-" + suffix + ".csv"), output.table);

  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["qoi"] = to_string(config.qoi);
  doc["burn_in"] = config.burn_in;
  doc["reference"] = reference.value(config.qoi);
  auto runs_json = nlohmann::ordered_json::array();
  for (std::size_t slot = 0; slot < output.runs.size(); ++slot) {
    const RunRecord& run = output.runs[slot];
    auto blocks = nlohmann::ordered_json::array();
    for (const BlockDiagnostics& block : results[slot].blocks) {
      blocks.push_back({{"l", block.level},
                        {"lp", block.qoi_level},
                        {"samples", block.samples},
                        {"contribution", block.contribution},
                        {"acceptance_fine", block.acceptance_fine},
                        {"acceptance_coarse", block.acceptance_coarse}});
    }
    runs_json.push_back({{"level", run.level},
                         {"replicate", run.replicate},
                         {"estimate", run.estimate},
                         {"seconds", run.seconds},
                         {"acceptance_min", run.acceptance_min},
                         {"acceptance_mean", run.acceptance_mean},
                         {"blocks", blocks}});
  }
  doc["runs"] = runs_json;
  write_text_file_atomic(out_path(config, "runs-burnin-" + suffix + ".json"),
                         doc.dump(2) + "\n");
  return output;
}

SingleLevelResult cmd_singlelevel(const ExperimentConfig& config,
                                  const ObservationSetup& data, int level, long samples,
                                  const std::optional<std::filesystem::path>& trace) {
  config.validate();
  if (samples < 1) throw ConfigError("singlelevel requires samples >= 1");
  const auto family = make_family(config);
  const ForwardModel model(family, data, config.prior_params(), config.source);

  SingleLevelResult result;
  result.level = level;
  result.mesh = config.h0_exp + level;
  result.trunc = static_cast<int>(
      std::ceil((config.h0_exp + level) * config.eta_obs * config.r / config.t));
  if (result.trunc > config.n_max) throw ConfigError("singlelevel level exceeds n_max");
  result.samples = samples;
  result.burn_in = config.burn_in
                       ? static_cast<long>(0.2 * static_cast<double>(samples))
                       : 0;

  const LevelPair pair{result.trunc, result.mesh};
  Rng rng = make_rng(derive_stream(config.seed, kSingleTag, level));

  const auto propose = [&](Rng& r) { return model.propose(result.trunc, r); };
  const auto evaluate = [&](const PriorSample& sample) {
    return model.evaluate_one(sample, pair);
  };
  const auto phi_of = [](const LevelEval& eval) { return eval.phi; };
  const auto qoi_of = [&](const LevelEval& eval) {
    return config.qoi == QoiKind::energy ? eval.energy : eval.mean;
  };

  std::ostringstream trace_csv;
  trace_csv << "step,accepted,phi,qoi\n";

  Chained<PriorSample, LevelEval> chain;
  chain.state = propose(rng);
  chain.eval = evaluate(chain.state);

  double sum = 0.0;
  long accepted = 0;
  for (long step = 0; step < samples; ++step) {
    bool step_accepted = false;
    if (step > 0) {
      step_accepted = imh_step(chain, propose, evaluate, phi_of, rng);
      if (step_accepted) ++accepted;
    }
    if (step >= result.burn_in) sum += qoi_of(chain.eval);
    if (trace) {
      trace_csv << step << "," << (step_accepted ? 1 : 0) << ","
                << format_double(chain.eval.phi) << "," << format_double(qoi_of(chain.eval))
                << "\n";
    }
  }
  result.estimate = sum / static_cast<double>(samples - result.burn_in);
  result.acceptance = samples > 1 ? static_cast<double>(accepted) / (samples - 1) : 0.0;

  if (trace) write_text_file_atomic(*trace, trace_csv.str());

  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["level"] = {{"index", result.level}, {"trunc", result.trunc}, {"mesh", result.mesh}};
  doc["qoi"] = to_string(config.qoi);
  doc["samples"] = result.samples;
  doc["burn_in"] = result.burn_in;
  doc["estimate"] = result.estimate;
  doc["acceptance_rate"] = result.acceptance;
  write_text_file_atomic(out_path(config, "singlelevel-L" + std::to_string(level) + ".json"),
                         doc.dump(2) + "\n");
  return result;
}

std::vector<ReportRow> cmd_report(const ExperimentConfig& config,
                                  const std::vector<RunRecord>& with_burn_in,
                                  const std::vector<RunRecord>& without_burn_in,
                                  const ReferenceRecord& reference) {
  const std::vector<RmseRow> table_on = rmse_table(with_burn_in, reference.value(config.qoi));
  const std::vector<RmseRow> table_off =
      rmse_table(without_burn_in, reference.value(config.qoi));

  std::map<int, RmseRow> off_by_level;
  for (const RmseRow& row : table_off) off_by_level[row.level] = row;

  std::vector<ReportRow> rows;
  for (const RmseRow& on : table_on) {
    const auto it = off_by_level.find(on.level);
    if (it == off_by_level.end()) continue;
    ReportRow row;
    row.level = on.level;
    row.rmse_on = on.rmse;
    row.rmse_off = it->second.rmse;
    row.mean_time_on = on.mean_time;
    row.mean_time_off = it->second.mean_time;
    row.rmse_ratio = row.rmse_off / row.rmse_on;
    row.time_ratio = row.mean_time_on / row.mean_time_off;
    rows.push_back(row);
  }
  write_report_csv(out_path(config, "report.csv"), rows);
  return rows;
}

std::string cmd_dump_schedule(const ExperimentConfig& config, int levels, double eps) {
  ScheduleParams params = config.schedule_params(levels);
  if (eps > 0.0) {
    params.levels = -1;
    params.eps = eps;
  }
  const LevelSchedule schedule = build_schedule(params);

  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["L"] = schedule.levels;
  doc["L_prime"] = schedule.qoi_levels;
  auto h_of = [](const std::vector<int>& exps) {
    std::vector<double> out;
    for (const int e : exps) out.push_back(std::exp2(-e));
    return out;
  };
  doc["h_obs"] = h_of(schedule.mesh_obs);
  doc["N_obs"] = schedule.trunc_obs;
  doc["h_qoi"] = h_of(schedule.mesh_qoi);
  doc["N_qoi"] = schedule.trunc_qoi;
  doc["samples"] = schedule.samples;
  doc["weights"] = schedule.weights;
  doc["weight_sum"] = schedule.weight_sum;
  doc["weight_bound"] = schedule.weight_bound;
  const std::string text = doc.dump(2) + "\n";
  write_text_file_atomic(out_path(config, "schedule-L" + std::to_string(schedule.levels) + ".json"),
                         text);
  return text;
}

void cmd_sample_prior(const ExperimentConfig& config, int trunc, int grid_level,
                      const std::filesystem::path& path) {
  const auto family = make_family(config);
  Rng rng = make_rng(derive_stream(config.seed, kTruthTag));
  const PriorSample sample = draw_prior_sample(config.prior_params(), trunc, rng);
  const Field field = synthesize_field(sample, trunc, *family, grid_level);

  FieldCsvHeader header;
  header.trunc = trunc;
  header.smoothness = config.s;
  header.shape = config.p;
  header.density = config.beta;
  header.kappa = config.kappa;
  header.seed = config.seed;

  std::ostringstream out;
  write_field_csv(out, field, header);
  write_text_file_atomic(path, out.str());
}

// ---- file formats ----------------------------------------------------------

void write_reference_file(const std::filesystem::path& path, const ReferenceRecord& record) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["level"] = {{"trunc", record.trunc}, {"mesh", record.mesh}};
  doc["samples"] = record.samples;
  doc["energy"] = {{"value", record.energy}, {"std_error", record.energy_std_error}};
  doc["mean"] = {{"value", record.mean}, {"std_error", record.mean_std_error}};
  doc["max_log_weight"] = record.max_log_weight;
  write_text_file_atomic(path, doc.dump(2) + "\n");
}

ReferenceRecord read_reference_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
    ReferenceRecord record;
    record.trunc = doc.at("level").at("trunc").get<int>();
    record.mesh = doc.at("level").at("mesh").get<int>();
    record.samples = doc.at("samples").get<long>();
    record.energy = doc.at("energy").at("value").get<double>();
    record.energy_std_error = doc.at("energy").at("std_error").get<double>();
    record.mean = doc.at("mean").at("value").get<double>();
    record.mean_std_error = doc.at("mean").at("std_error").get<double>();
    record.max_log_weight = doc.at("max_log_weight").get<double>();
    return record;
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError("bad reference file " + path.string() + ": " + err.what());
  }
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
  std::ostringstream out;
  out << "level,replicate,estimate,seconds,acceptance_min,acceptance_mean\n";
  for (const RunRecord& run : runs) {
    out << run.level << "," << run.replicate << "," << format_double(run.estimate) << ","
        << format_double(run.seconds) << "," << format_double(run.acceptance_min) << ","
        << format_double(run.acceptance_mean) << "\n";
  }
  write_text_file_atomic(path, out.str());
}

std::vector<RunRecord> read_runs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "level,replicate,estimate,seconds,acceptance_min,acceptance_mean") {
    throw ConfigError("bad runs file header in " + path.string());
  }
  std::vector<RunRecord> runs;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    std::stringstream fields(line);
    std::string field;
    std::vector<std::string> cells;
    while (std::getline(fields, field, ',')) cells.push_back(field);
    if (cells.size() != 6) {
      throw ConfigError("bad runs row at " + path.string() + ":" + std::to_string(line_number));
    }
    RunRecord run;
    run.level = static_cast<int>(parse_number(cells[0]));
    run.replicate = static_cast<long>(parse_number(cells[1]));
    run.estimate = parse_number(cells[2]);
    run.seconds = parse_number(cells[3]);
    run.acceptance_min = parse_number(cells[4]);
    run.acceptance_mean = parse_number(cells[5]);
    runs.push_back(run);
  }
  return runs;
}

void write_rmse_csv(const std::filesystem::path& path, const std::vector<RmseRow>& rows) {
  std::ostringstream out;
  out << "level,rmse,median_abs_error,mean_time,total_time\n";
  for (const RmseRow& row : rows) {
    out << row.level << "," << format_double(row.rmse) << ","
        << format_double(row.median_abs_error) << "," << format_double(row.mean_time) << ","
        << format_double(row.total_time) << "\n";
  }
  write_text_file_atomic(path, out.str());
}

void write_report_csv(const std::filesystem::path& path, const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "level,rmse_ratio,time_ratio,rmse_on,rmse_off,mean_time_on,mean_time_off\n";
  for (const ReportRow& row : rows) {
    out << row.level << "," << format_double(row.rmse_ratio) << ","
        << format_double(row.time_ratio) << "," << format_double(row.rmse_on) << ","
        << format_double(row.rmse_off) << "," << format_double(row.mean_time_on) << ","
        << format_double(row.mean_time_off) << "\n";
  }
  write_text_file_atomic(path, out.str());
}

}  // namespace btmc
