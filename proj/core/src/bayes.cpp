#include "btmc/bayes.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "btmc/errors.hpp"

namespace btmc {

void ObservationSetup::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("observation dim must be 1 or 2");
  if (!(sigma > 0.0)) throw ConfigError("noise sigma must be positive");
  if (points.empty()) throw ConfigError("at least one observation point required");
  for (const auto& point : points) {
    for (int c = 0; c < dim; ++c) {
      if (!(point[c] > 0.0 && point[c] < 1.0)) {
        throw ConfigError("observation points must be strictly interior");
      }
    }
  }
  if (has_data() && data.size() != points.size()) {
    throw ConfigError("data size does not match observation count");
  }
}

double log_normalization(const ObservationSetup& setup) {
  const double k = static_cast<double>(setup.points.size());
  // det(sigma^2 I_k) = sigma^{2k}
  return 0.5 * k * (std::log(2.0 * std::numbers::pi) + 2.0 * k * std::log(setup.sigma));
}

double potential_from_predictions(std::span<const double> predicted,
                                  const ObservationSetup& setup) {
  if (!setup.has_data()) throw ConfigError("potential requires observation data");
  if (predicted.size() != setup.data.size()) {
    throw ConfigError("prediction size does not match data");
  }
  double misfit = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double r = setup.data[i] - predicted[i];
    misfit += r * r;
  }
  return log_normalization(setup) + 0.5 * misfit / (setup.sigma * setup.sigma);
}

double potential(const FemSolution& solution, const ObservationSetup& setup) {
  return potential_from_predictions(point_eval(solution, setup.points), setup);
}

double potential_general(std::span<const double> predicted,
                         std::span<const double> data,
                         std::span<const double> covariance, int k) {
  if (static_cast<int>(predicted.size()) != k || static_cast<int>(data.size()) != k ||
      static_cast<int>(covariance.size()) != k * k) {
    throw ConfigError("potential_general: inconsistent sizes");
  }
  Eigen::Map<const Eigen::MatrixXd> sigma(covariance.data(), k, k);
  Eigen::VectorXd residual(k);
  for (int i = 0; i < k; ++i) residual[i] = data[i] - predicted[i];
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConfigError("covariance must be SPD");
  const double quad = residual.dot(llt.solve(residual));
  double log_det = 0.0;
  for (int i = 0; i < k; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  // (k/2) log(2 pi det Sigma) + (1/2) r^T Sigma^{-1} r
  return 0.5 * k * (std::log(2.0 * std::numbers::pi) + log_det) + 0.5 * quad;
}

ObservationSetup synthesize_data(const PriorSample& truth, int fine_trunc,
                                 int fine_mesh, const WaveletFamily& family,
                                 double source, ObservationSetup proto,
                                 std::uint64_t truth_seed, Rng& noise_rng) {
  proto.data.clear();
  proto.validate();

  const Field field = synthesize_field(truth, fine_trunc, family, fine_mesh + 1);
  UniformMesh mesh{proto.dim, fine_mesh};
  const CoefficientField coefficient = coefficient_from_field(field, mesh);
  const FemSolution solution = solve(mesh, coefficient, source);
  std::vector<double> predictions = point_eval(solution, proto.points);

  std::normal_distribution<double> noise(0.0, 1.0);
  proto.data.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    proto.data[i] = predictions[i] + proto.sigma * noise(noise_rng);
  }
  proto.truth_seed = truth_seed;
  proto.truth_trunc = fine_trunc;
  proto.truth_mesh = fine_mesh;
  return proto;
}

std::string observation_to_json(const ObservationSetup& setup) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  doc["dim"] = setup.dim;
  doc["sigma"] = setup.sigma;
  if (setup.dim == 1) {
    std::vector<double> xs;
    for (const auto& point : setup.points) xs.push_back(point[0]);
    doc["points"] = xs;
  } else {
    auto list = nlohmann::ordered_json::array();
    for (const auto& point : setup.points) list.push_back({point[0], point[1]});
    doc["points"] = list;
  }
  doc["delta"] = setup.data;
  doc["ground_truth_seed"] = setup.truth_seed;
  doc["fine_level"] = {{"trunc", setup.truth_trunc}, {"mesh", setup.truth_mesh}};
  return doc.dump(2);
}

ObservationSetup observation_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& err) {
    throw ConfigError(std::string("bad data file: ") + err.what());
  }
  ObservationSetup setup;
  try {
    setup.dim = doc.at("dim").get<int>();
    setup.sigma = doc.at("sigma").get<double>();
    if (setup.dim == 1) {
      for (const double x : doc.at("points")) setup.points.push_back({x, 0.0});
    } else {
      for (const auto& pair : doc.at("points")) {
        setup.points.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
      }
    }
    setup.data = doc.at("delta").get<std::vector<double>>();
    setup.truth_seed = doc.at("ground_truth_seed").get<std::uint64_t>();
    setup.truth_trunc = doc.at("fine_level").at("trunc").get<int>();
    setup.truth_mesh = doc.at("fine_level").at("mesh").get<int>();
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError(std::string("bad data file: ") + err.what());
  }
  setup.validate();
  return setup;
}

void write_data_file(const std::filesystem::path& path, const ObservationSetup& setup) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << observation_to_json(setup) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

ObservationSetup read_data_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return observation_from_json(buffer.str());
}

}  // namespace btmc
