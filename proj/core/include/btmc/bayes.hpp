#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "btmc/fem.hpp"
#include "btmc/prior.hpp"
#include "btmc/rng.hpp"
#include "btmc/wavelet.hpp"

namespace btmc {

// Observation locations, noise level and (once synthesized or loaded) the
// data vector, plus the provenance of synthetic data.
struct ObservationSetup {
  int dim = 1;
  std::vector<std::array<double, 2>> points;
  double sigma = 0.1;  // noise covariance sigma^2 I
  std::vector<double> data;

  std::uint64_t truth_seed = 0;
  int truth_trunc = 0;
  int truth_mesh = 0;

  bool has_data() const { return !data.empty(); }
  void validate() const;
};

// Additive constant (k/2) log(2 pi det Sigma) of the potential, Sigma =
// sigma^2 I.  Cancels in every potential difference and self-normalized
// ratio; kept because the potential is defined with it.
double log_normalization(const ObservationSetup& setup);

// Phi = (k/2) log(2 pi det Sigma) + |delta - G|^2 / (2 sigma^2)
double potential_from_predictions(std::span<const double> predicted,
                                  const ObservationSetup& setup);
double potential(const FemSolution& solution, const ObservationSetup& setup);

// Same potential for a general SPD covariance (row-major k x k).
double potential_general(std::span<const double> predicted,
                         std::span<const double> data,
                         std::span<const double> covariance, int k);

// delta = G(omega_truth) + sigma * xi with the forward solve at the given
// fine level.  Provenance (truth seed and fine level) is recorded in the
// returned setup.
ObservationSetup synthesize_data(const PriorSample& truth, int fine_trunc,
                                 int fine_mesh, const WaveletFamily& family,
                                 double source, ObservationSetup proto,
                                 std::uint64_t truth_seed, Rng& noise_rng);

// JSON data file, bit-exact round trip.
std::string observation_to_json(const ObservationSetup& setup);
ObservationSetup observation_from_json(const std::string& text);
void write_data_file(const std::filesystem::path& path, const ObservationSetup& setup);
ObservationSetup read_data_file(const std::filesystem::path& path);

}  // namespace btmc
