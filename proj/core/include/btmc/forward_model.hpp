#pragma once

#include <memory>
#include <span>
#include <vector>

#include "btmc/bayes.hpp"
#include "btmc/prior.hpp"
#include "btmc/rng.hpp"
#include "btmc/wavelet.hpp"

namespace btmc {

// One discretization level: truncation depth N of the series and mesh
// refinement m (h = 2^-m).
struct LevelPair {
  int trunc = 0;
  int mesh = 0;
  bool operator==(const LevelPair&) const = default;
};

struct LevelEval {
  double phi = 0.0;     // Bayesian potential at this level
  double energy = 0.0;  // energy norm QoI
  double mean = 0.0;    // spatial mean QoI
};

// Evaluates one prior realization at several discretization levels.  All
// levels share a single field synthesis on the finest required grid: scales
// are added incrementally in truncation order and every mesh reads its
// element midpoints off the common grid, so the levels are coupled through
// one draw exactly as the multilevel differences require.
//
// Immutable and safe to share across threads.
class ForwardModel {
 public:
  ForwardModel(std::shared_ptr<const WaveletFamily> family, ObservationSetup observations,
               PriorParams prior, double source);

  const ObservationSetup& observations() const { return observations_; }
  const PriorParams& prior() const { return prior_; }
  const WaveletFamily& family() const { return *family_; }
  double source() const { return source_; }

  PriorSample propose(int cap_depth, Rng& rng) const;

  LevelEval evaluate_one(const PriorSample& sample, LevelPair level) const;
  std::vector<LevelEval> evaluate(const PriorSample& sample,
                                  std::span<const LevelPair> levels) const;

 private:
  std::shared_ptr<const WaveletFamily> family_;
  ObservationSetup observations_;
  PriorParams prior_;
  double source_;
};

}  // namespace btmc
