#include "btmc/forward_model.hpp"

#include <algorithm>

#include "btmc/errors.hpp"
#include "btmc/fem.hpp"

namespace btmc {

ForwardModel::ForwardModel(std::shared_ptr<const WaveletFamily> family,
                           ObservationSetup observations, PriorParams prior,
                           double source)
    : family_(std::move(family)),
      observations_(std::move(observations)),
      prior_(prior),
      source_(source) {
  if (!family_) throw ConfigError("forward model requires a wavelet family");
  prior_.validate();
  observations_.validate();
  if (!observations_.has_data()) {
    throw ConfigError("forward model requires observation data");
  }
  if (observations_.dim != prior_.dim) {
    throw ConfigError("observation/prior dimension mismatch");
  }
}

PriorSample ForwardModel::propose(int cap_depth, Rng& rng) const {
  return draw_prior_sample(prior_, cap_depth, rng);
}

LevelEval ForwardModel::evaluate_one(const PriorSample& sample, LevelPair level) const {
  const LevelPair levels[1] = {level};
  return evaluate(sample, levels).front();
}

std::vector<LevelEval> ForwardModel::evaluate(const PriorSample& sample,
                                              std::span<const LevelPair> levels) const {
  if (levels.empty()) return {};

  std::vector<LevelPair> distinct(levels.begin(), levels.end());
  std::sort(distinct.begin(), distinct.end(), [](const LevelPair& a, const LevelPair& b) {
    return a.trunc != b.trunc ? a.trunc < b.trunc : a.mesh < b.mesh;
  });
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  int max_mesh = 0;
  for (const LevelPair& level : distinct) max_mesh = std::max(max_mesh, level.mesh);
  const int grid_level = max_mesh + 1;

  Field field = Field::zeros(prior_.dim, grid_level);
  int synthesized = -1;

  std::vector<LevelEval> computed(distinct.size());
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    const LevelPair& level = distinct[i];
    if (level.trunc > synthesized) {
      add_scales(sample, synthesized + 1, level.trunc, *family_, field);
      synthesized = level.trunc;
    }
    const UniformMesh mesh{prior_.dim, level.mesh};
    const CoefficientField coefficient = coefficient_from_field(field, mesh);
    const FemSolution solution = solve(mesh, coefficient, source_);
    computed[i].phi = potential(solution, observations_);
    computed[i].energy = qoi_energy(solution);
    computed[i].mean = qoi_mean(solution);
  }

  std::vector<LevelEval> out(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto it = std::find(distinct.begin(), distinct.end(), levels[i]);
    out[i] = computed[it - distinct.begin()];
  }
  return out;
}

}  // namespace btmc
