#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "btmc/forward_model.hpp"
#include "btmc/mcmc.hpp"
#include "btmc/rng.hpp"

namespace btmc {

// Rates and weight-regime knobs that determine a level schedule.  Either a
// target accuracy eps or the number of levels L is prescribed.
struct ScheduleParams {
  double eps = 0.0;  // used when levels < 0
  int levels = -1;   // L
  int h0_exp = 3;    // coarsest mesh h_0 = 2^-h0_exp
  double rate_r = 1.0;
  double rate_t = 1.0;
  double eta_obs = 1.0;  // in [1, 3/2)
  double eta_qoi = 1.0;  // in [1, 2]
  int dim = 1;
  // weight parameters: polynomial exponent (> 2), geometric exponent in
  // (0, d) (0 selects an admissible value automatically), decay exponent in
  // (0, 1), and the multiplier on the L^2 weights in the borderline regime
  double alpha_poly = 3.0;
  double alpha_geo = 0.0;
  double alpha_decay = 0.5;
  double stab = 1.0;

  void validate() const;
};

// Complete prescription of one multilevel run: mesh/truncation ladders for
// the posterior (index l) and QoI (index l') directions, the chain length
// matrix M and the oversampling weights w.
struct LevelSchedule {
  int levels = 0;      // L
  int qoi_levels = 0;  // L'
  std::vector<int> mesh_obs, trunc_obs;  // l = 0..L
  std::vector<int> mesh_qoi, trunc_qoi;  // l' = 0..L'
  std::vector<std::vector<long>> samples;    // M[l][l']
  std::vector<std::vector<double>> weights;  // w[l][l']
  double weight_sum = 0.0;    // sum over blocks of w^{-1/2}
  double weight_bound = 0.0;  // regime constant C_w the sum must stay below

  int max_trunc() const;
  int max_mesh() const;
  long total_samples() const;
};

LevelSchedule build_schedule(const ScheduleParams& params);

// 1 iff the fine potential does not exceed the coarse one.  Splits each level
// correction into pieces whose exponentials are bounded by one.
inline int indicator(double phi_fine, double phi_coarse) {
  return phi_fine <= phi_coarse ? 1 : 0;
}

// The eight bounded terms of one level correction, evaluated at a single
// state.  All exponentials have non-positive exponents on their support, so
// they can never overflow.  Terms off their indicator support are exactly
// zero.
struct ATerms {
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
  int cut = 0;
};

ATerms a_terms(double phi_fine, double phi_coarse, double qoi_fine, double qoi_coarse);

// Evaluation of one state for one (l, l') block: potentials at the posterior
// level pair and QoI values at the QoI level pair.  phi_coarse is unused at
// l = 0 and qoi_coarse is zero at l' = 0 (phi_{-1} := 0 convention).
struct BlockEval {
  double phi_fine = 0.0;
  double phi_coarse = 0.0;
  double qoi_fine = 0.0;
  double qoi_coarse = 0.0;
};

enum class QoiKind { energy, mean };
QoiKind qoi_from_string(const std::string& name);
std::string to_string(QoiKind kind);

struct EstimatorOptions {
  bool burn_in = false;
  double burn_in_fraction = 0.2;
  std::uint64_t seed = 1;
  long replicate = 0;
};

struct BlockDiagnostics {
  int level = 0;
  int qoi_level = 0;
  long samples = 0;
  double acceptance_fine = 0.0;    // chain targeting level l
  double acceptance_coarse = 0.0;  // chain targeting level l-1 (l >= 1 only)
  double contribution = 0.0;
};

struct EstimateResult {
  double value = 0.0;
  std::vector<BlockDiagnostics> blocks;
  double seconds = 0.0;

  double min_acceptance() const;
  double mean_acceptance() const;
};

namespace detail {

// Per-(l, l') means gathered from one chain: the three functionals a chain
// contributes to its block.
struct GroupMeans {
  std::vector<std::array<double, 3>> by_qoi_level;
  std::vector<ChainStats> stats;
};

constexpr std::uint64_t kChainTag = 0x6d6c636d63ULL;  // stream label

// Runs the chains of one (l, target) group across all l' in sequence.
// target 0 follows the level-l potential, target 1 the level-(l-1) one.
// With burn-in enabled the l'=0 chain discards its first fraction and each
// subsequent chain starts from the final state of its predecessor.
template <class Problem>
GroupMeans run_group(const Problem& problem, const LevelSchedule& schedule,
                     const EstimatorOptions& options, int level, int target) {
  using State = typename Problem::State;
  GroupMeans result;
  const int qoi_levels = schedule.qoi_levels;
  result.by_qoi_level.resize(qoi_levels + 1);
  result.stats.resize(qoi_levels + 1);

  const auto phi_of = [target](const BlockEval& eval) {
    return target == 0 ? eval.phi_fine : eval.phi_coarse;
  };

  bool have_carry = false;
  State carry_state{};

  for (int lp = 0; lp <= qoi_levels; ++lp) {
    const long samples = schedule.samples[level][lp];
    const long burn =
        (options.burn_in && lp == 0)
            ? static_cast<long>(options.burn_in_fraction * static_cast<double>(samples))
            : 0;
    Rng rng = make_rng(derive_stream(options.seed, kChainTag, level, lp, target,
                                     options.replicate));

    const auto propose = [&](Rng& r) { return problem.propose(r); };
    const auto evaluate = [&](const State& state) {
      return problem.evaluate(state, level, lp);
    };

    Chained<State, BlockEval> chain;
    if (options.burn_in && lp > 0 && have_carry) {
      chain.state = carry_state;
      chain.eval = evaluate(chain.state);
    } else {
      chain.state = propose(rng);
      chain.eval = evaluate(chain.state);
    }

    std::array<double, 3> sums{0.0, 0.0, 0.0};
    ChainStats stats;
    stats.burn_in = burn;
    for (long step = 0; step < samples; ++step) {
      if (step > 0) {
        stats.steps += 1;
        if (imh_step(chain, propose, evaluate, phi_of, rng)) stats.accepted += 1;
      }
      if (step < burn) continue;
      if (level == 0) {
        sums[0] += chain.eval.qoi_fine - chain.eval.qoi_coarse;
      } else {
        const ATerms terms = a_terms(chain.eval.phi_fine, chain.eval.phi_coarse,
                                     chain.eval.qoi_fine, chain.eval.qoi_coarse);
        if (target == 0) {
          sums[0] += terms.a1;
          sums[1] += terms.a3;
          sums[2] += terms.a6 + terms.a7;
        } else {
          sums[0] += terms.a2;
          sums[1] += terms.a5;
          sums[2] += terms.a4 + terms.a8;
        }
      }
    }
    const double count = static_cast<double>(samples - burn);
    for (double& sum : sums) sum /= count;
    result.by_qoi_level[lp] = sums;
    result.stats[lp] = stats;

    carry_state = chain.state;
    have_carry = true;
  }
  return result;
}

}  // namespace detail

// The multilevel estimator: for every level pair (l >= 1, l') two independent
// chains, one following the level-l posterior (A1, A3, A6+A7) and one the
// level-(l-1) posterior (A2, A5, A4+A8), each of length M[l][l']; level-0
// chains estimate the plain QoI differences.  Chains are independent across
// l and between the two targets of a pair; streams are derived from
// (seed, l, l', target, replicate).
template <class Problem>
EstimateResult mlmcmc_estimate(const Problem& problem, const LevelSchedule& schedule,
                               const EstimatorOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  EstimateResult result;

  std::vector<detail::GroupMeans> fine_groups(schedule.levels + 1);
  std::vector<detail::GroupMeans> coarse_groups(schedule.levels + 1);
  for (int level = 0; level <= schedule.levels; ++level) {
    fine_groups[level] = detail::run_group(problem, schedule, options, level, 0);
    if (level >= 1) {
      coarse_groups[level] = detail::run_group(problem, schedule, options, level, 1);
    }
  }

  double estimate = 0.0;
  for (int level = 0; level <= schedule.levels; ++level) {
    for (int lp = 0; lp <= schedule.qoi_levels; ++lp) {
      BlockDiagnostics diag;
      diag.level = level;
      diag.qoi_level = lp;
      diag.samples = schedule.samples[level][lp];
      const auto& fine = fine_groups[level].by_qoi_level[lp];
      diag.acceptance_fine = fine_groups[level].stats[lp].acceptance_rate();
      if (level == 0) {
        diag.contribution = fine[0];
      } else {
        const auto& coarse = coarse_groups[level].by_qoi_level[lp];
        diag.acceptance_coarse = coarse_groups[level].stats[lp].acceptance_rate();
        // E(A1) + E(A2) + E(A3) E(A4+A8) + E(A5) E(A6+A7)
        diag.contribution = fine[0] + coarse[0] + fine[1] * coarse[2] + coarse[1] * fine[2];
      }
      estimate += diag.contribution;
      result.blocks.push_back(diag);
    }
  }

  result.value = estimate;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Adapter that lets the estimator run on the PDE posterior.  Proposals are
// prior draws capped at the deepest truncation any level needs; an
// evaluation couples the level pair (l, l-1) and the QoI pair (l', l'-1)
// through one shared draw and synthesis.
class PosteriorProblem {
 public:
  using State = PriorSample;

  PosteriorProblem(const ForwardModel* model, const LevelSchedule* schedule, QoiKind kind);

  PriorSample propose(Rng& rng) const;
  BlockEval evaluate(const PriorSample& sample, int level, int qoi_level) const;

 private:
  const ForwardModel* model_;
  const LevelSchedule* schedule_;
  QoiKind kind_;
  int cap_depth_;
};

}  // namespace btmc
