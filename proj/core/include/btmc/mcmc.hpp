#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "btmc/errors.hpp"
#include "btmc/rng.hpp"

namespace btmc {

struct ChainStats {
  long steps = 0;
  long accepted = 0;
  long burn_in = 0;

  double acceptance_rate() const {
    return steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  }
};

// Acceptance probability of the independence sampler,
// min{1, exp(Phi(current) - Phi(proposal))}.  Computed in log space; the
// exponential is only taken once capped at zero.
inline double imh_acceptance(double phi_current, double phi_proposal) {
  if (!std::isfinite(phi_current) || !std::isfinite(phi_proposal)) {
    throw NumericalError("non-finite potential in acceptance ratio");
  }
  const double log_ratio = phi_current - phi_proposal;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

// Chain state: the parameter together with its cached evaluation.  The cache
// always corresponds to the stored parameter.
template <class State, class Eval>
struct Chained {
  State state;
  Eval eval;
};

// One Metropolis-Hastings step with prior proposals.  propose draws a fresh
// candidate, evaluate produces its cached record, phi_of extracts the target
// potential from a record.  On accept the state is replaced and the cache
// refreshed; on reject both stay.  Returns whether the proposal was accepted.
template <class State, class Eval, class Propose, class Evaluate, class Phi>
bool imh_step(Chained<State, Eval>& current, Propose&& propose, Evaluate&& evaluate,
              Phi&& phi_of, Rng& rng) {
  State candidate = propose(rng);
  Eval eval = evaluate(candidate);
  const double alpha = imh_acceptance(phi_of(current.eval), phi_of(eval));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < alpha) {
    current.state = std::move(candidate);
    current.eval = std::move(eval);
    return true;
  }
  return false;
}

template <class State, class Eval>
struct ChainRunResult {
  std::vector<double> means;
  ChainStats stats;
  Chained<State, Eval> final_state;
};

// Runs an independence chain of `samples` states (the initial state counts as
// the first sample) and returns the arithmetic mean of each functional over
// the post-burn-in states.  Deterministic given the rng state.
template <class State, class Eval, class Propose, class Evaluate, class Phi>
ChainRunResult<State, Eval> run_chain(
    Chained<State, Eval> initial, long samples, long burn_in,
    std::span<const std::function<double(const State&, const Eval&)>> functionals,
    Propose&& propose, Evaluate&& evaluate, Phi&& phi_of, Rng& rng) {
  if (samples < 1) throw ConfigError("chain length must be >= 1");
  if (burn_in < 0 || burn_in >= samples) throw ConfigError("burn-in must be in [0, samples)");

  ChainRunResult<State, Eval> result;
  result.means.assign(functionals.size(), 0.0);
  result.stats.burn_in = burn_in;
  result.final_state = std::move(initial);

  for (long step = 0; step < samples; ++step) {
    if (step > 0) {
      result.stats.steps += 1;
      if (imh_step(result.final_state, propose, evaluate, phi_of, rng)) {
        result.stats.accepted += 1;
      }
    }
    if (step >= burn_in) {
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        result.means[f] += functionals[f](result.final_state.state, result.final_state.eval);
      }
    }
  }
  const double count = static_cast<double>(samples - burn_in);
  for (double& mean : result.means) mean /= count;
  return result;
}

struct RatioResult {
  std::vector<double> values;
  std::vector<double> std_errors;
  double max_log_weight = 0.0;
  long samples = 0;
};

// Running sums of the self-normalised ratio estimator, kept shifted by the
// largest log-weight seen so far.  Shards produced from independent streams
// merge exactly, so the estimator parallelises without changing its value.
struct RatioAccumulator {
  double shift = -std::numeric_limits<double>::infinity();
  double sum_w = 0.0, sum_w2 = 0.0;
  std::vector<double> sum_wq, sum_w2q, sum_w2q2;
  long samples = 0;

  explicit RatioAccumulator(int n_qoi = 0)
      : sum_wq(n_qoi, 0.0), sum_w2q(n_qoi, 0.0), sum_w2q2(n_qoi, 0.0) {}

  void rescale_to(double new_shift) {
    if (new_shift <= shift) return;
    const double factor = std::isfinite(shift) ? std::exp(shift - new_shift) : 0.0;
    sum_w *= factor;
    sum_w2 *= factor * factor;
    for (std::size_t q = 0; q < sum_wq.size(); ++q) {
      sum_wq[q] *= factor;
      sum_w2q[q] *= factor * factor;
      sum_w2q2[q] *= factor * factor;
    }
    shift = new_shift;
  }

  void add(double log_weight, std::span<const double> qois) {
    if (!std::isfinite(log_weight)) {
      throw NumericalError("non-finite potential in ratio estimator");
    }
    rescale_to(log_weight);
    const double w = std::exp(log_weight - shift);
    sum_w += w;
    sum_w2 += w * w;
    for (std::size_t q = 0; q < sum_wq.size(); ++q) {
      sum_wq[q] += w * qois[q];
      sum_w2q[q] += w * w * qois[q];
      sum_w2q2[q] += w * w * qois[q] * qois[q];
    }
    samples += 1;
  }

  void merge(RatioAccumulator other) {
    if (other.samples == 0) return;
    if (samples == 0) {
      *this = std::move(other);
      return;
    }
    const double top = std::max(shift, other.shift);
    rescale_to(top);
    other.rescale_to(top);
    sum_w += other.sum_w;
    sum_w2 += other.sum_w2;
    for (std::size_t q = 0; q < sum_wq.size(); ++q) {
      sum_wq[q] += other.sum_wq[q];
      sum_w2q[q] += other.sum_w2q[q];
      sum_w2q2[q] += other.sum_w2q2[q];
    }
    samples += other.samples;
  }

  RatioResult finalize() const {
    if (!(sum_w > 0.0)) throw NumericalError("all importance weights vanished");
    RatioResult result;
    result.samples = samples;
    result.max_log_weight = shift;
    const int n_qoi = static_cast<int>(sum_wq.size());
    result.values.resize(n_qoi);
    result.std_errors.resize(n_qoi);
    for (int q = 0; q < n_qoi; ++q) {
      const double ratio = sum_wq[q] / sum_w;
      result.values[q] = ratio;
      const double var_num =
          sum_w2q2[q] - 2.0 * ratio * sum_w2q[q] + ratio * ratio * sum_w2;
      result.std_errors[q] = std::sqrt(std::max(0.0, var_num)) / sum_w;
    }
    return result;
  }
};

// Self-normalized importance sampling with i.i.d. prior draws:
//   sum_i q(w_i) exp(-Phi(w_i)) / sum_i exp(-Phi(w_i)).
// Log-weights are shifted by their running maximum before exponentiation, so
// the accumulators never overflow.  Standard errors come from the influence
// function of the ratio.
template <class Draw, class Phi, class Qois>
RatioAccumulator ratio_accumulate(long samples, int n_qoi, Draw&& draw, Phi&& phi_of,
                                  Qois&& qois_of, Rng& rng) {
  if (samples < 1) throw ConfigError("ratio estimator requires >= 1 sample");
  RatioAccumulator acc(n_qoi);
  for (long i = 0; i < samples; ++i) {
    auto state = draw(rng);
    const double log_weight = -phi_of(state);
    const std::vector<double> qs = qois_of(state);
    acc.add(log_weight, qs);
  }
  return acc;
}

template <class Draw, class Phi, class Qois>
RatioResult ratio_reference(long samples, int n_qoi, Draw&& draw, Phi&& phi_of,
                            Qois&& qois_of, Rng& rng) {
  return ratio_accumulate(samples, n_qoi, draw, phi_of, qois_of, rng).finalize();
}

}  // namespace btmc
