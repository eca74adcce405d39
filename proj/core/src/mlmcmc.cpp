#include "btmc/mlmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "btmc/errors.hpp"

namespace btmc {

void ScheduleParams::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("schedule dim must be 1 or 2");
  if (levels < 0 && !(eps > 0.0 && eps < 1.0)) {
    throw ConfigError("either levels >= 0 or eps in (0,1) must be given");
  }
  if (h0_exp < 1 || h0_exp > 20) throw ConfigError("h0 exponent out of range");
  if (!(rate_r > 0.0 && rate_r <= 1.0)) throw ConfigError("rate r must be in (0, 1]");
  if (!(rate_t > 0.0)) throw ConfigError("rate t must be positive");
  if (!(eta_obs >= 1.0 && eta_obs < 1.5)) throw ConfigError("eta_obs must be in [1, 3/2)");
  if (!(eta_qoi >= 1.0 && eta_qoi <= 2.0)) throw ConfigError("eta_qoi must be in [1, 2]");
  if (!(alpha_decay > 0.0 && alpha_decay < 1.0)) {
    throw ConfigError("alpha_decay must be in (0, 1)");
  }
  if (!(stab >= 1.0)) throw ConfigError("weight stabilization factor must be >= 1");
}

namespace {

enum class Regime { polynomial, borderline, geometric, decaying };

struct WeightRule {
  Regime regime;
  double alpha = 0.0;  // exponent in use
  double gap = 0.0;    // d - 2 eta r (decaying regime only)
};

// Weight regime for one direction, chosen by comparing 2 eta r against d;
// the borderline case additionally depends on the rate of the other
// direction.
WeightRule select_rule(const ScheduleParams& params, double eta, double eta_other) {
  const double own = 2.0 * eta * params.rate_r;
  const double other = 2.0 * eta_other * params.rate_r;
  const double d = params.dim;
  WeightRule rule{};
  if (own > d) {
    rule.regime = Regime::polynomial;
    rule.alpha = params.alpha_poly;
    if (!(rule.alpha > 2.0)) {
      throw ConfigError("polynomial weight exponent must exceed 2");
    }
  } else if (own == d && other >= d) {
    rule.regime = Regime::borderline;
  } else if (own == d && other < d) {
    rule.regime = Regime::geometric;
    // admissible interval (0, d) intersected with (0, (d/2)(d/other - 1)]
    const double cap = std::min(d, 0.5 * d * (d / other - 1.0));
    if (!(cap > 0.0)) throw ConfigError("no admissible geometric weight exponent");
    rule.alpha = params.alpha_geo > 0.0 ? params.alpha_geo : 0.5 * cap;
    if (!(rule.alpha > 0.0 && rule.alpha < d && rule.alpha <= cap)) {
      throw ConfigError("alpha_geo outside the admissible interval (0, " +
                        std::to_string(cap) + "]");
    }
  } else {
    rule.regime = Regime::decaying;
    rule.alpha = params.alpha_decay;
    rule.gap = d - own;
  }
  return rule;
}

double weight_factor(const WeightRule& rule, const ScheduleParams& params, int index,
                     int top, int top_other) {
  switch (rule.regime) {
    case Regime::polynomial:
      return std::pow(static_cast<double>(index + 1), rule.alpha);
    case Regime::borderline: {
      const double ref = static_cast<double>(top);
      return index > 0 ? 1.0 + params.stab * ref * ref : 1.0;
    }
    case Regime::geometric:
      return std::exp2(rule.alpha * index);
    case Regime::decaying:
      return std::exp2(rule.gap * rule.alpha * static_cast<double>(top_other - index));
  }
  return 1.0;
}

// Closed-form bound on sum_{i>=0} w_i^{-1/2} for one direction.
double weight_sum_bound(const WeightRule& rule, const ScheduleParams& params) {
  switch (rule.regime) {
    case Regime::polynomial:
      return 1.0 + 2.0 / (rule.alpha - 2.0);
    case Regime::borderline:
      return 1.0 + 1.0 / std::sqrt(params.stab);
    case Regime::geometric:
      return 1.0 / (1.0 - std::exp2(-0.5 * rule.alpha));
    case Regime::decaying:
      return 1.0 / (1.0 - std::exp2(-0.5 * rule.gap * rule.alpha));
  }
  return 0.0;
}

}  // namespace

int LevelSchedule::max_trunc() const {
  int best = 0;
  for (const int n : trunc_obs) best = std::max(best, n);
  for (const int n : trunc_qoi) best = std::max(best, n);
  return best;
}

int LevelSchedule::max_mesh() const {
  int best = 0;
  for (const int m : mesh_obs) best = std::max(best, m);
  for (const int m : mesh_qoi) best = std::max(best, m);
  return best;
}

long LevelSchedule::total_samples() const {
  long total = 0;
  for (const auto& row : samples) {
    for (const long m : row) total += m;
  }
  return total;
}

LevelSchedule build_schedule(const ScheduleParams& params) {
  params.validate();

  LevelSchedule schedule;
  if (params.levels >= 0) {
    schedule.levels = params.levels;
  } else {
    // L = ceil( -log2(eps) / (eta_obs r) + log2(h0) )
    const double raw =
        -std::log2(params.eps) / (params.eta_obs * params.rate_r) - params.h0_exp;
    schedule.levels = static_cast<int>(std::ceil(raw));
    if (schedule.levels < 0) schedule.levels = 0;
  }
  const int L = schedule.levels;
  schedule.qoi_levels =
      static_cast<int>(std::ceil(L * params.eta_obs / params.eta_qoi));
  const int Lp = schedule.qoi_levels;

  for (int l = 0; l <= L; ++l) {
    schedule.mesh_obs.push_back(params.h0_exp + l);
    schedule.trunc_obs.push_back(static_cast<int>(
        std::ceil((params.h0_exp + l) * params.eta_obs * params.rate_r / params.rate_t)));
  }
  for (int lp = 0; lp <= Lp; ++lp) {
    schedule.mesh_qoi.push_back(params.h0_exp + lp);
    schedule.trunc_qoi.push_back(static_cast<int>(
        std::ceil((params.h0_exp + lp) * params.eta_qoi * params.rate_r / params.rate_t)));
  }

  const WeightRule rule_obs = select_rule(params, params.eta_obs, params.eta_qoi);
  const WeightRule rule_qoi = select_rule(params, params.eta_qoi, params.eta_obs);

  std::vector<double> w_obs(L + 1), w_qoi(Lp + 1);
  for (int l = 0; l <= L; ++l) w_obs[l] = weight_factor(rule_obs, params, l, L, L);
  for (int lp = 0; lp <= Lp; ++lp) w_qoi[lp] = weight_factor(rule_qoi, params, lp, Lp, L);

  const double exp_obs = 2.0 * params.rate_r * params.eta_obs;
  const double exp_qoi = 2.0 * params.rate_r * params.eta_qoi;
  const double hL_factor = std::exp2(exp_obs * (params.h0_exp + L));  // h_L^{-2 r eta_obs}

  schedule.samples.assign(L + 1, std::vector<long>(Lp + 1, 0));
  schedule.weights.assign(L + 1, std::vector<double>(Lp + 1, 0.0));
  for (int l = 0; l <= L; ++l) {
    for (int lp = 0; lp <= Lp; ++lp) {
      const double weight = w_obs[l] * w_qoi[lp];
      double raw = hL_factor * weight;
      if (l >= 1) raw *= std::exp2(-exp_obs * (params.h0_exp + l));
      if (lp >= 1) raw *= std::exp2(-exp_qoi * (params.h0_exp + lp));
      const double count = std::ceil(raw);
      if (!(count >= 1.0) || count > 9e18) {
        throw ConfigError("sample count out of range at block (" + std::to_string(l) +
                          ", " + std::to_string(lp) + ")");
      }
      schedule.weights[l][lp] = weight;
      schedule.samples[l][lp] = static_cast<long>(count);
    }
  }

  // uniform-in-L weight condition: sum over blocks of w^{-1/2} <= C_w
  double sum = 1.0 / std::sqrt(schedule.weights[0][0]);
  for (int l = 1; l <= L; ++l) sum += 1.0 / std::sqrt(schedule.weights[l][0]);
  for (int lp = 1; lp <= Lp; ++lp) sum += 1.0 / std::sqrt(schedule.weights[0][lp]);
  for (int l = 1; l <= L; ++l) {
    for (int lp = 1; lp <= Lp; ++lp) sum += 1.0 / std::sqrt(schedule.weights[l][lp]);
  }
  schedule.weight_sum = sum;
  schedule.weight_bound =
      weight_sum_bound(rule_obs, params) * weight_sum_bound(rule_qoi, params);
  if (!(schedule.weight_sum <= schedule.weight_bound * (1.0 + 1e-9))) {
    throw ConfigError("weight condition violated: sum " +
                      std::to_string(schedule.weight_sum) + " exceeds bound " +
                      std::to_string(schedule.weight_bound));
  }
  return schedule;
}

ATerms a_terms(double phi_fine, double phi_coarse, double qoi_fine, double qoi_coarse) {
  if (!std::isfinite(phi_fine) || !std::isfinite(phi_coarse) ||
      !std::isfinite(qoi_fine) || !std::isfinite(qoi_coarse)) {
    throw NumericalError("a_terms requires finite inputs");
  }
  ATerms terms;
  terms.cut = indicator(phi_fine, phi_coarse);
  const double diff = qoi_fine - qoi_coarse;
  if (terms.cut) {
    const double ratio = std::exp(phi_fine - phi_coarse);  // exponent <= 0
    terms.a1 = (1.0 - ratio) * diff;
    terms.a3 = ratio - 1.0;
    terms.a4 = diff;
    terms.a6 = ratio * diff;
  } else {
    const double ratio = std::exp(phi_coarse - phi_fine);  // exponent < 0
    terms.a2 = (ratio - 1.0) * diff;
    terms.a5 = 1.0 - ratio;
    terms.a7 = diff;
    terms.a8 = ratio * diff;
  }
  return terms;
}

QoiKind qoi_from_string(const std::string& name) {
  if (name == "energy") return QoiKind::energy;
  if (name == "mean") return QoiKind::mean;
  throw ConfigError("unknown qoi '" + name + "' (expected energy or mean)");
}

std::string to_string(QoiKind kind) {
  return kind == QoiKind::energy ? "energy" : "mean";
}

double EstimateResult::min_acceptance() const {
  double best = 1.0;
  for (const auto& block : blocks) {
    best = std::min(best, block.acceptance_fine);
    if (block.level >= 1) best = std::min(best, block.acceptance_coarse);
  }
  return best;
}

double EstimateResult::mean_acceptance() const {
  double sum = 0.0;
  long count = 0;
  for (const auto& block : blocks) {
    sum += block.acceptance_fine;
    count += 1;
    if (block.level >= 1) {
      sum += block.acceptance_coarse;
      count += 1;
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

PosteriorProblem::PosteriorProblem(const ForwardModel* model,
                                   const LevelSchedule* schedule, QoiKind kind)
    : model_(model), schedule_(schedule), kind_(kind) {
  if (!model_ || !schedule_) throw ConfigError("posterior problem requires model and schedule");
  cap_depth_ = schedule_->max_trunc();
}

PriorSample PosteriorProblem::propose(Rng& rng) const {
  return model_->propose(cap_depth_, rng);
}

BlockEval PosteriorProblem::evaluate(const PriorSample& sample, int level,
                                     int qoi_level) const {
  std::vector<LevelPair> pairs;
  pairs.push_back({schedule_->trunc_obs[level], schedule_->mesh_obs[level]});
  if (level >= 1) {
    pairs.push_back({schedule_->trunc_obs[level - 1], schedule_->mesh_obs[level - 1]});
  }
  pairs.push_back({schedule_->trunc_qoi[qoi_level], schedule_->mesh_qoi[qoi_level]});
  if (qoi_level >= 1) {
    pairs.push_back({schedule_->trunc_qoi[qoi_level - 1], schedule_->mesh_qoi[qoi_level - 1]});
  }
  const std::vector<LevelEval> evals = model_->evaluate(sample, pairs);

  const auto qoi_of = [this](const LevelEval& eval) {
    return kind_ == QoiKind::energy ? eval.energy : eval.mean;
  };
  BlockEval out;
  std::size_t cursor = 0;
  out.phi_fine = evals[cursor++].phi;
  if (level >= 1) out.phi_coarse = evals[cursor++].phi;
  out.qoi_fine = qoi_of(evals[cursor++]);
  if (qoi_level >= 1) out.qoi_coarse = qoi_of(evals[cursor++]);
  return out;
}

}  // namespace btmc
