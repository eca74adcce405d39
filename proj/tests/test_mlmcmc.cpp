#include <doctest.h>

#include <cmath>
#include <set>

#include "btmc/errors.hpp"
#include "btmc/experiment.hpp"
#include "btmc/mlmcmc.hpp"
#include "schedule_oracle.hpp"
#include "toy_problem.hpp"

using namespace btmc;

TEST_CASE("indicator") {
  CHECK(indicator(1.0, 1.0) == 1);
  CHECK(indicator(1.0 + 1e-9, 1.0) == 0);
  CHECK(indicator(-5.0, 3.0) == 1);
}

TEST_CASE("a_terms support and boundedness") {
  SUBCASE("equal potentials") {
    const ATerms terms = a_terms(0.7, 0.7, 2.0, 0.5);
    CHECK(terms.cut == 1);
    CHECK(terms.a1 == 0.0);
    CHECK(terms.a2 == 0.0);
    CHECK(terms.a3 == 0.0);
    CHECK(terms.a5 == 0.0);
    CHECK(terms.a7 == 0.0);
    CHECK(terms.a8 == 0.0);
    CHECK(terms.a4 == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(terms.a6 == doctest::Approx(1.5).epsilon(1e-15));
  }
  SUBCASE("qoi level zero uses phi_{-1} = 0") {
    const ATerms terms = a_terms(-1.0, 2.0, 3.0, 0.0);
    CHECK(terms.cut == 1);
    CHECK(terms.a4 == 3.0);
  }
  SUBCASE("random inputs") {
    Rng rng = make_rng(51);
    std::uniform_real_distribution<double> pot(-20.0, 20.0);
    std::uniform_real_distribution<double> val(-4.0, 4.0);
    for (int i = 0; i < 2000; ++i) {
      const double pf = pot(rng), pc = pot(rng);
      const double qf = val(rng), qc = val(rng);
      const ATerms terms = a_terms(pf, pc, qf, qc);
      const double diff = qf - qc;
      // support constraints
      CHECK(terms.a1 * (1 - terms.cut) == 0.0);
      CHECK(terms.a3 * (1 - terms.cut) == 0.0);
      CHECK(terms.a4 * (1 - terms.cut) == 0.0);
      CHECK(terms.a6 * (1 - terms.cut) == 0.0);
      CHECK(terms.a2 * terms.cut == 0.0);
      CHECK(terms.a5 * terms.cut == 0.0);
      CHECK(terms.a7 * terms.cut == 0.0);
      CHECK(terms.a8 * terms.cut == 0.0);
      // bounded exponentials
      CHECK(std::abs(terms.a1) <= std::abs(diff) + 1e-12);
      CHECK(std::abs(terms.a2) <= std::abs(diff) + 1e-12);
      CHECK(std::abs(terms.a3) <= 1.0);
      CHECK(std::abs(terms.a5) <= 1.0);
      CHECK(std::abs(terms.a6) <= std::abs(diff) + 1e-12);
      CHECK(std::abs(terms.a8) <= std::abs(diff) + 1e-12);
      CHECK(std::isfinite(terms.a1 + terms.a2 + terms.a3 + terms.a5 + terms.a6 + terms.a8));
    }
    CHECK_THROWS_AS(a_terms(std::nan(""), 0.0, 0.0, 0.0), NumericalError);
  }
}

TEST_CASE("A-term decomposition telescopes exactly on random discrete spaces") {
  Rng rng = make_rng(52);
  for (int instance = 0; instance < 200; ++instance) {
    const toy::ToyProblem problem = toy::random_instance(5, 2, 2, rng);
    for (int level = 1; level <= 2; ++level) {
      for (int lp = 0; lp <= 2; ++lp) {
        const auto psi = [&](int atom) {
          return problem.qoi[lp][atom] - (lp >= 1 ? problem.qoi[lp - 1][atom] : 0.0);
        };
        const double lhs =
            problem.exact_mean(level, psi) - problem.exact_mean(level - 1, psi);

        const auto term = [&](int atom) {
          const BlockEval eval = problem.evaluate(atom, level, lp);
          return a_terms(eval.phi_fine, eval.phi_coarse, eval.qoi_fine, eval.qoi_coarse);
        };
        const double rhs =
            problem.exact_mean(level, [&](int a) { return term(a).a1; }) +
            problem.exact_mean(level - 1, [&](int a) { return term(a).a2; }) +
            problem.exact_mean(level, [&](int a) { return term(a).a3; }) *
                problem.exact_mean(level - 1, [&](int a) { return term(a).a4 + term(a).a8; }) +
            problem.exact_mean(level - 1, [&](int a) { return term(a).a5; }) *
                problem.exact_mean(level, [&](int a) { return term(a).a6 + term(a).a7; });
        CHECK(std::abs(lhs - rhs) < 1e-12);
      }
    }
  }
}

TEST_CASE("schedule formulas match the verbatim transcription") {
  // 1d experiment configuration: h0 = 2^-3, r = t = eta_obs = eta_qoi = 1,
  // weights (l+1)^3
  for (int L = 2; L <= 6; ++L) {
    ScheduleParams params;
    params.levels = L;
    params.h0_exp = 3;
    params.dim = 1;
    params.alpha_poly = 3.0;
    const LevelSchedule schedule = build_schedule(params);

    std::vector<double> w_obs, w_qoi;
    for (int l = 0; l <= L; ++l) w_obs.push_back(std::pow(l + 1.0, 3.0));
    for (int lp = 0; lp <= schedule.qoi_levels; ++lp) w_qoi.push_back(std::pow(lp + 1.0, 3.0));
    const auto expected =
        oracle::schedule_verbatim(L, std::exp2(-3), 1.0, 1.0, 1.0, 1.0, w_obs, w_qoi);

    CHECK(schedule.qoi_levels == expected.Lp);
    for (int l = 0; l <= L; ++l) CHECK(schedule.trunc_obs[l] == expected.N_obs[l]);
    for (int lp = 0; lp <= expected.Lp; ++lp) CHECK(schedule.trunc_qoi[lp] == expected.N_qoi[lp]);
    for (int l = 0; l <= L; ++l) {
      for (int lp = 0; lp <= expected.Lp; ++lp) {
        CHECK(schedule.samples[l][lp] == expected.M[l][lp]);
        CHECK(schedule.samples[l][lp] >= 1);
      }
    }
  }
}

TEST_CASE("schedule examples") {
  SUBCASE("accuracy-driven level count") {
    ScheduleParams params;
    params.levels = -1;
    params.eps = std::exp2(-8);
    params.h0_exp = 3;
    params.dim = 1;
    const LevelSchedule schedule = build_schedule(params);
    CHECK(schedule.levels == 5);
    CHECK(oracle::levels_from_eps(params.eps, std::exp2(-3), 1.0, 1.0) == 5);
  }
  SUBCASE("first-case sample count at L=2") {
    ScheduleParams params;
    params.levels = 2;
    params.h0_exp = 3;
    params.dim = 1;
    params.alpha_poly = 3.0;
    const LevelSchedule schedule = build_schedule(params);
    CHECK(schedule.samples[0][0] == 1024);  // ceil(h_L^{-2} w00) = 2^10
    CHECK(schedule.weights[0][0] == 1.0);
  }
  SUBCASE("weight condition is certified at build time") {
    ScheduleParams params;
    params.levels = 6;
    params.h0_exp = 3;
    params.dim = 1;
    params.alpha_poly = 3.0;
    const LevelSchedule schedule = build_schedule(params);
    CHECK(schedule.weight_sum <= schedule.weight_bound);
  }
}

TEST_CASE("weight regimes") {
  SUBCASE("2d borderline regime with stabilization factor") {
    ScheduleParams params;
    params.levels = 3;
    params.h0_exp = 3;
    params.dim = 2;
    params.eta_obs = 1.0;
    params.eta_qoi = 1.0;
    params.stab = 3.0;
    const LevelSchedule schedule = build_schedule(params);
    // w_l = 1 + 3 L^2 for l > 0
    CHECK(schedule.weights[0][0] == 1.0);
    CHECK(schedule.weights[1][0] == doctest::Approx(1.0 + 3.0 * 9.0).epsilon(1e-14));
    CHECK(schedule.weights[1][1] ==
          doctest::Approx((1.0 + 27.0) * (1.0 + 27.0)).epsilon(1e-14));
  }
  SUBCASE("2d mean qoi combines borderline and polynomial directions") {
    ScheduleParams params;
    params.levels = 3;
    params.h0_exp = 3;
    params.dim = 2;
    params.eta_obs = 1.0;
    params.eta_qoi = 2.0;
    params.alpha_poly = 6.0;
    params.stab = 3.0;
    const LevelSchedule schedule = build_schedule(params);
    CHECK(schedule.qoi_levels == 2);  // ceil(3 * 1/2)
    CHECK(schedule.weights[0][1] == doctest::Approx(std::pow(2.0, 6.0)).epsilon(1e-14));
    CHECK(schedule.trunc_qoi[2] == 10);  // ceil(5 * 2)
  }
  SUBCASE("invalid polynomial exponent is rejected") {
    ScheduleParams params;
    params.levels = 2;
    params.dim = 1;
    params.alpha_poly = 2.0;
    CHECK_THROWS_AS(build_schedule(params), ConfigError);
  }
  SUBCASE("geometric regime validates alpha_geo") {
    ScheduleParams params;
    params.levels = 2;
    params.dim = 1;
    params.rate_r = 0.4;
    params.eta_obs = 1.25;  // 2 eta r = 1 = d, borderline vs qoi rate
    params.eta_qoi = 1.0;   // 2 eta r = 0.8 < d -> obs direction geometric
    params.alpha_geo = 0.5;  // above the admissible cap 0.125
    CHECK_THROWS_AS(build_schedule(params), ConfigError);
    params.alpha_geo = 0.0;  // auto-select
    const LevelSchedule schedule = build_schedule(params);
    CHECK(schedule.weight_sum <= schedule.weight_bound);
  }
}

TEST_CASE("estimator on a toy problem") {
  Rng rng = make_rng(53);
  const toy::ToyProblem problem = toy::random_instance(5, 2, 2, rng);
  const LevelSchedule schedule = toy::toy_schedule(2, 2, 600);

  SUBCASE("deterministic given options") {
    EstimatorOptions options;
    options.seed = 7;
    options.replicate = 3;
    const EstimateResult a = mlmcmc_estimate(problem, schedule, options);
    const EstimateResult b = mlmcmc_estimate(problem, schedule, options);
    CHECK(a.value == b.value);
    options.replicate = 4;
    const EstimateResult c = mlmcmc_estimate(problem, schedule, options);
    CHECK(a.value != c.value);
  }

  SUBCASE("mean over replicates approaches the exact telescoped value") {
    const double exact = toy::exact_estimator_target(problem, 2, 2);
    const int replicates = 48;
    double sum = 0.0, sum_sq = 0.0;
    for (int rep = 0; rep < replicates; ++rep) {
      EstimatorOptions options;
      options.seed = 54;
      options.replicate = rep;
      const double value = mlmcmc_estimate(problem, schedule, options).value;
      sum += value;
      sum_sq += value * value;
    }
    const double mean = sum / replicates;
    // standard error of the replicate mean
    const double se =
        std::sqrt((sum_sq / replicates - mean * mean) / (replicates - 1));
    CHECK(std::abs(mean - exact) < 3.0 * se);
  }

  SUBCASE("degenerate L = 0 schedule reduces to a single chain mean") {
    const LevelSchedule degenerate = toy::toy_schedule(0, 0, 400);
    EstimatorOptions options;
    options.seed = 55;
    const EstimateResult result = mlmcmc_estimate(problem, degenerate, options);
    REQUIRE(result.blocks.size() == 1);
    CHECK(result.value == result.blocks[0].contribution);

    // replicate the engine's stream to reproduce the chain by hand
    Rng chain_rng =
        make_rng(derive_stream(options.seed, detail::kChainTag, 0, 0, 0, options.replicate));
    int state = problem.propose(chain_rng);
    BlockEval eval = problem.evaluate(state, 0, 0);
    Chained<int, BlockEval> chain{state, eval};
    double sum = eval.qoi_fine;
    for (long step = 1; step < 400; ++step) {
      imh_step(
          chain, [&](Rng& r) { return problem.propose(r); },
          [&](const int& atom) { return problem.evaluate(atom, 0, 0); },
          [](const BlockEval& e) { return e.phi_fine; }, chain_rng);
      sum += chain.eval.qoi_fine;
    }
    CHECK(result.value == sum / 400.0);
  }
}

TEST_CASE("forced level equality zeroes every correction block") {
  Rng rng = make_rng(56);
  toy::ToyProblem problem = toy::random_instance(4, 2, 2, rng);
  problem.phi[1] = problem.phi[0];
  problem.phi[2] = problem.phi[0];

  const LevelSchedule schedule = toy::toy_schedule(2, 2, 300);
  EstimatorOptions options;
  options.seed = 57;
  const EstimateResult result = mlmcmc_estimate(problem, schedule, options);

  double level0 = 0.0;
  for (const auto& block : result.blocks) {
    if (block.level >= 1) {
      CHECK(block.contribution == 0.0);
    } else {
      level0 += block.contribution;
    }
  }
  CHECK(result.value == level0);
}

TEST_CASE("chain streams are pairwise distinct across blocks and targets") {
  // independence across levels (and between the two targets of a pair) rests
  // on disjoint random streams
  std::set<std::uint64_t> ids;
  int count = 0;
  for (long replicate : {0L, 1L}) {
    for (int level = 0; level <= 3; ++level) {
      for (int lp = 0; lp <= 3; ++lp) {
        for (int target : {0, 1}) {
          ids.insert(derive_stream(42, detail::kChainTag, level, lp, target, replicate));
          ++count;
        }
      }
    }
  }
  CHECK(static_cast<int>(ids.size()) == count);
}

TEST_CASE("burn-in policy") {
  Rng rng = make_rng(58);
  const toy::ToyProblem problem = toy::random_instance(4, 1, 1, rng);
  const LevelSchedule schedule = toy::toy_schedule(1, 1, 10);

  EstimatorOptions options;
  options.seed = 59;
  options.burn_in = true;
  const auto group = detail::run_group(problem, schedule, options, 1, 0);
  CHECK(group.stats[0].burn_in == 2);  // 20% of 10
  CHECK(group.stats[1].burn_in == 0);  // sequential initialization instead

  options.burn_in = false;
  const auto plain = detail::run_group(problem, schedule, options, 1, 0);
  CHECK(plain.stats[0].burn_in == 0);
}

TEST_CASE("posterior problem couples all requested levels through one draw") {
  const auto family = std::make_shared<const WaveletFamily>(build_family(5, 10));
  PriorParams prior;
  prior.dim = 1;
  prior.smoothness = 1.6;
  prior.shape = 5.0 / 3.0;
  prior.density = 0.8;

  ObservationSetup obs;
  obs.dim = 1;
  obs.sigma = 0.1;
  for (int i = 1; i <= 9; ++i) obs.points.push_back({0.1 * i, 0.0});
  Rng truth_rng = make_rng(60);
  const PriorSample truth = draw_prior_sample(prior, 6, truth_rng);
  Rng noise_rng = make_rng(61);
  const ObservationSetup data = synthesize_data(truth, 6, 6, *family, 10.0, obs, 60, noise_rng);

  const ForwardModel model(family, data, prior, 10.0);
  ScheduleParams params;
  params.levels = 2;
  params.h0_exp = 2;
  params.dim = 1;
  params.alpha_poly = 3.0;
  const LevelSchedule schedule = build_schedule(params);
  const PosteriorProblem problem(&model, &schedule, QoiKind::energy);

  Rng rng = make_rng(62);
  const PriorSample state = problem.propose(rng);
  const BlockEval eval = problem.evaluate(state, 2, 1);
  const BlockEval again = problem.evaluate(state, 2, 1);
  CHECK(eval.phi_fine == again.phi_fine);
  CHECK(eval.phi_coarse == again.phi_coarse);
  CHECK(eval.qoi_fine == again.qoi_fine);
  CHECK(eval.qoi_coarse == again.qoi_coarse);

  // potentials agree with independent one-level evaluations of the same draw
  const LevelEval fine =
      model.evaluate_one(state, {schedule.trunc_obs[2], schedule.mesh_obs[2]});
  const LevelEval coarse =
      model.evaluate_one(state, {schedule.trunc_obs[1], schedule.mesh_obs[1]});
  CHECK(eval.phi_fine == doctest::Approx(fine.phi).epsilon(1e-14));
  CHECK(eval.phi_coarse == doctest::Approx(coarse.phi).epsilon(1e-14));

  EstimatorOptions options;
  options.seed = 63;
  const EstimateResult result = mlmcmc_estimate(problem, schedule, options);
  CHECK(result.mean_acceptance() > 0.0);
  CHECK(std::isfinite(result.value));

  // acceptance is strictly positive on runs of >= 1000 steps
  Rng chain_rng = make_rng(64);
  Chained<PriorSample, BlockEval> chain;
  chain.state = problem.propose(chain_rng);
  chain.eval = problem.evaluate(chain.state, 0, 0);
  long accepted = 0;
  for (int step = 0; step < 1000; ++step) {
    if (imh_step(
            chain, [&](Rng& r) { return problem.propose(r); },
            [&](const PriorSample& s) { return problem.evaluate(s, 0, 0); },
            [](const BlockEval& e) { return e.phi_fine; }, chain_rng)) {
      ++accepted;
    }
  }
  CHECK(accepted > 0);
}
