#include <doctest.h>

#include <cmath>
#include <functional>

#include "btmc/mcmc.hpp"
#include "toy_problem.hpp"

using namespace btmc;

TEST_CASE("acceptance probability") {
  CHECK(imh_acceptance(1.7, 1.7) == 1.0);
  CHECK(imh_acceptance(0.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(imh_acceptance(5.0, -3.0) == 1.0);
  Rng rng = make_rng(41);
  std::uniform_real_distribution<double> pot(-30.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const double alpha = imh_acceptance(pot(rng), pot(rng));
    CHECK(alpha >= 0.0);
    CHECK(alpha <= 1.0);
  }
  CHECK_THROWS_AS(imh_acceptance(std::nan(""), 0.0), NumericalError);
}

namespace {

// tiny categorical target for kernel tests
struct Atoms {
  std::vector<double> prior;
  std::vector<double> phi;

  int propose(Rng& rng) const {
    std::discrete_distribution<int> dist(prior.begin(), prior.end());
    return dist(rng);
  }
  std::vector<double> posterior() const {
    std::vector<double> post(prior.size());
    double z = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
      post[i] = prior[i] * std::exp(-phi[i]);
      z += post[i];
    }
    for (double& w : post) w /= z;
    return post;
  }
};

}  // namespace

TEST_CASE("two-atom chain matches the exact posterior") {
  const Atoms target{{0.3, 0.7}, {0.0, std::log(3.0)}};
  const auto post = target.posterior();

  Rng rng = make_rng(42);
  Chained<int, double> chain{target.propose(rng), 0.0};
  chain.eval = target.phi[chain.state];

  const long steps = 1000000;
  const long batches = 100;
  const long batch_len = steps / batches;
  std::vector<double> batch_means;
  long occupancy0 = 0;
  for (long b = 0; b < batches; ++b) {
    long in_batch = 0;
    for (long s = 0; s < batch_len; ++s) {
      imh_step(
          chain, [&](Rng& r) { return target.propose(r); },
          [&](const int& atom) { return target.phi[atom]; },
          [](const double& phi) { return phi; }, rng);
      if (chain.state == 0) {
        ++in_batch;
        ++occupancy0;
      }
    }
    batch_means.push_back(in_batch / static_cast<double>(batch_len));
  }
  const double mean = occupancy0 / static_cast<double>(steps);
  double var = 0.0;
  for (const double m : batch_means) var += (m - mean) * (m - mean);
  var /= batches - 1;
  const double se = std::sqrt(var / batches);
  CHECK(std::abs(mean - post[0]) < 3.0 * se);
}

TEST_CASE("empirical transition frequencies satisfy detailed balance") {
  const Atoms target{{0.2, 0.5, 0.3}, {0.4, -0.3, 1.1}};
  const auto post = target.posterior();

  Rng rng = make_rng(43);
  Chained<int, double> chain{1, target.phi[1]};
  const long steps = 400000;
  double counts[3][3] = {};
  int prev = chain.state;
  for (long s = 0; s < steps; ++s) {
    imh_step(
        chain, [&](Rng& r) { return target.propose(r); },
        [&](const int& atom) { return target.phi[atom]; },
        [](const double& phi) { return phi; }, rng);
    counts[prev][chain.state] += 1.0;
    prev = chain.state;
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < i; ++j) {
      const double fij = counts[i][j] / steps;
      const double fji = counts[j][i] / steps;
      const double se = std::sqrt((fij + fji) / steps);
      CHECK(std::abs(fij - fji) < 5.0 * se + 1e-9);
    }
  }
  (void)post;
}

TEST_CASE("run_chain basics") {
  const Atoms target{{0.5, 0.5}, {0.2, 0.9}};
  const auto propose = [&](Rng& r) { return target.propose(r); };
  const auto evaluate = [&](const int& atom) { return target.phi[atom]; };
  const auto phi_of = [](const double& phi) { return phi; };

  const std::vector<std::function<double(const int&, const double&)>> functionals = {
      [](const int&, const double&) { return 4.5; },
      [](const int& atom, const double&) { return static_cast<double>(atom); },
  };

  Rng rng = make_rng(44);
  Chained<int, double> init{0, target.phi[0]};
  const auto result = run_chain(init, 1, 0, std::span(functionals), propose, evaluate, phi_of, rng);
  CHECK(result.means[0] == 4.5);
  CHECK(result.means[1] == 0.0);  // functional of the initial state
  CHECK(result.stats.steps == 0);

  Rng rng2 = make_rng(44);
  const auto longer =
      run_chain(init, 5000, 100, std::span(functionals), propose, evaluate, phi_of, rng2);
  CHECK(longer.means[0] == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(longer.stats.steps == 4999);
  CHECK(longer.stats.accepted > 0);

  CHECK_THROWS_AS(
      run_chain(init, 5, 5, std::span(functionals), propose, evaluate, phi_of, rng2),
      ConfigError);
}

TEST_CASE("chains are bit-identical under the same seed") {
  const Atoms target{{0.4, 0.6}, {0.0, 0.7}};
  const auto run = [&](std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Chained<int, double> chain{0, target.phi[0]};
    std::vector<int> path;
    for (int s = 0; s < 200; ++s) {
      imh_step(
          chain, [&](Rng& r) { return target.propose(r); },
          [&](const int& atom) { return target.phi[atom]; },
          [](const double& phi) { return phi; }, rng);
      path.push_back(chain.state);
    }
    return path;
  };
  CHECK(run(99) == run(99));
  CHECK(run(99) != run(100));
}

TEST_CASE("ratio estimator") {
  SUBCASE("constant potential reduces to plain Monte Carlo") {
    const Atoms target{{0.25, 0.75}, {1.3, 1.3}};
    Rng rng = make_rng(45);
    const auto result = ratio_reference(
        200000, 1, [&](Rng& r) { return target.propose(r); },
        [&](const int&) { return 1.3; },
        [](const int& atom) { return std::vector<double>{static_cast<double>(atom)}; }, rng);
    CHECK(std::abs(result.values[0] - 0.75) < 3.0 * result.std_errors[0]);
    // weights all equal: influence-function error matches binomial error
    CHECK(result.std_errors[0] ==
          doctest::Approx(std::sqrt(0.25 * 0.75 / 200000)).epsilon(0.02));
  }

  SUBCASE("constant qoi is returned exactly") {
    const Atoms target{{0.5, 0.5}, {0.0, 2.0}};
    Rng rng = make_rng(46);
    const auto result = ratio_reference(
        1000, 1, [&](Rng& r) { return target.propose(r); },
        [&](const int& atom) { return target.phi[atom]; },
        [](const int&) { return std::vector<double>{3.25}; }, rng);
    CHECK(result.values[0] == doctest::Approx(3.25).epsilon(1e-13));
    // exact up to cancellation noise in the variance accumulator
    CHECK(result.std_errors[0] < 1e-6);
  }

  SUBCASE("enumerable toy space converges to the exact posterior mean") {
    const Atoms target{{0.1, 0.2, 0.3, 0.4}, {0.5, -1.0, 2.0, 0.0}};
    const auto post = target.posterior();
    double exact = 0.0;
    for (int i = 0; i < 4; ++i) exact += post[i] * i * i;

    Rng rng = make_rng(47);
    const auto result = ratio_reference(
        100000, 1, [&](Rng& r) { return target.propose(r); },
        [&](const int& atom) { return target.phi[atom]; },
        [](const int& atom) { return std::vector<double>{static_cast<double>(atom * atom)}; },
        rng);
    CHECK(std::abs(result.values[0] - exact) < 3.0 * result.std_errors[0]);
  }

  SUBCASE("degenerate weights are reported") {
    Rng rng = make_rng(48);
    CHECK_THROWS_AS(ratio_reference(
                        10, 1, [](Rng&) { return 0; },
                        [](const int&) { return std::numeric_limits<double>::infinity(); },
                        [](const int&) { return std::vector<double>{0.0}; }, rng),
                    NumericalError);
  }
}
