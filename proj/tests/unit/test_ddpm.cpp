#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fd_oracle.hpp"
#include "navgrpo/common/errors.hpp"
#include "navgrpo/ddpm/policy.hpp"
#include "tiny_policy.hpp"

using namespace navgrpo;
using namespace navgrpo::ddpm;

namespace {

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double traj_l2(const Trajectory& a, const Trajectory& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 d = a[i] - b[i];
    s += d.dot(d);
  }
  return std::sqrt(s);
}

// Density oracle: product of univariate normal pdfs, logged at the end.
double density_oracle(std::span<const double> x, std::span<const double> mu, double sigma) {
  long double logp = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double z = (x[i] - mu[i]) / sigma;
    const long double pdf = std::exp(-0.5L * z * z) / (sigma * std::sqrt(2.0L * std::numbers::pi_v<long double>));
    logp += std::log(pdf);
  }
  return static_cast<double>(logp);
}

}  // namespace

TEST_CASE("schedule construction") {
  SUBCASE("constant betas have closed form") {
    auto s = DdpmSchedule::linear(10, 0.1, 0.1);
    for (int k = 1; k <= 10; ++k) {
      CHECK(s.alpha[k] == doctest::Approx(0.9).epsilon(1e-15));
      CHECK(s.alpha_bar[k] == doctest::Approx(std::pow(0.9, k)).epsilon(1e-13));
    }
  }
  SUBCASE("alpha_bar strictly decreasing and sigma positive") {
    for (auto [lo, hi] : {std::pair{1e-4, 0.02}, std::pair{1e-3, 0.5}, std::pair{0.3, 0.3}}) {
      auto s = DdpmSchedule::linear(10, lo, hi);
      CHECK(s.alpha_bar[0] == 1.0);
      for (int k = 1; k <= 10; ++k) {
        CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);
        CHECK(s.beta[k] > 0.0);
        CHECK(s.beta[k] < 1.0);
        CHECK(s.sigma[k] * s.sigma[k] == doctest::Approx(s.beta[k]).epsilon(1e-14));
      }
    }
  }
  SUBCASE("alpha_bar_K matches a direct product") {
    auto s = DdpmSchedule::linear(10, 1e-4, 0.02);
    double direct = 1.0;
    for (int j = 0; j < 10; ++j) direct *= 1.0 - (1e-4 + (0.02 - 1e-4) * j / 9.0);
    CHECK(std::abs(s.alpha_bar[10] - direct) < 1e-12);
  }
  SUBCASE("invalid bounds") {
    CHECK_THROWS_AS(DdpmSchedule::linear(1, 0.1, 0.2), ConfigError);
    CHECK_THROWS_AS(DdpmSchedule::linear(10, 0.0, 0.2), ConfigError);
    CHECK_THROWS_AS(DdpmSchedule::linear(10, 0.3, 0.2), ConfigError);
    CHECK_THROWS_AS(DdpmSchedule::linear(10, 0.1, 1.0), ConfigError);
  }
}

TEST_CASE("forward noising") {
  DiffusionPolicy policy(DdpmSchedule::linear(10, 1e-3, 0.5), NetworkConfig{}, 3.0);
  const auto& s = policy.schedule();
  std::vector<double> tau0(48);
  for (std::size_t i = 0; i < tau0.size(); ++i) tau0[i] = 0.01 * static_cast<double>(i) - 0.2;

  SUBCASE("zero noise scales the clean trajectory") {
    const std::vector<double> zero(48, 0.0);
    auto t = policy.q_sample(tau0, 4, zero);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t[i] == doctest::Approx(std::sqrt(s.alpha_bar[4]) * tau0[i]).epsilon(1e-15));
    }
  }
  SUBCASE("final step is mostly noise under the default schedule") {
    CHECK(std::sqrt(s.alpha_bar[10]) < 0.3);
  }
  SUBCASE("empirical variance matches 1 - alpha_bar") {
    Rng rng(21);
    const int k = 3;
    const int draws = 10000;
    const std::vector<double> one = {0.7};
    double sum = 0, sq = 0;
    for (int n = 0; n < draws; ++n) {
      const std::vector<double> eps = {rng.normal()};
      const double v = policy.q_sample(one, k, eps)[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    CHECK(std::abs(var - (1.0 - s.alpha_bar[k])) < 0.05 * (1.0 - s.alpha_bar[k]));
  }
  SUBCASE("step out of range") {
    CHECK_THROWS_AS(policy.q_sample(tau0, 0, tau0), UsageError);
    CHECK_THROWS_AS(policy.q_sample(tau0, 11, tau0), UsageError);
  }
}

TEST_CASE("noise prediction") {
  auto policy = testing::tiny_policy();
  Rng rng(4);
  auto params = policy.network().init(rng);
  auto obs = testing::random_observation(policy.network().config(), rng);
  std::vector<double> tau(policy.dim());
  for (auto& v : tau) v = rng.normal();

  const auto a = policy.predict_noise(params, tau, 2, obs);
  const auto b = policy.predict_noise(params, tau, 2, obs);
  CHECK(a == b);
  CHECK(a.size() == 2 * policy.network().config().horizon);

  SUBCASE("goal conditioning reaches the output") {
    for (int trial = 0; trial < 10; ++trial) {
      Rng r(100 + trial);
      auto p = policy.network().init(r);
      auto o2 = obs;
      o2.goal = o2.goal + Vec2{1.0, -0.5};
      CHECK(l2(policy.predict_noise(p, tau, 3, obs), policy.predict_noise(p, tau, 3, o2)) > 0.0);
    }
  }
}

TEST_CASE("reverse transition log density") {
  SUBCASE("zero z lands on the mean") {
    auto s = DdpmSchedule::linear(4, 0.02, 0.4);
    const std::vector<double> tau = {0.3, -0.2, 0.1, 0.5};
    const std::vector<double> eps = {0.1, 0.2, -0.3, 0.0};
    const std::vector<double> z(4, 0.0);
    auto r = reverse_step(s, tau, 2, eps, z);
    CHECK(r.prev == r.mean);
    const double var = s.sigma[2] * s.sigma[2];
    CHECK(r.log_prob == doctest::Approx(-(4.0 / 2.0) * std::log(2 * std::numbers::pi * var)));
  }
  SUBCASE("unit Gaussian closed form") {
    const std::vector<double> x = {1.0, 0.0};
    const std::vector<double> mu = {0.0, 0.0};
    CHECK(gaussian_log_prob(x, mu, 1.0) == doctest::Approx(-std::log(2 * std::numbers::pi) - 0.5));
  }
  SUBCASE("stored transitions match an independent density") {
    auto policy = testing::tiny_policy();
    Rng rng(8);
    auto params = policy.network().init(rng);
    auto obs = testing::random_observation(policy.network().config(), rng);
    for (const auto& c : policy.sample(params, obs, 4, rng)) {
      for (int k = 1; k <= 4; ++k) {
        const double oracle = density_oracle(c.record.state(k - 1), c.record.mean(k),
                                             policy.schedule().sigma[k]);
        CHECK(std::abs(c.record.log_prob(k) - oracle) < 1e-10);
      }
    }
  }
}

TEST_CASE("chain sampling") {
  auto policy = testing::tiny_policy();
  Rng init(12);
  auto params = policy.network().init(init);
  auto obs = testing::random_observation(policy.network().config(), init);

  Rng a(99), b(99);
  auto ca = policy.sample(params, obs, 6, a);
  auto cb = policy.sample(params, obs, 6, b);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    CHECK(ca[i].record == cb[i].record);
    CHECK(ca[i].trajectory == cb[i].trajectory);
  }

  double pair_sum = 0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const auto& rec = ca[i].record;
    CHECK(rec.observation_digest == obs.digest());
    CHECK(policy.denormalize(rec.state(0)) == ca[i].trajectory);
    const auto recomputed = policy.step_log_probs(params, rec, obs, 4);
    for (int k = 1; k <= 4; ++k) CHECK(std::abs(recomputed[k - 1] - rec.log_prob(k)) < 1e-9);
    for (std::size_t j = i + 1; j < ca.size(); ++j) pair_sum += traj_l2(ca[i].trajectory, ca[j].trajectory);
  }
  CHECK(pair_sum > 0.0);

  Rng other(100);
  auto cc = policy.sample(params, obs, 6, other);
  CHECK(traj_l2(ca[0].trajectory, cc[0].trajectory) > 0.0);
}

TEST_CASE("trajectory likelihood and log-ratio") {
  auto policy = testing::tiny_policy();
  Rng rng(31);
  auto params = policy.network().init(rng);
  auto obs = testing::random_observation(policy.network().config(), rng);
  auto cands = policy.sample(params, obs, 5, rng);
  const int K = policy.schedule().steps;

  for (const auto& c : cands) {
    const auto& rec = c.record;
    CHECK(std::abs(policy.traj_log_prob(params, rec, obs, K) - rec.cached_log_prob(K)) < 1e-9);
    CHECK(std::abs(policy.traj_log_prob(params, rec, obs, 1) - rec.log_prob(1)) < 1e-9);
    for (int t = 1; t <= K; ++t) CHECK(std::abs(policy.log_ratio(params, rec, obs, t)) < 1e-9);

    const auto per_step = policy.step_log_probs(params, rec, obs, K);
    for (int a = 1; a <= K; ++a) {
      for (int b = a; b <= K; ++b) {
        double between = 0;
        for (int k = a + 1; k <= b; ++k) between += per_step[k - 1];
        const double lhs = policy.traj_log_prob(params, rec, obs, a) + between;
        CHECK(std::abs(lhs - policy.traj_log_prob(params, rec, obs, b)) < 1e-10);
      }
    }
  }

  SUBCASE("continuity in a trainable head weight") {
    double prev = 1e300;
    for (double delta : {1e-2, 1e-3, 1e-4}) {
      auto moved = params;
      moved.at("head.weight").value[0] += delta;
      const double lr = std::abs(policy.log_ratio(moved, cands[0].record, obs, 3));
      CHECK(lr < prev);
      prev = lr;
    }
    CHECK(prev < 1e-2);
  }
  SUBCASE("log-ratio equals difference of two likelihood evaluations") {
    auto moved = params;
    moved.at("decoder.block1.fc2.bias").value[1] += 0.05;
    for (const auto& c : cands) {
      const double direct = policy.traj_log_prob(moved, c.record, obs, 3) -
                            policy.traj_log_prob(params, c.record, obs, 3);
      CHECK(std::abs(policy.log_ratio(moved, c.record, obs, 3) - direct) < 1e-10);
    }
  }
  SUBCASE("record and truncation mismatch") {
    CHECK_THROWS_AS(policy.traj_log_prob(params, cands[0].record, obs, 0), UsageError);
    CHECK_THROWS_AS(policy.traj_log_prob(params, cands[0].record, obs, K + 1), UsageError);
    auto bad = cands[0].record;
    bad.steps = K + 1;
    CHECK_THROWS_AS(policy.traj_log_prob(params, bad, obs, 2), UsageError);
  }
}

TEST_CASE("batched differentiable likelihood") {
  auto policy = testing::tiny_policy();
  Rng rng(41);
  auto params = policy.network().init(rng);
  auto o1 = testing::random_observation(policy.network().config(), rng);
  auto o2 = testing::random_observation(policy.network().config(), rng);
  auto c1 = policy.sample(params, o1, 2, rng);
  auto c2 = policy.sample(params, o2, 2, rng);
  const ChainRecord* recs[] = {&c1[0].record, &c1[1].record, &c2[0].record, &c2[1].record};
  const Observation* obs[] = {&o1, &o2};
  const std::size_t idx[] = {0, 0, 1, 1};
  const diff::Tensor feats = policy.network().features(obs);

  diff::Tape tape(false);
  auto lp = policy.chain_log_probs(tape, params, feats, recs, idx, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    const double ref = policy.traj_log_prob(params, *recs[i], *obs[idx[i]], 3);
    CHECK(std::abs(lp.value()[i] - ref) < 1e-9);
  }

  // Gradient of a smooth functional of the batched log-likelihoods.
  auto loss_on = [&](diff::Tape& t, const diff::ParamStore& p) {
    auto v = policy.chain_log_probs(t, p, feats, recs, idx, 3);
    return diff::ops::mean(diff::ops::exp(diff::ops::scale(v, 0.01)));
  };
  for (auto& p : params) p.trainable = p.role != diff::LayerRole::Encoder;
  diff::Tape gt;
  auto grads = gt.backward(loss_on(gt, params));
  CHECK_FALSE(grads.contains("encoder.0.weight"));
  auto f = [&](const diff::ParamStore& p) {
    diff::Tape t(false);
    return loss_on(t, p).value()[0];
  };
  auto rep = testing::check_gradients(params, grads, f, 1e-6, 1e-4, 1e-6);
  CHECK_MESSAGE(rep.failed == 0, rep.worst_name, " rel ", rep.worst_rel);
}

TEST_CASE("perfect noise prediction recovers the trajectory with z = 0") {
  auto s = DdpmSchedule::linear(10, 1e-3, 0.5);
  Rng rng(5);
  std::vector<double> x0(48);
  for (auto& v : x0) v = rng.uniform(-1, 1);
  std::vector<double> tau(48);
  for (auto& v : tau) v = rng.normal();
  const std::vector<double> z(48, 0.0);
  for (int k = 10; k >= 1; --k) {
    // Exact eps for a point-mass data distribution at x0.
    std::vector<double> eps(48);
    for (std::size_t i = 0; i < 48; ++i) {
      eps[i] = (tau[i] - std::sqrt(s.alpha_bar[k]) * x0[i]) / std::sqrt(1.0 - s.alpha_bar[k]);
    }
    tau = reverse_step(s, tau, k, eps, z).prev;
  }
  CHECK(l2(tau, x0) < 1e-2);
}

TEST_CASE("chain record serialization round trip") {
  auto policy = testing::tiny_policy();
  Rng rng(2);
  auto params = policy.network().init(rng);
  auto obs = testing::random_observation(policy.network().config(), rng);
  auto c = policy.sample(params, obs, 1, rng)[0];
  ByteWriter w;
  c.record.write(w);
  ByteReader r(w.bytes());
  CHECK(ChainRecord::read(r) == c.record);
  CHECK(r.at_end());
}
