#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/rng.hpp"
#include "navgrpo/ddpm/denoiser.hpp"
#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/ddpm/schedule.hpp"
#include "navgrpo/ddpm/trajectory.hpp"

namespace navgrpo::ddpm {

// Cached reverse-denoising trace of one sampled trajectory, in normalized
// trajectory units. Rows are indexed by diffusion step k.
struct ChainRecord {
  int steps = 0;  // K
  int dim = 0;    // 2H
  std::vector<double> states;      // (K+1) x dim, row k holds tau^k
  std::vector<double> noise_pred;  // K x dim, row k-1 holds eps_old(tau^k, k, o)
  std::vector<double> means;       // K x dim, row k-1 holds mu_old(tau^k, k, o)
  std::vector<double> log_probs;   // K, entry k-1 holds log p_old(tau^{k-1} | tau^k, o)
  std::uint64_t observation_digest = 0;

  std::span<const double> state(int k) const { return row(states, k); }
  std::span<const double> noise(int k) const { return row(noise_pred, k - 1); }
  std::span<const double> mean(int k) const { return row(means, k - 1); }
  double log_prob(int k) const { return log_probs[static_cast<std::size_t>(k - 1)]; }
  // Sum of cached log-probs over steps k = 1..last_k.
  double cached_log_prob(int last_k) const;

  void write(ByteWriter& w) const;
  static ChainRecord read(ByteReader& r);

  friend bool operator==(const ChainRecord&, const ChainRecord&) = default;

 private:
  std::span<const double> row(const std::vector<double>& v, int r) const {
    return {v.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)};
  }
};

struct StepResult {
  std::vector<double> prev;  // tau^{k-1}
  std::vector<double> mean;
  double log_prob = 0.0;
};

// Diagonal Gaussian log-density of x under N(mean, sigma^2 I).
double gaussian_log_prob(std::span<const double> x, std::span<const double> mean, double sigma);

// One reverse transition given a noise prediction: mu from the DDPM posterior,
// tau^{k-1} = mu + sigma_k z.
StepResult reverse_step(const DdpmSchedule& schedule, std::span<const double> tau_k, int k,
                        std::span<const double> eps_hat, std::span<const double> z);

struct Candidate {
  Trajectory trajectory;
  ChainRecord record;
};

// Conditional denoising trajectory policy: schedule + noise network + the
// scale that maps normalized chain states to world-unit waypoints.
class DiffusionPolicy {
 public:
  DiffusionPolicy(DdpmSchedule schedule, NetworkConfig network, double traj_scale);

  const DdpmSchedule& schedule() const { return schedule_; }
  const Denoiser& network() const { return network_; }
  double traj_scale() const { return traj_scale_; }
  std::size_t dim() const { return network_.config().traj_dim(); }

  std::vector<double> normalize(const Trajectory& t) const;
  Trajectory denormalize(std::span<const double> tau) const;

  // tau^k = sqrt(alpha_bar_k) tau^0 + sqrt(1 - alpha_bar_k) noise.
  std::vector<double> q_sample(std::span<const double> tau0, int k,
                               std::span<const double> noise) const;

  std::vector<double> predict_noise(const diff::ParamStore& params, std::span<const double> tau_k,
                                    int k, const Observation& obs) const;

  StepResult posterior_step(const diff::ParamStore& params, std::span<const double> tau_k, int k,
                            const Observation& obs, std::span<const double> z) const;

  // G independent chains from tau^K ~ N(0, I). With deterministic = true every
  // z is zero (tau^K is still drawn).
  std::vector<Candidate> sample(const diff::ParamStore& params, const Observation& obs,
                                std::size_t group, Rng& rng, bool deterministic = false) const;

  // Same as sample() but starting from given tau^K rows and z draws
  // (z[k-1] is the draw used at step k); used to replay exact chains.
  std::vector<Candidate> sample_from(const diff::ParamStore& params, const Observation& obs,
                                     std::span<const std::vector<double>> tau_K,
                                     const std::vector<std::vector<std::vector<double>>>& z) const;

  // Sum over k = 1..last_k of log p_theta(tau^{k-1} | tau^k, o) evaluated
  // with `params` on the cached states.
  double traj_log_prob(const diff::ParamStore& params, const ChainRecord& record,
                       const Observation& obs, int last_k) const;
  // Per-step values for k = 1..last_k (index k-1).
  std::vector<double> step_log_probs(const diff::ParamStore& params, const ChainRecord& record,
                                     const Observation& obs, int last_k) const;
  double log_ratio(const diff::ParamStore& params, const ChainRecord& record,
                   const Observation& obs, int last_k) const;

  // Differentiable batched version: one row per record, value = sum of
  // log-probs over the last `last_k` steps. obs_index[i] selects the row of
  // `features` that conditions records[i].
  diff::Var chain_log_probs(diff::Tape& tape, const diff::ParamStore& params,
                            const diff::Tensor& features,
                            std::span<const ChainRecord* const> records,
                            std::span<const std::size_t> obs_index, int last_k) const;

  // Posterior means for the cached states at steps 1..last_k, no tape.
  // Rows ordered (record, k = last_k..1).
  diff::Tensor chain_means(const diff::ParamStore& params, const diff::Tensor& features,
                           std::span<const ChainRecord* const> records,
                           std::span<const std::size_t> obs_index, int last_k) const;

 private:
  void check_record(const ChainRecord& record, int last_k) const;

  DdpmSchedule schedule_;
  Denoiser network_;
  double traj_scale_;
};

}  // namespace navgrpo::ddpm
