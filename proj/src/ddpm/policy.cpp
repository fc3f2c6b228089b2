#include "navgrpo/ddpm/policy.hpp"

#include <cmath>
#include <numbers>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::ddpm {

using diff::Tape;
using diff::Tensor;
using diff::Var;

double ChainRecord::cached_log_prob(int last_k) const {
  if (last_k < 1 || last_k > steps) throw UsageError("truncation outside 1..K");
  double s = 0.0;
  for (int k = 1; k <= last_k; ++k) s += log_prob(k);
  return s;
}

void ChainRecord::write(ByteWriter& w) const {
  w.put<std::int32_t>(steps);
  w.put<std::int32_t>(dim);
  w.put<std::uint64_t>(observation_digest);
  w.put_doubles(states);
  w.put_doubles(noise_pred);
  w.put_doubles(means);
  w.put_doubles(log_probs);
}

ChainRecord ChainRecord::read(ByteReader& r) {
  ChainRecord c;
  c.steps = r.get<std::int32_t>();
  c.dim = r.get<std::int32_t>();
  c.observation_digest = r.get<std::uint64_t>();
  c.states = r.get_doubles();
  c.noise_pred = r.get_doubles();
  c.means = r.get_doubles();
  c.log_probs = r.get_doubles();
  const auto k = static_cast<std::size_t>(c.steps);
  const auto d = static_cast<std::size_t>(c.dim);
  if (c.states.size() != (k + 1) * d || c.noise_pred.size() != k * d || c.means.size() != k * d ||
      c.log_probs.size() != k) {
    throw IoError("chain record arrays inconsistent with its header");
  }
  return c;
}

double gaussian_log_prob(std::span<const double> x, std::span<const double> mean, double sigma) {
  if (x.size() != mean.size()) throw UsageError("gaussian_log_prob: size mismatch");
  const double var = sigma * sigma;
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    sq += d * d;
  }
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var) -
         sq / (2.0 * var);
}

StepResult reverse_step(const DdpmSchedule& schedule, std::span<const double> tau_k, int k,
                        std::span<const double> eps_hat, std::span<const double> z) {
  schedule.check_step(k);
  if (tau_k.size() != eps_hat.size() || tau_k.size() != z.size()) {
    throw UsageError("reverse_step: size mismatch");
  }
  const double sigma = schedule.sigma[k];
  if (sigma == 0.0) {
    for (double v : z) {
      if (v != 0.0) throw UsageError("reverse_step: nonzero z with zero sigma");
    }
  }
  const double c1 = schedule.state_coef(k);
  const double c2 = schedule.noise_coef(k);
  StepResult out;
  out.mean.resize(tau_k.size());
  out.prev.resize(tau_k.size());
  for (std::size_t i = 0; i < tau_k.size(); ++i) {
    out.mean[i] = c1 * (tau_k[i] - c2 * eps_hat[i]);
    out.prev[i] = out.mean[i] + sigma * z[i];
  }
  out.log_prob = sigma > 0.0 ? gaussian_log_prob(out.prev, out.mean, sigma) : 0.0;
  return out;
}

DiffusionPolicy::DiffusionPolicy(DdpmSchedule schedule, NetworkConfig network, double traj_scale)
    : schedule_(std::move(schedule)), network_(network), traj_scale_(traj_scale) {
  if (!(traj_scale_ > 0.0)) throw ConfigError("trajectory scale must be positive");
}

std::vector<double> DiffusionPolicy::normalize(const Trajectory& t) const {
  if (t.size() != network_.config().horizon) {
    throw UsageError("trajectory has " + std::to_string(t.size()) + " waypoints, expected " +
                     std::to_string(network_.config().horizon));
  }
  std::vector<double> out(dim());
  for (std::size_t h = 0; h < t.size(); ++h) {
    out[2 * h] = t[h].x / traj_scale_;
    out[2 * h + 1] = t[h].y / traj_scale_;
  }
  return out;
}

Trajectory DiffusionPolicy::denormalize(std::span<const double> tau) const {
  Trajectory t;
  t.waypoints.resize(tau.size() / 2);
  for (std::size_t h = 0; h < t.size(); ++h) {
    t[h] = {tau[2 * h] * traj_scale_, tau[2 * h + 1] * traj_scale_};
  }
  return t;
}

std::vector<double> DiffusionPolicy::q_sample(std::span<const double> tau0, int k,
                                              std::span<const double> noise) const {
  schedule_.check_step(k);
  if (tau0.size() != noise.size()) throw UsageError("q_sample: size mismatch");
  const double a = std::sqrt(schedule_.alpha_bar[k]);
  const double b = std::sqrt(1.0 - schedule_.alpha_bar[k]);
  std::vector<double> out(tau0.size());
  for (std::size_t i = 0; i < tau0.size(); ++i) out[i] = a * tau0[i] + b * noise[i];
  return out;
}

std::vector<double> DiffusionPolicy::predict_noise(const diff::ParamStore& params,
                                                   std::span<const double> tau_k, int k,
                                                   const Observation& obs) const {
  schedule_.check_step(k);
  Tape tape(false);
  Var emb = network_.encode(tape, params, network_.features(obs));
  const int steps[] = {k};
  Tensor tau = Tensor::row(std::vector<double>(tau_k.begin(), tau_k.end()));
  Var eps = network_.predict(tape, params, emb, tau, steps);
  return eps.value().to_vector();
}

StepResult DiffusionPolicy::posterior_step(const diff::ParamStore& params,
                                           std::span<const double> tau_k, int k,
                                           const Observation& obs,
                                           std::span<const double> z) const {
  const auto eps = predict_noise(params, tau_k, k, obs);
  return reverse_step(schedule_, tau_k, k, eps, z);
}

std::vector<Candidate> DiffusionPolicy::sample(const diff::ParamStore& params,
                                               const Observation& obs, std::size_t group,
                                               Rng& rng, bool deterministic) const {
  if (group < 1) throw UsageError("sample: empty group");
  const std::size_t d = dim();
  const int K = schedule_.steps;
  std::vector<std::vector<double>> start(group, std::vector<double>(d));
  for (auto& row : start) {
    for (auto& v : row) v = rng.normal();
  }
  std::vector<std::vector<std::vector<double>>> z(
      static_cast<std::size_t>(K), std::vector<std::vector<double>>(group, std::vector<double>(d, 0.0)));
  if (!deterministic) {
    for (int k = K; k >= 1; --k) {
      for (auto& row : z[static_cast<std::size_t>(k - 1)]) {
        for (auto& v : row) v = rng.normal();
      }
    }
  }
  return sample_from(params, obs, start, z);
}

std::vector<Candidate> DiffusionPolicy::sample_from(
    const diff::ParamStore& params, const Observation& obs,
    std::span<const std::vector<double>> tau_K,
    const std::vector<std::vector<std::vector<double>>>& z) const {
  const std::size_t group = tau_K.size();
  const std::size_t d = dim();
  const int K = schedule_.steps;
  if (z.size() != static_cast<std::size_t>(K)) throw UsageError("sample_from: need K noise draws");

  std::vector<Candidate> out(group);
  const std::uint64_t digest = obs.digest();
  Tensor tau = Tensor::matrix(group, d);
  for (std::size_t g = 0; g < group; ++g) {
    if (tau_K[g].size() != d) throw UsageError("sample_from: start state width mismatch");
    ChainRecord& rec = out[g].record;
    rec.steps = K;
    rec.dim = static_cast<int>(d);
    rec.states.assign(static_cast<std::size_t>(K + 1) * d, 0.0);
    rec.noise_pred.assign(static_cast<std::size_t>(K) * d, 0.0);
    rec.means.assign(static_cast<std::size_t>(K) * d, 0.0);
    rec.log_probs.assign(static_cast<std::size_t>(K), 0.0);
    rec.observation_digest = digest;
    std::copy(tau_K[g].begin(), tau_K[g].end(), rec.states.begin() + static_cast<std::ptrdiff_t>(K * d));
    std::copy(tau_K[g].begin(), tau_K[g].end(), tau.data() + g * d);
  }

  Tape tape(false);
  Var emb = network_.encode(tape, params, network_.features(obs));
  const std::vector<std::size_t> zero_rows(group, 0);
  Var cond = diff::ops::gather_rows(emb, zero_rows);
  std::vector<int> steps(group);
  for (int k = K; k >= 1; --k) {
    std::fill(steps.begin(), steps.end(), k);
    Var eps = network_.predict(tape, params, cond, tau, steps);
    const Tensor& e = eps.value();
    for (std::size_t g = 0; g < group; ++g) {
      ChainRecord& rec = out[g].record;
      const auto& zk = z[static_cast<std::size_t>(k - 1)][g];
      StepResult r = reverse_step(schedule_, tau.row_span(g), k, e.row_span(g), zk);
      const std::size_t ki = static_cast<std::size_t>(k - 1);
      std::copy(e.row_span(g).begin(), e.row_span(g).end(), rec.noise_pred.begin() + static_cast<std::ptrdiff_t>(ki * d));
      std::copy(r.mean.begin(), r.mean.end(), rec.means.begin() + static_cast<std::ptrdiff_t>(ki * d));
      std::copy(r.prev.begin(), r.prev.end(), rec.states.begin() + static_cast<std::ptrdiff_t>(ki * d));
      rec.log_probs[ki] = r.log_prob;
      std::copy(r.prev.begin(), r.prev.end(), tau.data() + g * d);
    }
  }
  for (std::size_t g = 0; g < group; ++g) {
    out[g].trajectory = denormalize(out[g].record.state(0));
  }
  return out;
}

void DiffusionPolicy::check_record(const ChainRecord& record, int last_k) const {
  if (record.steps != schedule_.steps || static_cast<std::size_t>(record.dim) != dim()) {
    throw UsageError("chain record does not match the schedule or horizon");
  }
  if (last_k < 1 || last_k > schedule_.steps) {
    throw UsageError("truncation " + std::to_string(last_k) + " outside 1.." +
                     std::to_string(schedule_.steps));
  }
}

std::vector<double> DiffusionPolicy::step_log_probs(const diff::ParamStore& params,
                                                    const ChainRecord& record,
                                                    const Observation& obs, int last_k) const {
  check_record(record, last_k);
  const std::size_t d = dim();
  const auto rows = static_cast<std::size_t>(last_k);
  Tensor tau = Tensor::matrix(rows, d);
  std::vector<int> steps(rows);
  for (int k = 1; k <= last_k; ++k) {
    const auto s = record.state(k);
    std::copy(s.begin(), s.end(), tau.data() + static_cast<std::size_t>(k - 1) * d);
    steps[static_cast<std::size_t>(k - 1)] = k;
  }
  Tape tape(false);
  Var emb = network_.encode(tape, params, network_.features(obs));
  const std::vector<std::size_t> zero_rows(rows, 0);
  Var eps = network_.predict(tape, params, diff::ops::gather_rows(emb, zero_rows), tau, steps);
  std::vector<double> out(rows);
  std::vector<double> mean(d);
  for (int k = 1; k <= last_k; ++k) {
    const auto r = static_cast<std::size_t>(k - 1);
    const double c1 = schedule_.state_coef(k);
    const double c2 = schedule_.noise_coef(k);
    const auto e = eps.value().row_span(r);
    const auto t = tau.row_span(r);
    for (std::size_t i = 0; i < d; ++i) mean[i] = c1 * (t[i] - c2 * e[i]);
    out[r] = gaussian_log_prob(record.state(k - 1), mean, schedule_.sigma[k]);
  }
  return out;
}

double DiffusionPolicy::traj_log_prob(const diff::ParamStore& params, const ChainRecord& record,
                                      const Observation& obs, int last_k) const {
  double s = 0.0;
  for (double v : step_log_probs(params, record, obs, last_k)) s += v;
  return s;
}

double DiffusionPolicy::log_ratio(const diff::ParamStore& params, const ChainRecord& record,
                                  const Observation& obs, int last_k) const {
  return traj_log_prob(params, record, obs, last_k) - record.cached_log_prob(last_k);
}

namespace {

struct ChainRows {
  Tensor tau;                 // [R, d] tau^k
  Tensor prev;                // [R, d] tau^{k-1}
  std::vector<int> steps;
  std::vector<std::size_t> cond_index;
  std::vector<std::size_t> record_index;
};

ChainRows gather_chain_rows(std::span<const ChainRecord* const> records,
                            std::span<const std::size_t> obs_index, int last_k, std::size_t d) {
  const std::size_t rows = records.size() * static_cast<std::size_t>(last_k);
  ChainRows cr{Tensor::matrix(rows, d), Tensor::matrix(rows, d), {}, {}, {}};
  cr.steps.reserve(rows);
  cr.cond_index.reserve(rows);
  cr.record_index.reserve(rows);
  std::size_t r = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (int k = last_k; k >= 1; --k, ++r) {
      const auto s = records[i]->state(k);
      const auto p = records[i]->state(k - 1);
      std::copy(s.begin(), s.end(), cr.tau.data() + r * d);
      std::copy(p.begin(), p.end(), cr.prev.data() + r * d);
      cr.steps.push_back(k);
      cr.cond_index.push_back(obs_index[i]);
      cr.record_index.push_back(i);
    }
  }
  return cr;
}

}  // namespace

Var DiffusionPolicy::chain_log_probs(Tape& tape, const diff::ParamStore& params,
                                     const Tensor& features,
                                     std::span<const ChainRecord* const> records,
                                     std::span<const std::size_t> obs_index, int last_k) const {
  namespace ops = diff::ops;
  if (records.size() != obs_index.size()) throw UsageError("chain_log_probs: index size mismatch");
  for (const auto* rec : records) check_record(*rec, last_k);
  const std::size_t d = dim();
  ChainRows cr = gather_chain_rows(records, obs_index, last_k, d);
  const std::size_t rows = cr.steps.size();

  Var emb = network_.encode(tape, params, features);
  Var eps = network_.predict(tape, params, ops::gather_rows(emb, cr.cond_index), cr.tau, cr.steps);

  // residual = tau^{k-1} - mu = (tau^{k-1} - c1 tau^k) + c1 c2 eps_hat
  Tensor offset = Tensor::matrix(rows, d);
  std::vector<double> eps_coef(rows);
  std::vector<double> quad_coef(rows);
  Tensor norm_const = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const int k = cr.steps[r];
    const double c1 = schedule_.state_coef(k);
    const double var = schedule_.sigma[k] * schedule_.sigma[k];
    for (std::size_t i = 0; i < d; ++i) offset[r * d + i] = cr.prev[r * d + i] - c1 * cr.tau[r * d + i];
    eps_coef[r] = c1 * schedule_.noise_coef(k);
    quad_coef[r] = -1.0 / (2.0 * var);
    norm_const[r] = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * var);
  }
  Var resid = ops::add(tape.constant(std::move(offset)), ops::scale_rows(eps, eps_coef));
  Var quad = ops::scale_rows(ops::row_sum(ops::square(resid)), quad_coef);
  Var step_lp = ops::add(quad, tape.constant(std::move(norm_const)));
  return ops::segment_sum(step_lp, cr.record_index, records.size());
}

Tensor DiffusionPolicy::chain_means(const diff::ParamStore& params, const Tensor& features,
                                    std::span<const ChainRecord* const> records,
                                    std::span<const std::size_t> obs_index, int last_k) const {
  for (const auto* rec : records) check_record(*rec, last_k);
  const std::size_t d = dim();
  ChainRows cr = gather_chain_rows(records, obs_index, last_k, d);
  Tape tape(false);
  Var emb = network_.encode(tape, params, features);
  Var eps = network_.predict(tape, params, diff::ops::gather_rows(emb, cr.cond_index), cr.tau, cr.steps);
  Tensor means = Tensor::matrix(cr.steps.size(), d);
  for (std::size_t r = 0; r < cr.steps.size(); ++r) {
    const int k = cr.steps[r];
    const double c1 = schedule_.state_coef(k);
    const double c2 = schedule_.noise_coef(k);
    for (std::size_t i = 0; i < d; ++i) {
      means[r * d + i] = c1 * (cr.tau[r * d + i] - c2 * eps.value()[r * d + i]);
    }
  }
  return means;
}

}  // namespace navgrpo::ddpm
