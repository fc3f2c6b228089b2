#include "navgrpo/ddpm/denoiser.hpp"

#include <algorithm>

#include "navgrpo/common/errors.hpp"
#include "navgrpo/diffcore/layers.hpp"

namespace navgrpo::ddpm {

using diff::DenseLayer;
using diff::LayerRole;
using diff::Tensor;
using diff::Var;

std::string Denoiser::block_name(std::size_t i, const char* layer) {
  return "decoder.block" + std::to_string(i) + "." + layer;
}

diff::ParamStore Denoiser::init(Rng& rng) const {
  if (config_.blocks == 0) throw ConfigError("decoder needs at least one block");
  diff::ParamStore store;
  const std::size_t cond = config_.cond_dim + config_.step_embed_dim;
  DenseLayer::create(store, "encoder.0", LayerRole::Encoder, -1, config_.input_dim(),
                     config_.encoder_hidden, rng);
  DenseLayer::create(store, "encoder.1", LayerRole::Encoder, -1, config_.encoder_hidden,
                     config_.cond_dim, rng);
  DenseLayer::create(store, "decoder.input", LayerRole::Decoder, 0, config_.traj_dim(),
                     config_.width, rng);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const int block = static_cast<int>(b);
    DenseLayer::create(store, block_name(b, "fc1"), LayerRole::Decoder, block,
                       config_.width + cond, config_.ffn, rng);
    DenseLayer::create(store, block_name(b, "fc2"), LayerRole::Decoder, block, config_.ffn,
                       config_.width, rng);
  }
  DenseLayer::create(store, "head.scale", LayerRole::Head, -1, cond, config_.width, rng,
                     config_.head_init_scale);
  DenseLayer::create(store, "head.shift", LayerRole::Head, -1, cond, config_.width, rng,
                     config_.head_init_scale);
  DenseLayer::create(store, "head", LayerRole::Head, -1, config_.width, config_.traj_dim(), rng,
                     config_.head_init_scale);
  return store;
}

Tensor Denoiser::features(std::span<const Observation* const> observations) const {
  const std::size_t cells = config_.patch_width * config_.patch_width;
  const std::size_t cols = config_.input_dim();
  Tensor out = Tensor::matrix(observations.size(), cols);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Observation& obs = *observations[i];
    if (static_cast<std::size_t>(obs.geometry.width) != config_.patch_width ||
        static_cast<std::size_t>(obs.frames) != config_.frames ||
        obs.patch.size() != config_.frames * cells) {
      throw ConfigError("observation layout does not match the network configuration");
    }
    double* row = out.data() + i * cols;
    for (std::size_t c = 0; c < obs.patch.size(); ++c) row[c] = obs.patch[c];
    Vec2 g = obs.goal * (1.0 / config_.goal_scale);
    const double n = g.norm();
    if (n > config_.goal_clip) g = g * (config_.goal_clip / n);
    double* tail = row + config_.frames * cells;
    tail[0] = g.x;
    tail[1] = g.y;
    tail[2] = n > 0 ? obs.goal.x / obs.goal.norm() : 0.0;
    tail[3] = n > 0 ? obs.goal.y / obs.goal.norm() : 0.0;
  }
  return out;
}

Tensor Denoiser::features(const Observation& obs) const {
  const Observation* one[] = {&obs};
  return features(one);
}

Var Denoiser::encode(diff::Tape& tape, const diff::ParamStore& store, const Tensor& feats) const {
  Var x = tape.constant(feats);
  Var h = diff::ops::linear(x, tape.parameter(store, "encoder.0.weight"),
                            tape.parameter(store, "encoder.0.bias"));
  h = diff::ops::gelu(h);
  h = diff::ops::linear(h, tape.parameter(store, "encoder.1.weight"),
                        tape.parameter(store, "encoder.1.bias"));
  return diff::ops::gelu(h);
}

Var Denoiser::predict(diff::Tape& tape, const diff::ParamStore& store, Var cond_rows,
                      const Tensor& tau_rows, std::span<const int> steps) const {
  namespace ops = diff::ops;
  const std::size_t rows = tau_rows.rows();
  if (steps.size() != rows || cond_rows.value().rows() != rows) {
    throw UsageError("predict: row counts of conditioning, states and steps differ");
  }
  if (tau_rows.cols() != config_.traj_dim()) {
    throw ConfigError("predict: trajectory width " + std::to_string(tau_rows.cols()) +
                      " does not match horizon " + std::to_string(config_.horizon));
  }
  const std::size_t ed = config_.step_embed_dim;
  Tensor step_emb = Tensor::matrix(rows, ed);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto e = diff::sinusoidal_embed(steps[r], ed);
    std::copy(e.begin(), e.end(), step_emb.data() + r * ed);
  }
  const Var cparts[] = {cond_rows, tape.constant(std::move(step_emb))};
  Var cond = ops::concat_cols(cparts);

  Var h = ops::linear(tape.constant(tau_rows), tape.parameter(store, "decoder.input.weight"),
                      tape.parameter(store, "decoder.input.bias"));
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const Var parts[] = {h, cond};
    Var u = ops::concat_cols(parts);
    u = ops::linear(u, tape.parameter(store, block_name(b, "fc1.weight")),
                    tape.parameter(store, block_name(b, "fc1.bias")));
    u = ops::gelu(u);
    u = ops::linear(u, tape.parameter(store, block_name(b, "fc2.weight")),
                    tape.parameter(store, block_name(b, "fc2.bias")));
    h = ops::add(h, u);
  }
  // Feature-wise modulation by the conditioning, gain in log space:
  // (h + shift(c)) * exp(scale(c)).
  Var log_gain = ops::linear(cond, tape.parameter(store, "head.scale.weight"),
                             tape.parameter(store, "head.scale.bias"));
  Var shift = ops::linear(cond, tape.parameter(store, "head.shift.weight"),
                          tape.parameter(store, "head.shift.bias"));
  h = ops::mul(ops::add(h, shift), ops::exp(log_gain));
  return ops::linear(h, tape.parameter(store, "head.weight"), tape.parameter(store, "head.bias"));
}

}  // namespace navgrpo::ddpm
