#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "navgrpo/common/rng.hpp"
#include "navgrpo/ddpm/observation.hpp"
#include "navgrpo/diffcore/param_store.hpp"
#include "navgrpo/diffcore/tape.hpp"

namespace navgrpo::ddpm {

struct NetworkConfig {
  std::size_t horizon = 24;  // waypoints; the network works on 2*horizon values
  std::size_t patch_width = 32;
  std::size_t frames = 1;
  std::size_t encoder_hidden = 128;
  std::size_t cond_dim = 64;
  std::size_t step_embed_dim = 16;
  std::size_t width = 64;
  std::size_t ffn = 128;
  std::size_t blocks = 8;
  double goal_scale = 3.0;  // goal features are goal / goal_scale, norm-clipped
  double goal_clip = 3.0;
  double head_init_scale = 0.1;

  std::size_t traj_dim() const { return 2 * horizon; }
  std::size_t goal_features() const { return 4; }
  std::size_t input_dim() const {
    return frames * patch_width * patch_width + goal_features();
  }
};

// Noise-prediction network eps_theta(tau^k, k, o).
//
// Encoder: two dense layers over [patches, goal features] -> observation
// embedding. Decoder: input projection of tau^k followed by `blocks` residual
// blocks h += W2 gelu(W1 [h, obs_emb, step_emb]). Head: FiLM of h by the
// conditioning, (h + shift(c)) * exp(scale(c)), then dense to 2*horizon.
// The input projection belongs to decoder block 0.
class Denoiser {
 public:
  explicit Denoiser(NetworkConfig config) : config_(config) {}

  const NetworkConfig& config() const { return config_; }

  diff::ParamStore init(Rng& rng) const;

  // [n, input_dim] constant features, one row per observation.
  diff::Tensor features(std::span<const Observation* const> observations) const;
  diff::Tensor features(const Observation& obs) const;

  // [n, cond_dim] observation embedding.
  diff::Var encode(diff::Tape& tape, const diff::ParamStore& store,
                   const diff::Tensor& features) const;

  // eps_hat for rows of (embedding row, tau^k row, step k). cond_rows is
  // [R, cond_dim], tau_rows [R, 2H].
  diff::Var predict(diff::Tape& tape, const diff::ParamStore& store, diff::Var cond_rows,
                    const diff::Tensor& tau_rows, std::span<const int> steps) const;

 private:
  static std::string block_name(std::size_t i, const char* layer);

  NetworkConfig config_;
};

}  // namespace navgrpo::ddpm
