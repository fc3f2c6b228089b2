#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "navgrpo/common/rng.hpp"
#include "navgrpo/diffcore/param_store.hpp"
#include "navgrpo/diffcore/tape.hpp"

namespace navgrpo::diff {

// Indices of a dense layer's weight [in, out] and bias [out] inside a store.
struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;

  // Uniform(-a, a) with a = init_scale / sqrt(fan_in) for both weight and bias.
  static DenseLayer create(ParamStore& store, const std::string& prefix, LayerRole role,
                           int block, std::size_t in, std::size_t out, Rng& rng,
                           double init_scale = 1.0);

  Var operator()(Tape& tape, const ParamStore& store, Var x) const {
    return ops::linear(x, tape.parameter(store, weight), tape.parameter(store, bias));
  }
};

// Interleaved [sin(k w_0), cos(k w_0), sin(k w_1), ...] with geometrically
// spaced frequencies w_i = 10000^(-2i/dim).
std::vector<double> sinusoidal_embed(double k, std::size_t dim);

}  // namespace navgrpo::diff
