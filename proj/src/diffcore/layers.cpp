#include "navgrpo/diffcore/layers.hpp"

#include <cmath>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::diff {

DenseLayer DenseLayer::create(ParamStore& store, const std::string& prefix, LayerRole role,
                              int block, std::size_t in, std::size_t out, Rng& rng,
                              double init_scale) {
  const double a = init_scale / std::sqrt(static_cast<double>(in));
  Tensor w = Tensor::matrix(in, out);
  for (auto& v : w.storage()) v = rng.uniform(-a, a);
  Tensor b({out});
  for (auto& v : b.storage()) v = rng.uniform(-a, a);
  DenseLayer layer;
  layer.weight = store.add(prefix + ".weight", role, block, std::move(w));
  layer.bias = store.add(prefix + ".bias", role, block, std::move(b));
  return layer;
}

std::vector<double> sinusoidal_embed(double k, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("sinusoidal embedding width must be even and positive, got " +
                      std::to_string(dim));
  }
  if (k < 0) throw ConfigError("sinusoidal embedding step must be non-negative");
  std::vector<double> out(dim);
  const std::size_t half = dim / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    out[2 * i] = std::sin(k * freq);
    out[2 * i + 1] = std::cos(k * freq);
  }
  return out;
}

}  // namespace navgrpo::diff
