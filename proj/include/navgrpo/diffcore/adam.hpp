#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/diffcore/param_store.hpp"
#include "navgrpo/diffcore/tape.hpp"

namespace navgrpo::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// Adaptive-moment optimizer without weight decay. Only parameters flagged
// trainable are touched; their gradients must be supplied exactly.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParamStore& store, const Gradients& grads, double lr);

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

  void write(ByteWriter& w) const;
  static Adam read(ByteReader& r);

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  struct Moments {
    Tensor first;
    Tensor second;
    friend bool operator==(const Moments&, const Moments&) = default;
  };

  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace navgrpo::diff
