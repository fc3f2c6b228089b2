#include "navgrpo/diffcore/adam.hpp"

#include <cmath>

#include "navgrpo/common/errors.hpp"

namespace navgrpo::diff {

void Adam::step(ParamStore& store, const Gradients& grads, double lr) {
  std::size_t matched = 0;
  for (const auto& p : store) {
    if (!p.trainable) {
      if (grads.contains(p.name)) {
        throw UsageError("gradient supplied for frozen parameter " + p.name);
      }
      continue;
    }
    auto it = grads.find(p.name);
    if (it == grads.end()) throw UsageError("missing gradient for trainable parameter " + p.name);
    if (it->second.size() != p.value.size()) {
      throw UsageError("gradient shape mismatch for " + p.name);
    }
    ++matched;
  }
  if (matched != grads.size()) {
    throw UsageError("gradient set names parameters absent from the store");
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& p : store) {
    if (!p.trainable) continue;
    const Tensor& g = grads.at(p.name);
    auto [it, inserted] = moments_.try_emplace(p.name);
    Moments& m = it->second;
    if (inserted || m.first.size() != g.size()) {
      m.first = Tensor(p.value.shape(), 0.0);
      m.second = Tensor(p.value.shape(), 0.0);
    }
    double* w = p.value.data();
    double* m1 = m.first.data();
    double* m2 = m.second.data();
    const double* gd = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m1[i] = config_.beta1 * m1[i] + (1.0 - config_.beta1) * gd[i];
      m2[i] = config_.beta2 * m2[i] + (1.0 - config_.beta2) * gd[i] * gd[i];
      const double mhat = m1[i] / c1;
      const double vhat = m2[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::write(ByteWriter& w) const {
  w.put<double>(config_.beta1);
  w.put<double>(config_.beta2);
  w.put<double>(config_.eps);
  w.put<std::uint64_t>(steps_);
  w.put<std::uint64_t>(moments_.size());
  for (const auto& [name, m] : moments_) {
    w.put_string(name);
    w.put<std::uint64_t>(m.first.shape().size());
    for (auto d : m.first.shape()) w.put<std::uint64_t>(d);
    w.put_doubles(m.first.values());
    w.put_doubles(m.second.values());
  }
}

Adam Adam::read(ByteReader& r) {
  AdamConfig cfg;
  cfg.beta1 = r.get<double>();
  cfg.beta2 = r.get<double>();
  cfg.eps = r.get<double>();
  Adam adam(cfg);
  adam.steps_ = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.get_string();
    std::vector<std::size_t> shape(r.get<std::uint64_t>());
    for (auto& d : shape) d = r.get<std::uint64_t>();
    Moments m{Tensor(shape, r.get_doubles()), Tensor(shape, r.get_doubles())};
    adam.moments_.emplace(std::move(name), std::move(m));
  }
  return adam;
}

}  // namespace navgrpo::diff
