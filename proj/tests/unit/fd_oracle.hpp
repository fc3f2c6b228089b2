#pragma once

// Central finite-difference oracle shared by the gradient tests. It only
// perturbs parameter values and re-evaluates the caller's loss function; it
// never touches the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "navgrpo/diffcore/param_store.hpp"
#include "navgrpo/diffcore/tape.hpp"

namespace navgrpo::testing {

struct FdReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
  std::string worst_name;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Compares every entry of every trainable parameter.
inline FdReport check_gradients(diff::ParamStore& store, const diff::Gradients& grads,
                                const std::function<double(const diff::ParamStore&)>& loss,
                                double step, double tolerance, double floor = 1e-6) {
  FdReport rep;
  for (auto& p : store) {
    if (!p.trainable) continue;
    const diff::Tensor& g = grads.at(p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + step;
      const double up = loss(store);
      p.value[i] = orig - step;
      const double down = loss(store);
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double rel = relative_error(g[i], numeric, floor);
      ++rep.checked;
      if (rel >= tolerance) ++rep.failed;
      if (rel > rep.worst_rel) {
        rep.worst_rel = rel;
        rep.worst_name = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace navgrpo::testing
