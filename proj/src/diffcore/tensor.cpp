#include "navgrpo/diffcore/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "navgrpo/common/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace navgrpo::diff {

namespace {

#if defined(__GLIBC__)
// Activations are large and short-lived; keep them on the heap instead of
// paying an mmap/munmap pair per tensor.
[[maybe_unused]] const bool heap_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return true;
}();
#endif

}  // namespace

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::span<const double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_product(shape_) != data_.size()) {
    throw ConfigError("tensor shape " + shape_string() + " does not match " +
                      std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, values);
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  return Tensor(std::move(shape), std::span<const double>(data_));
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace navgrpo::diff
