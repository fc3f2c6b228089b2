#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "navgrpo/common/errors.hpp"
#include "navgrpo/diffcore/tape.hpp"

namespace navgrpo::diff::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw UsageError("operands recorded on different tapes");
  }
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.size() != b.size() || a.rows() != b.rows()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                      b.shape_string());
  }
}

template <typename F>
Var unary(Var a, F&& forward_fn, Tape::Backprop backprop) {
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward_fn(x[i]);
  const Var inputs[] = {a};
  return tape.record(std::move(y), inputs, std::move(backprop));
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = tape_of(x, weight);
  tape_of(x, bias);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (wv.shape().size() != 2 || xv.cols() != wv.rows()) {
    throw ConfigError("linear: input width " + std::to_string(xv.cols()) +
                      " does not match weight " + wv.shape_string());
  }
  if (bv.size() != wv.cols()) {
    throw ConfigError("linear: bias " + bv.shape_string() + " does not match weight " +
                      wv.shape_string());
  }
  Tensor y = Tensor::matrix(xv.rows(), wv.cols());
  auto ym = as_matrix(y);
  ym.noalias() = as_matrix(xv) * as_matrix(wv);
  Eigen::Map<const Eigen::RowVectorXd> b(bv.data(), static_cast<Eigen::Index>(bv.size()));
  ym.rowwise() += b;
  const Var inputs[] = {x, weight, bias};
  return tape.record(std::move(y), inputs, [x, weight, bias](Tape& t, const Tensor& g) {
    auto gm = as_matrix(g);
    if (x.requires_grad()) {
      Tensor dx = Tensor(x.value().shape());
      as_matrix(dx).noalias() = gm * as_matrix(weight.value()).transpose();
      t.accumulate(x, dx);
    }
    if (weight.requires_grad()) {
      Tensor dw = Tensor(weight.value().shape());
      as_matrix(dw).noalias() = as_matrix(x.value()).transpose() * gm;
      t.accumulate(weight, dw);
    }
    if (bias.requires_grad()) {
      Tensor db = Tensor(bias.value().shape());
      Eigen::Map<Eigen::RowVectorXd>(db.data(), static_cast<Eigen::Index>(db.size())) =
          gm.colwise().sum();
      t.accumulate(bias, db);
    }
  });
}

Var gelu(Var x) {
  return unary(
      x, [](double v) { return v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)); },
      [x](Tape& t, const Tensor& g) {
        const Tensor& xv = x.value();
        Tensor dx(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) {
          const double v = xv[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
          dx[i] = g[i] * (cdf + v * pdf);
        }
        t.accumulate(x, dx);
      });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const Var inputs[] = {a, b};
  return tape.record(std::move(y), inputs, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const Var inputs[] = {a, b};
  return tape.record(std::move(y), inputs, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) {
      Tensor nb = g;
      for (auto& v : nb.storage()) v = -v;
      t.accumulate(b, nb);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const Var inputs[] = {a, b};
  return tape.record(std::move(y), inputs, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor da = g;
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] *= bv[i];
      t.accumulate(a, da);
    }
    if (b.requires_grad()) {
      Tensor db = g;
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] *= av[i];
      t.accumulate(b, db);
    }
  });
}

Var scale(Var a, double s) {
  return unary(
      a, [s](double v) { return v * s; },
      [a, s](Tape& t, const Tensor& g) {
        Tensor da = g;
        for (auto& v : da.storage()) v *= s;
        t.accumulate(a, da);
      });
}

Var add_scalar(Var a, double s) {
  return unary(
      a, [s](double v) { return v + s; }, [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

Var scale_rows(Var a, std::span<const double> factors) {
  const Tensor& av = a.value();
  if (factors.size() != av.rows()) throw ConfigError("scale_rows: factor count mismatch");
  std::vector<double> f(factors.begin(), factors.end());
  Tensor y = av;
  const std::size_t cols = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] *= f[r];
  }
  const Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [a, f = std::move(f)](Tape& t, const Tensor& g) {
    Tensor da = g;
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] *= f[r];
    }
    t.accumulate(a, da);
  });
}

Var square(Var a) {
  return unary(
      a, [](double v) { return v * v; },
      [a](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 2.0 * av[i];
        t.accumulate(a, da);
      });
}

Var exp(Var a) {
  Tape& tape = *a.tape();
  Tensor y = a.value();
  for (auto& v : y.storage()) v = std::exp(v);
  Tensor saved = y;
  const Var inputs[] = {a};
  return tape.record(std::move(y), inputs, [a, saved = std::move(saved)](Tape& t, const Tensor& g) {
    Tensor da = g;
    for (std::size_t i = 0; i < da.size(); ++i) da[i] *= saved[i];
    t.accumulate(a, da);
  });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [a, lo, hi](Tape& t, const Tensor& g) {
        const Tensor& av = a.value();
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) {
          if (!(av[i] > lo && av[i] < hi)) da[i] = 0.0;
        }
        t.accumulate(a, da);
      });
}

Var minimum(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "minimum");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.shape());
  std::vector<bool> pick_a(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    pick_a[i] = av[i] <= bv[i];
    y[i] = pick_a[i] ? av[i] : bv[i];
  }
  const Var inputs[] = {a, b};
  return tape.record(std::move(y), inputs,
                     [a, b, pick_a = std::move(pick_a)](Tape& t, const Tensor& g) {
                       Tensor da = g;
                       Tensor db = g;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (pick_a[i]) {
                           db[i] = 0.0;
                         } else {
                           da[i] = 0.0;
                         }
                       }
                       t.accumulate(a, da);
                       t.accumulate(b, db);
                     });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  Tape& tape = *parts[0].tape();
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    if (p.value().rows() != rows) throw ConfigError("concat_cols: row count mismatch");
    cols += p.value().cols();
  }
  Tensor y = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t pc = pv.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * pc, pc, y.data() + r * cols + offset);
    }
    offset += pc;
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return tape.record(std::move(y), parts, [ins = std::move(ins)](Tape& t, const Tensor& g) {
    const std::size_t rows = g.rows();
    const std::size_t cols = g.cols();
    std::size_t offset = 0;
    for (const Var& p : ins) {
      const std::size_t pc = p.value().cols();
      if (p.requires_grad()) {
        Tensor dp(p.value().shape());
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(g.data() + r * cols + offset, pc, dp.data() + r * pc);
        }
        t.accumulate(p, dp);
      }
      offset += pc;
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  Tensor y = Tensor::matrix(index.size(), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows()) throw UsageError("gather_rows: index out of range");
    std::copy_n(av.data() + index[i] * cols, cols, y.data() + i * cols);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
    Tensor da(a.value().shape());
    const std::size_t cols = g.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < cols; ++c) da[idx[i] * cols + c] += g[i * cols + c];
    }
    t.accumulate(a, da);
  });
}

Var row_sum(Var a) {
  const Tensor& av = a.value();
  const std::size_t rows = av.rows();
  const std::size_t cols = av.cols();
  Tensor y = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += av[r * cols + c];
    y[r] = s;
  }
  const Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [a](Tape& t, const Tensor& g) {
    Tensor da(a.value().shape());
    const std::size_t cols = da.cols();
    for (std::size_t r = 0; r < da.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] = g[r];
    }
    t.accumulate(a, da);
  });
}

Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t segments) {
  const Tensor& av = a.value();
  if (segment.size() != av.rows()) throw ConfigError("segment_sum: segment ids must cover rows");
  const std::size_t cols = av.cols();
  Tensor y = Tensor::matrix(segments, cols);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    if (segment[r] >= segments) throw UsageError("segment_sum: segment id out of range");
    for (std::size_t c = 0; c < cols; ++c) y[segment[r] * cols + c] += av[r * cols + c];
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const Var inputs[] = {a};
  return a.tape()->record(std::move(y), inputs, [a, seg = std::move(seg)](Tape& t, const Tensor& g) {
    Tensor da(a.value().shape());
    const std::size_t cols = da.cols();
    for (std::size_t r = 0; r < seg.size(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] = g[seg[r] * cols + c];
    }
    t.accumulate(a, da);
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const Var inputs[] = {a};
  return a.tape()->record(Tensor::scalar(s), inputs, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor(a.value().shape(), g[0]));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw UsageError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

}  // namespace navgrpo::diff::ops
