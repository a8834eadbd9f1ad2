#include "c2s/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "c2s/errors.hpp"

namespace c2s {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->defined() && t->requires_grad(); });
}

void record(std::string_view op, std::function<void()> fn) { active_tape()->record(op, std::move(fn)); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// View of a [C x T] or [N x C x T] activation as N blocks of C x T.
struct Blocks {
  std::size_t n, c, t;
};

Blocks as_blocks(const Tensor& x, const char* op) {
  if (x.ndim() == 2) return {1, x.dim(0), x.dim(1)};
  if (x.ndim() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw ShapeError(std::string(op) + ": expected [C x T] or [N x C x T], got " + shape_string(x.shape()));
}

// cols[(ci*K + k), t] = x[ci, t - (K-1-k)*dilation], zero before the start.
void im2col(const float* x, std::size_t cin, std::size_t t, std::size_t k, std::size_t dilation, float* cols) {
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const float* row = x + ci * t;
    for (std::size_t kk = 0; kk < k; ++kk) {
      float* dst = cols + (ci * k + kk) * t;
      const std::size_t shift = (k - 1 - kk) * dilation;
      if (shift >= t) {
        std::fill(dst, dst + t, 0.0f);
        continue;
      }
      std::fill(dst, dst + shift, 0.0f);
      std::memcpy(dst + shift, row, (t - shift) * sizeof(float));
    }
  }
}

void col2im_add(const float* cols, std::size_t cin, std::size_t t, std::size_t k, std::size_t dilation, float* gx) {
  for (std::size_t ci = 0; ci < cin; ++ci) {
    float* row = gx + ci * t;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const float* src = cols + (ci * k + kk) * t;
      const std::size_t shift = (k - 1 - kk) * dilation;
      if (shift >= t) continue;
      for (std::size_t j = 0; j + shift < t; ++j) row[j] += src[j + shift];
    }
  }
}

using ArrayMap = Eigen::Map<Eigen::ArrayXf>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXf>;

// Reductions with a fixed lane structure. Eigen's vectorized sum on unaligned
// maps peels by address, which makes results depend on allocation alignment.
constexpr std::size_t kLanes = 8;

float lane_sum(const float* x, std::size_t n) {
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += x[i + l];
  }
  for (; i < n; ++i) acc[i % kLanes] += x[i];
  float total = 0.0f;
  for (float a : acc) total += a;
  return total;
}

float lane_centered_square_sum(const float* x, std::size_t n, float center) {
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += (x[i + l] - center) * (x[i + l] - center);
  }
  for (; i < n; ++i) acc[i % kLanes] += (x[i] - center) * (x[i] - center);
  float total = 0.0f;
  for (float a : acc) total += a;
  return total;
}

float lane_dot(const float* x, const float* y, std::size_t n) {
  float acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += x[i + l] * y[i + l];
  }
  for (; i < n; ++i) acc[i % kLanes] += x[i] * y[i];
  float total = 0.0f;
  for (float a : acc) total += a;
  return total;
}

// forward maps a whole input array to the output array at once.
template <typename F, typename G>
Tensor unary(const Tensor& x, const char* name, F forward, G derivative_from_output) {
  std::vector<float> out(x.numel());
  auto in = x.data();
  ArrayMap(out.data(), static_cast<Eigen::Index>(out.size())) =
      forward(ConstArrayMap(in.data(), static_cast<Eigen::Index>(in.size())));
  const bool rec = should_record({&x});
  Tensor y(x.shape(), std::move(out), rec);
  if (rec) {
    record(name, [x, y, derivative_from_output]() mutable {
      if (!y.has_grad() || !x.requires_grad()) return;
      auto gy = y.grad();
      auto yv = y.data();
      auto xv = x.data();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * derivative_from_output(xv[i], yv[i]);
    });
  }
  return y;
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
  if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1, got " + std::to_string(dilation));
  if (weight.ndim() != 3) throw ShapeError("conv1d: weight must be [C_out x C_in x K], got " + shape_string(weight.shape()));
  const auto geom = as_blocks(input, "conv1d");
  const std::size_t cout = weight.dim(0), cin = weight.dim(1), k = weight.dim(2);
  if (geom.c != cin) {
    throw ConfigError("conv1d: input has " + std::to_string(geom.c) + " channels but weight expects " +
                      std::to_string(cin));
  }
  if (bias.defined() && (bias.numel() != cout)) {
    throw ShapeError("conv1d: bias length " + std::to_string(bias.numel()) + " != C_out " + std::to_string(cout));
  }
  const std::size_t n = geom.n, t = geom.t, d = static_cast<std::size_t>(dilation);

  std::vector<float> out(n * cout * t);
  ConstMatrixMap w(weight.data().data(), cout, cin * k);
  RowMatrix cols(cin * k, t);
  for (std::size_t s = 0; s < n; ++s) {
    const float* xs = input.data().data() + s * cin * t;
    MatrixMap ys(out.data() + s * cout * t, cout, t);
    if (k == 1) {
      ys.noalias() = w * ConstMatrixMap(xs, cin, t);
    } else {
      im2col(xs, cin, t, k, d, cols.data());
      ys.noalias() = w * cols;
    }
    if (bias.defined()) {
      auto b = bias.data();
      for (std::size_t c = 0; c < cout; ++c) ys.row(c).array() += b[c];
    }
  }

  Shape out_shape = input.ndim() == 2 ? Shape{cout, t} : Shape{n, cout, t};
  const bool rec = should_record({&input, &weight, &bias});
  Tensor y(std::move(out_shape), std::move(out), rec);
  if (rec) {
    record("conv1d", [input, weight, bias, y, n, cin, cout, k, t, d]() mutable {
      if (!y.has_grad()) return;
      const float* gy = y.grad().data();
      ConstMatrixMap w(weight.data().data(), cout, cin * k);
      RowMatrix cols(cin * k, t);
      RowMatrix gcols(cin * k, t);
      const bool need_w = weight.requires_grad();
      const bool need_x = input.requires_grad();
      float* gw = need_w ? weight.mutable_grad().data() : nullptr;
      float* gx = need_x ? input.mutable_grad().data() : nullptr;
      for (std::size_t s = 0; s < n; ++s) {
        ConstMatrixMap gys(gy + s * cout * t, cout, t);
        const float* xs = input.data().data() + s * cin * t;
        if (need_w) {
          MatrixMap gwm(gw, cout, cin * k);
          if (k == 1) {
            gwm.noalias() += gys * ConstMatrixMap(xs, cin, t).transpose();
          } else {
            im2col(xs, cin, t, k, d, cols.data());
            gwm.noalias() += gys * cols.transpose();
          }
        }
        if (need_x) {
          if (k == 1) {
            MatrixMap(gx + s * cin * t, cin, t).noalias() += w.transpose() * gys;
          } else {
            gcols.noalias() = w.transpose() * gys;
            col2im_add(gcols.data(), cin, t, k, d, gx + s * cin * t);
          }
        }
      }
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t c = 0; c < cout; ++c) {
            const float* row = gy + (s * cout + c) * t;
            double acc = 0.0;
            for (std::size_t j = 0; j < t; ++j) acc += row[j];
            gb[c] += static_cast<float>(acc);
          }
        }
      }
    });
  }
  return y;
}

Tensor gated_unit(const Tensor& x, const Tensor& filter_weight, const Tensor& filter_bias,
                  const Tensor& gate_weight, const Tensor& gate_bias, int dilation) {
  if (filter_weight.shape() != gate_weight.shape()) {
    throw ShapeError("gated_unit: filter and gate weights differ: " + shape_string(filter_weight.shape()) +
                     " vs " + shape_string(gate_weight.shape()));
  }
  auto f = tanh(conv1d(x, filter_weight, filter_bias, dilation));
  auto g = sigmoid(conv1d(x, gate_weight, gate_bias, dilation));
  return mul(f, g);
}

BatchNormState BatchNormState::create(std::size_t channels, float momentum, float epsilon) {
  BatchNormState s;
  s.gamma = Tensor::full({channels}, 1.0f, true);
  s.beta = Tensor::zeros({channels}, true);
  s.running_mean.assign(channels, 0.0f);
  s.running_var.assign(channels, 1.0f);
  s.momentum = momentum;
  s.epsilon = epsilon;
  return s;
}

Tensor batchnorm1d(const Tensor& x, BatchNormState& state, Mode mode) {
  const auto geom = as_blocks(x, "batchnorm1d");
  const std::size_t n = geom.n, c = geom.c, t = geom.t;
  if (state.gamma.numel() != c || state.beta.numel() != c || state.running_mean.size() != c ||
      state.running_var.size() != c) {
    throw ShapeError("batchnorm1d: state has " + std::to_string(state.gamma.numel()) + " channels, input has " +
                     std::to_string(c));
  }
  const std::size_t count = n * t;
  if (mode == Mode::train && count < 2) {
    throw NumericError("batchnorm1d: train mode needs more than one value per channel (N*T = 1)");
  }
  auto xv = x.data();
  auto gamma = state.gamma.data();
  auto beta = state.beta.data();

  std::vector<float> xhat(x.numel());
  std::vector<float> inv_std(c);
  std::vector<float> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    float mean = 0.0f;
    float var = 0.0f;
    if (mode == Mode::train) {
      // Rows are summed in float lanes and combined in double.
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const float* row = xv.data() + (s * c + ch) * t;
        acc += lane_sum(row, t);
      }
      const double m = acc / static_cast<double>(count);
      const float mf = static_cast<float>(m);
      double acc2 = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const float* row = xv.data() + (s * c + ch) * t;
        acc2 += lane_centered_square_sum(row, t, mf);
      }
      const double v = acc2 / static_cast<double>(count);
      mean = static_cast<float>(m);
      var = static_cast<float>(v);
      const double unbiased = v * static_cast<double>(count) / static_cast<double>(count - 1);
      state.running_mean[ch] = state.momentum * state.running_mean[ch] + (1.0f - state.momentum) * mean;
      state.running_var[ch] =
          state.momentum * state.running_var[ch] + (1.0f - state.momentum) * static_cast<float>(unbiased);
    } else {
      mean = state.running_mean[ch];
      var = state.running_var[ch];
    }
    const float is = 1.0f / std::sqrt(var + state.epsilon);
    inv_std[ch] = is;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t base = (s * c + ch) * t;
      for (std::size_t j = 0; j < t; ++j) {
        const float h = (xv[base + j] - mean) * is;
        xhat[base + j] = h;
        out[base + j] = gamma[ch] * h + beta[ch];
      }
    }
  }

  const bool rec = should_record({&x, &state.gamma, &state.beta});
  Tensor y(x.shape(), std::move(out), rec);
  if (rec) {
    Tensor gamma_t = state.gamma, beta_t = state.beta;
    record("batchnorm1d", [x, y, gamma_t, beta_t, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, t,
                           mode]() mutable {
      if (!y.has_grad()) return;
      auto gy = y.grad();
      auto g = gamma_t.data();
      const double m = static_cast<double>(n * t);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t base = (s * c + ch) * t;
          sum_dy += lane_sum(gy.data() + base, t);
          sum_dy_xhat += lane_dot(gy.data() + base, xhat.data() + base, t);
        }
        if (gamma_t.requires_grad()) gamma_t.mutable_grad()[ch] += static_cast<float>(sum_dy_xhat);
        if (beta_t.requires_grad()) beta_t.mutable_grad()[ch] += static_cast<float>(sum_dy);
        if (!x.requires_grad()) continue;
        auto gx = x.mutable_grad();
        const float scale_ch = g[ch] * inv_std[ch];
        const float mean_dy = mode == Mode::train ? static_cast<float>(sum_dy / m) : 0.0f;
        const float mean_dy_xhat = mode == Mode::train ? static_cast<float>(sum_dy_xhat / m) : 0.0f;
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t base = (s * c + ch) * t;
          for (std::size_t j = 0; j < t; ++j) {
            gx[base + j] += scale_ch * (gy[base + j] - mean_dy - xhat[base + j] * mean_dy_xhat);
          }
        }
      }
    });
  }
  return y;
}

Tensor dropout(const Tensor& x, float rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0f) || rate >= 1.0f) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0f) return x;
  // Element i is kept when a splitmix64 hash of (seed, i) maps to u >= rate.
  std::vector<float> mask(x.numel());
  const float keep_scale = 1.0f / (1.0f - rate);
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(static_cast<double>(rate), 53));
  const std::uint64_t base = seed * 0x9E3779B97F4A7C15ull;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    std::uint64_t z = base + 0xD1B54A32D192ED03ull * (i + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    mask[i] = (z >> 11) >= threshold ? keep_scale : 0.0f;
  }
  std::vector<float> out(x.numel());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  const bool rec = should_record({&x});
  Tensor y(x.shape(), std::move(out), rec);
  if (rec) {
    record("dropout", [x, y, mask = std::move(mask)]() mutable {
      if (!y.has_grad() || !x.requires_grad()) return;
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const bool rec = should_record({&a, &b});
  Tensor y(a.shape(), std::move(out), rec);
  if (rec) {
    record("add", [a, b, y]() mutable {
      if (!y.has_grad()) return;
      auto gy = y.grad();
      for (const Tensor* in : {&a, &b}) {
        if (!in->requires_grad()) continue;
        auto g = in->mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool rec = should_record({&a, &b});
  Tensor y(a.shape(), std::move(out), rec);
  if (rec) {
    record("mul", [a, b, y]() mutable {
      if (!y.has_grad()) return;
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto bv = b.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        auto av = a.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, float factor) {
  return unary(
      a, "scale", [factor](const auto& v) { return v * factor; }, [factor](float, float) { return factor; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](const auto& v) { return v.tanh(); }, [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", [](const auto& v) { return v.logistic(); }, [](float, float y) { return y * (1.0f - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](const auto& v) { return v.max(0.0f); }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  const bool rec = should_record({&x});
  Tensor y({1}, {static_cast<float>(acc)}, rec);
  if (rec) {
    record("sum", [x, y]() mutable {
      if (!y.has_grad() || !x.requires_grad()) return;
      const float g = y.grad()[0];
      for (auto& v : x.mutable_grad()) v += g;
    });
  }
  return y;
}

Tensor slice_time(const Tensor& x, std::size_t start, std::size_t length) {
  const auto geom = as_blocks(x, "slice_time");
  if (length == 0 || start + length > geom.t) {
    throw ShapeError("slice_time: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside length " + std::to_string(geom.t));
  }
  const std::size_t rows = geom.n * geom.c;
  std::vector<float> out(rows * length);
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(out.data() + r * length, xv.data() + r * geom.t + start, length * sizeof(float));
  }
  Shape shape = x.shape();
  shape.back() = length;
  const bool rec = should_record({&x});
  Tensor y(std::move(shape), std::move(out), rec);
  if (rec) {
    const std::size_t t = geom.t;
    record("slice_time", [x, y, rows, t, start, length]() mutable {
      if (!y.has_grad() || !x.requires_grad()) return;
      auto gy = y.grad();
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < length; ++j) gx[r * t + start + j] += gy[r * length + j];
      }
    });
  }
  return y;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  auto p = pred.data(), q = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - q[i];
    acc += d * d;
  }
  const double count = static_cast<double>(p.size());
  const bool rec = should_record({&pred, &target});
  Tensor y({1}, {static_cast<float>(acc / count)}, rec);
  if (rec) {
    record("mse_loss", [pred, target, y, count]() mutable {
      if (!y.has_grad()) return;
      const float g = y.grad()[0];
      auto p = pred.data(), q = target.data();
      const float k = static_cast<float>(2.0 / count) * g;
      if (pred.requires_grad()) {
        auto gp = pred.mutable_grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += k * (p[i] - q[i]);
      }
      if (target.requires_grad()) {
        auto gt = target.mutable_grad();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= k * (p[i] - q[i]);
      }
    });
  }
  return y;
}

}  // namespace c2s
