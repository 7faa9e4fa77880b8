// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>

namespace coala {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t stride_h, stride_w;
  std::size_t pad_h, pad_w;
  std::size_t out_h, out_w;

  std::size_t col_rows() const { return channels * kernel_h * kernel_w; }
  std::size_t col_cols() const { return out_h * out_w; }
};

// Output columns [lo, hi) whose tap j lands inside the image row.
inline std::pair<std::size_t, std::size_t> valid_columns(const ConvGeometry& g, std::size_t j) {
  std::size_t lo = 0;
  while (lo < g.out_w && lo * g.stride_w + j < g.pad_w) ++lo;
  std::size_t hi = g.out_w;
  while (hi > lo && (hi - 1) * g.stride_w + j >= g.pad_w + g.width) --hi;
  return {lo, hi};
}

// cols[(c*kh + i)*kw + j][oy*out_w + ox] = image[c][oy*sh - ph + i][ox*sw - pw + j]
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* channel = image + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        T* row = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride_h + i) -
                                   static_cast<std::ptrdiff_t>(g.pad_h);
          T* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = channel + static_cast<std::size_t>(y) * g.width;
          const auto [lo, hi] = valid_columns(g, j);
          std::fill(dst, dst + lo, T(0));
          const T* s = src + lo * g.stride_w + j - g.pad_w;
          for (std::size_t ox = lo; ox < hi; ++ox, s += g.stride_w) dst[ox] = *s;
          std::fill(dst + hi, dst + g.out_w, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: scatters (accumulates) columns back into the image.
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t plane = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* channel = image + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kernel_h; ++i) {
      for (std::size_t j = 0; j < g.kernel_w; ++j) {
        const T* row = cols + ((c * g.kernel_h + i) * g.kernel_w + j) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride_h + i) -
                                   static_cast<std::ptrdiff_t>(g.pad_h);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = channel + static_cast<std::size_t>(y) * g.width;
          const T* src = row + oy * g.out_w;
          const auto [lo, hi] = valid_columns(g, j);
          T* d = dst + lo * g.stride_w + j - g.pad_w;
          for (std::size_t ox = lo; ox < hi; ++ox, d += g.stride_w) *d += src[ox];
        }
      }
    }
  }
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* op, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " +
                         (t.defined() ? shape_to_string(t.shape()) : std::string("<undefined>")));
  }
}

template <typename T>
void check_bias(const BasicTensor<T>& bias, std::size_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw DimensionError(std::string(op) + ": bias shape " + shape_to_string(bias.shape()) +
                         " does not match " + std::to_string(channels) + " output channels");
  }
}

template <typename T>
std::vector<NodePtr<T>> parents_of(std::initializer_list<const BasicTensor<T>*> tensors) {
  std::vector<NodePtr<T>> out;
  for (const auto* t : tensors) {
    if (t->defined()) out.push_back(t->node());
  }
  return out;
}

template <typename T>
bool wants_grad(const NodePtr<T>& node) {
  return node && node->requires_grad;
}

}  // namespace

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0 || kernel == 0) throw DimensionError("conv: kernel and stride must be positive");
  if (input + 2 * padding < kernel) {
    throw DimensionError("conv: padded input " + std::to_string(input + 2 * padding) +
                         " smaller than kernel " + std::to_string(kernel));
  }
  return (input + 2 * padding - kernel) / stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t input, std::size_t kernel,
                                       std::size_t stride, std::size_t padding) {
  if (stride == 0 || kernel == 0 || input == 0) {
    throw DimensionError("conv_transpose: kernel, stride and input must be positive");
  }
  const std::size_t full = (input - 1) * stride + kernel;
  if (full <= 2 * padding) throw DimensionError("conv_transpose: padding consumes the output");
  return full - 2 * padding;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dOptions& options) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (input.dim(1) != weight.dim(1)) {
    throw DimensionError("conv2d: input " + shape_to_string(input.shape()) +
                         " has channels incompatible with weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t out_channels = weight.dim(0);
  check_bias(bias, out_channels, "conv2d");

  ConvGeometry g{};
  g.channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride_h = options.stride[0];
  g.stride_w = options.stride[1];
  g.pad_h = options.padding[0];
  g.pad_w = options.padding[1];
  g.out_h = conv_output_size(g.height, g.kernel_h, g.stride_h, g.pad_h);
  g.out_w = conv_output_size(g.width, g.kernel_w, g.stride_w, g.pad_w);

  const std::size_t in_plane = g.channels * g.height * g.width;
  const std::size_t out_plane = out_channels * g.col_cols();
  std::vector<T> out(batch * out_plane);
  std::vector<T> cols(g.col_rows() * g.col_cols());
  ConstMatMap<T> w(weight.data().data(), out_channels, g.col_rows());
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(input.data().data() + b * in_plane, g, cols.data());
    MatMap<T> y(out.data() + b * out_plane, out_channels, g.col_cols());
    y.noalias() = w * ConstMatMap<T>(cols.data(), g.col_rows(), g.col_cols());
    if (bias.defined()) {
      for (std::size_t c = 0; c < out_channels; ++c) y.row(c).array() += bias.data()[c];
    }
  }

  auto in_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  return make_result<T>(
      "conv2d", Shape{batch, out_channels, g.out_h, g.out_w}, std::move(out),
      parents_of<T>({&input, &weight, &bias}),
      [in_node, w_node, b_node, g, batch, out_channels, in_plane, out_plane](TensorNode<T>& self) {
        std::vector<T> cols(g.col_rows() * g.col_cols());
        ConstMatMap<T> w(w_node->data.data(), out_channels, g.col_rows());
        const bool grad_w = wants_grad(w_node);
        const bool grad_in = wants_grad(in_node);
        const bool grad_b = wants_grad(b_node);
        RowMat<T> dcols;
        for (std::size_t b = 0; b < batch; ++b) {
          ConstMatMap<T> dy(self.grad.data() + b * out_plane, out_channels, g.col_cols());
          if (grad_w) {
            im2col(in_node->data.data() + b * in_plane, g, cols.data());
            MatMap<T> dw(w_node->ensure_grad().data(), out_channels, g.col_rows());
            dw.noalias() += dy * ConstMatMap<T>(cols.data(), g.col_rows(), g.col_cols()).transpose();
          }
          if (grad_b) {
            auto& db = b_node->ensure_grad();
            for (std::size_t c = 0; c < out_channels; ++c) db[c] += dy.row(c).sum();
          }
          if (grad_in) {
            dcols.noalias() = w.transpose() * dy;
            col2im(dcols.data(), g, in_node->ensure_grad().data() + b * in_plane);
          }
        }
      });
}

template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                                const BasicTensor<T>& bias, const Conv2dOptions& options) {
  require_rank(input, 4, "conv_transpose2d", "input");
  require_rank(weight, 4, "conv_transpose2d", "weight");
  if (input.dim(1) != weight.dim(0)) {
    throw DimensionError("conv_transpose2d: input " + shape_to_string(input.shape()) +
                         " has channels incompatible with weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t in_channels = input.dim(1);
  const std::size_t out_channels = weight.dim(1);
  check_bias(bias, out_channels, "conv_transpose2d");

  // Geometry of the convolution whose input-adjoint this op is: it maps the
  // output image [Cout,Ho,Wo] to columns over the input grid [H,W].
  ConvGeometry g{};
  g.channels = out_channels;
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride_h = options.stride[0];
  g.stride_w = options.stride[1];
  g.pad_h = options.padding[0];
  g.pad_w = options.padding[1];
  g.height = conv_transpose_output_size(input.dim(2), g.kernel_h, g.stride_h, g.pad_h);
  g.width = conv_transpose_output_size(input.dim(3), g.kernel_w, g.stride_w, g.pad_w);
  g.out_h = input.dim(2);
  g.out_w = input.dim(3);
  if (conv_output_size(g.height, g.kernel_h, g.stride_h, g.pad_h) != g.out_h ||
      conv_output_size(g.width, g.kernel_w, g.stride_w, g.pad_w) != g.out_w) {
    throw DimensionError("conv_transpose2d: geometry of input " + shape_to_string(input.shape()) +
                         " is not invertible for weight " + shape_to_string(weight.shape()));
  }

  const std::size_t in_plane = in_channels * g.col_cols();
  const std::size_t out_plane = out_channels * g.height * g.width;
  std::vector<T> out(batch * out_plane, T(0));
  RowMat<T> cols;
  ConstMatMap<T> w(weight.data().data(), in_channels, g.col_rows());
  for (std::size_t b = 0; b < batch; ++b) {
    ConstMatMap<T> x(input.data().data() + b * in_plane, in_channels, g.col_cols());
    cols.noalias() = w.transpose() * x;
    T* y = out.data() + b * out_plane;
    col2im(cols.data(), g, y);
    if (bias.defined()) {
      const std::size_t plane = g.height * g.width;
      for (std::size_t c = 0; c < out_channels; ++c) {
        std::for_each(y + c * plane, y + (c + 1) * plane, [&](T& v) { v += bias.data()[c]; });
      }
    }
  }

  auto in_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  return make_result<T>(
      "conv_transpose2d", Shape{batch, out_channels, g.height, g.width}, std::move(out),
      parents_of<T>({&input, &weight, &bias}),
      [in_node, w_node, b_node, g, batch, in_channels, out_channels, in_plane,
       out_plane](TensorNode<T>& self) {
        std::vector<T> dcols(g.col_rows() * g.col_cols());
        ConstMatMap<T> w(w_node->data.data(), in_channels, g.col_rows());
        const bool grad_w = wants_grad(w_node);
        const bool grad_in = wants_grad(in_node);
        const std::size_t plane = g.height * g.width;
        for (std::size_t b = 0; b < batch; ++b) {
          const T* dy = self.grad.data() + b * out_plane;
          if (wants_grad(b_node)) {
            auto& db = b_node->ensure_grad();
            for (std::size_t c = 0; c < out_channels; ++c) {
              T acc = T(0);
              for (std::size_t k = 0; k < plane; ++k) acc += dy[c * plane + k];
              db[c] += acc;
            }
          }
          if (!grad_w && !grad_in) continue;
          im2col(dy, g, dcols.data());
          ConstMatMap<T> dc(dcols.data(), g.col_rows(), g.col_cols());
          if (grad_in) {
            MatMap<T> dx(in_node->ensure_grad().data() + b * in_plane, in_channels, g.col_cols());
            dx.noalias() += w * dc;
          }
          if (grad_w) {
            ConstMatMap<T> x(in_node->data.data() + b * in_plane, in_channels, g.col_cols());
            MatMap<T> dw(w_node->ensure_grad().data(), in_channels, g.col_rows());
            dw.noalias() += x * dc.transpose();
          }
        }
      });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  require_rank(input, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  if (input.dim(1) != weight.dim(1)) {
    throw DimensionError("linear: input " + shape_to_string(input.shape()) +
                         " incompatible with weight " + shape_to_string(weight.shape()));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t in_features = input.dim(1);
  const std::size_t out_features = weight.dim(0);
  check_bias(bias, out_features, "linear");

  std::vector<T> out(batch * out_features);
  MatMap<T> y(out.data(), batch, out_features);
  ConstMatMap<T> x(input.data().data(), batch, in_features);
  ConstMatMap<T> w(weight.data().data(), out_features, in_features);
  y.noalias() = x * w.transpose();
  if (bias.defined()) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data().data(), out_features);
    y.rowwise() += b;
  }

  auto in_node = input.node();
  auto w_node = weight.node();
  auto b_node = bias.defined() ? bias.node() : nullptr;
  return make_result<T>(
      "linear", Shape{batch, out_features}, std::move(out), parents_of<T>({&input, &weight, &bias}),
      [in_node, w_node, b_node, batch, in_features, out_features](TensorNode<T>& self) {
        ConstMatMap<T> dy(self.grad.data(), batch, out_features);
        if (wants_grad(in_node)) {
          MatMap<T> dx(in_node->ensure_grad().data(), batch, in_features);
          dx.noalias() += dy * ConstMatMap<T>(w_node->data.data(), out_features, in_features);
        }
        if (wants_grad(w_node)) {
          MatMap<T> dw(w_node->ensure_grad().data(), out_features, in_features);
          dw.noalias() += dy.transpose() * ConstMatMap<T>(in_node->data.data(), batch, in_features);
        }
        if (wants_grad(b_node)) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(b_node->ensure_grad().data(),
                                                            out_features);
          db += dy.colwise().sum();
        }
      });
}

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                         const BasicTensor<T>& beta, BatchNormStats<T>& stats, bool training) {
  if (!input.defined() || input.rank() < 2) {
    throw DimensionError("batchnorm: input must be [B,C,...]");
  }
  const std::size_t batch = input.dim(0);
  const std::size_t channels = input.dim(1);
  if (gamma.numel() != channels || beta.numel() != channels ||
      stats.running_mean.size() != channels || stats.running_var.size() != channels) {
    throw DimensionError("batchnorm: parameters do not match " + std::to_string(channels) +
                         " channels of input " + shape_to_string(input.shape()));
  }
  if (training && batch < 2) {
    throw NumericalError("batchnorm: training mode needs a batch of at least 2 (variance undefined)");
  }
  const std::size_t spatial = input.numel() / (batch * channels);
  const std::size_t count = batch * spatial;
  const double eps = stats.eps;

  auto x = input.data();
  auto normalized = std::make_shared<std::vector<T>>(input.numel());
  auto inv_std = std::make_shared<std::vector<T>>(channels);
  std::vector<T> out(input.numel());

  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (training) {
      for (std::size_t b = 0; b < batch; ++b) {
        mean += ConstArrMap<T>(x.data() + (b * channels + c) * spatial, spatial).template cast<double>().sum();
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < batch; ++b) {
        ConstArrMap<T> p(x.data() + (b * channels + c) * spatial, spatial);
        var += (p.template cast<double>() - mean).square().sum();
      }
      var /= static_cast<double>(count);
      const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
      stats.running_mean[c] =
          static_cast<T>((1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * mean);
      stats.running_var[c] =
          static_cast<T>((1.0 - stats.momentum) * stats.running_var[c] + stats.momentum * unbiased);
    } else {
      mean = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[c] = static_cast<T>(istd);
    const T g = gamma.data()[c];
    const T bt = beta.data()[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t offset = (b * channels + c) * spatial;
      ArrMap<T> xh(normalized->data() + offset, spatial);
      xh = ((ConstArrMap<T>(x.data() + offset, spatial).template cast<double>() - mean) * istd).template cast<T>();
      ArrMap<T>(out.data() + offset, spatial) = g * xh + bt;
    }
  }

  auto in_node = input.node();
  auto g_node = gamma.node();
  auto b_node = beta.node();
  return make_result<T>(
      "batchnorm", input.shape(), std::move(out), parents_of<T>({&input, &gamma, &beta}),
      [in_node, g_node, b_node, normalized, inv_std, training, batch, channels, spatial,
       count](TensorNode<T>& self) {
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xh = 0.0;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t offset = (b * channels + c) * spatial;
            ConstArrMap<T> dy(self.grad.data() + offset, spatial);
            ConstArrMap<T> xh(normalized->data() + offset, spatial);
            sum_dy += dy.template cast<double>().sum();
            sum_dy_xh += (dy.template cast<double>() * xh.template cast<double>()).sum();
          }
          if (wants_grad(g_node)) g_node->ensure_grad()[c] += static_cast<T>(sum_dy_xh);
          if (wants_grad(b_node)) b_node->ensure_grad()[c] += static_cast<T>(sum_dy);
          if (!wants_grad(in_node)) continue;
          auto& dx = in_node->ensure_grad();
          const T scale = g_node->data[c] * (*inv_std)[c];
          const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(count));
          const T mean_dy_xh = static_cast<T>(sum_dy_xh / static_cast<double>(count));
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t offset = (b * channels + c) * spatial;
            ConstArrMap<T> dy(self.grad.data() + offset, spatial);
            ConstArrMap<T> xh(normalized->data() + offset, spatial);
            ArrMap<T> d(dx.data() + offset, spatial);
            if (training) {
              d += scale * (dy - mean_dy - xh * mean_dy_xh);
            } else {
              d += scale * dy;
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  auto in_node = input.node();
  return make_result<T>("relu", input.shape(), std::move(out), {in_node},
                        [in_node](TensorNode<T>& self) {
                          auto& dx = in_node->ensure_grad();
                          for (std::size_t i = 0; i < dx.size(); ++i) {
                            if (self.data[i] > T(0)) dx[i] += self.grad[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input) {
  std::vector<T> out(input.numel());
  auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (x[i] >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      out[i] = e / (T(1) + e);
    }
  }
  auto in_node = input.node();
  return make_result<T>("sigmoid", input.shape(), std::move(out), {in_node},
                        [in_node](TensorNode<T>& self) {
                          auto& dx = in_node->ensure_grad();
                          for (std::size_t i = 0; i < dx.size(); ++i) {
                            const T y = self.data[i];
                            dx[i] += self.grad[i] * y * (T(1) - y);
                          }
                        });
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& input, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return input;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(input.numel());
  std::vector<T> out(input.numel());
  auto x = input.data();
  // One draw from `rng` seeds a SplitMix64 stream; each 64-bit output
  // decides two elements through its 32-bit halves.
  std::uint64_t state = rng.next();
  const auto threshold = static_cast<std::uint64_t>(std::ldexp(rate, 32));
  T* m = mask->data();
  for (std::size_t i = 0; i < out.size(); i += 2) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    m[i] = (z & 0xFFFFFFFFULL) < threshold ? T(0) : keep_scale;
    if (i + 1 < out.size()) m[i + 1] = (z >> 32) < threshold ? T(0) : keep_scale;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * m[i];
  auto in_node = input.node();
  return make_result<T>("dropout", input.shape(), std::move(out), {in_node},
                        [in_node, mask](TensorNode<T>& self) {
                          auto& dx = in_node->ensure_grad();
                          for (std::size_t i = 0; i < dx.size(); ++i) {
                            dx[i] += self.grad[i] * (*mask)[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(input.shape()) + " as " +
                         shape_to_string(shape));
  }
  auto in_node = input.node();
  return make_result<T>("reshape", std::move(shape),
                        std::vector<T>(input.data().begin(), input.data().end()), {in_node},
                        [in_node](TensorNode<T>& self) {
                          auto& dx = in_node->ensure_grad();
                          for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
                        });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input) {
  T total = T(0);
  for (T v : input.data()) total += v;
  auto in_node = input.node();
  return make_result<T>("sum", Shape{1}, std::vector<T>{total}, {in_node},
                        [in_node](TensorNode<T>& self) {
                          auto& dx = in_node->ensure_grad();
                          for (T& g : dx) g += self.grad[0];
                        });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto a_node = a.node();
  auto b_node = b.node();
  return make_result<T>("mul", a.shape(), std::move(out), {a_node, b_node},
                        [a_node, b_node](TensorNode<T>& self) {
                          if (wants_grad(a_node)) {
                            auto& da = a_node->ensure_grad();
                            for (std::size_t i = 0; i < da.size(); ++i) {
                              da[i] += self.grad[i] * b_node->data[i];
                            }
                          }
                          if (wants_grad(b_node)) {
                            auto& db = b_node->ensure_grad();
                            for (std::size_t i = 0; i < db.size(); ++i) {
                              db[i] += self.grad[i] * a_node->data[i];
                            }
                          }
                        });
}

template <typename T>
BasicTensor<T> weighted_sum(const std::vector<BasicTensor<T>>& terms,
                            const std::vector<double>& weights) {
  if (terms.size() != weights.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(terms.size()) + " terms but " +
                         std::to_string(weights.size()) + " weights");
  }
  T total = T(0);
  std::vector<NodePtr<T>> parents;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].numel() != 1) {
      throw DimensionError("weighted_sum: term " + std::to_string(i) + " is not scalar");
    }
    total += static_cast<T>(weights[i]) * terms[i].item();
    parents.push_back(terms[i].node());
  }
  return make_result<T>("weighted_sum", Shape{1}, std::vector<T>{total}, parents,
                        [parents, weights](TensorNode<T>& self) {
                          for (std::size_t i = 0; i < parents.size(); ++i) {
                            if (wants_grad(parents[i])) {
                              parents[i]->ensure_grad()[0] +=
                                  static_cast<T>(weights[i]) * self.grad[0];
                            }
                          }
                        });
}

#define COALA_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                 const BasicTensor<T>&, const Conv2dOptions&);                \
  template BasicTensor<T> conv_transpose2d(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                           const BasicTensor<T>&, const Conv2dOptions&);      \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                 const BasicTensor<T>&);                                      \
  template BasicTensor<T> batchnorm(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                    const BasicTensor<T>&, BatchNormStats<T>&, bool);         \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                        \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                     \
  template BasicTensor<T> dropout(const BasicTensor<T>&, double, bool, Rng&);                 \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                              \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                         \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> weighted_sum(const std::vector<BasicTensor<T>>&,                    \
                                       const std::vector<double>&);

COALA_INSTANTIATE_OPS(float)
COALA_INSTANTIATE_OPS(double)

}  // namespace coala
