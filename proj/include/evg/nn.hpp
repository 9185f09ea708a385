#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace evg::nn {

// Layer primitives with explicit backward passes. Activations are CHW.
// Explicitly instantiated for float and double.

struct ConvGeometry {
  int in_channels = 0, in_height = 0, in_width = 0;
  int out_channels = 0, kernel = 3, stride = 1, pad = 1;

  int out_height() const noexcept { return (in_height + 2 * pad - kernel) / stride + 1; }
  int out_width() const noexcept { return (in_width + 2 * pad - kernel) / stride + 1; }
  int patch_size() const noexcept { return in_channels * kernel * kernel; }
  int out_pixels() const noexcept { return out_height() * out_width(); }
  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * patch_size();
  }
};

/// cols is (patch_size x out_pixels).
template <typename T>
void im2col(const ConvGeometry& g, std::span<const T> input, std::span<T> cols);

template <typename T>
void col2im_add(const ConvGeometry& g, std::span<const T> cols, std::span<T> input_grad);

/// out (out_channels x out_pixels) = W * cols + b.
template <typename T>
void conv_forward(const ConvGeometry& g, std::span<const T> cols, std::span<const T> weight,
                  std::span<const T> bias, std::span<T> out);

/// Accumulates dW and db; writes dcols when non-empty.
template <typename T>
void conv_backward(const ConvGeometry& g, std::span<const T> cols, std::span<const T> weight,
                   std::span<const T> dout, std::span<T> dweight, std::span<T> dbias,
                   std::span<T> dcols);

/// out = W x + b with W (out x in).
template <typename T>
void dense_forward(std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                   std::span<T> out);

/// Accumulates dW, db; overwrites dx when non-empty.
template <typename T>
void dense_backward(std::span<const T> x, std::span<const T> weight, std::span<const T> dout,
                    std::span<T> dweight, std::span<T> dbias, std::span<T> dx);

template <typename T>
void silu_forward(std::span<const T> z, std::span<T> a);

/// dz = da * silu'(z).
template <typename T>
void silu_backward(std::span<const T> z, std::span<const T> da, std::span<T> dz);

template <typename T>
T dot(std::span<const T> a, std::span<const T> b);

double sigmoid(double z);

/// Inverted dropout mask: each entry 0 or 1/(1-rate).
template <typename T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::uint64_t seed);

}  // namespace evg::nn
