#include "evg/nn.hpp"

#include <algorithm>
#include <cmath>

#include "evg/detail/rng.hpp"
#include "evg/tensor.hpp"

namespace evg {

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace evg

namespace evg::nn {

template <typename T>
void im2col(const ConvGeometry& g, std::span<const T> input, std::span<T> cols) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int k = g.kernel;
  std::size_t row = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* plane = input.data() + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        T* dst = cols.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          T* d = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= g.in_height) {
            std::fill(d, d + ow, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.in_width;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            d[ox] = (ix >= 0 && ix < g.in_width) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, std::span<const T> cols, std::span<T> input_grad) {
  const int oh = g.out_height();
  const int ow = g.out_width();
  const int k = g.kernel;
  std::size_t row = 0;
  for (int c = 0; c < g.in_channels; ++c) {
    T* plane = input_grad.data() + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const T* src = cols.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.in_height) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.in_width;
          const T* s = src + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.in_width) dst[ix] += s[ox];
          }
        }
      }
    }
  }
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  // Eight independent partial sums: fixed order, vectorizable.
  T acc[8] = {};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
void conv_forward(const ConvGeometry& g, std::span<const T> cols, std::span<const T> weight,
                  std::span<const T> bias, std::span<T> out) {
  const int n = g.out_pixels();
  const int kk = g.patch_size();
  for (int oc = 0; oc < g.out_channels; ++oc) {
    T* o = out.data() + static_cast<std::size_t>(oc) * n;
    const T b = bias[oc];
    for (int i = 0; i < n; ++i) o[i] = b;
    const T* w = weight.data() + static_cast<std::size_t>(oc) * kk;
    for (int k = 0; k < kk; ++k) {
      const T wk = w[k];
      const T* c = cols.data() + static_cast<std::size_t>(k) * n;
      for (int i = 0; i < n; ++i) o[i] += wk * c[i];
    }
  }
}

template <typename T>
void conv_backward(const ConvGeometry& g, std::span<const T> cols, std::span<const T> weight,
                   std::span<const T> dout, std::span<T> dweight, std::span<T> dbias,
                   std::span<T> dcols) {
  const auto n = static_cast<std::size_t>(g.out_pixels());
  const int kk = g.patch_size();
  for (int oc = 0; oc < g.out_channels; ++oc) {
    const auto d = dout.subspan(oc * n, n);
    T sum = 0;
    for (T v : d) sum += v;
    dbias[oc] += sum;
    T* dw = dweight.data() + static_cast<std::size_t>(oc) * kk;
    for (int k = 0; k < kk; ++k) {
      dw[k] += dot<T>(d, cols.subspan(k * n, n));
    }
  }
  if (dcols.empty()) return;
  std::fill(dcols.begin(), dcols.end(), T{0});
  for (int oc = 0; oc < g.out_channels; ++oc) {
    const T* d = dout.data() + oc * n;
    const T* w = weight.data() + static_cast<std::size_t>(oc) * kk;
    for (int k = 0; k < kk; ++k) {
      const T wk = w[k];
      T* dc = dcols.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) dc[i] += wk * d[i];
    }
  }
}

template <typename T>
void dense_forward(std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                   std::span<T> out) {
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    out[o] = bias[o] + dot<T>(weight.subspan(o * in, in), x);
  }
}

template <typename T>
void dense_backward(std::span<const T> x, std::span<const T> weight, std::span<const T> dout,
                    std::span<T> dweight, std::span<T> dbias, std::span<T> dx) {
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < dout.size(); ++o) {
    const T d = dout[o];
    dbias[o] += d;
    T* dw = dweight.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) dw[i] += d * x[i];
  }
  if (dx.empty()) return;
  std::fill(dx.begin(), dx.end(), T{0});
  for (std::size_t o = 0; o < dout.size(); ++o) {
    const T d = dout[o];
    const T* w = weight.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) dx[i] += d * w[i];
  }
}

template <typename T>
void silu_forward(std::span<const T> z, std::span<T> a) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    const T s = T{1} / (T{1} + std::exp(-z[i]));
    a[i] = z[i] * s;
  }
}

template <typename T>
void silu_backward(std::span<const T> z, std::span<const T> da, std::span<T> dz) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    const T s = T{1} / (T{1} + std::exp(-z[i]));
    dz[i] = da[i] * s * (T{1} + z[i] * (T{1} - s));
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
  std::vector<T> mask(n, T{1});
  if (rate <= 0.0) return mask;
  detail::Rng rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform() < rate ? T{0} : keep_scale;
  return mask;
}

#define EVG_INSTANTIATE(T)                                                                         \
  template void im2col<T>(const ConvGeometry&, std::span<const T>, std::span<T>);                  \
  template void col2im_add<T>(const ConvGeometry&, std::span<const T>, std::span<T>);              \
  template void conv_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,       \
                                std::span<const T>, std::span<T>);                                 \
  template void conv_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,      \
                                 std::span<const T>, std::span<T>, std::span<T>, std::span<T>);    \
  template void dense_forward<T>(std::span<const T>, std::span<const T>, std::span<const T>,       \
                                 std::span<T>);                                                    \
  template void dense_backward<T>(std::span<const T>, std::span<const T>, std::span<const T>,      \
                                  std::span<T>, std::span<T>, std::span<T>);                       \
  template void silu_forward<T>(std::span<const T>, std::span<T>);                                 \
  template void silu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);            \
  template T dot<T>(std::span<const T>, std::span<const T>);                                       \
  template std::vector<T> dropout_mask<T>(std::size_t, double, std::uint64_t);

EVG_INSTANTIATE(float)
EVG_INSTANTIATE(double)
#undef EVG_INSTANTIATE

}  // namespace evg::nn
