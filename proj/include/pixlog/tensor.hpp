#pragma once

// Minimal dense tensor plus the matmul/im2col kernels behind the conv nets.
// Everything is row-major and templated on the scalar so the same layer code
// runs in float for training and double for finite-difference checks.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pixlog/common.hpp"

namespace pixlog {

template <typename T>
struct TensorT {
  std::vector<std::int64_t> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<std::int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) {
      if (d <= 0) throw ValidationError("tensor dims must be positive");
      n *= d;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

inline std::string shape_to_string(const std::vector<std::int64_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void matmul_acc(T* c, const T* a, const T* b, std::int64_t m, std::int64_t k,
                std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M x K] += A[M x N] * B^T where B is [K x N]
template <typename T>
void matmul_abt_acc(T* c, const T* a, const T* b, std::int64_t m,
                    std::int64_t n, std::int64_t k) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    T* crow = c + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc = T(0);
      for (std::int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

// C[K x N] += A^T * B where A is [M x K], B is [M x N]
template <typename T>
void matmul_atb_acc(T* c, const T* a, const T* b, std::int64_t m,
                    std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Unrolls conv patches of one image [C x H x W] into columns
// [C*kh*kw x OH*OW]. Out-of-bounds taps read as zero.
template <typename T>
void im2col(const T* src, std::int64_t c, std::int64_t h, std::int64_t w,
            std::int64_t kernel, std::int64_t stride, std::int64_t pad,
            std::int64_t oh, std::int64_t ow, T* col) {
  const std::int64_t cols = oh * ow;
  std::int64_t row = 0;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t ky = 0; ky < kernel; ++ky) {
      for (std::int64_t kx = 0; kx < kernel; ++kx, ++row) {
        T* dst = col + row * cols;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t sy = oy * stride + ky - pad;
          if (sy < 0 || sy >= h) {
            for (std::int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = T(0);
            continue;
          }
          const T* srow = src + (ch * h + sy) * w;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t sx = ox * stride + kx - pad;
            dst[oy * ow + ox] = (sx < 0 || sx >= w) ? T(0) : srow[sx];
          }
        }
      }
    }
  }
}

// Scatter-add of columns back into the image; the adjoint of im2col.
template <typename T>
void col2im_acc(const T* col, std::int64_t c, std::int64_t h, std::int64_t w,
                std::int64_t kernel, std::int64_t stride, std::int64_t pad,
                std::int64_t oh, std::int64_t ow, T* dst) {
  const std::int64_t cols = oh * ow;
  std::int64_t row = 0;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t ky = 0; ky < kernel; ++ky) {
      for (std::int64_t kx = 0; kx < kernel; ++kx, ++row) {
        const T* src = col + row * cols;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t sy = oy * stride + ky - pad;
          if (sy < 0 || sy >= h) continue;
          T* drow = dst + (ch * h + sy) * w;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t sx = ox * stride + kx - pad;
            if (sx >= 0 && sx < w) drow[sx] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace pixlog
