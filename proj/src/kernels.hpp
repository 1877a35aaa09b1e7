// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

// Dense inner loops shared by matmul and convolution. Reductions use a fixed
// eight-lane split so that results do not depend on the compiler's
// vectorization choices.

#pragma once

#include <cstddef>

namespace mofe::kernels {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T lane[8] = {};
  std::size_t x = 0;
  for (; x + 8 <= n; x += 8)
    for (std::size_t j = 0; j < 8; ++j) lane[j] += a[x + j] * b[x + j];
  T acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
  for (; x < n; ++x) acc += a[x] * b[x];
  return acc;
}

// y += a * x
template <typename T>
inline void axpy(T a, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// c[m x n] += a[m x k] * b[k x n], all row-major.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      axpy(av, b + p * n, crow, n);
    }
  }
}

// c[m x k] += g[m x n] * b[k x n]^T
template <typename T>
void gemm_nt(const T* g, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) c[i * k + p] += dot(g + i * n, b + p * n, n);
}

// c[k x n] += a[m x k]^T * g[m x n]
template <typename T>
void gemm_tn(const T* a, const T* g, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      axpy(av, grow, c + p * n, n);
    }
  }
}

}  // namespace mofe::kernels
