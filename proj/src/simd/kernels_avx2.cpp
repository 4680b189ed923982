// AVX2 + FMA variants. This translation unit is built with -mavx2 -mfma and
// is only entered after the dispatcher has confirmed CPU support.

#include "dtstream/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace dtstream::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + kLanes),
                           _mm256_loadu_pd(b + i + kLanes), acc1);
  }
  for (; i + kLanes <= n; i += kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void blend_avx2(double tau, const double* src, double* dst, std::size_t n) {
  const double keep = 1.0 - tau;
  const __m256d t = _mm256_set1_pd(tau);
  const __m256d k = _mm256_set1_pd(keep);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d kept = _mm256_mul_pd(k, _mm256_loadu_pd(dst + i));
    _mm256_storeu_pd(dst + i,
                     _mm256_fmadd_pd(t, _mm256_loadu_pd(src + i), kept));
  }
  for (; i < n; ++i) dst[i] = tau * src[i] + keep * dst[i];
}

// 2 activation rows x 4 weight rows register block.
void affine_forward_avx2(const double* x, const double* w, const double* bias,
                         double* y, GemmShape s) {
  const std::size_t k_vec = s.in - s.in % kLanes;
  std::size_t b = 0;
  for (; b + 2 <= s.batch; b += 2) {
    const double* x0 = x + b * s.in;
    const double* x1 = x0 + s.in;
    std::size_t o = 0;
    for (; o + 4 <= s.out; o += 4) {
      const double* w0 = w + o * s.in;
      const double* w1 = w0 + s.in;
      const double* w2 = w1 + s.in;
      const double* w3 = w2 + s.in;
      __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd();
      __m256d a02 = _mm256_setzero_pd(), a03 = _mm256_setzero_pd();
      __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd();
      __m256d a12 = _mm256_setzero_pd(), a13 = _mm256_setzero_pd();
      for (std::size_t k = 0; k < k_vec; k += kLanes) {
        const __m256d xv0 = _mm256_loadu_pd(x0 + k);
        const __m256d xv1 = _mm256_loadu_pd(x1 + k);
        __m256d wv = _mm256_loadu_pd(w0 + k);
        a00 = _mm256_fmadd_pd(xv0, wv, a00);
        a10 = _mm256_fmadd_pd(xv1, wv, a10);
        wv = _mm256_loadu_pd(w1 + k);
        a01 = _mm256_fmadd_pd(xv0, wv, a01);
        a11 = _mm256_fmadd_pd(xv1, wv, a11);
        wv = _mm256_loadu_pd(w2 + k);
        a02 = _mm256_fmadd_pd(xv0, wv, a02);
        a12 = _mm256_fmadd_pd(xv1, wv, a12);
        wv = _mm256_loadu_pd(w3 + k);
        a03 = _mm256_fmadd_pd(xv0, wv, a03);
        a13 = _mm256_fmadd_pd(xv1, wv, a13);
      }
      double r00 = hsum(a00), r01 = hsum(a01), r02 = hsum(a02), r03 = hsum(a03);
      double r10 = hsum(a10), r11 = hsum(a11), r12 = hsum(a12), r13 = hsum(a13);
      for (std::size_t k = k_vec; k < s.in; ++k) {
        r00 += x0[k] * w0[k];
        r01 += x0[k] * w1[k];
        r02 += x0[k] * w2[k];
        r03 += x0[k] * w3[k];
        r10 += x1[k] * w0[k];
        r11 += x1[k] * w1[k];
        r12 += x1[k] * w2[k];
        r13 += x1[k] * w3[k];
      }
      double* y0 = y + b * s.out + o;
      double* y1 = y0 + s.out;
      y0[0] = bias[o] + r00;
      y0[1] = bias[o + 1] + r01;
      y0[2] = bias[o + 2] + r02;
      y0[3] = bias[o + 3] + r03;
      y1[0] = bias[o] + r10;
      y1[1] = bias[o + 1] + r11;
      y1[2] = bias[o + 2] + r12;
      y1[3] = bias[o + 3] + r13;
    }
    for (; o < s.out; ++o) {
      y[b * s.out + o] = bias[o] + dot_avx2(x0, w + o * s.in, s.in);
      y[(b + 1) * s.out + o] = bias[o] + dot_avx2(x1, w + o * s.in, s.in);
    }
  }
  for (; b < s.batch; ++b) {
    for (std::size_t o = 0; o < s.out; ++o) {
      y[b * s.out + o] = bias[o] + dot_avx2(x + b * s.in, w + o * s.in, s.in);
    }
  }
}

void affine_backward_input_avx2(const double* dy, const double* w, double* dx,
                                GemmShape s) {
  const std::size_t k_vec = s.in - s.in % kLanes;
  for (std::size_t b = 0; b < s.batch; ++b) {
    double* dxb = dx + b * s.in;
    const double* dyb = dy + b * s.out;
    for (std::size_t i = 0; i < s.in; ++i) dxb[i] = 0.0;
    std::size_t o = 0;
    for (; o + 4 <= s.out; o += 4) {
      const __m256d g0 = _mm256_set1_pd(dyb[o]);
      const __m256d g1 = _mm256_set1_pd(dyb[o + 1]);
      const __m256d g2 = _mm256_set1_pd(dyb[o + 2]);
      const __m256d g3 = _mm256_set1_pd(dyb[o + 3]);
      const double* w0 = w + o * s.in;
      const double* w1 = w0 + s.in;
      const double* w2 = w1 + s.in;
      const double* w3 = w2 + s.in;
      for (std::size_t k = 0; k < k_vec; k += kLanes) {
        __m256d acc = _mm256_loadu_pd(dxb + k);
        acc = _mm256_fmadd_pd(g0, _mm256_loadu_pd(w0 + k), acc);
        acc = _mm256_fmadd_pd(g1, _mm256_loadu_pd(w1 + k), acc);
        acc = _mm256_fmadd_pd(g2, _mm256_loadu_pd(w2 + k), acc);
        acc = _mm256_fmadd_pd(g3, _mm256_loadu_pd(w3 + k), acc);
        _mm256_storeu_pd(dxb + k, acc);
      }
      for (std::size_t k = k_vec; k < s.in; ++k) {
        dxb[k] += dyb[o] * w0[k] + dyb[o + 1] * w1[k] + dyb[o + 2] * w2[k] +
                  dyb[o + 3] * w3[k];
      }
    }
    for (; o < s.out; ++o) axpy_avx2(dyb[o], w + o * s.in, dxb, s.in);
  }
}

// 4 weight rows x 8 columns register block, streaming over the batch.
void affine_accumulate_weights_avx2(const double* dy, const double* x,
                                    double* dw, GemmShape s) {
  const std::size_t k_blk = s.in - s.in % (2 * kLanes);
  std::size_t o = 0;
  for (; o + 4 <= s.out; o += 4) {
    double* r0 = dw + o * s.in;
    double* r1 = r0 + s.in;
    double* r2 = r1 + s.in;
    double* r3 = r2 + s.in;
    for (std::size_t k = 0; k < k_blk; k += 2 * kLanes) {
      __m256d a0l = _mm256_loadu_pd(r0 + k), a0h = _mm256_loadu_pd(r0 + k + 4);
      __m256d a1l = _mm256_loadu_pd(r1 + k), a1h = _mm256_loadu_pd(r1 + k + 4);
      __m256d a2l = _mm256_loadu_pd(r2 + k), a2h = _mm256_loadu_pd(r2 + k + 4);
      __m256d a3l = _mm256_loadu_pd(r3 + k), a3h = _mm256_loadu_pd(r3 + k + 4);
      for (std::size_t b = 0; b < s.batch; ++b) {
        const double* xb = x + b * s.in + k;
        const double* gb = dy + b * s.out + o;
        const __m256d xl = _mm256_loadu_pd(xb);
        const __m256d xh = _mm256_loadu_pd(xb + 4);
        __m256d g = _mm256_broadcast_sd(gb);
        a0l = _mm256_fmadd_pd(g, xl, a0l);
        a0h = _mm256_fmadd_pd(g, xh, a0h);
        g = _mm256_broadcast_sd(gb + 1);
        a1l = _mm256_fmadd_pd(g, xl, a1l);
        a1h = _mm256_fmadd_pd(g, xh, a1h);
        g = _mm256_broadcast_sd(gb + 2);
        a2l = _mm256_fmadd_pd(g, xl, a2l);
        a2h = _mm256_fmadd_pd(g, xh, a2h);
        g = _mm256_broadcast_sd(gb + 3);
        a3l = _mm256_fmadd_pd(g, xl, a3l);
        a3h = _mm256_fmadd_pd(g, xh, a3h);
      }
      _mm256_storeu_pd(r0 + k, a0l);
      _mm256_storeu_pd(r0 + k + 4, a0h);
      _mm256_storeu_pd(r1 + k, a1l);
      _mm256_storeu_pd(r1 + k + 4, a1h);
      _mm256_storeu_pd(r2 + k, a2l);
      _mm256_storeu_pd(r2 + k + 4, a2h);
      _mm256_storeu_pd(r3 + k, a3l);
      _mm256_storeu_pd(r3 + k + 4, a3h);
    }
    for (std::size_t b = 0; b < s.batch; ++b) {
      const double* xb = x + b * s.in;
      const double* gb = dy + b * s.out + o;
      for (std::size_t k = k_blk; k < s.in; ++k) {
        r0[k] += gb[0] * xb[k];
        r1[k] += gb[1] * xb[k];
        r2[k] += gb[2] * xb[k];
        r3[k] += gb[3] * xb[k];
      }
    }
  }
  for (; o < s.out; ++o) {
    double* row = dw + o * s.in;
    for (std::size_t b = 0; b < s.batch; ++b) {
      axpy_avx2(dy[b * s.out + o], x + b * s.in, row, s.in);
    }
  }
}

void relu_inplace_avx2(double* v, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(v + i, _mm256_max_pd(_mm256_loadu_pd(v + i), zero));
  }
  for (; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_mask_avx2(const double* activation, double* grad, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d keep =
        _mm256_cmp_pd(_mm256_loadu_pd(activation + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad + i, _mm256_and_pd(keep, _mm256_loadu_pd(grad + i)));
  }
  for (; i < n; ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

void adam_update_avx2(const AdamStep& step, const double* grad, double* m,
                      double* v, double* params, std::size_t n) {
  const double scale = step.learning_rate / step.correction1;
  const double inv_c2 = 1.0 / step.correction2;
  const __m256d b1 = _mm256_set1_pd(step.beta1);
  const __m256d c1 = _mm256_set1_pd(1.0 - step.beta1);
  const __m256d b2 = _mm256_set1_pd(step.beta2);
  const __m256d c2 = _mm256_set1_pd(1.0 - step.beta2);
  const __m256d sc = _mm256_set1_pd(scale);
  const __m256d ic2 = _mm256_set1_pd(inv_c2);
  const __m256d eps = _mm256_set1_pd(step.epsilon);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mv = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i),
                                       _mm256_mul_pd(c1, g));
    const __m256d vv = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i),
                                       _mm256_mul_pd(_mm256_mul_pd(c2, g), g));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d denom =
        _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, ic2)), eps);
    const __m256d delta = _mm256_div_pd(_mm256_mul_pd(sc, mv), denom);
    _mm256_storeu_pd(params + i, _mm256_sub_pd(_mm256_loadu_pd(params + i), delta));
  }
  for (; i < n; ++i) {
    m[i] = step.beta1 * m[i] + (1.0 - step.beta1) * grad[i];
    v[i] = step.beta2 * v[i] + (1.0 - step.beta2) * grad[i] * grad[i];
    params[i] -= scale * m[i] / (std::sqrt(v[i] * inv_c2) + step.epsilon);
  }
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{
      dot_avx2,
      axpy_avx2,
      blend_avx2,
      affine_forward_avx2,
      affine_backward_input_avx2,
      affine_accumulate_weights_avx2,
      relu_inplace_avx2,
      relu_mask_avx2,
      adam_update_avx2,
  };
  return &table;
}

}  // namespace dtstream::simd::detail

#else

namespace dtstream::simd::detail {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace dtstream::simd::detail

#endif
