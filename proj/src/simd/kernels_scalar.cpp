#include <cmath>

#include "dtstream/simd/kernels.hpp"

namespace dtstream::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void blend_scalar(double tau, const double* src, double* dst, std::size_t n) {
  const double keep = 1.0 - tau;
  for (std::size_t i = 0; i < n; ++i) dst[i] = tau * src[i] + keep * dst[i];
}

void affine_forward_scalar(const double* x, const double* w, const double* bias,
                           double* y, GemmShape s) {
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double* xb = x + b * s.in;
    double* yb = y + b * s.out;
    for (std::size_t o = 0; o < s.out; ++o) {
      yb[o] = bias[o] + dot_scalar(xb, w + o * s.in, s.in);
    }
  }
}

void affine_backward_input_scalar(const double* dy, const double* w, double* dx,
                                  GemmShape s) {
  for (std::size_t b = 0; b < s.batch; ++b) {
    double* dxb = dx + b * s.in;
    const double* dyb = dy + b * s.out;
    for (std::size_t i = 0; i < s.in; ++i) dxb[i] = 0.0;
    for (std::size_t o = 0; o < s.out; ++o) {
      axpy_scalar(dyb[o], w + o * s.in, dxb, s.in);
    }
  }
}

void affine_accumulate_weights_scalar(const double* dy, const double* x,
                                      double* dw, GemmShape s) {
  for (std::size_t o = 0; o < s.out; ++o) {
    double* row = dw + o * s.in;
    for (std::size_t b = 0; b < s.batch; ++b) {
      axpy_scalar(dy[b * s.out + o], x + b * s.in, row, s.in);
    }
  }
}

void relu_inplace_scalar(double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

void relu_mask_scalar(const double* activation, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

void adam_update_scalar(const AdamStep& step, const double* grad, double* m,
                        double* v, double* params, std::size_t n) {
  const double scale = step.learning_rate / step.correction1;
  const double inv_c2 = 1.0 / step.correction2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = step.beta1 * m[i] + (1.0 - step.beta1) * grad[i];
    v[i] = step.beta2 * v[i] + (1.0 - step.beta2) * grad[i] * grad[i];
    params[i] -= scale * m[i] / (std::sqrt(v[i] * inv_c2) + step.epsilon);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      dot_scalar,
      axpy_scalar,
      blend_scalar,
      affine_forward_scalar,
      affine_backward_input_scalar,
      affine_accumulate_weights_scalar,
      relu_inplace_scalar,
      relu_mask_scalar,
      adam_update_scalar,
  };
  return table;
}

}  // namespace dtstream::simd::detail
