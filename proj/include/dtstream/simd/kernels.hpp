#pragma once

// Dense arithmetic kernels used by the actor/critic networks and optimizers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA implementation. The variant is picked once at runtime from CPUID;
// setting DTSTREAM_SIMD=scalar in the environment forces the reference path.
// Matrices are dense row-major double arrays.

#include <cstddef>
#include <span>
#include <string_view>

namespace dtstream::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

// True when the variant is compiled in and the CPU supports it.
bool isa_available(Isa isa);

// Variant used by the free functions below.
Isa active_isa();

// Overrides the active variant. Throws InvalidArgument if unavailable.
void set_active_isa(Isa isa);

// Shapes for the batched products. `batch` rows of activations, a weight
// matrix of `out` rows by `in` columns.
struct GemmShape {
  std::size_t batch = 0;
  std::size_t out = 0;
  std::size_t in = 0;
};

double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// dst = tau * src + (1 - tau) * dst
void blend(double tau, std::span<const double> src, std::span<double> dst);

// y[b][o] = bias[o] + sum_i x[b][i] * w[o][i]
void affine_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y,
                    GemmShape shape);

// dx[b][i] = sum_o dy[b][o] * w[o][i]
void affine_backward_input(std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx,
                           GemmShape shape);

// dw[o][i] += sum_b dy[b][o] * x[b][i]
void affine_accumulate_weights(std::span<const double> dy,
                               std::span<const double> x,
                               std::span<double> dw, GemmShape shape);

// v = max(v, 0)
void relu_inplace(std::span<double> v);

// grad[i] = activation[i] > 0 ? grad[i] : 0
void relu_mask(std::span<const double> activation, std::span<double> grad);

struct AdamStep {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Bias corrections 1 - beta^t for the current step.
  double correction1 = 1.0;
  double correction2 = 1.0;
};

void adam_update(const AdamStep& step, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 std::span<double> params);

namespace detail {

// Raw kernel signatures shared by every variant. Sizes are already validated.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*blend)(double tau, const double* src, double* dst, std::size_t n);
  void (*affine_forward)(const double* x, const double* w, const double* bias,
                         double* y, GemmShape shape);
  void (*affine_backward_input)(const double* dy, const double* w, double* dx,
                                GemmShape shape);
  void (*affine_accumulate_weights)(const double* dy, const double* x,
                                    double* dw, GemmShape shape);
  void (*relu_inplace)(double* v, std::size_t n);
  void (*relu_mask)(const double* activation, double* grad, std::size_t n);
  void (*adam_update)(const AdamStep& step, const double* grad, double* m,
                      double* v, double* params, std::size_t n);
};

const KernelTable& scalar_kernels();
// Returns nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();

}  // namespace detail

}  // namespace dtstream::simd
