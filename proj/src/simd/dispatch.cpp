#include <atomic>
#include <cstdlib>
#include <string>

#include "dtstream/errors.hpp"
#include "dtstream/simd/kernels.hpp"

namespace dtstream::simd {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect_isa() {
  if (const char* forced = std::getenv("DTSTREAM_SIMD")) {
    if (std::string(forced) == "scalar") return Isa::kScalar;
  }
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{detect_isa()};
  return slot;
}

const detail::KernelTable& table() {
  if (active_slot().load(std::memory_order_relaxed) == Isa::kAvx2) {
    return *detail::avx2_kernels();
  }
  return detail::scalar_kernels();
}

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InvalidArgument(std::string("simd: size mismatch in ") + what);
}

void require_gemm(std::size_t have, std::size_t need, const char* what) {
  if (have < need) throw InvalidArgument(std::string("simd: buffer too small for ") + what);
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

bool isa_available(Isa isa) {
  if (isa == Isa::kScalar) return true;
  return detail::avx2_kernels() != nullptr && cpu_has_avx2_fma();
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw InvalidArgument("simd: variant " + std::string(isa_name(isa)) +
                          " is not available on this CPU");
  }
  active_slot().store(isa, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "dot");
  return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size(), "axpy");
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void blend(double tau, std::span<const double> src, std::span<double> dst) {
  require_same(src.size(), dst.size(), "blend");
  table().blend(tau, src.data(), dst.data(), src.size());
}

void affine_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y,
                    GemmShape shape) {
  require_gemm(x.size(), shape.batch * shape.in, "affine_forward input");
  require_gemm(w.size(), shape.out * shape.in, "affine_forward weights");
  require_gemm(bias.size(), shape.out, "affine_forward bias");
  require_gemm(y.size(), shape.batch * shape.out, "affine_forward output");
  table().affine_forward(x.data(), w.data(), bias.data(), y.data(), shape);
}

void affine_backward_input(std::span<const double> dy,
                           std::span<const double> w, std::span<double> dx,
                           GemmShape shape) {
  require_gemm(dy.size(), shape.batch * shape.out, "affine_backward_input seed");
  require_gemm(w.size(), shape.out * shape.in, "affine_backward_input weights");
  require_gemm(dx.size(), shape.batch * shape.in, "affine_backward_input output");
  table().affine_backward_input(dy.data(), w.data(), dx.data(), shape);
}

void affine_accumulate_weights(std::span<const double> dy,
                               std::span<const double> x,
                               std::span<double> dw, GemmShape shape) {
  require_gemm(dy.size(), shape.batch * shape.out, "affine_accumulate_weights seed");
  require_gemm(x.size(), shape.batch * shape.in, "affine_accumulate_weights input");
  require_gemm(dw.size(), shape.out * shape.in, "affine_accumulate_weights output");
  table().affine_accumulate_weights(dy.data(), x.data(), dw.data(), shape);
}

void relu_inplace(std::span<double> v) { table().relu_inplace(v.data(), v.size()); }

void relu_mask(std::span<const double> activation, std::span<double> grad) {
  require_same(activation.size(), grad.size(), "relu_mask");
  table().relu_mask(activation.data(), grad.data(), grad.size());
}

void adam_update(const AdamStep& step, std::span<const double> grad,
                 std::span<double> m, std::span<double> v,
                 std::span<double> params) {
  require_same(grad.size(), params.size(), "adam_update");
  require_same(m.size(), params.size(), "adam_update");
  require_same(v.size(), params.size(), "adam_update");
  table().adam_update(step, grad.data(), m.data(), v.data(), params.data(),
                      params.size());
}

}  // namespace dtstream::simd
