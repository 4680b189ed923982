#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dtstream/simd/kernels.hpp"

using namespace dtstream::simd;
using dtstream::simd::detail::KernelTable;

namespace {

std::vector<double> noise(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// FMA contraction and reassociated sums differ from the reference by a few
// ulps of the accumulated magnitude.
void check_close(const std::vector<double>& a, const std::vector<double>& b, double scale) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * scale);
}

const std::size_t kSizes[] = {0, 1, 3, 4, 5, 7, 8, 15, 16, 33, 130};

}  // namespace

TEST_CASE("avx2 kernels match the scalar reference") {
  const KernelTable* fast = detail::avx2_kernels();
  if (fast == nullptr || !isa_available(Isa::kAvx2)) {
    MESSAGE("avx2 variant unavailable, equivalence not exercised");
    return;
  }
  const KernelTable& ref = detail::scalar_kernels();
  std::mt19937_64 rng(1);

  for (std::size_t n : kSizes) {
    CAPTURE(n);
    const auto a = noise(n, rng);
    const auto b = noise(n, rng);
    CHECK(std::abs(fast->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
          1e-12 * (1.0 + static_cast<double>(n)));

    auto y1 = noise(n, rng);
    auto y2 = y1;
    fast->axpy(0.37, a.data(), y1.data(), n);
    ref.axpy(0.37, a.data(), y2.data(), n);
    check_close(y1, y2, 4.0);

    y2 = y1;
    fast->blend(0.1, a.data(), y1.data(), n);
    ref.blend(0.1, a.data(), y2.data(), n);
    check_close(y1, y2, 4.0);

    y2 = y1;
    fast->relu_inplace(y1.data(), n);
    ref.relu_inplace(y2.data(), n);
    CHECK(y1 == y2);

    auto g1 = noise(n, rng);
    auto g2 = g1;
    fast->relu_mask(a.data(), g1.data(), n);
    ref.relu_mask(a.data(), g2.data(), n);
    CHECK(g1 == g2);

    AdamStep step;
    step.learning_rate = 1e-3;
    step.correction1 = 1.0 - 0.9 * 0.9;
    step.correction2 = 1.0 - 0.999 * 0.999;
    auto m1 = noise(n, rng);
    auto v1 = noise(n, rng);
    for (double& x : v1) x = std::abs(x);
    auto p1 = noise(n, rng);
    auto m2 = m1;
    auto v2 = v1;
    auto p2 = p1;
    fast->adam_update(step, a.data(), m1.data(), v1.data(), p1.data(), n);
    ref.adam_update(step, a.data(), m2.data(), v2.data(), p2.data(), n);
    check_close(m1, m2, 4.0);
    check_close(v1, v2, 16.0);
    check_close(p1, p2, 4.0);
  }
}

TEST_CASE("avx2 affine kernels match the scalar reference") {
  const KernelTable* fast = detail::avx2_kernels();
  if (fast == nullptr || !isa_available(Isa::kAvx2)) {
    MESSAGE("avx2 variant unavailable, equivalence not exercised");
    return;
  }
  const KernelTable& ref = detail::scalar_kernels();
  std::mt19937_64 rng(2);
  const GemmShape shapes[] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 16}, {128, 64, 15}, {2, 33, 130}};
  for (const GemmShape& s : shapes) {
    CAPTURE(s.batch);
    CAPTURE(s.out);
    CAPTURE(s.in);
    const auto x = noise(s.batch * s.in, rng);
    const auto w = noise(s.out * s.in, rng);
    const auto bias = noise(s.out, rng);
    const auto dy = noise(s.batch * s.out, rng);
    const double scale = 4.0 * static_cast<double>(std::max({s.in, s.out, s.batch}));

    std::vector<double> y1(s.batch * s.out);
    std::vector<double> y2(y1.size());
    fast->affine_forward(x.data(), w.data(), bias.data(), y1.data(), s);
    ref.affine_forward(x.data(), w.data(), bias.data(), y2.data(), s);
    check_close(y1, y2, scale);

    std::vector<double> dx1(s.batch * s.in);
    std::vector<double> dx2(dx1.size());
    fast->affine_backward_input(dy.data(), w.data(), dx1.data(), s);
    ref.affine_backward_input(dy.data(), w.data(), dx2.data(), s);
    check_close(dx1, dx2, scale);

    auto dw1 = noise(s.out * s.in, rng);
    auto dw2 = dw1;
    fast->affine_accumulate_weights(dy.data(), x.data(), dw1.data(), s);
    ref.affine_accumulate_weights(dy.data(), x.data(), dw2.data(), s);
    check_close(dw1, dw2, scale);
  }
}

TEST_CASE("dispatch") {
  CHECK(isa_available(Isa::kScalar));
  const Isa before = active_isa();
  set_active_isa(Isa::kScalar);
  CHECK(active_isa() == Isa::kScalar);
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{5, 4, 3, 2, 1};
  CHECK(dot(a, b) == 35.0);
  if (isa_available(Isa::kAvx2)) {
    set_active_isa(Isa::kAvx2);
    CHECK(dot(a, b) == 35.0);
  }
  set_active_isa(before);
  CHECK(isa_name(Isa::kScalar) == "scalar");
}
