// Bulk elementwise activation kernels, built with vectorizable math so the
// compiler can use libmvec for erf/exp. Results stay within a few ulp of the
// scalar libm calls; the scalar Activation::eval/derivative entry points stay
// on std::erf and serve as the oracle in tests.

#include <cmath>
#include <cstddef>

namespace cfocal::kernels {

void gelu_forward(const double* x, double* y, double* deriv, size_t n) {
    constexpr double kInvSqrt2 = 0.7071067811865476;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (size_t i = 0; i < n; ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        y[i] = v * cdf;
        deriv[i] = cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    }
}

void silu_forward(const double* x, double* y, double* deriv, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        const double v = x[i];
        const double s = 1.0 / (1.0 + std::exp(-v));
        y[i] = v * s;
        deriv[i] = s * (1.0 + v * (1.0 - s));
    }
}

}  // namespace cfocal::kernels
