#include "cfocal/standardize.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "cfocal/tensor.hpp"

namespace cfocal {

FeatureStats standardize_fit(const Dataset& train) {
    if (train.n < 1 || train.dim < 1)
        throw std::invalid_argument("standardize_fit: empty training set");
    constexpr double kGuard = 1e-8;
    FeatureStats st;
    st.mean.assign(train.dim, 0.0);
    st.stddev.assign(train.dim, 0.0);
    for (long i = 0; i < train.n; ++i) {
        const double* r = train.row(i);
        for (long d = 0; d < train.dim; ++d) st.mean[d] += r[d];
    }
    for (long d = 0; d < train.dim; ++d) st.mean[d] /= static_cast<double>(train.n);
    for (long i = 0; i < train.n; ++i) {
        const double* r = train.row(i);
        for (long d = 0; d < train.dim; ++d) {
            const double c = r[d] - st.mean[d];
            st.stddev[d] += c * c;
        }
    }
    for (long d = 0; d < train.dim; ++d) {
        double s = std::sqrt(st.stddev[d] / static_cast<double>(train.n));
        if (s < kGuard) {
            std::fprintf(stderr, "standardize_fit: degenerate position %ld (std %.3g), clamping\n",
                         d, s);
            s = kGuard;
        }
        st.mean[d] = to_f32(st.mean[d]);
        st.stddev[d] = to_f32(s);
    }
    return st;
}

void standardize_apply(double* features, long n, long dim, const FeatureStats& stats) {
    if (static_cast<long>(stats.mean.size()) != dim)
        throw std::invalid_argument("standardize_apply: dimension mismatch");
    for (long i = 0; i < n; ++i) {
        double* r = features + i * dim;
        for (long d = 0; d < dim; ++d) r[d] = (r[d] - stats.mean[d]) / stats.stddev[d];
    }
}

void standardize_apply(Dataset& set, const FeatureStats& stats) {
    standardize_apply(set.features.data(), set.n, set.dim, stats);
}

}  // namespace cfocal
