#include "cfocal/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cfocal {

namespace kernels {
void gelu_forward(const double* x, double* y, double* deriv, size_t n);
void silu_forward(const double* x, double* y, double* deriv, size_t n);
}  // namespace kernels

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using CMapRM = Eigen::Map<const MatrixRM>;
using MapCM = Eigen::Map<Eigen::MatrixXd>;
using CMapCM = Eigen::Map<const Eigen::MatrixXd>;

void check_3d(const Tensor& x, const char* who) {
    if (x.shape.size() != 3) throw std::invalid_argument(std::string(who) + ": expected B x C x L input");
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(int in_ch, int out_ch, int kernel, int stride, int padding, int groups,
               bool conv_group)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), padding_(padding),
      groups_(groups) {
    if (in_ch % groups != 0 || out_ch % groups != 0)
        throw std::invalid_argument("Conv1d: channel counts must divide by groups");
    std::ostringstream tag;
    tag << "conv" << in_ch << "x" << out_ch << "k" << kernel << "s" << stride << "p" << padding
        << "g" << groups;
    weight_ = Param{tag.str() + ".w", {out_ch, in_ch / groups, kernel},
                    std::vector<double>(static_cast<size_t>(out_ch) * (in_ch / groups) * kernel, 0.0),
                    {}, true, conv_group, static_cast<long>(out_ch) * kernel};
    bias_ = Param{tag.str() + ".b", {out_ch}, std::vector<double>(out_ch, 0.0), {}, false,
                  conv_group, 0};
}

std::string Conv1d::describe() const {
    std::ostringstream os;
    os << "conv1d(" << in_ch_ << "," << out_ch_ << ",k" << kernel_ << ",s" << stride_ << ",p"
       << padding_ << ",g" << groups_ << ")";
    return os.str();
}

int Conv1d::out_len(int in_len) const {
    return (in_len + 2 * padding_ - kernel_) / stride_ + 1;
}

const Tensor& Conv1d::forward(const Tensor& x, const LayerContext&) {
    check_3d(x, "Conv1d");
    if (x.dim(1) != in_ch_) throw std::invalid_argument("Conv1d: channel mismatch");
    const long B = x.dim(0), L = x.dim(2);
    const long Lout = out_len(static_cast<int>(L));
    if (Lout < 1) throw std::invalid_argument("Conv1d: input shorter than kernel");
    cached_x_ = &x;

    ensure_shape(out_, {B, out_ch_, Lout});
    Tensor& y = out_;
    const bool depthwise = groups_ == in_ch_ && out_ch_ == in_ch_;
    if (depthwise) {
        const bool k3 = kernel_ == 3 && stride_ == 1 && padding_ == 1 && L >= 2;
        for (long b = 0; b < B; ++b) {
            for (long c = 0; c < in_ch_; ++c) {
                const double* xin = x.data.data() + (b * in_ch_ + c) * L;
                const double* w = weight_.value.data() + c * kernel_;
                double* out = y.data.data() + (b * out_ch_ + c) * Lout;
                const double bv = bias_.value[c];
                if (k3) {
                    const double w0 = w[0], w1 = w[1], w2 = w[2];
                    out[0] = bv + w1 * xin[0] + w2 * xin[1];
                    for (long t = 1; t < L - 1; ++t)
                        out[t] = bv + w0 * xin[t - 1] + w1 * xin[t] + w2 * xin[t + 1];
                    out[L - 1] = bv + w0 * xin[L - 2] + w1 * xin[L - 1];
                    continue;
                }
                for (long t = 0; t < Lout; ++t) {
                    double acc = bv;
                    const long start = t * stride_ - padding_;
                    for (int k = 0; k < kernel_; ++k) {
                        const long i = start + k;
                        if (i >= 0 && i < L) acc += w[k] * xin[i];
                    }
                    out[t] = acc;
                }
            }
        }
        return y;
    }

    // Pointwise 1x1 convolutions are plain per-item GEMMs. Row-major
    // (C x L) storage maps to column-major (L x C), which keeps Eigen on its
    // fast path: Y' = X' * W' with all operands column-major.
    if (groups_ == 1 && kernel_ == 1 && stride_ == 1 && padding_ == 0) {
        CMapCM Wcm(weight_.value.data(), in_ch_, out_ch_);  // W transposed
        for (long b = 0; b < B; ++b) {
            CMapCM Xcm(x.data.data() + b * in_ch_ * L, L, in_ch_);
            MapCM Ycm(y.data.data() + b * out_ch_ * Lout, Lout, out_ch_);
            Ycm.noalias() = Xcm * Wcm;
            for (long c = 0; c < out_ch_; ++c) Ycm.col(c).array() += bias_.value[c];
        }
        return y;
    }

    // General path: per-group, per-item column matrices, cached for backward.
    const long cg_in = in_ch_ / groups_, cg_out = out_ch_ / groups_;
    const long rows = cg_in * kernel_;
    cols_.assign(static_cast<size_t>(groups_) * B * rows * Lout, 0.0);
    for (int g = 0; g < groups_; ++g) {
        for (long b = 0; b < B; ++b) {
            double* colbuf = cols_.data() + (static_cast<long>(g) * B + b) * rows * Lout;
            for (long ci = 0; ci < cg_in; ++ci) {
                const double* xin = x.data.data() + (b * in_ch_ + g * cg_in + ci) * L;
                for (int k = 0; k < kernel_; ++k) {
                    double* col = colbuf + (ci * kernel_ + k) * Lout;
                    for (long t = 0; t < Lout; ++t) {
                        const long i = t * stride_ - padding_ + k;
                        if (i >= 0 && i < L) col[t] = xin[i];
                    }
                }
            }
            CMapCM M(colbuf, Lout, rows);
            CMapCM Wcm(weight_.value.data() + g * cg_out * rows, rows, cg_out);
            MapCM Ycm(y.data.data() + (b * out_ch_ + g * cg_out) * Lout, Lout, cg_out);
            Ycm.noalias() = M * Wcm;
            for (long co = 0; co < cg_out; ++co)
                Ycm.col(co).array() += bias_.value[g * cg_out + co];
        }
    }
    return y;
}

const Tensor& Conv1d::backward(const Tensor& dy) {
    const Tensor& x = *cached_x_;
    const long B = x.dim(0), L = x.dim(2);
    const long Lout = dy.dim(2);
    weight_.zero_grad();
    bias_.zero_grad();
    ensure_shape(dx_, x.shape);
    std::fill(dx_.data.begin(), dx_.data.end(), 0.0);  // scatter-add target
    Tensor& dx = dx_;

    for (long b = 0; b < B; ++b)
        for (long c = 0; c < out_ch_; ++c) {
            const double* d = dy.data.data() + (b * out_ch_ + c) * Lout;
            double acc = 0.0;
            for (long t = 0; t < Lout; ++t) acc += d[t];
            bias_.grad[c] += acc;
        }

    const bool depthwise = groups_ == in_ch_ && out_ch_ == in_ch_;
    if (depthwise) {
        for (long b = 0; b < B; ++b) {
            for (long c = 0; c < in_ch_; ++c) {
                const double* xin = x.data.data() + (b * in_ch_ + c) * L;
                const double* d = dy.data.data() + (b * out_ch_ + c) * Lout;
                const double* w = weight_.value.data() + c * kernel_;
                double* gx = dx.data.data() + (b * in_ch_ + c) * L;
                double* gw = weight_.grad.data() + c * kernel_;
                for (long t = 0; t < Lout; ++t) {
                    const long start = t * stride_ - padding_;
                    const double dv = d[t];
                    for (int k = 0; k < kernel_; ++k) {
                        const long i = start + k;
                        if (i >= 0 && i < L) {
                            gw[k] += dv * xin[i];
                            gx[i] += dv * w[k];
                        }
                    }
                }
            }
        }
        return dx;
    }

    if (groups_ == 1 && kernel_ == 1 && stride_ == 1 && padding_ == 0) {
        CMapCM Wcm(weight_.value.data(), in_ch_, out_ch_);
        MapCM dWcm(weight_.grad.data(), in_ch_, out_ch_);
        for (long b = 0; b < B; ++b) {
            CMapCM Dcm(dy.data.data() + b * out_ch_ * Lout, Lout, out_ch_);
            CMapCM Xcm(x.data.data() + b * in_ch_ * L, L, in_ch_);
            MapCM dXcm(dx.data.data() + b * in_ch_ * L, L, in_ch_);
            dWcm.noalias() += Xcm.transpose() * Dcm;
            dXcm.noalias() = Dcm * Wcm.transpose();
        }
        return dx;
    }

    const long cg_in = in_ch_ / groups_, cg_out = out_ch_ / groups_;
    const long rows = cg_in * kernel_;
    Eigen::MatrixXd dM(Lout, rows);
    for (int g = 0; g < groups_; ++g) {
        CMapCM Wcm(weight_.value.data() + g * cg_out * rows, rows, cg_out);
        MapCM dWcm(weight_.grad.data() + g * cg_out * rows, rows, cg_out);
        for (long b = 0; b < B; ++b) {
            const double* colbuf = cols_.data() + (static_cast<long>(g) * B + b) * rows * Lout;
            CMapCM M(colbuf, Lout, rows);
            CMapCM Dcm(dy.data.data() + (b * out_ch_ + g * cg_out) * Lout, Lout, cg_out);
            dWcm.noalias() += M.transpose() * Dcm;
            dM.noalias() = Dcm * Wcm.transpose();
            for (long ci = 0; ci < cg_in; ++ci) {
                double* gx = dx.data.data() + (b * in_ch_ + g * cg_in + ci) * L;
                for (int k = 0; k < kernel_; ++k) {
                    const double* col = dM.data() + (ci * kernel_ + k) * Lout;
                    for (long t = 0; t < Lout; ++t) {
                        const long i = t * stride_ - padding_ + k;
                        if (i >= 0 && i < L) gx[i] += col[t];
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm1d

BatchNorm1d::BatchNorm1d(int channels, bool conv_group) : channels_(channels) {
    gamma_ = Param{"bn" + std::to_string(channels) + ".gamma", {channels},
                   std::vector<double>(channels, 1.0), {}, false, conv_group, 0};
    beta_ = Param{"bn" + std::to_string(channels) + ".beta", {channels},
                  std::vector<double>(channels, 0.0), {}, false, conv_group, 0};
    running_mean_.assign(channels, 0.0);
    running_var_.assign(channels, 1.0);
}

std::string BatchNorm1d::describe() const { return "bn(" + std::to_string(channels_) + ")"; }

const Tensor& BatchNorm1d::forward(const Tensor& x, const LayerContext& ctx) {
    check_3d(x, "BatchNorm1d");
    const long B = x.dim(0), C = x.dim(1), L = x.dim(2);
    if (C != channels_) throw std::invalid_argument("BatchNorm1d: channel mismatch");
    constexpr double eps = 1e-5;
    constexpr double momentum = 0.1;
    ensure_shape(out_, x.shape);
    Tensor& y = out_;
    cached_mode_ = ctx.mode;

    // Passes run in storage order (b outer, c inner) with per-channel
    // accumulators; channel-outer iteration strides the whole tensor.
    if (ctx.mode == Mode::kTrain) {
        if (B < 2) throw std::invalid_argument("BatchNorm1d: training mode needs batch >= 2");
        const double n = static_cast<double>(B * L);
        ensure_shape(cached_xhat_, x.shape);
        cached_inv_std_.assign(C, 0.0);
        scratch_a_.assign(C, 0.0);  // sums
        scratch_b_.assign(C, 0.0);  // squared sums
        for (long b = 0; b < B; ++b)
            for (long c = 0; c < C; ++c) {
                const double* p = x.data.data() + (b * C + c) * L;
                double sum = 0.0, sq = 0.0;
                for (long l = 0; l < L; ++l) {
                    sum += p[l];
                    sq += p[l] * p[l];
                }
                scratch_a_[c] += sum;
                scratch_b_[c] += sq;
            }
        for (long c = 0; c < C; ++c) {
            const double mean = scratch_a_[c] / n;
            const double var = scratch_b_[c] / n - mean * mean;  // biased, for normalization
            const double inv_std = 1.0 / std::sqrt(var + eps);
            scratch_a_[c] = mean;
            cached_inv_std_[c] = inv_std;
            const double unbiased = var * n / (n - 1.0);
            running_mean_[c] = to_f32((1.0 - momentum) * running_mean_[c] + momentum * mean);
            running_var_[c] = to_f32((1.0 - momentum) * running_var_[c] + momentum * unbiased);
        }
        for (long b = 0; b < B; ++b)
            for (long c = 0; c < C; ++c) {
                const double* p = x.data.data() + (b * C + c) * L;
                double* xh = cached_xhat_.data.data() + (b * C + c) * L;
                double* out = y.data.data() + (b * C + c) * L;
                const double mean = scratch_a_[c], inv_std = cached_inv_std_[c];
                const double g = gamma_.value[c], bta = beta_.value[c];
                for (long l = 0; l < L; ++l) {
                    xh[l] = (p[l] - mean) * inv_std;
                    out[l] = g * xh[l] + bta;
                }
            }
    } else {
        for (long b = 0; b < B; ++b)
            for (long c = 0; c < C; ++c) {
                const double inv_std = 1.0 / std::sqrt(running_var_[c] + eps);
                const double mean = running_mean_[c];
                const double g = gamma_.value[c], bta = beta_.value[c];
                const double* p = x.data.data() + (b * C + c) * L;
                double* out = y.data.data() + (b * C + c) * L;
                for (long l = 0; l < L; ++l) out[l] = g * (p[l] - mean) * inv_std + bta;
            }
    }
    return y;
}

const Tensor& BatchNorm1d::backward(const Tensor& dy) {
    const long B = dy.dim(0), C = dy.dim(1), L = dy.dim(2);
    gamma_.zero_grad();
    beta_.zero_grad();
    ensure_shape(dx_, dy.shape);
    Tensor& dx = dx_;

    if (cached_mode_ == Mode::kEval) {
        constexpr double eps = 1e-5;
        for (long c = 0; c < C; ++c) {
            const double scale = gamma_.value[c] / std::sqrt(running_var_[c] + eps);
            for (long b = 0; b < B; ++b) {
                const double* d = dy.data.data() + (b * C + c) * L;
                double* out = dx.data.data() + (b * C + c) * L;
                for (long l = 0; l < L; ++l) out[l] = d[l] * scale;
            }
        }
        return dx;
    }

    const double n = static_cast<double>(B * L);
    for (long b = 0; b < B; ++b)
        for (long c = 0; c < C; ++c) {
            const double* d = dy.data.data() + (b * C + c) * L;
            const double* xh = cached_xhat_.data.data() + (b * C + c) * L;
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (long l = 0; l < L; ++l) {
                sum_dy += d[l];
                sum_dy_xhat += d[l] * xh[l];
            }
            gamma_.grad[c] += sum_dy_xhat;
            beta_.grad[c] += sum_dy;
        }
    for (long b = 0; b < B; ++b)
        for (long c = 0; c < C; ++c) {
            const double* d = dy.data.data() + (b * C + c) * L;
            const double* xh = cached_xhat_.data.data() + (b * C + c) * L;
            double* out = dx.data.data() + (b * C + c) * L;
            const double g = gamma_.value[c], inv_std = cached_inv_std_[c];
            const double mean_dy = beta_.grad[c] / n;
            const double mean_dy_xhat = gamma_.grad[c] / n;
            for (long l = 0; l < L; ++l)
                out[l] = g * inv_std * (d[l] - mean_dy - xh[l] * mean_dy_xhat);
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Activation

std::string Activation::describe() const { return kind_ == Act::kGelu ? "gelu" : "silu"; }

double Activation::eval(Act kind, double x) {
    if (kind == Act::kGelu) return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    return x / (1.0 + std::exp(-x));
}

double Activation::derivative(Act kind, double x) {
    if (kind == Act::kGelu) {
        const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        return cdf + x * pdf;
    }
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

const Tensor& Activation::forward(const Tensor& x, const LayerContext&) {
    ensure_shape(out_, x.shape);
    cached_deriv_.resize(x.data.size());
    if (kind_ == Act::kGelu)
        kernels::gelu_forward(x.data.data(), out_.data.data(), cached_deriv_.data(),
                              x.data.size());
    else
        kernels::silu_forward(x.data.data(), out_.data.data(), cached_deriv_.data(),
                              x.data.size());
    return out_;
}

const Tensor& Activation::backward(const Tensor& dy) {
    ensure_shape(dx_, dy.shape);
    for (long i = 0; i < dy.size(); ++i) dx_.data[i] = dy.data[i] * cached_deriv_[i];
    return dx_;
}

// ---------------------------------------------------------------------------
// AdaptiveAvgPool1d

const Tensor& AdaptiveAvgPool1d::forward(const Tensor& x, const LayerContext&) {
    check_3d(x, "AdaptiveAvgPool1d");
    const long B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (T < 1) throw std::invalid_argument("AdaptiveAvgPool1d: empty time axis");
    cached_B_ = B;
    cached_C_ = C;
    cached_T_ = T;
    ensure_shape(out_, {B, C});
    Tensor& y = out_;
    for (long b = 0; b < B; ++b)
        for (long c = 0; c < C; ++c) {
            const double* p = x.data.data() + (b * C + c) * T;
            double acc = 0.0;
            for (long t = 0; t < T; ++t) acc += p[t];
            y.data[b * C + c] = acc / static_cast<double>(T);
        }
    return y;
}

const Tensor& AdaptiveAvgPool1d::backward(const Tensor& dy) {
    ensure_shape(dx_, {cached_B_, cached_C_, cached_T_});
    Tensor& dx = dx_;
    const double inv = 1.0 / static_cast<double>(cached_T_);
    for (long b = 0; b < cached_B_; ++b)
        for (long c = 0; c < cached_C_; ++c) {
            const double d = dy.data[b * cached_C_ + c] * inv;
            double* out = dx.data.data() + (b * cached_C_ + c) * cached_T_;
            for (long t = 0; t < cached_T_; ++t) out[t] = d;
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features, bool conv_group)
    : in_features_(in_features), out_features_(out_features) {
    const std::string tag = "fc" + std::to_string(in_features) + "x" + std::to_string(out_features);
    weight_ = Param{tag + ".w", {out_features, in_features},
                    std::vector<double>(static_cast<size_t>(out_features) * in_features, 0.0), {},
                    true, conv_group, out_features};
    bias_ = Param{tag + ".b", {out_features}, std::vector<double>(out_features, 0.0), {}, false,
                  conv_group, 0};
}

std::string Linear::describe() const {
    return "fc(" + std::to_string(in_features_) + "," + std::to_string(out_features_) + ")";
}

const Tensor& Linear::forward(const Tensor& x, const LayerContext&) {
    if (x.shape.size() != 2 || x.dim(1) != in_features_)
        throw std::invalid_argument("Linear: expected B x " + std::to_string(in_features_) + " input");
    cached_x_ = &x;
    const long B = x.dim(0);
    ensure_shape(out_, {B, out_features_});
    Tensor& y = out_;
    CMapRM X(x.data.data(), B, in_features_);
    CMapRM W(weight_.value.data(), out_features_, in_features_);
    MapRM Y(y.data.data(), B, out_features_);
    Y.noalias() = X * W.transpose();
    for (long b = 0; b < B; ++b)
        for (long o = 0; o < out_features_; ++o) y.data[b * out_features_ + o] += bias_.value[o];
    return y;
}

const Tensor& Linear::backward(const Tensor& dy) {
    const long B = dy.dim(0);
    weight_.zero_grad();
    bias_.zero_grad();
    ensure_shape(dx_, {B, in_features_});
    Tensor& dx = dx_;
    CMapRM D(dy.data.data(), B, out_features_);
    CMapRM X(cached_x_->data.data(), B, in_features_);
    CMapRM W(weight_.value.data(), out_features_, in_features_);
    MapRM(weight_.grad.data(), out_features_, in_features_).noalias() = D.transpose() * X;
    for (long b = 0; b < B; ++b)
        for (long o = 0; o < out_features_; ++o) bias_.grad[o] += dy.data[b * out_features_ + o];
    MapRM(dx.data.data(), B, in_features_).noalias() = D * W;
    return dx;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("Dropout: p must be in [0, 1)");
}

std::string Dropout::describe() const {
    std::ostringstream os;
    os << "dropout(" << p_ << ")";
    return os.str();
}

const Tensor& Dropout::forward(const Tensor& x, const LayerContext& ctx) {
    cached_mode_ = ctx.mode;
    if (ctx.mode == Mode::kEval || p_ == 0.0) {
        cached_mode_ = Mode::kEval;
        return x;
    }
    if (ctx.dropout_rng == nullptr)
        throw std::invalid_argument("Dropout: training mode needs an RNG");
    const double keep_scale = 1.0 / (1.0 - p_);
    mask_.assign(x.data.size(), 0.0);
    ensure_shape(out_, x.shape);
    std::fill(out_.data.begin(), out_.data.end(), 0.0);
    for (size_t i = 0; i < x.data.size(); ++i) {
        if (ctx.dropout_rng->uniform() >= p_) {
            mask_[i] = keep_scale;
            out_.data[i] = x.data[i] * keep_scale;
        }
    }
    return out_;
}

const Tensor& Dropout::backward(const Tensor& dy) {
    if (cached_mode_ == Mode::kEval) return dy;
    ensure_shape(dx_, dy.shape);
    for (size_t i = 0; i < dy.data.size(); ++i) dx_.data[i] = dy.data[i] * mask_[i];
    return dx_;
}

}  // namespace cfocal
