#include <algorithm>
#include <stdexcept>

#include "scl/kernels.hpp"

namespace scl::kernels {

std::size_t conv_out_length(std::size_t length, std::size_t kernel, std::size_t stride,
                            std::size_t pad_total) {
    if (stride == 0) throw std::invalid_argument("conv: stride must be >= 1");
    if (kernel > length + pad_total) {
        throw std::invalid_argument("conv: kernel " + std::to_string(kernel) +
                                    " longer than padded input " +
                                    std::to_string(length + pad_total));
    }
    return (length + pad_total - kernel) / stride + 1;
}

std::size_t conv_transpose_out_length(std::size_t length, std::size_t kernel,
                                      std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("conv_transpose: stride must be >= 1");
    return (length - 1) * stride + kernel;
}

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                double av = trans_a ? a[p * lda + i] : a[i * lda + p];
                double bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
                s += av * bv;
            }
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + s : s;
        }
    }
}

void conv1d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
    const auto K = g.kernel;
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t t = 0; t < g.out_length; ++t) {
                double s = bias.empty() ? 0.0 : bias[o];
                for (std::size_t c = 0; c < g.in_channels; ++c) {
                    for (std::size_t q = 0; q < K; ++q) {
                        auto pos = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                                   static_cast<std::ptrdiff_t>(g.pad_left);
                        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.in_length)) continue;
                        s += w[(o * g.in_channels + c) * K + q] *
                             x[(b * g.in_channels + c) * g.in_length + pos];
                    }
                }
                y[(b * g.out_channels + o) * g.out_length + t] = s;
            }
        }
    }
}

void conv1d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
    const auto K = g.kernel;
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t t = 0; t < g.out_length; ++t) {
                double d = dy[(b * g.out_channels + o) * g.out_length + t];
                if (!db.empty()) db[o] += d;
                for (std::size_t c = 0; c < g.in_channels; ++c) {
                    for (std::size_t q = 0; q < K; ++q) {
                        auto pos = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                                   static_cast<std::ptrdiff_t>(g.pad_left);
                        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.in_length)) continue;
                        auto xi = (b * g.in_channels + c) * g.in_length + pos;
                        auto wi = (o * g.in_channels + c) * K + q;
                        if (!dw.empty()) dw[wi] += d * x[xi];
                        if (!dx.empty()) dx[xi] += d * w[wi];
                    }
                }
            }
        }
    }
}

void conv1d_transpose_forward(const ConvGeometry& g, std::span<const double> x,
                              std::span<const double> w, std::span<const double> bias,
                              std::span<double> y) {
    const auto K = g.kernel;
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            double* yrow = y.data() + (b * g.out_channels + o) * g.out_length;
            if (!bias.empty()) {
                for (std::size_t u = 0; u < g.out_length; ++u) yrow[u] = bias[o];
            }
            for (std::size_t c = 0; c < g.in_channels; ++c) {
                for (std::size_t t = 0; t < g.in_length; ++t) {
                    double xv = x[(b * g.in_channels + c) * g.in_length + t];
                    for (std::size_t q = 0; q < K; ++q) {
                        yrow[t * g.stride + q] += xv * w[(c * g.out_channels + o) * K + q];
                    }
                }
            }
        }
    }
}

void conv1d_transpose_backward(const ConvGeometry& g, std::span<const double> x,
                               std::span<const double> w, std::span<const double> dy,
                               std::span<double> dx, std::span<double> dw, std::span<double> db) {
    const auto K = g.kernel;
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            const double* drow = dy.data() + (b * g.out_channels + o) * g.out_length;
            if (!db.empty()) {
                for (std::size_t u = 0; u < g.out_length; ++u) db[o] += drow[u];
            }
            for (std::size_t c = 0; c < g.in_channels; ++c) {
                for (std::size_t t = 0; t < g.in_length; ++t) {
                    auto xi = (b * g.in_channels + c) * g.in_length + t;
                    for (std::size_t q = 0; q < K; ++q) {
                        auto wi = (c * g.out_channels + o) * K + q;
                        double d = drow[t * g.stride + q];
                        if (!dx.empty()) dx[xi] += d * w[wi];
                        if (!dw.empty()) dw[wi] += d * x[xi];
                    }
                }
            }
        }
    }
}

void linear_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            double s = bias.empty() ? 0.0 : bias[o];
            for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * x[b * in + i];
            y[b * out + o] = s;
        }
    }
}

void linear_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                     std::span<const double> w, std::span<const double> dy, std::span<double> dx,
                     std::span<double> dw, std::span<double> db) {
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            double d = dy[b * out + o];
            if (!db.empty()) db[o] += d;
            for (std::size_t i = 0; i < in; ++i) {
                if (!dw.empty()) dw[o * in + i] += d * x[b * in + i];
                if (!dx.empty()) dx[b * in + i] += d * w[o * in + i];
            }
        }
    }
}

}  // namespace reference
}  // namespace scl::kernels
