#include <algorithm>
#include <cstring>
#include <vector>

#include "scl/kernels.hpp"

namespace scl::kernels::parallel {

namespace {

// Register block: MR rows of A against NR = 2 x 8 doubles of B.
constexpr std::size_t kMR = 6;
constexpr std::size_t kNR = 16;
constexpr std::size_t kKC = 256;
constexpr std::size_t kNC = 512;

typedef double v8d __attribute__((vector_size(64)));

inline double a_at(const double* a, std::size_t lda, bool trans, std::size_t i, std::size_t p) {
    return trans ? a[p * lda + i] : a[i * lda + p];
}

inline double b_at(const double* b, std::size_t ldb, bool trans, std::size_t p, std::size_t j) {
    return trans ? b[j * ldb + p] : b[p * ldb + j];
}

void micro_kernel(std::size_t kc, const double* __restrict ap, const double* __restrict bp,
                  double* __restrict c, std::size_t ldc, std::size_t mr, std::size_t nr) {
    v8d lo[kMR] = {};
    v8d hi[kMR] = {};
    for (std::size_t p = 0; p < kc; ++p) {
        v8d b0, b1;
        std::memcpy(&b0, bp + p * kNR, sizeof(v8d));
        std::memcpy(&b1, bp + p * kNR + 8, sizeof(v8d));
        const double* arow = ap + p * kMR;
        for (std::size_t i = 0; i < kMR; ++i) {
            lo[i] += arow[i] * b0;
            hi[i] += arow[i] * b1;
        }
    }
    for (std::size_t i = 0; i < mr; ++i) {
        double* crow = c + i * ldc;
        for (std::size_t j = 0; j < nr; ++j) crow[j] += j < 8 ? lo[i][j] : hi[i][j - 8];
    }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
    if (!accumulate) {
        for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    }
    if (m == 0 || n == 0 || k == 0) return;

    std::vector<double> bpack(kKC * kNC);
    const auto m_blocks = static_cast<std::ptrdiff_t>((m + kMR - 1) / kMR);

    for (std::size_t j0 = 0; j0 < n; j0 += kNC) {
        const std::size_t nc = std::min(kNC, n - j0);
        for (std::size_t p0 = 0; p0 < k; p0 += kKC) {
            const std::size_t kc = std::min(kKC, k - p0);
            // Pack B[p0:p0+kc, j0:j0+nc] into NR-wide column panels, zero tail.
            for (std::size_t jp = 0; jp < nc; jp += kNR) {
                double* dst = bpack.data() + (jp / kNR) * kNR * kc;
                const std::size_t nr = std::min(kNR, nc - jp);
                for (std::size_t p = 0; p < kc; ++p) {
                    std::size_t j = 0;
                    for (; j < nr; ++j) dst[p * kNR + j] = b_at(b, ldb, trans_b, p0 + p, j0 + jp + j);
                    for (; j < kNR; ++j) dst[p * kNR + j] = 0.0;
                }
            }

#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t ib = 0; ib < m_blocks; ++ib) {
                alignas(64) double apack[kMR * kKC];
                const std::size_t i0 = static_cast<std::size_t>(ib) * kMR;
                const std::size_t mr = std::min(kMR, m - i0);
                for (std::size_t p = 0; p < kc; ++p) {
                    std::size_t i = 0;
                    for (; i < mr; ++i) apack[p * kMR + i] = a_at(a, lda, trans_a, i0 + i, p0 + p);
                    for (; i < kMR; ++i) apack[p * kMR + i] = 0.0;
                }
                for (std::size_t jp = 0; jp < nc; jp += kNR) {
                    micro_kernel(kc, apack, bpack.data() + (jp / kNR) * kNR * kc,
                                 c + i0 * ldc + j0 + jp, ldc, mr, std::min(kNR, nc - jp));
                }
            }
        }
    }
}

namespace {

// cols[(c*K + q)][b*Lout + t] = x[b][c][t*stride + q - pad_left], zero outside.
void im2col(const ConvGeometry& g, std::span<const double> x, std::vector<double>& cols) {
    const std::size_t n = g.batch * g.out_length;
    cols.assign(g.in_channels * g.kernel * n, 0.0);
    const auto batch = static_cast<std::ptrdiff_t>(g.batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < batch; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        for (std::size_t c = 0; c < g.in_channels; ++c) {
            const double* xrow = x.data() + (b * g.in_channels + c) * g.in_length;
            for (std::size_t q = 0; q < g.kernel; ++q) {
                double* dst = cols.data() + (c * g.kernel + q) * n + b * g.out_length;
                for (std::size_t t = 0; t < g.out_length; ++t) {
                    auto pos = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                               static_cast<std::ptrdiff_t>(g.pad_left);
                    if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.in_length)) dst[t] = xrow[pos];
                }
            }
        }
    }
}

// Adjoint of im2col: x[b][c][pos] += cols[(c*K + q)][b*Lout + t].
void col2im_add(const ConvGeometry& g, const std::vector<double>& cols, std::span<double> x) {
    const std::size_t n = g.batch * g.out_length;
    const auto batch = static_cast<std::ptrdiff_t>(g.batch);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < batch; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        for (std::size_t c = 0; c < g.in_channels; ++c) {
            double* xrow = x.data() + (b * g.in_channels + c) * g.in_length;
            for (std::size_t q = 0; q < g.kernel; ++q) {
                const double* src = cols.data() + (c * g.kernel + q) * n + b * g.out_length;
                for (std::size_t t = 0; t < g.out_length; ++t) {
                    auto pos = static_cast<std::ptrdiff_t>(t * g.stride + q) -
                               static_cast<std::ptrdiff_t>(g.pad_left);
                    if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.in_length)) xrow[pos] += src[t];
                }
            }
        }
    }
}

// [B][C][L] <-> [C][B*L]
void to_channel_major(std::span<const double> x, std::size_t batch, std::size_t channels,
                      std::size_t length, std::vector<double>& out) {
    out.resize(batch * channels * length);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c)
            std::memcpy(out.data() + c * batch * length + b * length,
                        x.data() + (b * channels + c) * length, length * sizeof(double));
}

}  // namespace

void conv1d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
    std::vector<double> cols;
    im2col(g, x, cols);
    const std::size_t n = g.batch * g.out_length;
    const std::size_t ck = g.in_channels * g.kernel;
    std::vector<double> out(g.out_channels * n);
    gemm(false, false, g.out_channels, n, ck, w.data(), ck, cols.data(), n, out.data(), n, false);
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            const double bo = bias.empty() ? 0.0 : bias[o];
            const double* src = out.data() + o * n + b * g.out_length;
            double* dst = y.data() + (b * g.out_channels + o) * g.out_length;
            for (std::size_t t = 0; t < g.out_length; ++t) dst[t] = src[t] + bo;
        }
    }
}

void conv1d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
    const std::size_t n = g.batch * g.out_length;
    const std::size_t ck = g.in_channels * g.kernel;
    std::vector<double> dout;
    to_channel_major(dy, g.batch, g.out_channels, g.out_length, dout);
    if (!db.empty()) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += dout[o * n + j];
            db[o] += s;
        }
    }
    if (!dw.empty()) {
        std::vector<double> cols;
        im2col(g, x, cols);
        gemm(false, true, g.out_channels, ck, n, dout.data(), n, cols.data(), n, dw.data(), ck, true);
    }
    if (!dx.empty()) {
        std::vector<double> dcols(ck * n);
        gemm(true, false, ck, n, g.out_channels, w.data(), ck, dout.data(), n, dcols.data(), n, false);
        col2im_add(g, dcols, dx);
    }
}

void conv1d_transpose_forward(const ConvGeometry& g, std::span<const double> x,
                              std::span<const double> w, std::span<const double> bias,
                              std::span<double> y) {
    // The transposed conv is the input-adjoint of a valid conv whose input is y.
    ConvGeometry adj{g.batch, g.out_channels, g.in_channels, g.out_length,
                     g.kernel, g.stride, 0, g.in_length};
    const std::size_t n = g.batch * g.in_length;
    const std::size_t ok = g.out_channels * g.kernel;
    std::vector<double> xm;
    to_channel_major(x, g.batch, g.in_channels, g.in_length, xm);
    std::vector<double> cols(ok * n);
    gemm(true, false, ok, n, g.in_channels, w.data(), ok, xm.data(), n, cols.data(), n, false);
    for (std::size_t b = 0; b < g.batch; ++b) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            double* yrow = y.data() + (b * g.out_channels + o) * g.out_length;
            std::fill(yrow, yrow + g.out_length, bias.empty() ? 0.0 : bias[o]);
        }
    }
    col2im_add(adj, cols, y);
}

void conv1d_transpose_backward(const ConvGeometry& g, std::span<const double> x,
                               std::span<const double> w, std::span<const double> dy,
                               std::span<double> dx, std::span<double> dw, std::span<double> db) {
    ConvGeometry adj{g.batch, g.out_channels, g.in_channels, g.out_length,
                     g.kernel, g.stride, 0, g.in_length};
    const std::size_t n = g.batch * g.in_length;
    const std::size_t ok = g.out_channels * g.kernel;
    if (!db.empty()) {
        for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t o = 0; o < g.out_channels; ++o) {
                const double* drow = dy.data() + (b * g.out_channels + o) * g.out_length;
                double s = 0.0;
                for (std::size_t u = 0; u < g.out_length; ++u) s += drow[u];
                db[o] += s;
            }
    }
    std::vector<double> dcols;
    im2col(adj, dy, dcols);
    if (!dx.empty()) {
        std::vector<double> dxm(g.in_channels * n);
        gemm(false, false, g.in_channels, n, ok, w.data(), ok, dcols.data(), n, dxm.data(), n, false);
        for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t c = 0; c < g.in_channels; ++c) {
                const double* src = dxm.data() + c * n + b * g.in_length;
                double* dst = dx.data() + (b * g.in_channels + c) * g.in_length;
                for (std::size_t t = 0; t < g.in_length; ++t) dst[t] += src[t];
            }
    }
    if (!dw.empty()) {
        std::vector<double> xm;
        to_channel_major(x, g.batch, g.in_channels, g.in_length, xm);
        gemm(false, true, g.in_channels, ok, n, xm.data(), n, dcols.data(), n, dw.data(), ok, true);
    }
}

void linear_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias,
                    std::span<double> y) {
    gemm(false, true, batch, out, in, x.data(), in, w.data(), in, y.data(), out, false);
    if (!bias.empty()) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) y[b * out + o] += bias[o];
    }
}

void linear_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                     std::span<const double> w, std::span<const double> dy, std::span<double> dx,
                     std::span<double> dw, std::span<double> db) {
    if (!db.empty()) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out; ++o) db[o] += dy[b * out + o];
    }
    if (!dx.empty()) gemm(false, false, batch, in, out, dy.data(), out, w.data(), in, dx.data(), in, true);
    if (!dw.empty()) gemm(true, false, out, in, batch, dy.data(), out, x.data(), in, dw.data(), in, true);
}

}  // namespace scl::kernels::parallel
