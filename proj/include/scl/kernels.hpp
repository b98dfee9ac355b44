#pragma once

// Dense numeric kernels behind the differentiable ops.
//
// Two implementations share one signature set:
//   reference::  straightforward serial loops, kept as the test oracle;
//   parallel::   im2col + packed register-blocked GEMM, OpenMP over row
//                blocks of the output. Every output element is reduced in
//                a fixed order, so results do not depend on thread count.
//
// Layouts (row-major):
//   conv1d            x[B][Cin][L]  w[Cout][Cin][K]  y[B][Cout][Lout]
//   conv1d_transpose  x[B][Cin][L]  w[Cin][Cout][K]  y[B][Cout][(L-1)*stride+K]
//   linear            x[B][In]      w[Out][In]       y[B][Out]
//
// Convolutions use the cross-correlation convention (no kernel flip).
// Backward kernels accumulate into their outputs; pass an empty span to
// skip a gradient.

#include <cstddef>
#include <span>

namespace scl::kernels {

struct ConvGeometry {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t in_length = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t pad_left = 0;   // conv1d only
    std::size_t out_length = 1;
};

// Output length of a strided 1-D convolution over `length` samples with
// `pad_total` zeros added.
std::size_t conv_out_length(std::size_t length, std::size_t kernel, std::size_t stride,
                            std::size_t pad_total);
std::size_t conv_transpose_out_length(std::size_t length, std::size_t kernel,
                                      std::size_t stride);

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);
void conv1d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void conv1d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db);
void conv1d_transpose_forward(const ConvGeometry& g, std::span<const double> x,
                              std::span<const double> w, std::span<const double> bias,
                              std::span<double> y);
void conv1d_transpose_backward(const ConvGeometry& g, std::span<const double> x,
                               std::span<const double> w, std::span<const double> dy,
                               std::span<double> dx, std::span<double> dw, std::span<double> db);
void linear_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias, std::span<double> y);
void linear_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                     std::span<const double> w, std::span<const double> dy, std::span<double> dx,
                     std::span<double> dw, std::span<double> db);

}  // namespace reference

namespace parallel {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);
void conv1d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void conv1d_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> db);
void conv1d_transpose_forward(const ConvGeometry& g, std::span<const double> x,
                              std::span<const double> w, std::span<const double> bias,
                              std::span<double> y);
void conv1d_transpose_backward(const ConvGeometry& g, std::span<const double> x,
                               std::span<const double> w, std::span<const double> dy,
                               std::span<double> dx, std::span<double> dw, std::span<double> db);
void linear_forward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                    std::span<const double> w, std::span<const double> bias, std::span<double> y);
void linear_backward(std::size_t batch, std::size_t in, std::size_t out, std::span<const double> x,
                     std::span<const double> w, std::span<const double> dy, std::span<double> dx,
                     std::span<double> dw, std::span<double> db);

}  // namespace parallel

}  // namespace scl::kernels
