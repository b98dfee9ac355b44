#pragma once

// Differentiable operations over scl::Tensor. Every op records itself on
// the tape when any input requires a gradient; otherwise it is a plain
// forward computation with no graph kept alive.
//
// Batched inputs put the batch on axis 0. Elementwise ops require equal
// shapes (no general broadcasting).

#include <optional>

#include "scl/tensor.hpp"

namespace scl::ops {

enum class Padding { same, valid };

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Gradient passes only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor reshape(const Tensor& a, Shape shape);

// input [C_in x L] or [B x C_in x L]; kernels [C_out x C_in x K]; bias [C_out].
// Same padding is symmetric, with the odd element on the right.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              Padding padding);
// input [C_in x L] or [B x C_in x L]; kernels [C_in x C_out x K]; no padding.
Tensor conv1d_transpose(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                        std::size_t stride);
// input [B x In]; weight [Out x In]; bias [Out].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
// [B x C x L] -> [B x C], average over L.
Tensor mean_over_time(const Tensor& input);
// Row-wise softmax of [B x C] (or a single row [C]).
Tensor softmax(const Tensor& logits);

// sum_b w_b * sum_c -target[b,c] * log_softmax(logits)[b,c]; targets may be
// soft distributions. Default weights are 1/B (batch mean).
Tensor cross_entropy(const Tensor& logits, const Tensor& targets,
                     std::optional<std::span<const double>> sample_weights = std::nullopt);
// Per-bin binary cross-entropy, summed over bins and averaged over axis 0.
// recon is clamped to [kBceEps, 1 - kBceEps] before the log.
inline constexpr double kBceEps = 1e-7;
Tensor bce(const Tensor& recon, const Tensor& target);
// KL(N(mu, exp(logvar)) || N(0, I)), summed over dims, averaged over axis 0.
Tensor kl_to_unit_gaussian(const Tensor& mu, const Tensor& logvar);

// One-hot rows for integer labels.
Tensor one_hot(std::span<const int> labels, std::size_t classes);

}  // namespace scl::ops
