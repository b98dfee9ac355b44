#include "scl/ops.hpp"

#include <algorithm>
#include <cmath>

#include "scl/errors.hpp"
#include "scl/kernels.hpp"

namespace scl::ops {

namespace kn = scl::kernels::parallel;

namespace {

// Gradient buffer of parent i, or an empty span when it does not need one.
std::span<double> parent_grad(detail::Node& self, std::size_t i) {
    auto& p = *self.parents[i];
    if (!p.requires_grad) return {};
    p.ensure_grad();
    return p.grad;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

template <class F, class G>
Tensor unary(const Tensor& a, F forward, G derivative) {
    auto x = a.data();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
    std::vector<double> saved = y;
    return Tensor::make_result(a.shape(), std::move(y), {a},
                               [derivative, saved = std::move(saved)](detail::Node& self) {
                                   auto g = parent_grad(self, 0);
                                   const auto& xin = self.parents[0]->data;
                                   for (std::size_t i = 0; i < g.size(); ++i)
                                       g[i] += self.grad[i] * derivative(xin[i], saved[i]);
                               });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
    return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](detail::Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            auto g = parent_grad(self, k);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
    return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](detail::Node& self) {
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        auto gb = parent_grad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
    return Tensor::make_result(a.shape(), std::move(y), {a, b}, [](detail::Node& self) {
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        auto ga = parent_grad(self, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bv[i];
        auto gb = parent_grad(self, 1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * av[i];
    });
}

Tensor scale(const Tensor& a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return Tensor::make_result({}, {s}, {a}, [](detail::Node& self) {
        auto g = parent_grad(self, 0);
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        a,
        [](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> y(a.data().begin(), a.data().end());
    return Tensor::make_result(std::move(shape), std::move(y), {a}, [](detail::Node& self) {
        auto g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

namespace {

struct BatchView {
    std::size_t batch, channels, length;
    bool batched;
};

BatchView view_bcl(const Tensor& x, const char* op) {
    if (x.ndim() == 2) return {1, x.dim(0), x.dim(1), false};
    if (x.ndim() == 3) return {x.dim(0), x.dim(1), x.dim(2), true};
    throw ShapeError(std::string(op) + ": expected [C x L] or [B x C x L], got " +
                     shape_str(x.shape()));
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias, std::size_t stride,
              Padding padding) {
    auto v = view_bcl(input, "conv1d");
    if (kernels.ndim() != 3) {
        throw ShapeError("conv1d: kernels must be [C_out x C_in x K], got " +
                         shape_str(kernels.shape()));
    }
    if (kernels.dim(1) != v.channels) {
        throw ShapeError("conv1d: input has " + std::to_string(v.channels) +
                         " channels but kernels " + shape_str(kernels.shape()) + " expect " +
                         std::to_string(kernels.dim(1)));
    }
    if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
    const std::size_t c_out = kernels.dim(0);
    const std::size_t k = kernels.dim(2);
    if (bias.defined() && bias.shape() != Shape{c_out}) {
        throw ShapeError("conv1d: bias must be [" + std::to_string(c_out) + "], got " +
                         shape_str(bias.shape()));
    }

    kernels::ConvGeometry g;
    g.batch = v.batch;
    g.in_channels = v.channels;
    g.out_channels = c_out;
    g.in_length = v.length;
    g.kernel = k;
    g.stride = stride;
    if (padding == Padding::same) {
        g.out_length = (v.length + stride - 1) / stride;
        std::size_t needed = (g.out_length - 1) * stride + k;
        std::size_t pad_total = needed > v.length ? needed - v.length : 0;
        g.pad_left = pad_total / 2;
    } else {
        if (k > v.length) {
            throw ShapeError("conv1d: kernel length " + std::to_string(k) +
                             " exceeds input length " + std::to_string(v.length));
        }
        g.out_length = kernels::conv_out_length(v.length, k, stride, 0);
        g.pad_left = 0;
    }

    std::vector<double> y(g.batch * c_out * g.out_length);
    std::span<const double> bspan = bias.defined() ? bias.data() : std::span<const double>{};
    kn::conv1d_forward(g, input.data(), kernels.data(), bspan, y);

    Shape out_shape = v.batched ? Shape{g.batch, c_out, g.out_length} : Shape{c_out, g.out_length};
    std::vector<Tensor> inputs{input, kernels};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result(std::move(out_shape), std::move(y), std::move(inputs),
                               [g](detail::Node& self) {
                                   auto dx = parent_grad(self, 0);
                                   auto dw = parent_grad(self, 1);
                                   std::span<double> db;
                                   if (self.parents.size() > 2) db = parent_grad(self, 2);
                                   kn::conv1d_backward(g, self.parents[0]->data,
                                                       self.parents[1]->data, self.grad, dx, dw, db);
                               });
}

Tensor conv1d_transpose(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                        std::size_t stride) {
    if (stride < 1) throw ShapeError("conv1d_transpose: stride must be >= 1");
    auto v = view_bcl(input, "conv1d_transpose");
    if (kernels.ndim() != 3 || kernels.dim(0) != v.channels) {
        throw ShapeError("conv1d_transpose: kernels " + shape_str(kernels.shape()) +
                         " incompatible with input " + shape_str(input.shape()) +
                         " (expected [C_in x C_out x K])");
    }
    const std::size_t c_out = kernels.dim(1);
    if (bias.defined() && bias.shape() != Shape{c_out}) {
        throw ShapeError("conv1d_transpose: bias must be [" + std::to_string(c_out) + "], got " +
                         shape_str(bias.shape()));
    }
    kernels::ConvGeometry g;
    g.batch = v.batch;
    g.in_channels = v.channels;
    g.out_channels = c_out;
    g.in_length = v.length;
    g.kernel = kernels.dim(2);
    g.stride = stride;
    g.out_length = kernels::conv_transpose_out_length(v.length, g.kernel, stride);

    std::vector<double> y(g.batch * c_out * g.out_length);
    std::span<const double> bspan = bias.defined() ? bias.data() : std::span<const double>{};
    kn::conv1d_transpose_forward(g, input.data(), kernels.data(), bspan, y);

    Shape out_shape = v.batched ? Shape{g.batch, c_out, g.out_length} : Shape{c_out, g.out_length};
    std::vector<Tensor> inputs{input, kernels};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result(std::move(out_shape), std::move(y), std::move(inputs),
                               [g](detail::Node& self) {
                                   auto dx = parent_grad(self, 0);
                                   auto dw = parent_grad(self, 1);
                                   std::span<double> db;
                                   if (self.parents.size() > 2) db = parent_grad(self, 2);
                                   kn::conv1d_transpose_backward(g, self.parents[0]->data,
                                                                 self.parents[1]->data, self.grad,
                                                                 dx, dw, db);
                               });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.ndim() != 2 || weight.ndim() != 2 || weight.dim(1) != input.dim(1)) {
        throw ShapeError("linear: input " + shape_str(input.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
    }
    const std::size_t batch = input.dim(0), in = input.dim(1), out = weight.dim(0);
    if (bias.defined() && bias.shape() != Shape{out}) {
        throw ShapeError("linear: bias must be [" + std::to_string(out) + "], got " +
                         shape_str(bias.shape()));
    }
    std::vector<double> y(batch * out);
    std::span<const double> bspan = bias.defined() ? bias.data() : std::span<const double>{};
    kn::linear_forward(batch, in, out, input.data(), weight.data(), bspan, y);
    std::vector<Tensor> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result({batch, out}, std::move(y), std::move(inputs),
                               [batch, in, out](detail::Node& self) {
                                   auto dx = parent_grad(self, 0);
                                   auto dw = parent_grad(self, 1);
                                   std::span<double> db;
                                   if (self.parents.size() > 2) db = parent_grad(self, 2);
                                   kn::linear_backward(batch, in, out, self.parents[0]->data,
                                                       self.parents[1]->data, self.grad, dx, dw, db);
                               });
}

Tensor mean_over_time(const Tensor& input) {
    if (input.ndim() != 3) {
        throw ShapeError("mean_over_time: expected [B x C x L], got " + shape_str(input.shape()));
    }
    const std::size_t rows = input.dim(0) * input.dim(1), len = input.dim(2);
    std::vector<double> y(rows, 0.0);
    auto x = input.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t t = 0; t < len; ++t) s += x[r * len + t];
        y[r] = s / static_cast<double>(len);
    }
    return Tensor::make_result({input.dim(0), input.dim(1)}, std::move(y), {input},
                               [rows, len](detail::Node& self) {
                                   auto g = parent_grad(self, 0);
                                   const double inv = 1.0 / static_cast<double>(len);
                                   for (std::size_t r = 0; r < rows; ++r)
                                       for (std::size_t t = 0; t < len; ++t)
                                           g[r * len + t] += self.grad[r] * inv;
                               });
}

namespace {

std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t, const char* op) {
    if (t.ndim() == 1) return {1, t.dim(0)};
    if (t.ndim() == 2) return {t.dim(0), t.dim(1)};
    throw ShapeError(std::string(op) + ": expected [B x C] or [C], got " + shape_str(t.shape()));
}

void softmax_rows(std::span<const double> x, std::size_t rows, std::size_t cols,
                  std::vector<double>& out) {
    out.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * cols;
        double mx = *std::max_element(xr, xr + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] = std::exp(xr[c] - mx);
            z += out[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= z;
    }
}

}  // namespace

Tensor softmax(const Tensor& logits) {
    auto [rows, cols] = rows_cols(logits, "softmax");
    std::vector<double> y;
    softmax_rows(logits.data(), rows, cols, y);
    std::vector<double> saved = y;
    return Tensor::make_result(logits.shape(), std::move(y), {logits},
                               [rows, cols, s = std::move(saved)](detail::Node& self) {
                                   auto g = parent_grad(self, 0);
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       double dot = 0.0;
                                       for (std::size_t c = 0; c < cols; ++c)
                                           dot += self.grad[r * cols + c] * s[r * cols + c];
                                       for (std::size_t c = 0; c < cols; ++c)
                                           g[r * cols + c] += s[r * cols + c] *
                                                              (self.grad[r * cols + c] - dot);
                                   }
                               });
}

Tensor cross_entropy(const Tensor& logits, const Tensor& targets,
                     std::optional<std::span<const double>> sample_weights) {
    require_same_shape(logits, targets, "cross_entropy");
    auto [rows, cols] = rows_cols(logits, "cross_entropy");
    std::vector<double> w(rows, 1.0 / static_cast<double>(rows));
    if (sample_weights) {
        if (sample_weights->size() != rows) {
            throw ShapeError("cross_entropy: " + std::to_string(sample_weights->size()) +
                             " sample weights for " + std::to_string(rows) + " rows");
        }
        w.assign(sample_weights->begin(), sample_weights->end());
    }
    auto x = logits.data();
    auto t = targets.data();
    std::vector<double> probs;
    softmax_rows(x, rows, cols, probs);
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * cols;
        double mx = *std::max_element(xr, xr + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - mx);
        double lse = mx + std::log(z);
        double row = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (t[r * cols + c] != 0.0) row -= t[r * cols + c] * (xr[c] - lse);
        }
        loss += w[r] * row;
    }
    return Tensor::make_result(
        {}, {loss}, {logits, targets},
        [rows, cols, w = std::move(w), p = std::move(probs)](detail::Node& self) {
            const double up = self.grad[0];
            const auto& tv = self.parents[1]->data;
            const auto& xv = self.parents[0]->data;
            auto gl = parent_grad(self, 0);
            if (!gl.empty()) {
                for (std::size_t r = 0; r < rows; ++r) {
                    double tsum = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) tsum += tv[r * cols + c];
                    for (std::size_t c = 0; c < cols; ++c)
                        gl[r * cols + c] +=
                            up * w[r] * (p[r * cols + c] * tsum - tv[r * cols + c]);
                }
            }
            auto gt = parent_grad(self, 1);
            if (!gt.empty()) {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* xr = xv.data() + r * cols;
                    double mx = *std::max_element(xr, xr + cols);
                    double z = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) z += std::exp(xr[c] - mx);
                    double lse = mx + std::log(z);
                    for (std::size_t c = 0; c < cols; ++c)
                        gt[r * cols + c] -= up * w[r] * (xr[c] - lse);
                }
            }
        });
}

Tensor bce(const Tensor& recon, const Tensor& target) {
    require_same_shape(recon, target, "bce");
    if (recon.ndim() == 0) throw ShapeError("bce: expected a batched tensor");
    const std::size_t batch = recon.dim(0);
    const double inv_b = 1.0 / static_cast<double>(batch);
    auto r = recon.data();
    auto x = target.data();
    double loss = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        double rc = std::clamp(r[i], kBceEps, 1.0 - kBceEps);
        loss -= x[i] * std::log(rc) + (1.0 - x[i]) * std::log(1.0 - rc);
    }
    loss *= inv_b;
    return Tensor::make_result({}, {loss}, {recon, target}, [inv_b](detail::Node& self) {
        const double up = self.grad[0] * inv_b;
        const auto& rv = self.parents[0]->data;
        const auto& xv = self.parents[1]->data;
        auto gr = parent_grad(self, 0);
        for (std::size_t i = 0; i < gr.size(); ++i) {
            if (rv[i] < kBceEps || rv[i] > 1.0 - kBceEps) continue;
            gr[i] += up * (-xv[i] / rv[i] + (1.0 - xv[i]) / (1.0 - rv[i]));
        }
        auto gx = parent_grad(self, 1);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            double rc = std::clamp(rv[i], kBceEps, 1.0 - kBceEps);
            gx[i] += up * (std::log(1.0 - rc) - std::log(rc));
        }
    });
}

Tensor kl_to_unit_gaussian(const Tensor& mu, const Tensor& logvar) {
    require_same_shape(mu, logvar, "kl_to_unit_gaussian");
    if (mu.ndim() == 0) throw ShapeError("kl_to_unit_gaussian: expected a batched tensor");
    const double inv_b = 1.0 / static_cast<double>(mu.dim(0));
    auto m = mu.data();
    auto lv = logvar.data();
    double kl = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) kl += -0.5 * (1.0 + lv[i] - m[i] * m[i] - std::exp(lv[i]));
    kl *= inv_b;
    return Tensor::make_result({}, {kl}, {mu, logvar}, [inv_b](detail::Node& self) {
        const double up = self.grad[0] * inv_b;
        const auto& mv = self.parents[0]->data;
        const auto& lvv = self.parents[1]->data;
        auto gm = parent_grad(self, 0);
        for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += up * mv[i];
        auto gl = parent_grad(self, 1);
        for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += up * -0.5 * (1.0 - std::exp(lvv[i]));
    });
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
    std::vector<double> v(labels.size() * classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw ShapeError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                             std::to_string(classes) + ")");
        }
        v[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    return Tensor::from({labels.size(), classes}, std::move(v));
}

}  // namespace scl::ops
