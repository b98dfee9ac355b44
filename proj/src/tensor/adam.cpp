#include "scl/adam.hpp"

#include <cmath>

#include "scl/errors.hpp"

namespace scl {

AdamState::AdamState(const ParameterList& params, AdamConfig cfg) : config(cfg) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p.value.numel(), 0.0);
        v.emplace_back(p.value.numel(), 0.0);
    }
}

void adam_step(ParameterList& params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (state.m[i].size() != p.value.numel()) {
            throw ShapeError("adam_step: moment size mismatch for parameter '" + p.name + "'");
        }
        if (!p.value.has_grad()) continue;
        for (double g : p.value.grad()) {
            if (!std::isfinite(g)) {
                throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
            }
        }
    }

    const auto& c = state.config;
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.value.has_grad()) continue;
        auto w = p.value.data();
        auto g = p.value.grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double mhat = m[j] / corr1;
            const double vhat = v[j] / corr2;
            w[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

}  // namespace scl
