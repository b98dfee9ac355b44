#pragma once

#include <cstdint>
#include <vector>

#include "scl/tensor.hpp"

namespace scl {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step_count = 0;
    std::vector<std::vector<double>> m;  // first moments, one per parameter
    std::vector<std::vector<double>> v;  // second moments

    AdamState() = default;
    AdamState(const ParameterList& params, AdamConfig cfg);
};

// One bias-corrected Adam update using each parameter's accumulated grad.
// Throws NumericError naming the first parameter with a non-finite gradient;
// in that case no parameter is modified.
void adam_step(ParameterList& params, AdamState& state);

class Adam {
public:
    Adam(ParameterList params, AdamConfig cfg) : params_(std::move(params)), state_(params_, cfg) {}

    void zero_grad();
    void step() { adam_step(params_, state_); }
    const AdamState& state() const { return state_; }

private:
    ParameterList params_;
    AdamState state_;
};

}  // namespace scl
