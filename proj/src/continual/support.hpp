#pragma once

#include <chrono>

#include "scl/continual.hpp"

namespace scl::continual {

struct LossTerms {
    Tensor total;
    double current = 0.0;
    double replay = 0.0;  // summed over past-task terms, unweighted
};

LossTerms rehearsal_loss_terms(const models::Classifier& f, const Batch& current,
                               const std::vector<Batch>& past);
LossTerms generative_replay_terms(const models::Classifier& f, const Batch& current,
                                  const ReplaySet* replay, double replay_weight);

// Appends rows of x_g with label -1, skipping near-silent ones; returns
// how many were skipped.
std::size_t append_generated(SampleSet& dst, const Tensor& x_g);

// Forward pass through a weight-frozen copy, in chunks, without a tape.
Tensor frozen_forward(const models::Classifier& f, const Tensor& x);

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace scl::continual
