#pragma once

// Diagonal-covariance Gaussian mixture fitted by EM.

#include <cstdint>
#include <string>
#include <vector>

#include "scl/checkpoint.hpp"
#include "scl/rng.hpp"
#include "scl/tensor.hpp"

namespace scl::gmm {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr std::uint32_t kGmmVersion = 1;

struct FitConfig {
    std::size_t components = 1;
    int max_iter = 200;
    double tol = 1e-6;  // stop when the mean log-likelihood improves by less
    double variance_floor = kVarianceFloor;
};

struct FitStats {
    int iterations = 0;
    double log_likelihood = 0.0;
    std::vector<double> history;  // mean log-likelihood before each M-step
    std::vector<std::string> reseeds;
};

struct Model {
    std::size_t k = 0, dim = 0;
    std::vector<double> weights;    // [k]
    std::vector<double> means;      // [k x dim]
    std::vector<double> variances;  // [k x dim]
    FitStats stats;
};

// embeddings: [N x d]. Throws std::invalid_argument if N < K or K == 0,
// NumericError if an EM iteration lowers the log-likelihood.
Model fit_em(const Tensor& embeddings, const FitConfig& cfg, Rng& rng);

// [n x d] draws. If `components` is non-null it receives the chosen
// component index per row.
Tensor sample(const Model& m, std::size_t n, Rng& rng,
              std::vector<std::size_t>* components = nullptr);

// Mean per-point log density.
double log_likelihood(const Model& m, const Tensor& embeddings);

// Per-point, per-component posterior [N x K].
std::vector<double> responsibilities(const Model& m, const Tensor& embeddings);

void to_checkpoint(const Model& m, Checkpoint& ckpt, const std::string& prefix = "gmm.");
Model from_checkpoint(const Checkpoint& ckpt, const std::string& prefix = "gmm.");

}  // namespace scl::gmm
