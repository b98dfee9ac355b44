#include "scl/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "scl/errors.hpp"

namespace scl::gmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)

void check_input(const Tensor& x, const char* who) {
    if (x.ndim() != 2 || x.dim(0) == 0 || x.dim(1) == 0) {
        throw ShapeError(std::string(who) + ": expected non-empty [N x d], got " +
                         shape_str(x.shape()));
    }
}

// log w_k + log N(x | mu_k, diag var_k) for every point/component, followed
// by a per-point log-sum-exp. Returns per-point values; fills `log_resp`
// ([N x K], normalized) when non-null.
std::vector<double> e_step(const Model& m, const Tensor& x, std::vector<double>* log_resp) {
    const std::size_t n = x.dim(0), d = m.dim, k = m.k;
    if (x.dim(1) != d) {
        throw ShapeError("gmm: embeddings have dim " + std::to_string(x.dim(1)) + ", model has " +
                         std::to_string(d));
    }
    std::vector<double> const_term(k);
    for (std::size_t c = 0; c < k; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += std::log(m.variances[c * d + j]);
        const_term[c] = std::log(m.weights[c]) - 0.5 * (static_cast<double>(d) * kLog2Pi + s);
    }
    auto xs = x.data();
    std::vector<double> ll(n);
    if (log_resp) log_resp->assign(n * k, 0.0);
    const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
    {
        std::vector<double> lp(k);
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < ni; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double* xi = xs.data() + i * d;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double* mu = m.means.data() + c * d;
                const double* var = m.variances.data() + c * d;
                double q = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = xi[j] - mu[j];
                    q += diff * diff / var[j];
                }
                lp[c] = const_term[c] - 0.5 * q;
                mx = std::max(mx, lp[c]);
            }
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += std::exp(lp[c] - mx);
            ll[i] = mx + std::log(s);
            if (log_resp)
                for (std::size_t c = 0; c < k; ++c) (*log_resp)[i * k + c] = lp[c] - ll[i];
        }
    }
    return ll;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> global_variance(const Tensor& x, double floor) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    auto xs = x.data();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += xs[i * d + j];
    for (auto& v : mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) var[j] += std::pow(xs[i * d + j] - mean[j], 2);
    for (auto& v : var) v = std::max(v / static_cast<double>(n), floor);
    return var;
}

// M-step from responsibilities resp [N x K] (probabilities). Components that
// end up empty or with every variance under the floor are re-seeded at a
// random point with the global variance. Returns true if any re-seed happened.
bool m_step(Model& m, const Tensor& x, const std::vector<double>& resp, const FitConfig& cfg,
            const std::vector<double>& gvar, Rng& rng, int iteration) {
    const std::size_t n = x.dim(0), d = m.dim, k = m.k;
    auto xs = x.data();
    std::vector<double> nk(k, 0.0);
    std::vector<double> mean(k * d, 0.0), sq(k * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = xs.data() + i * d;
        for (std::size_t c = 0; c < k; ++c) {
            const double r = resp[i * k + c];
            if (r == 0.0) continue;
            nk[c] += r;
            for (std::size_t j = 0; j < d; ++j) mean[c * d + j] += r * xi[j];
        }
    }
    for (std::size_t c = 0; c < k; ++c)
        if (nk[c] > 0.0)
            for (std::size_t j = 0; j < d; ++j) mean[c * d + j] /= nk[c];
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = xs.data() + i * d;
        for (std::size_t c = 0; c < k; ++c) {
            const double r = resp[i * k + c];
            if (r == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) sq[c * d + j] += r * std::pow(xi[j] - mean[c * d + j], 2);
        }
    }
    bool reseeded = false;
    for (std::size_t c = 0; c < k; ++c) {
        bool collapsed = nk[c] < 1e-8;
        if (!collapsed) {
            std::size_t under = 0;
            for (std::size_t j = 0; j < d; ++j) {
                sq[c * d + j] /= nk[c];
                if (sq[c * d + j] < cfg.variance_floor) ++under;
            }
            collapsed = under == d && k > 1;
        }
        if (collapsed) {
            const auto p = static_cast<std::size_t>(rng.below(n));
            for (std::size_t j = 0; j < d; ++j) {
                m.means[c * d + j] = xs[p * d + j];
                m.variances[c * d + j] = gvar[j];
            }
            m.weights[c] = 1.0 / static_cast<double>(k);
            m.stats.reseeds.push_back("iteration " + std::to_string(iteration) + ": component " +
                                      std::to_string(c) + " collapsed, re-seeded at point " +
                                      std::to_string(p));
            reseeded = true;
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) {
            m.means[c * d + j] = mean[c * d + j];
            m.variances[c * d + j] = std::max(sq[c * d + j], cfg.variance_floor);
        }
        m.weights[c] = nk[c] / static_cast<double>(n);
    }
    double wsum = 0.0;
    for (double w : m.weights) wsum += w;
    for (auto& w : m.weights) w /= wsum;
    return reseeded;
}

// k-means++ seeding followed by a hard assignment to the nearest seed.
std::vector<double> seed_assignment(const Tensor& x, std::size_t k, Rng& rng) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    auto xs = x.data();
    auto dist2 = [&](std::size_t i, std::size_t p) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += std::pow(xs[i * d + j] - xs[p * d + j], 2);
        return s;
    };
    std::vector<std::size_t> centers{static_cast<std::size_t>(rng.below(n))};
    std::vector<double> best(n);
    for (std::size_t i = 0; i < n; ++i) best[i] = dist2(i, centers[0]);
    while (centers.size() < k) {
        double total = 0.0;
        for (double b : best) total += b;
        std::size_t pick = 0;
        if (total <= 0.0) {
            pick = static_cast<std::size_t>(rng.below(n));
        } else {
            double u = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                u -= best[pick];
                if (u < 0.0) break;
            }
        }
        centers.push_back(pick);
        for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], dist2(i, pick));
    }
    std::vector<double> resp(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double dd = dist2(i, centers[c]);
            if (dd < bd) {
                bd = dd;
                arg = c;
            }
        }
        resp[i * k + arg] = 1.0;
    }
    return resp;
}

}  // namespace

Model fit_em(const Tensor& embeddings, const FitConfig& cfg, Rng& rng) {
    check_input(embeddings, "fit_em");
    const std::size_t n = embeddings.dim(0), d = embeddings.dim(1), k = cfg.components;
    if (k == 0) throw std::invalid_argument("fit_em: K must be at least 1");
    if (n < k) {
        throw std::invalid_argument("fit_em: " + std::to_string(n) + " points cannot support " +
                                    std::to_string(k) + " components");
    }
    for (double v : embeddings.data())
        if (!std::isfinite(v)) throw NumericError("fit_em: non-finite embedding value");

    Model m;
    m.k = k;
    m.dim = d;
    m.weights.assign(k, 1.0 / static_cast<double>(k));
    m.means.assign(k * d, 0.0);
    m.variances.assign(k * d, 1.0);
    const auto gvar = global_variance(embeddings, cfg.variance_floor);

    bool reseeded = m_step(m, embeddings, seed_assignment(embeddings, k, rng), cfg, gvar, rng, 0);
    std::vector<double> log_resp, resp(n * k);
    double prev = -std::numeric_limits<double>::infinity();
    for (int it = 1;; ++it) {
        const double ll = mean_of(e_step(m, embeddings, &log_resp));
        m.stats.history.push_back(ll);
        m.stats.log_likelihood = ll;
        m.stats.iterations = it - 1;
        if (!reseeded && ll < prev - 1e-9) {
            throw NumericError("fit_em: log-likelihood decreased from " + std::to_string(prev) +
                               " to " + std::to_string(ll) + " at iteration " + std::to_string(it));
        }
        if (!reseeded && ll - prev < cfg.tol) break;
        if (it > cfg.max_iter) break;
        prev = ll;
        for (std::size_t i = 0; i < n * k; ++i) resp[i] = std::exp(log_resp[i]);
        reseeded = m_step(m, embeddings, resp, cfg, gvar, rng, it);
    }
    return m;
}

Tensor sample(const Model& m, std::size_t n, Rng& rng, std::vector<std::size_t>* components) {
    if (m.k == 0) throw std::invalid_argument("gmm::sample: model is not fitted");
    std::vector<double> cdf(m.k);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.k; ++c) cdf[c] = acc += m.weights[c];
    std::vector<double> out(n * m.dim);
    if (components) components->assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        auto c = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        c = std::min(c, m.k - 1);
        if (components) (*components)[i] = c;
        for (std::size_t j = 0; j < m.dim; ++j)
            out[i * m.dim + j] = m.means[c * m.dim + j] +
                                 std::sqrt(m.variances[c * m.dim + j]) * rng.normal();
    }
    return Tensor::from({n, m.dim}, std::move(out));
}

double log_likelihood(const Model& m, const Tensor& embeddings) {
    check_input(embeddings, "gmm::log_likelihood");
    return mean_of(e_step(m, embeddings, nullptr));
}

std::vector<double> responsibilities(const Model& m, const Tensor& embeddings) {
    check_input(embeddings, "gmm::responsibilities");
    std::vector<double> lr;
    e_step(m, embeddings, &lr);
    for (auto& v : lr) v = std::exp(v);
    return lr;
}

void to_checkpoint(const Model& m, Checkpoint& ckpt, const std::string& prefix) {
    ckpt.add(prefix + "weights", Tensor::from({m.k}, m.weights));
    ckpt.add(prefix + "means", Tensor::from({m.k, m.dim}, m.means));
    ckpt.add(prefix + "variances", Tensor::from({m.k, m.dim}, m.variances));
    ckpt.meta.extra["gmm_version"] = kGmmVersion;
    ckpt.meta.extra["gmm_log_likelihood"] = m.stats.log_likelihood;
    ckpt.meta.extra["gmm_iterations"] = m.stats.iterations;
}

Model from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
    if (!ckpt.meta.extra.contains("gmm_version") ||
        ckpt.meta.extra["gmm_version"].get<std::uint32_t>() != kGmmVersion) {
        throw DataError("checkpoint has no compatible mixture model");
    }
    for (const char* key : {"weights", "means", "variances"})
        if (!ckpt.contains(prefix + key)) throw DataError("checkpoint lacks " + prefix + key);
    const auto& w = ckpt.get(prefix + "weights");
    const auto& mu = ckpt.get(prefix + "means");
    const auto& var = ckpt.get(prefix + "variances");
    if (w.ndim() != 1 || mu.ndim() != 2 || mu.shape() != var.shape() || mu.dim(0) != w.dim(0)) {
        throw DataError("checkpoint mixture arrays have inconsistent shapes");
    }
    Model m;
    m.k = w.dim(0);
    m.dim = mu.dim(1);
    m.weights.assign(w.data().begin(), w.data().end());
    m.means.assign(mu.data().begin(), mu.data().end());
    m.variances.assign(var.data().begin(), var.data().end());
    m.stats.log_likelihood = ckpt.meta.extra.value("gmm_log_likelihood", 0.0);
    m.stats.iterations = ckpt.meta.extra.value("gmm_iterations", 0);
    return m;
}

}  // namespace scl::gmm
