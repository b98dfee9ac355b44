#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "scl/gmm.hpp"

using namespace scl;

namespace {

Tensor planted(std::size_t n, std::size_t d, Rng& rng, std::vector<int>* labels = nullptr) {
    std::vector<double> v(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const int side = rng.uniform() < 0.5 ? -1 : 1;
        if (labels) labels->push_back(side);
        for (std::size_t j = 0; j < d; ++j) v[i * d + j] = 5.0 * side + rng.normal();
    }
    return Tensor::from({n, d}, std::move(v));
}

double brute_density(const gmm::Model& m, const double* x) {
    double p = 0.0;
    for (std::size_t c = 0; c < m.k; ++c) {
        double dens = m.weights[c];
        for (std::size_t j = 0; j < m.dim; ++j) {
            const double var = m.variances[c * m.dim + j];
            const double diff = x[j] - m.means[c * m.dim + j];
            dens *= std::exp(-0.5 * diff * diff / var) / std::sqrt(2.0 * std::numbers::pi * var);
        }
        p += dens;
    }
    return p;
}

}  // namespace

TEST_CASE("K=1 fit is the sample mean and variance") {
    Rng rng(1);
    std::vector<double> v(200 * 3);
    for (auto& x : v) x = rng.uniform(-2.0, 3.0);
    auto x = Tensor::from({200, 3}, v);
    auto m = gmm::fit_em(x, {.components = 1}, rng);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < 200; ++i) mean += v[i * 3 + j];
        mean /= 200.0;
        for (std::size_t i = 0; i < 200; ++i) var += std::pow(v[i * 3 + j] - mean, 2);
        var /= 200.0;
        CHECK(m.means[j] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(m.variances[j] == doctest::Approx(var).epsilon(1e-12));
    }
    CHECK(m.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("planted two-component mixture is recovered") {
    Rng rng(2);
    auto x = planted(500, 50, rng);
    Rng fit_rng(3);
    auto m = gmm::fit_em(x, {.components = 2}, fit_rng);
    REQUIRE(m.k == 2);
    std::size_t neg = m.means[0] < 0.0 ? 0 : 1;
    for (std::size_t j = 0; j < 50; ++j) {
        CHECK(std::abs(m.means[neg * 50 + j] + 5.0) < 0.2);
        CHECK(std::abs(m.means[(1 - neg) * 50 + j] - 5.0) < 0.2);
    }
    CHECK(std::abs(m.weights[0] - 0.5) < 0.05);
    CHECK(std::abs(m.weights[0] + m.weights[1] - 1.0) < 1e-9);
    for (std::size_t i = 1; i < m.stats.history.size(); ++i)
        CHECK(m.stats.history[i] >= m.stats.history[i - 1] - 1e-9);
}

TEST_CASE("EM log-likelihood never decreases across many fits") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        std::vector<double> v(300 * 4);
        for (std::size_t i = 0; i < 300; ++i) {
            const double c = static_cast<double>(i % 3) * 2.0;
            for (std::size_t j = 0; j < 4; ++j) v[i * 4 + j] = c + rng.normal() * (0.5 + j * 0.2);
        }
        auto m = gmm::fit_em(Tensor::from({300, 4}, v), {.components = 3 + seed % 4}, rng);
        CHECK(m.stats.history.size() >= 2);
        for (std::size_t i = 1; i < m.stats.history.size(); ++i)
            CHECK(m.stats.history[i] >= m.stats.history[i - 1] - 1e-9);
        for (double var : m.variances) CHECK(var >= gmm::kVarianceFloor);
        double w = 0.0;
        for (double x : m.weights) w += x;
        CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("refit with the same seed is identical") {
    Rng data(4);
    auto x = planted(200, 5, data);
    Rng a(9), b(9);
    auto m1 = gmm::fit_em(x, {.components = 4}, a);
    auto m2 = gmm::fit_em(x, {.components = 4}, b);
    CHECK(m1.means == m2.means);
    CHECK(m1.variances == m2.variances);
    CHECK(m1.weights == m2.weights);
}

TEST_CASE("too few points or zero components are rejected") {
    Rng rng(5);
    auto x = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(gmm::fit_em(x, {.components = 4}, rng), std::invalid_argument);
    CHECK_THROWS_AS(gmm::fit_em(x, {.components = 0}, rng), std::invalid_argument);
}

TEST_CASE("duplicate points trigger the variance floor and re-seeding") {
    Rng rng(6);
    std::vector<double> v(40 * 2, 0.0);
    for (std::size_t i = 20; i < 40; ++i) v[i * 2] = v[i * 2 + 1] = 1.0 + 0.1 * rng.normal();
    auto m = gmm::fit_em(Tensor::from({40, 2}, v), {.components = 3}, rng);
    for (double var : m.variances) CHECK(var >= gmm::kVarianceFloor);
    CHECK(std::isfinite(m.stats.log_likelihood));
}

TEST_CASE("log density at the mode of a unit Gaussian") {
    gmm::Model m;
    m.k = 1;
    m.dim = 50;
    m.weights = {1.0};
    m.means.assign(50, 0.0);
    m.variances.assign(50, 1.0);
    auto x = Tensor::zeros({1, 50});
    CHECK(gmm::log_likelihood(m, x) == doctest::Approx(-25.0 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(gmm::log_likelihood(m, x) == doctest::Approx(-45.947).epsilon(1e-4));

    auto two = Tensor::from({2, 50}, std::vector<double>(100, 0.0));
    auto far = two.clone();
    for (std::size_t j = 50; j < 100; ++j) far.data()[j] = 40.0;
    CHECK(gmm::log_likelihood(m, far) < gmm::log_likelihood(m, two));
}

TEST_CASE("log likelihood matches direct summation") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 100);
        gmm::Model m;
        m.k = 3;
        m.dim = 4;
        m.weights = {0.2, 0.5, 0.3};
        for (std::size_t i = 0; i < 12; ++i) {
            m.means.push_back(rng.uniform(-2.0, 2.0));
            m.variances.push_back(rng.uniform(0.3, 2.0));
        }
        std::vector<double> v(20 * 4);
        for (auto& x : v) x = rng.uniform(-3.0, 3.0);
        double brute = 0.0;
        for (std::size_t i = 0; i < 20; ++i) brute += std::log(brute_density(m, v.data() + i * 4));
        brute /= 20.0;
        CHECK(gmm::log_likelihood(m, Tensor::from({20, 4}, v)) == doctest::Approx(brute).epsilon(1e-10));

        auto r = gmm::responsibilities(m, Tensor::from({20, 4}, v));
        for (std::size_t i = 0; i < 20; ++i)
            CHECK(r[i * 3] + r[i * 3 + 1] + r[i * 3 + 2] == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("sampling moments, proportions and uniqueness") {
    gmm::Model m;
    m.k = 1;
    m.dim = 50;
    m.weights = {1.0};
    m.means.assign(50, 0.0);
    m.variances.assign(50, 1.0);
    Rng rng(7);
    auto s = gmm::sample(m, 10000, rng);
    auto v = s.data();
    for (std::size_t j = 0; j < 50; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < 10000; ++i) mean += v[i * 50 + j];
        mean /= 10000.0;
        for (std::size_t i = 0; i < 10000; ++i) var += std::pow(v[i * 50 + j] - mean, 2);
        var /= 10000.0;
        CHECK(std::abs(mean) < 0.05);
        CHECK(std::abs(var - 1.0) < 0.1);
    }

    gmm::Model floor_model = m;
    floor_model.variances.assign(50, gmm::kVarianceFloor);
    auto f = gmm::sample(floor_model, 500, rng);
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < 500; ++i) {
        std::vector<double> row(f.data().begin() + i * 50, f.data().begin() + (i + 1) * 50);
        CHECK(row != floor_model.means);
        rows.insert(row);
    }
    CHECK(rows.size() == 500);

    gmm::Model mix;
    mix.k = 3;
    mix.dim = 2;
    mix.weights = {0.1, 0.6, 0.3};
    mix.means.assign(6, 0.0);
    mix.variances.assign(6, 1.0);
    std::vector<std::size_t> comp;
    gmm::sample(mix, 10000, rng, &comp);
    std::vector<double> counts(3, 0.0);
    for (auto c : comp) counts[c] += 1.0;
    for (std::size_t c = 0; c < 3; ++c) {
        const double p = mix.weights[c];
        const double sigma = std::sqrt(10000.0 * p * (1.0 - p));
        CHECK(std::abs(counts[c] - 10000.0 * p) < 3.0 * sigma);
    }
}

TEST_CASE("sample then refit recovers the generating means") {
    gmm::Model gen;
    gen.k = 2;
    gen.dim = 10;
    gen.weights = {0.3, 0.7};
    for (std::size_t j = 0; j < 10; ++j) gen.means.push_back(-4.0);
    for (std::size_t j = 0; j < 10; ++j) gen.means.push_back(4.0);
    gen.variances.assign(20, 1.0);
    Rng rng(8);
    auto x = gmm::sample(gen, 4000, rng);
    auto m = gmm::fit_em(x, {.components = 2}, rng);
    const std::size_t lo = m.means[0] < 0.0 ? 0 : 1;
    for (std::size_t j = 0; j < 10; ++j) {
        CHECK(std::abs(m.means[lo * 10 + j] + 4.0) < 0.2);
        CHECK(std::abs(m.means[(1 - lo) * 10 + j] - 4.0) < 0.2);
    }
    CHECK(std::abs(m.weights[lo] - 0.3) < 0.03);
}

TEST_CASE("mixture survives a checkpoint round trip") {
    Rng rng(10);
    auto x = planted(100, 3, rng);
    auto m = gmm::fit_em(x, {.components = 2}, rng);
    Checkpoint c;
    gmm::to_checkpoint(m, c);
    auto back = gmm::from_checkpoint(Checkpoint::deserialize(c.serialize(), "mem"));
    CHECK(back.means == m.means);
    CHECK(back.variances == m.variances);
    CHECK(back.weights == m.weights);
    CHECK(gmm::log_likelihood(back, x) == gmm::log_likelihood(m, x));
}
