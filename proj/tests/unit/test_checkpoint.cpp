#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scl/checkpoint.hpp"
#include "scl/errors.hpp"
#include "scl/rng.hpp"

using namespace scl;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "scl_test_checkpoint";
    std::filesystem::create_directories(dir);
    return dir / name;
}

Checkpoint sample_checkpoint() {
    Rng rng(9);
    Checkpoint c;
    c.meta.model_kind = "autoencoder";
    c.meta.task_index = 3;
    c.meta.seed = 1234567890123ULL;
    c.meta.extra = {{"note", "x"}};
    std::vector<double> v(2 * 3 * 4);
    for (auto& x : v) x = rng.normal();
    v[5] = -0.0;
    v[6] = 1e-310;  // subnormal survives
    c.add("enc.conv1.w", Tensor::from({2, 3, 4}, v));
    c.add("gmm.weights", Tensor::from({2}, {0.25, 0.75}));
    c.add("scalar", Tensor::scalar(3.5));
    return c;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
    auto c = sample_checkpoint();
    auto path = temp_path("roundtrip.ckpt");
    save_checkpoint(c, path);
    auto d = load_checkpoint(path);
    CHECK(d.meta.model_kind == "autoencoder");
    CHECK(d.meta.task_index == 3);
    CHECK(d.meta.seed == 1234567890123ULL);
    CHECK(d.meta.extra["note"] == "x");
    REQUIRE(d.entries().size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& [n0, t0] = c.entries()[i];
        const auto& [n1, t1] = d.entries()[i];
        CHECK(n0 == n1);
        CHECK(t0.shape() == t1.shape());
        CHECK(std::memcmp(t0.data().data(), t1.data().data(), t0.numel() * 8) == 0);
    }
    CHECK(d.serialize() == c.serialize());
}

TEST_CASE("checkpoint header layout") {
    auto bytes = sample_checkpoint().serialize();
    CHECK(std::memcmp(bytes.data(), "SCLCKPT\0", 8) == 0);
    CHECK(bytes[8] == 1);  // version, little-endian
    CHECK(bytes[9] == 0);
}

TEST_CASE("corrupted checkpoint is a hard error naming the file") {
    auto path = temp_path("corrupt.ckpt");
    save_checkpoint(sample_checkpoint(), path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    try {
        load_checkpoint(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
    CHECK_THROWS_AS(load_checkpoint(temp_path("missing.ckpt")), DataError);
}

TEST_CASE("load_into checks shapes") {
    auto c = sample_checkpoint();
    ParameterList ok{{"conv1.w", Tensor::zeros({2, 3, 4}, true)}};
    c.load_into(ok, "enc.");
    CHECK(ok[0].value[0] == c.get("enc.conv1.w")[0]);
    ParameterList bad{{"conv1.w", Tensor::zeros({3, 2, 4}, true)}};
    CHECK_THROWS_AS(c.load_into(bad, "enc."), DataError);
}
