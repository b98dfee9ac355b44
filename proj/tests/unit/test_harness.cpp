#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scl/binio.hpp"
#include "scl/errors.hpp"
#include "scl/harness.hpp"

namespace fs = std::filesystem;
using namespace scl;
using namespace scl::harness;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("scl_harness_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig tiny(const fs::path& out, std::vector<std::string> strategies) {
    json j{{"profile", "quick"},
           {"strategies", strategies},
           {"seeds", {1, 2, 3, 4, 5}},
           {"classifier", {{"epochs", 1}, {"batch", 16}}},
           {"generator", {{"epochs", 1}, {"batch", 16}, {"gmm_max_iter", 5}}},
           {"data", {{"synthetic", {{"recordings_per_class", 3}, {"segments_per_recording", 2}}}}},
           {"output_dir", out.string()}};
    return config_from_json(j);
}

std::string slurp(const fs::path& p) {
    auto b = binio::read_file(p);
    return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("config defaults, overrides and validation") {
    auto q = profile_defaults("quick");
    auto f = profile_defaults("full");
    CHECK(f.classifier.epochs == 300);
    CHECK(f.generator.epochs == 1700);
    CHECK(f.classifier.batch == 100);
    CHECK(f.classifier.lr == 5e-4);
    CHECK(f.generator.lr == 1e-3);
    CHECK(q.classifier.epochs < f.classifier.epochs);
    CHECK(q.seeds.size() == 5);
    CHECK_THROWS_AS(profile_defaults("medium"), ConfigError);

    json doc{{"profile", "full"}};
    apply_override(doc, "classifier.epochs=7");
    apply_override(doc, "strategies=[\"none\",\"rhs5\"]");
    apply_override(doc, "output_dir=out/x");
    auto c = config_from_json(doc);
    CHECK(c.classifier.epochs == 7);
    CHECK(c.generator.epochs == 1700);
    CHECK(c.strategies == std::vector<std::string>{"none", "rhs5"});
    CHECK(c.output_dir == "out/x");
    CHECK_NOTHROW(validate(c));

    // The resolved form parses back to itself.
    CHECK(to_json(config_from_json(to_json(c))) == to_json(c));

    CHECK_THROWS_AS(config_from_json({{"clasifier", {{"epochs", 1}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"classifier", {{"epochs", "many"}}}}), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "noequals"), ConfigError);

    auto bad = c;
    bad.seeds = {1, 1};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = c;
    bad.strategies = {"rhs5", "rehearsal:5"};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = c;
    bad.data.archive = "/definitely/not/here.segs";
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = c;
    bad.strategies = {"lwf"};
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("a two-strategy grid yields one record per seed and task, deterministically") {
    const auto a = scratch("grid_a"), b = scratch("grid_b");
    auto ca = tiny(a, {"none", "rhs20"});
    auto cb = tiny(b, {"none", "rhs20"});
    auto ra = run_experiment(ca);
    run_experiment(cb);
    CHECK(ra.records.size() == 50);
    CHECK(ra.complete_cells == 10);
    CHECK(read_metrics(ra.metrics_path).size() == 50);
    CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
    CHECK(slurp(cell_dir(ca, "rhs20", 3) / "task5" / "classifier.ckpt") ==
          slurp(cell_dir(cb, "rhs20", 3) / "task5" / "classifier.ckpt"));
    CHECK(fs::exists(a / "config.resolved.json"));
    CHECK(config_from_json(json::parse(slurp(a / "config.resolved.json"))).strategies == ca.strategies);
    for (const auto& r : ra.records) {
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
        CHECK(r.task_accuracies.size() == static_cast<std::size_t>(r.task));
        if (r.strategy == "none") CHECK(r.buffer_bytes == 0);
        else CHECK(r.buffer_bytes > 0);
    }
    // Permutations follow the seed, not the strategy.
    for (std::size_t i = 0; i < 25; ++i) CHECK(ra.records[i].permutation == ra.records[i + 25].permutation);

    // A second invocation resumes every completed cell and changes nothing.
    auto again = run_experiment(ca);
    CHECK(again.resumed_cells == 10);
    CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
}

TEST_CASE("a run stopped after a task resumes to the uninterrupted result") {
    const auto whole = scratch("whole"), cut = scratch("cut");
    auto cw = tiny(whole, {"rhs10", "ae_gmm"});
    auto cc = tiny(cut, {"rhs10", "ae_gmm"});
    cw.seeds = cc.seeds = {4, 9};
    run_experiment(cw);
    auto partial = run_experiment(cc, {.stop_after_task = 2});
    CHECK(partial.records.size() == 8);
    CHECK(partial.complete_cells == 0);
    auto resumed = run_experiment(cc);
    CHECK(resumed.resumed_cells == 4);
    CHECK(slurp(cut / "metrics.jsonl") == slurp(whole / "metrics.jsonl"));
    CHECK(slurp(cell_dir(cc, "ae_gmm", 9) / "task5" / "generator.ckpt") ==
          slurp(cell_dir(cw, "ae_gmm", 9) / "task5" / "generator.ckpt"));
}

TEST_CASE("corrupted or foreign resume state is a hard error naming the file") {
    const auto out = scratch("corrupt");
    auto c = tiny(out, {"rhs5"});
    c.seeds = {2};
    run_experiment(c, {.stop_after_task = 1});
    const auto ckpt = cell_dir(c, "rhs5", 2) / "task1" / "classifier.ckpt";
    auto bytes = binio::read_file(ckpt);
    bytes[bytes.size() / 2] ^= 0x40;
    binio::write_file_atomic(ckpt, bytes);
    try {
        run_experiment(c);
        FAIL("expected ResumeError");
    } catch (const ResumeError& e) {
        CHECK(std::string(e.what()).find(ckpt.string()) != std::string::npos);
    }

    const auto out2 = scratch("foreign");
    auto d = tiny(out2, {"rhs5"});
    d.seeds = {2};
    run_experiment(d, {.stop_after_task = 1});
    d.classifier.lr *= 2.0;
    CHECK_THROWS_AS(run_experiment(d), ResumeError);

    const auto state = cell_dir(d, "rhs5", 2) / "state.json";
    binio::write_text_atomic(state, "{not json");
    CHECK_THROWS_AS(run_experiment(d), ResumeError);
}

TEST_CASE("summary statistics and storage accounting") {
    MetricsRecord r;
    r.strategy = "rhs5";
    r.seed = 1;
    r.task = 1;
    r.accuracy = 0.625;
    auto one = summarize({r});
    REQUIRE(one.curve.size() == 1);
    CHECK(one.curve[0].mean == 0.625);
    CHECK(one.curve[0].sd == 0.0);
    CHECK(one.missing.size() == 4);

    std::vector<MetricsRecord> recs;
    const double vals[3][5] = {{0.9, 0.7, 0.6, 0.5, 0.5}, {0.7, 0.6, 0.6, 0.55, 0.5}, {1.0, 0.8, 0.6, 0.5, 0.5}};
    for (int s = 0; s < 3; ++s) {
        for (int t = 1; t <= 5; ++t) {
            MetricsRecord m;
            m.strategy = "ae_gmm";
            m.seed = static_cast<std::uint64_t>(s + 1);
            m.task = t;
            m.accuracy = vals[s][t - 1];
            m.generator_params = 472498;
            m.generator_param_bytes = 472498 * 4;
            m.train_samples = 6650;
            recs.push_back(m);
        }
    }
    auto sum = summarize(recs);
    CHECK(sum.missing.empty());
    CHECK(sum.curve[0].mean == doctest::Approx((0.9 + 0.7 + 1.0) / 3));
    CHECK(sum.curve[0].sd == doctest::Approx(0.152752523).epsilon(1e-8));
    CHECK(sum.curve[4].sd == 0.0);
    CHECK(sum.sd_slope.at("ae_gmm") < 0.0);
    REQUIRE(sum.storage.size() == 1);
    CHECK(sum.storage[0].ratio_reference == doctest::Approx(472498.0 / 2048.0 / 6650.0));
    CHECK(std::abs(100.0 * sum.storage[0].ratio_reference - 3.5) < 0.1);
    CHECK(sum.storage[0].ratio_run == doctest::Approx(sum.storage[0].ratio_reference));

    const auto md = summary_markdown(sum);
    CHECK(md.find("ae_gmm") != std::string::npos);
    CHECK(md.find("decreasing") != std::string::npos);
    CHECK(curve_csv(sum).rfind("strategy,task,n,mean,sd\n", 0) == 0);

    recs.pop_back();
    auto gap = summarize(recs);
    REQUIRE(gap.missing.size() == 1);
    CHECK(gap.missing[0] == "ae_gmm seed 3 task 5");
    CHECK(summary_markdown(gap).find("ae_gmm seed 3 task 5") != std::string::npos);
}

TEST_CASE("sampling a generator checkpoint") {
    Rng rng(3);
    auto g = continual::Generator::make(continual::GeneratorKind::vae, rng);
    g.set_task_index(2);
    const auto ckpt = g.to_checkpoint(3);
    auto a = generate_samples(ckpt, 3, 17);
    auto b = generate_samples(ckpt, 3, 17);
    REQUIRE(a.segments.size() == 3);
    CHECK(audio::serialize_archive(a) == audio::serialize_archive(b));
    for (const auto& s : a.segments) {
        CHECK(s.label == -1);
        for (float v : s.values) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
    CHECK(audio::serialize_archive(generate_samples(ckpt, 3, 18)) != audio::serialize_archive(a));
    CHECK(generate_samples(ckpt, 0, 1).segments.empty());
}
