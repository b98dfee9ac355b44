// One PASS / FAIL / SKIP line per acceptance criterion.
//
//   acceptance [--work-dir DIR] [--only N[,N...]]
//
// Criteria 5-7 share one quick-profile grid (7 strategies x 5 seeds) kept
// under DIR/grid; an interrupted or repeated invocation resumes it.
// Criterion 10 needs ESC-10 audio: set SCL_ESC10_DIR to an ESC-50 checkout
// (audio/ and meta/esc50.csv) or SCL_ESC10_MANIFEST plus SCL_ESC10_WAVS to a
// prepared 10-class manifest and its WAV directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "scl/archive.hpp"
#include "scl/audio.hpp"
#include "scl/binio.hpp"
#include "scl/errors.hpp"
#include "scl/continual.hpp"
#include "scl/gmm.hpp"
#include "scl/harness.hpp"
#include "scl/kernels.hpp"
#include "scl/models.hpp"
#include "scl/ops.hpp"
#include "scl/synthetic.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace scl;
using scl::testing::gradcheck;
using scl::testing::random_tensor;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict = Verdict::fail;
    std::string detail;
};

Outcome judge(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 -----------------------------------------------------------------------

Outcome param_counts() {
    Rng rng(1);
    models::Autoencoder ae(rng);
    const std::size_t n = models::param_count(ae.parameters());
    const double paper_ratio = 100.0 * 480000.0 / 2048.0 / harness::kReferenceTrainSegments;
    const double our_ratio = 100.0 * static_cast<double>(n) / 2048.0 / harness::kReferenceTrainSegments;
    const bool ok = n == 472498 && n < 480000 && std::abs(paper_ratio - 3.5) <= 0.1 && std::abs(our_ratio - 3.5) <= 0.1;
    return judge(ok, "autoencoder parameters " + std::to_string(n) + "; storage ratio " + fmt(our_ratio, 3) +
                         "% (480000 bound: " + fmt(paper_ratio, 3) + "%)");
}

// ---- 2 -----------------------------------------------------------------------

Outcome shapes() {
    using models::Autoencoder;
    const auto enc = Autoencoder::encoder_lengths(), dec = Autoencoder::decoder_lengths();
    const std::vector<std::size_t> want_enc{16, 11, 4, 1}, want_dec{1, 4, 10, 16};
    // Convolution arithmetic for the configured (kernel, stride) pairs.
    const bool arith = kernels::conv_out_length(16, 6, 1, 0) == 11 && kernels::conv_out_length(11, 4, 2, 0) == 4 &&
                       kernels::conv_out_length(4, 4, 1, 0) == 1 && kernels::conv_transpose_out_length(1, 4, 1) == 4 &&
                       kernels::conv_transpose_out_length(4, 4, 2) == 10 &&
                       kernels::conv_transpose_out_length(10, 7, 1) == 16;

    audio::Recording rec;
    rec.sample_rate = 44100;
    rec.id = "tone";
    rec.samples.resize(5 * 44100);
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        rec.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 44100.0);
    }
    const std::size_t frames = audio::stft_frame_count(rec.samples.size());
    const auto segs = audio::extract_segments(rec);
    const bool ok = enc == want_enc && dec == want_dec && arith && frames == 427 && segs.segments.size() == 26;
    return judge(ok, "encoder 16->11->4->1 " + std::string(enc == want_enc ? "ok" : "MISMATCH") + ", decoder 1->4->10->16 " +
                         (dec == want_dec ? "ok" : "MISMATCH") + ", arithmetic " + (arith ? "ok" : "MISMATCH") +
                         ", " + std::to_string(frames) + " frames, " + std::to_string(segs.segments.size()) +
                         " segments");
}

// ---- 3 -----------------------------------------------------------------------

Outcome gradients() {
    constexpr double kTol = 1e-4;
    constexpr double kBins = static_cast<double>(models::kSegmentSize);
    double worst_ops = 0.0, worst_models = 0.0;
    std::size_t checked = 0, skipped = 0;
    bool skip_budget = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        auto x = random_tensor({2, 3, 9}, rng);
        auto w1 = random_tensor({4, 3, 3}, rng);
        auto b1 = random_tensor({4}, rng);
        auto w2 = random_tensor({2, 4, 4}, rng);
        auto b2 = random_tensor({2}, rng);
        auto track = [&](const testing::GradCheckResult& r, double& worst) {
            worst = std::max(worst, r.max_rel_error);
            checked += r.checked;
            skipped += r.skipped;
        };
        track(gradcheck(
                  [&] {
                      auto h = ops::conv1d(x, w1, b1, 1, ops::Padding::same);
                      h = ops::conv1d(h, w2, b2, 2, ops::Padding::valid);
                      return ops::sum(ops::mul(h, h));
                  },
                  {x, w1, b1, w2, b2}),
              worst_ops);
        auto z = random_tensor({2, 3, 2}, rng);
        auto wt = random_tensor({3, 2, 4}, rng);
        auto bt = random_tensor({2}, rng);
        auto target = random_tensor({2, 2, 6}, rng, 0.05, 0.95, false);
        track(gradcheck([&] { return ops::bce(ops::sigmoid(ops::conv1d_transpose(z, wt, bt, 2)), target); },
                        {z, wt, bt}),
              worst_ops);
        auto in = random_tensor({3, 5}, rng);
        auto lw = random_tensor({4, 5}, rng);
        auto lb = random_tensor({4}, rng);
        auto soft = ops::softmax(random_tensor({3, 4}, rng, -2, 2, false));
        track(gradcheck([&] { return ops::cross_entropy(ops::relu(ops::linear(in, lw, lb)), soft); }, {in, lw, lb}),
              worst_ops);
        auto s_in = random_tensor({2, 4}, rng);
        auto coef = random_tensor({2, 4}, rng, -1, 1, false);
        track(gradcheck([&] { return ops::sum(ops::mul(ops::softmax(s_in), coef)); }, {s_in}), worst_ops);
        auto mu = random_tensor({2, 3}, rng);
        auto lv = random_tensor({2, 3}, rng);
        auto eps = random_tensor({2, 3}, rng, -1, 1, false);
        track(gradcheck(
                  [&] {
                      auto lvc = ops::clamp(lv, -10, 10);
                      auto zs = ops::add(mu, ops::mul(ops::exp(ops::scale(lvc, 0.5)), eps));
                      return ops::add(ops::kl_to_unit_gaussian(mu, lvc), ops::mean(ops::mul(zs, zs)));
                  },
                  {mu, lv}),
              worst_ops);
        auto seq = random_tensor({2, 3, 5}, rng);
        track(gradcheck(
                  [&] {
                      auto q = ops::reshape(ops::mean_over_time(seq), {6});
                      return ops::sum(ops::mul(ops::add_scalar(q, 0.3), ops::sub(q, Tensor::full({6}, 0.1))));
                  },
                  {seq}),
              worst_ops);

        // Full models on tiny batches, sampled coordinates, ReLU kinks skipped.
        const std::size_t before_checked = checked, before_skipped = skipped;
        auto xs = random_tensor({2, models::kMelBins, models::kFrames}, rng, 0.0, 1.0);
        auto xt = random_tensor({2, models::kMelBins, models::kFrames}, rng, 0.0, 1.0, false);
        models::Classifier c(rng);
        std::vector<int> labels{static_cast<int>(seed % 10), static_cast<int>((seed + 3) % 10)};
        auto y = ops::one_hot(labels, 10);
        std::vector<Tensor> ct{xs};
        for (auto& p : c.parameters()) ct.push_back(p.value);
        track(gradcheck([&] { return ops::cross_entropy(c.forward(xs), y); }, ct, 1e-5, 4, seed, true), worst_models);
        models::Autoencoder ae(rng);
        std::vector<Tensor> at{xs};
        for (auto& p : ae.parameters()) at.push_back(p.value);
        track(gradcheck([&] { return ops::scale(ops::bce(ae.forward(xs), xt), 1.0 / kBins); }, at, 1e-5, 3, seed, true),
              worst_models);
        models::Vae vae(rng);
        std::vector<double> e(2 * models::kLatentDim);
        for (auto& v : e) v = rng.normal();
        auto noise = Tensor::from({2, models::kLatentDim}, e);
        std::vector<Tensor> vt{xs};
        for (auto& p : vae.parameters()) vt.push_back(p.value);
        track(gradcheck(
                  [&] {
                      auto o = vae.forward_with_noise(xs, noise);
                      return ops::scale(ops::add(ops::bce(o.recon, xs), ops::kl_to_unit_gaussian(o.mu, o.logvar)),
                                        1.0 / kBins);
                  },
                  vt, 1e-5, 3, seed, true),
              worst_models);
        const std::size_t c_n = checked - before_checked, s_n = skipped - before_skipped;
        if (s_n * 10 > c_n + s_n) skip_budget = false;
    }
    const bool ok = worst_ops < kTol && worst_models < kTol && skip_budget;
    return judge(ok, "20 seeds; worst relative error ops " + std::to_string(worst_ops) + ", models " +
                         std::to_string(worst_models) + "; " + std::to_string(checked) + " coordinates, " +
                         std::to_string(skipped) + " skipped at kinks");
}

// ---- 4 -----------------------------------------------------------------------

bool monotone(const gmm::Model& m) {
    const auto& h = m.stats.history;
    for (std::size_t i = 1; i < h.size(); ++i) {
        if (h[i] < h[i - 1] - 1e-9 * std::max(1.0, std::abs(h[i - 1]))) return false;
    }
    return true;
}

Outcome gmm_recovery() {
    std::size_t fits = 0, monotone_fits = 0;
    double worst_empirical = 0.0, worst_rms = 0.0, worst_raw = 0.0, worst_weight = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(40 + seed);
        const double w_true[2] = {0.35, 0.65};
        const std::size_t n = 500, d = 50;
        std::vector<double> v(n * d), empirical(2 * d, 0.0);
        std::size_t count[2] = {0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = rng.uniform() < w_true[0] ? 0 : 1;
            ++count[k];
            for (std::size_t j = 0; j < d; ++j) {
                v[i * d + j] = (k == 0 ? -5.0 : 5.0) + rng.normal();
                empirical[k * d + j] += v[i * d + j];
            }
        }
        for (std::size_t k = 0; k < 2; ++k)
            for (std::size_t j = 0; j < d; ++j) empirical[k * d + j] /= static_cast<double>(count[k]);
        Rng fit(seed);
        auto m = gmm::fit_em(Tensor::from({n, d}, std::move(v)), {.components = 2}, fit);
        ++fits;
        monotone_fits += monotone(m);
        const std::size_t lo = m.means[0] < m.means[d] ? 0 : 1;
        for (std::size_t k = 0; k < 2; ++k) {
            const std::size_t truth = k == lo ? 0 : 1;
            const double centre = truth == 0 ? -5.0 : 5.0;
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double mu = m.means[k * d + j];
                worst_empirical = std::max(worst_empirical, std::abs(mu - empirical[truth * d + j]));
                worst_raw = std::max(worst_raw, std::abs(mu - centre));
                sq += (mu - centre) * (mu - centre);
            }
            worst_rms = std::max(worst_rms, std::sqrt(sq / static_cast<double>(d)));
            worst_weight = std::max(worst_weight, std::abs(m.weights[k] - w_true[truth]));
        }
    }
    // Against the generating centres every coordinate carries sampling noise
    // of about 1/sqrt(N_k); the per-coordinate bound is applied to the
    // planted clusters' own means, the RMS bound to the generating centres.
    const bool recovered = worst_empirical <= 0.2 && worst_rms <= 0.2 && worst_weight <= 0.05;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::vector<double> v(300 * 4);
        for (auto& x : v) x = rng.normal() * (1.0 + rng.uniform()) + (rng.uniform() < 0.3 ? 3.0 : 0.0);
        Rng fit(seed + 100);
        auto m = gmm::fit_em(Tensor::from({300, 4}, std::move(v)), {.components = 1 + seed % 6}, fit);
        ++fits;
        monotone_fits += monotone(m);
    }
    return judge(recovered && monotone_fits == fits,
                 std::to_string(monotone_fits) + "/" + std::to_string(fits) + " fits monotone; means within " +
                     fmt(worst_empirical, 4) + " of the planted clusters' means, RMS " + fmt(worst_rms, 3) +
                     " from +-5 (max coordinate " + fmt(worst_raw, 3) + "); weights within " + fmt(worst_weight, 3));
}

// ---- 5, 6, 7 -----------------------------------------------------------------

struct GridResult {
    bool ran = false;
    std::string error;
    double seconds = 0.0;
    harness::ExperimentConfig config;
    std::map<std::string, std::vector<harness::MetricsRecord>> by_strategy;  // task-5 records per strategy
    std::map<std::string, std::vector<double>> task1_after_1;                // none: task-1 accuracy after task 1
    std::map<std::string, std::vector<double>> task1_after_5;
};

GridResult& grid(const fs::path& work) {
    static GridResult g;
    if (g.ran) return g;
    g.ran = true;
    g.config = harness::profile_defaults("quick");
    g.config.output_dir = work / "grid";
    const auto t0 = std::chrono::steady_clock::now();
    try {
        harness::RunOptions opts;
        opts.progress = &std::cerr;
        auto r = harness::run_experiment(g.config, opts);
        for (const auto& rec : r.records) {
            if (rec.task == 1) g.task1_after_1[rec.strategy].push_back(rec.task_accuracies.at(0));
            if (rec.task == continual::kTasks) {
                g.by_strategy[rec.strategy].push_back(rec);
                g.task1_after_5[rec.strategy].push_back(rec.task_accuracies.at(0));
            }
        }
    } catch (const std::exception& e) {
        g.error = e.what();
    }
    g.seconds = seconds_since(t0);
    return g;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double final_mean(const GridResult& g, const std::string& strategy) {
    std::vector<double> v;
    if (auto it = g.by_strategy.find(strategy); it != g.by_strategy.end()) {
        for (const auto& r : it->second) v.push_back(r.accuracy);
    }
    return mean(v);
}

Outcome forgetting(const fs::path& work) {
    auto& g = grid(work);
    if (!g.error.empty()) return {Verdict::fail, "grid run failed: " + g.error};
    const double after1 = mean(g.task1_after_1["none"]), after5 = mean(g.task1_after_5["none"]);
    return judge(after1 >= 0.9 && after5 <= 0.3,
                 "strategy none, task-1 test accuracy " + fmt(after1, 3) + " after task 1, " + fmt(after5, 3) +
                     " after task 5 (mean of " + std::to_string(g.task1_after_5["none"].size()) + " seeds)");
}

Outcome ordering(const fs::path& work) {
    auto& g = grid(work);
    if (!g.error.empty()) return {Verdict::fail, "grid run failed: " + g.error};
    const std::vector<std::string> chain{"joint", "rhs20", "rhs10", "rhs5", "none"};
    std::ostringstream d;
    bool ok = true;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const double v = final_mean(g, chain[i]);
        d << (i ? " >= " : "") << chain[i] << ' ' << fmt(v, 3);
        if (i > 0 && final_mean(g, chain[i - 1]) < v - 0.02) ok = false;
        if (std::isnan(v)) ok = false;
    }
    d << " (final task, 5 seeds; grid " << fmt(g.seconds / 60.0, 1) << " min this invocation)";
    return judge(ok, d.str());
}

double temporal_variance(const harness::ExperimentConfig& c, const std::string& strategy) {
    std::vector<double> per_seed;
    for (auto seed : c.seeds) {
        const auto ckpt = load_checkpoint(harness::cell_dir(c, strategy, seed) / "task5" / "generator.ckpt");
        const auto a = harness::generate_samples(ckpt, 200, 7);
        double total = 0.0;
        for (const auto& s : a.segments) {
            double acc = 0.0;
            for (std::size_t m = 0; m < models::kMelBins; ++m) {
                double mu = 0.0, sq = 0.0;
                for (std::size_t t = 0; t < models::kFrames; ++t) mu += s.values[m * models::kFrames + t];
                mu /= models::kFrames;
                for (std::size_t t = 0; t < models::kFrames; ++t) {
                    const double dv = s.values[m * models::kFrames + t] - mu;
                    sq += dv * dv;
                }
                acc += sq / models::kFrames;
            }
            total += acc / models::kMelBins;
        }
        per_seed.push_back(total / static_cast<double>(a.segments.size()));
    }
    return mean(per_seed);
}

Outcome generative(const fs::path& work) {
    auto& g = grid(work);
    if (!g.error.empty()) return {Verdict::fail, "grid run failed: " + g.error};
    const double ae = final_mean(g, "ae_gmm"), vae = final_mean(g, "vae");
    const double r5 = final_mean(g, "rhs5"), r20 = final_mean(g, "rhs20");
    const bool ok = ae > r5 && ae >= r20 - 0.05 && vae < ae;
    std::string detail = "ae_gmm " + fmt(ae, 3) + " vs rhs5 " + fmt(r5, 3) + ", rhs20 " + fmt(r20, 3) + "; vae " +
                         fmt(vae, 3);
    try {
        const double tv_ae = temporal_variance(g.config, "ae_gmm"), tv_vae = temporal_variance(g.config, "vae");
        detail += "; temporal variance of generations ae_gmm " + fmt(tv_ae, 5) + ", vae " + fmt(tv_vae, 5);
    } catch (const std::exception& e) {
        detail += std::string("; temporal variance unavailable: ") + e.what();
    }
    return judge(ok, detail);
}

// ---- 8 -----------------------------------------------------------------------

Outcome identities() {
    using namespace continual;
    const auto corpus = synthetic::make_corpus({.recordings_per_class = 6, .segments_per_recording = 4, .seed = 8});
    double worst_eq1 = 0.0, worst_eq2 = 0.0, worst_floor = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto seq = make_task_sequence(corpus, seed + 1);
        seq.begin_task(1);
        const auto& tr = seq.train(1);
        Rng rng(seed);
        models::Classifier f(rng);
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < std::min<std::size_t>(tr.size(), 8); ++i) rows.push_back(i);
        auto b = make_batch(tr, rows);
        const double plain = ops::cross_entropy(f.forward(b.x), b.targets).item();
        worst_eq1 = std::max(worst_eq1, std::abs(rehearsal_loss(f, b, {}).item() - plain));
        ReplaySet empty;
        worst_eq2 = std::max(worst_eq2, std::abs(generative_replay_classifier_loss(f, b, &empty).item() - plain));
        worst_eq2 = std::max(worst_eq2, std::abs(generative_replay_classifier_loss(f, b, nullptr).item() - plain));

        auto replay = distillation_targets(&f, b.x.detach());
        auto soft = replay.soft.data();
        double entropy = 0.0;
        for (double p : soft) entropy -= p > 0.0 ? p * std::log(p) : 0.0;
        entropy /= static_cast<double>(rows.size());
        const double term = ops::cross_entropy(f.forward(replay.x), replay.soft).item();
        worst_floor = std::max(worst_floor, std::abs(term - entropy));
    }
    const bool ok = worst_eq1 <= 1e-12 && worst_eq2 <= 1e-12 && worst_floor <= 1e-9;
    std::ostringstream d;
    d.precision(3);
    d << "rehearsal, empty buffer |diff| " << worst_eq1 << "; replay, empty set |diff| " << worst_eq2
      << "; distillation vs entropy floor |diff| " << worst_floor;
    return judge(ok, d.str());
}

// ---- 9 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    auto b = binio::read_file(p);
    return {b.begin(), b.end()};
}

Outcome reproducibility(const fs::path& work) {
    auto make = [&](const std::string& name) {
        auto c = harness::profile_defaults("quick");
        c.strategies = {"none", "rhs10", "ae_gmm", "vae"};
        c.seeds = {1, 2, 3, 4, 5};
        c.classifier.epochs = 2;
        c.generator.epochs = 2;
        c.data.synthetic.recordings_per_class = 5;
        c.data.synthetic.segments_per_recording = 4;
        c.output_dir = work / name;
        fs::remove_all(c.output_dir);
        return c;
    };
    const auto a = make("repro_a"), b = make("repro_b"), k = make("repro_killed");
    harness::run_experiment(a);
    harness::run_experiment(b);
    harness::run_experiment(k, {.stop_after_task = 3});
    harness::run_experiment(k);
    const auto ma = slurp(a.output_dir / "metrics.jsonl");
    const bool same = ma == slurp(b.output_dir / "metrics.jsonl");
    const bool resumed = ma == slurp(k.output_dir / "metrics.jsonl");
    const auto ga = slurp(harness::cell_dir(a, "ae_gmm", 3) / "task5" / "generator.ckpt");
    const bool ckpt = ga == slurp(harness::cell_dir(k, "ae_gmm", 3) / "task5" / "generator.ckpt");
    auto sa = audio::serialize_archive(harness::generate_samples(load_checkpoint(harness::cell_dir(a, "vae", 2) / "task5" / "generator.ckpt"), 8, 1));
    auto sb = audio::serialize_archive(harness::generate_samples(load_checkpoint(harness::cell_dir(b, "vae", 2) / "task5" / "generator.ckpt"), 8, 1));
    const bool samples = sa == sb;
    return judge(same && resumed && ckpt && samples,
                 std::string("two runs ") + (same ? "byte-identical" : "DIFFER") + "; killed after task 3 and resumed " +
                     (resumed ? "identical" : "DIFFERS") + "; checkpoints " + (ckpt ? "identical" : "DIFFER") +
                     "; generated archives " + (samples ? "identical" : "DIFFER") + " (" +
                     std::to_string(std::count(ma.begin(), ma.end(), '\n')) + " records)");
}

// ---- 10 ----------------------------------------------------------------------

// ESC-50 metadata -> 10-class manifest for the ESC-10 subset.
fs::path esc10_manifest(const fs::path& root, const fs::path& out) {
    std::ifstream in(root / "meta" / "esc50.csv");
    if (!in) throw DataError("cannot open " + (root / "meta" / "esc50.csv").string());
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string h;
        while (std::getline(hs, h, ',')) header.push_back(h);
    }
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("esc50.csv: missing column " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_file = col("filename"), c_target = col("target"), c_cat = col("category"), c_esc10 = col("esc10");
    std::vector<std::tuple<std::string, int, std::string>> rows;
    std::set<int> targets;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string v;
        while (std::getline(ls, v, ',')) f.push_back(v);
        if (f.size() < header.size() || f[c_esc10] != "True") continue;
        rows.emplace_back(f[c_file], std::stoi(f[c_target]), f[c_cat]);
        targets.insert(std::stoi(f[c_target]));
    }
    std::map<int, int> remap;
    for (int t : targets) remap.emplace(t, static_cast<int>(remap.size()));
    std::ofstream o(out);
    o << "filename,class_index,class_name\n";
    for (const auto& [file, target, cat] : rows) o << file << ',' << remap.at(target) << ',' << cat << '\n';
    return out;
}

Outcome real_data(const fs::path& work) {
    fs::path wavs, manifest;
    if (const char* dir = std::getenv("SCL_ESC10_DIR")) {
        wavs = fs::path(dir) / "audio";
        fs::create_directories(work);
        manifest = esc10_manifest(dir, work / "esc10_manifest.csv");
    } else if (const char* m = std::getenv("SCL_ESC10_MANIFEST")) {
        manifest = m;
        const char* w = std::getenv("SCL_ESC10_WAVS");
        if (!w) return {Verdict::fail, "SCL_ESC10_MANIFEST set without SCL_ESC10_WAVS"};
        wavs = w;
    } else {
        return {Verdict::skip, "no ESC-10 audio (set SCL_ESC10_DIR to an ESC-50 checkout)"};
    }
    auto r = audio::ingest(wavs, manifest, 1);
    const std::size_t n = r.segments.size();
    bool in_range = true;
    for (const auto& s : r.segments) {
        for (float v : s.values) in_range &= v >= 0.0f && v <= 1.0f;
    }
    // Per class: recording counts per split follow the 7:2:1 rounding, and
    // segment shares stay near 0.7 / 0.2 / 0.1.
    std::map<int, std::array<std::set<std::string>, 3>> recs;
    std::map<int, std::array<std::size_t, 3>> segs;
    const std::vector<std::size_t>* parts[3] = {&r.splits.train, &r.splits.val, &r.splits.test};
    for (int p = 0; p < 3; ++p) {
        for (auto i : *parts[p]) {
            recs[r.segments[i].label][p].insert(r.segments[i].recording_id);
            segs[r.segments[i].label][p]++;
        }
    }
    bool stratified = recs.size() == 10;
    double worst_share = 0.0;
    for (const auto& [label, sets] : recs) {
        const double total_rec = static_cast<double>(sets[0].size() + sets[1].size() + sets[2].size());
        const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * total_rec)));
        const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * total_rec)));
        stratified &= sets[2].size() == n_test && sets[1].size() == n_val;
        const auto& sc = segs[label];
        const double total = static_cast<double>(sc[0] + sc[1] + sc[2]);
        const double share[3] = {0.7, 0.2, 0.1};
        for (int p = 0; p < 3; ++p) worst_share = std::max(worst_share, std::abs(sc[p] / total - share[p]));
    }
    stratified &= worst_share <= 0.05;
    return judge(n >= 9000 && n <= 10500 && in_range && stratified,
                 std::to_string(n) + " segments; values " + (in_range ? "in [0,1]" : "OUT OF RANGE") + "; splits " +
                     std::to_string(r.splits.train.size()) + "/" + std::to_string(r.splits.val.size()) + "/" +
                     std::to_string(r.splits.test.size()) + ", worst per-class share deviation " + fmt(worst_share, 3) +
                     (stratified ? "" : " (NOT STRATIFIED)"));
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::temp_directory_path() / "scl_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work-dir" && i + 1 < argc) {
            work = argv[++i];
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream s(argv[++i]);
            std::string x;
            while (std::getline(s, x, ',')) only.insert(std::stoi(x));
        } else {
            std::cerr << "usage: acceptance [--work-dir DIR] [--only N[,N...]]\n";
            return 2;
        }
    }
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"parameter count and storage ratio", param_counts},
        {"shape pipeline", shapes},
        {"gradient correctness", gradients},
        {"GMM correctness", gmm_recovery},
        {"catastrophic forgetting", [&] { return forgetting(work); }},
        {"strategy ordering", [&] { return ordering(work); }},
        {"generative replay effectiveness", [&] { return generative(work); }},
        {"exact-reduction identities", identities},
        {"reproducibility", [&] { return reproducibility(work); }},
        {"real-data plausibility", [&] { return real_data(work / "esc10"); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.contains(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
        failures += o.verdict == Verdict::fail;
        std::printf("criterion %2d %-4s %-34s %s [%.1fs]\n", id, tag, criteria[i].first.c_str(), o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
