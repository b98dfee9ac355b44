#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>

#include "scl/binio.hpp"
#include "scl/errors.hpp"
#include "scl/harness.hpp"

namespace scl::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scl::continual;

namespace {

constexpr std::uint64_t kInitTag = 0x636c732d696e6974;  // shared classifier initialization
constexpr int kStateVersion = 1;

enum class Stream : std::uint64_t { classifier = 1, buffer = 2, generator = 3 };

std::uint64_t cell_seed(const std::string& strategy, std::uint64_t seed) {
    return derive_seed(seed, binio::fnv1a64(reinterpret_cast<const std::uint8_t*>(strategy.data()), strategy.size()));
}

Rng task_rng(std::uint64_t cell, int t, Stream s) {
    return Rng(derive_seed(derive_seed(cell, static_cast<std::uint64_t>(t)), static_cast<std::uint64_t>(s)));
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Everything that determines a cell's results.
std::string fingerprint(const ExperimentConfig& c, const Strategy& s, std::uint64_t seed) {
    json full = to_json(c);
    json j{{"state_version", kStateVersion},
           {"data", full["data"]},
           {"classifier", full["classifier"]},
           {"model", full["model"]},
           {"strategy", s.name()},
           {"seed", seed}};
    if (s.generative()) j["generator"] = full["generator"];
    const std::string text = j.dump();
    return hex(binio::fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

fs::path task_dir(const fs::path& cell, int t) { return cell / ("task" + std::to_string(t)); }

GeneratorKind generator_kind(const Strategy& s) {
    return s.kind == StrategyKind::ae_gmm ? GeneratorKind::ae_gmm : GeneratorKind::vae;
}

Checkpoint classifier_checkpoint(const models::Classifier& f, int t, std::uint64_t seed) {
    Checkpoint c;
    c.meta.model_kind = "classifier";
    c.meta.task_index = t;
    c.meta.seed = seed;
    c.add_all(f.parameters());
    return c;
}

audio::SegmentArchive buffer_archive(const ReplayBuffer& buf, std::uint64_t seed) {
    audio::SegmentArchive a;
    a.seed = seed;
    for (std::size_t k = 0; k < buf.num_tasks(); ++k) {
        const auto& s = buf.task(k);
        for (std::size_t i = 0; i < s.size(); ++i) {
            audio::MelSegment m;
            m.label = s.y[i];
            m.recording_id = "task" + std::to_string(k + 1);
            m.segment_index = static_cast<int>(i);
            m.values.assign(s.x.begin() + static_cast<std::ptrdiff_t>(i * kSegmentSize),
                            s.x.begin() + static_cast<std::ptrdiff_t>((i + 1) * kSegmentSize));
            a.segments.push_back(std::move(m));
        }
    }
    return a;
}

void restore_buffer(ReplayBuffer& buf, const audio::SegmentArchive& a, int tasks, const fs::path& path) {
    std::vector<SampleSet> stores(static_cast<std::size_t>(tasks));
    for (const auto& m : a.segments) {
        const std::string prefix = "task";
        int k = 0;
        if (m.recording_id.rfind(prefix, 0) == 0) k = std::atoi(m.recording_id.c_str() + prefix.size());
        if (k < 1 || k > tasks) throw ResumeError(path.string() + ": buffer record for unexpected task '" + m.recording_id + "'");
        const std::vector<double> row(m.values.begin(), m.values.end());
        stores[static_cast<std::size_t>(k - 1)].append_row(row, m.label);
    }
    for (auto& s : stores) buf.restore_task(std::move(s));
}

void write_card(const fs::path& path, const std::string& arch, std::size_t params, int t, std::uint64_t seed,
                const json& extra = {}) {
    json card = models::model_card(arch, params, t, seed);
    for (const auto& [k, v] : extra.items()) card[k] = v;
    binio::write_text_atomic(path, card.dump(2) + "\n");
}

std::string join_lines(const std::vector<MetricsRecord>& recs) {
    std::string out;
    for (const auto& r : recs) out += metrics_line(r);
    return out;
}

class EpisodeLog {
public:
    EpisodeLog(const fs::path& path, std::string strategy, std::uint64_t seed)
        : out_(path, std::ios::app), strategy_(std::move(strategy)), seed_(seed) {
        if (!out_) throw DataError("cannot open episode log " + path.string());
    }
    void write(json rec) {
        rec["strategy"] = strategy_;
        rec["seed"] = seed_;
        const std::lock_guard lock(mu_);
        out_ << rec.dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mu_;
    std::ofstream out_;
    std::string strategy_;
    std::uint64_t seed_;
};

struct CellOutcome {
    std::vector<MetricsRecord> records;
    bool complete = false;
    bool resumed = false;
};

template <class F>
auto resume_read(const fs::path& path, F&& f) {
    try {
        return f();
    } catch (const ResumeError&) {
        throw;
    } catch (const std::exception& e) {
        throw ResumeError("cannot resume from " + path.string() + ": " + e.what());
    }
}

CellOutcome run_cell(const ExperimentConfig& c, const Corpus& corpus, const Strategy& strategy, std::uint64_t seed,
                     const RunOptions& opts) {
    const fs::path dir = cell_dir(c, strategy.name(), seed);
    fs::create_directories(dir);
    const fs::path state_path = dir / "state.json";
    const fs::path metrics_path = dir / "metrics.jsonl";
    const std::string fp = fingerprint(c, strategy, seed);
    const std::uint64_t cell = cell_seed(strategy.name(), seed);

    CellOutcome out;
    int done = 0;
    if (fs::exists(state_path)) {
        const json state = resume_read(state_path, [&] {
            const auto bytes = binio::read_file(state_path);
            return json::parse(bytes.begin(), bytes.end());
        });
        if (state.value("fingerprint", std::string()) != fp) {
            throw ResumeError(state_path.string() + ": written by a different configuration (fingerprint " +
                              state.value("fingerprint", std::string("?")) + ", expected " + fp + ")");
        }
        done = resume_read(state_path, [&] { return state.at("completed_task").get<int>(); });
        if (done < 0 || done > kTasks) throw ResumeError(state_path.string() + ": completed_task out of range");
        if (done > 0) {
            out.records = resume_read(metrics_path, [&] { return read_metrics(metrics_path); });
            if (out.records.size() != static_cast<std::size_t>(done)) {
                throw ResumeError(metrics_path.string() + ": holds " + std::to_string(out.records.size()) +
                                  " records, state says " + std::to_string(done) + " tasks are complete");
            }
            for (int t = 1; t <= done; ++t) {
                if (out.records[static_cast<std::size_t>(t - 1)].task != t) {
                    throw ResumeError(metrics_path.string() + ": records out of order");
                }
            }
            out.resumed = true;
        }
    }

    auto seq = make_task_sequence(corpus, seed);
    Rng init(derive_seed(seed, kInitTag));
    models::Classifier f(init);
    ReplayBuffer buffer(strategy.percent);
    std::optional<Generator> gen;
    if (done > 0) {
        const fs::path tdir = task_dir(dir, done);
        const fs::path cp = tdir / "classifier.ckpt";
        resume_read(cp, [&] {
            auto ckpt = load_checkpoint(cp);
            if (ckpt.meta.model_kind != "classifier" || ckpt.meta.task_index != done) {
                throw ResumeError(cp.string() + ": not the classifier of task " + std::to_string(done));
            }
            auto params = f.parameters();
            ckpt.load_into(params);
            return 0;
        });
        if (strategy.kind == StrategyKind::rehearsal) {
            const fs::path bp = tdir / "buffer.segs";
            resume_read(bp, [&] {
                restore_buffer(buffer, audio::load_archive(bp), done, bp);
                return 0;
            });
        }
        if (strategy.generative()) {
            const fs::path gp = tdir / "generator.ckpt";
            gen = resume_read(gp, [&] {
                auto g = Generator::from_checkpoint(load_checkpoint(gp));
                if (g.kind() != generator_kind(strategy) || g.task_index() != done) {
                    throw ResumeError(gp.string() + ": not the generator of task " + std::to_string(done));
                }
                return g;
            });
        }
    }

    EpisodeLog log(dir / "episodes.jsonl", strategy.name(), seed);
    if (done > 0) log.write({{"event", "resume"}, {"completed_task", done}});
    const EpisodeSink sink = [&](const json& j) { log.write(j); };

    std::size_t train_samples = out.records.empty() ? 0 : out.records.back().train_samples;
    for (int t = done + 1; t <= kTasks; ++t) {
        if (opts.stop_after_task > 0 && t > opts.stop_after_task) return out;
        seq.begin_task(t);
        const auto& train = seq.train(t);
        const auto& val = seq.val(t);

        Rng crng = task_rng(cell, t, Stream::classifier);
        f = classifier_episode(f, &buffer, gen ? &*gen : nullptr, train, &val, t, strategy, c.classifier, crng, sink);
        if (strategy.kind == StrategyKind::rehearsal) {
            Rng brng = task_rng(cell, t, Stream::buffer);
            buffer.add_task(train, brng);
        }
        if (strategy.generative()) {
            Rng grng = task_rng(cell, t, Stream::generator);
            gen = generator_episode(gen ? &*gen : nullptr, train, t, generator_kind(strategy), c.generator, grng, sink);
        }
        train_samples += train.size();

        MetricsRecord r;
        r.strategy = strategy.name();
        r.seed = seed;
        r.permutation = seq.permutation();
        r.task = t;
        r.accuracy = evaluate(f, seq, t);
        for (int k = 1; k <= t; ++k) r.task_accuracies.push_back(accuracy(f, seq.test(k)));
        r.buffer_bytes = buffer.bytes();
        r.generator_params = gen ? gen->param_count() : 0;
        r.generator_param_bytes = r.generator_params * sizeof(float);
        r.train_samples = train_samples;
        log.write({{"event", "evaluate"}, {"task", t}, {"accuracy", r.accuracy}, {"task_accuracies", r.task_accuracies}});

        const fs::path tdir = task_dir(dir, t);
        fs::create_directories(tdir);
        save_checkpoint(classifier_checkpoint(f, t, seed), tdir / "classifier.ckpt");
        write_card(tdir / "classifier.card.json", "classifier", models::param_count(f.parameters()), t, seed,
                   {{"strategy", strategy.name()}});
        if (gen) {
            save_checkpoint(gen->to_checkpoint(seed), tdir / "generator.ckpt");
            json extra{{"strategy", strategy.name()}};
            if (gen->kind() == GeneratorKind::ae_gmm) extra["gmm_components"] = gen->mixture().k;
            write_card(tdir / "generator.card.json", gen->kind() == GeneratorKind::ae_gmm ? "autoencoder+gmm" : "vae",
                       gen->param_count(), t, seed, extra);
        }
        if (strategy.kind == StrategyKind::rehearsal) audio::save_archive(tdir / "buffer.segs", buffer_archive(buffer, seed));

        out.records.push_back(r);
        binio::write_text_atomic(metrics_path, join_lines(out.records));
        binio::write_text_atomic(state_path, json{{"fingerprint", fp}, {"completed_task", t}}.dump(2) + "\n");
        if (opts.progress) {
            *opts.progress << strategy.name() << " seed " << seed << " task " << t << ": accuracy "
                           << r.accuracy << "\n";
            opts.progress->flush();
        }
    }
    out.complete = true;
    return out;
}

}  // namespace

fs::path cell_dir(const ExperimentConfig& c, const std::string& strategy, std::uint64_t seed) {
    return c.output_dir / "cells" / (continual::Strategy::parse(strategy).name() + "_seed" + std::to_string(seed));
}

RunResult run_experiment(const ExperimentConfig& c, const RunOptions& opts) {
    validate(c);
    fs::create_directories(c.output_dir);
    binio::write_text_atomic(c.output_dir / "config.resolved.json", to_json(c).dump(2) + "\n");
    const Corpus corpus = load_corpus(c.data);

    RunResult result;
    for (const auto& name : c.strategies) {
        const auto strategy = Strategy::parse(name);
        for (auto seed : c.seeds) {
            auto cell = run_cell(c, corpus, strategy, seed, opts);
            result.complete_cells += cell.complete;
            result.resumed_cells += cell.resumed;
            result.records.insert(result.records.end(), cell.records.begin(), cell.records.end());
        }
    }
    result.metrics_path = c.output_dir / "metrics.jsonl";
    binio::write_text_atomic(result.metrics_path, join_lines(result.records));
    return result;
}

}  // namespace scl::harness
