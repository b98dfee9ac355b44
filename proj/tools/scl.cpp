// Command-line front end: ingest, run, summarize, sample.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "scl/archive.hpp"
#include "scl/audio.hpp"
#include "scl/binio.hpp"
#include "scl/errors.hpp"
#include "scl/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitResume = 4;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct IngestArgs {
    fs::path wav_dir, manifest, output;
    std::uint64_t seed = 1;
};

int cmd_ingest(const IngestArgs& a) {
    auto r = audio::ingest(a.wav_dir, a.manifest, a.seed);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::map<int, std::string> names;
    for (const auto& e : audio::read_manifest(a.manifest)) names.emplace(e.class_index, e.class_name);
    audio::SegmentArchive archive{a.seed, audio::kPipelineVersion, std::move(r.segments)};
    audio::save_archive(a.output, archive);
    audio::save_splits(a.output, r.splits, a.seed, archive.segments.size(), names);
    std::cout << archive.segments.size() << " segments (train " << r.splits.train.size() << ", val "
              << r.splits.val.size() << ", test " << r.splits.test.size() << ") -> " << a.output.string() << "\n";
    return kExitOk;
}

struct RunArgs {
    fs::path config;
    std::string profile, output, strategies, seeds;
    std::vector<std::string> overrides;
    int stop_after_task = 0;
    bool quiet = false;
};

int cmd_run(const RunArgs& a) {
    json doc = json::object();
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw ConfigError("cannot open config file " + a.config.string());
        doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) throw ConfigError(a.config.string() + ": not a JSON object");
    }
    if (!a.profile.empty()) doc["profile"] = a.profile;
    if (!a.output.empty()) doc["output_dir"] = a.output;
    if (!a.strategies.empty()) doc["strategies"] = split_list(a.strategies);
    if (!a.seeds.empty()) {
        json seeds = json::array();
        for (const auto& s : split_list(a.seeds)) {
            try {
                seeds.push_back(std::stoull(s));
            } catch (const std::exception&) {
                throw ConfigError("--seeds: '" + s + "' is not an unsigned integer");
            }
        }
        doc["seeds"] = seeds;
    }
    for (const auto& o : a.overrides) harness::apply_override(doc, o);

    const auto cfg = harness::config_from_json(doc);
    harness::RunOptions opts;
    opts.stop_after_task = a.stop_after_task;
    if (!a.quiet) opts.progress = &std::cerr;
    const auto r = harness::run_experiment(cfg, opts);
    std::cout << r.records.size() << " records, " << r.complete_cells << " complete cells ("
              << r.resumed_cells << " resumed) -> " << r.metrics_path.string() << "\n";
    return kExitOk;
}

struct SummarizeArgs {
    std::vector<fs::path> metrics;
    fs::path output_dir;
};

int cmd_summarize(const SummarizeArgs& a) {
    std::vector<harness::MetricsRecord> records;
    for (const auto& p : a.metrics) {
        auto r = harness::read_metrics(p);
        records.insert(records.end(), r.begin(), r.end());
    }
    if (records.empty()) throw DataError("no metrics records found");
    const auto s = harness::summarize(records);
    const auto md = harness::summary_markdown(s);
    if (a.output_dir.empty()) {
        std::cout << md;
    } else {
        fs::create_directories(a.output_dir);
        binio::write_text_atomic(a.output_dir / "accuracy.csv", harness::curve_csv(s));
        binio::write_text_atomic(a.output_dir / "storage.csv", harness::storage_csv(s));
        binio::write_text_atomic(a.output_dir / "report.md", md);
        std::cout << "report -> " << a.output_dir.string() << "\n";
    }
    for (const auto& m : s.missing) std::cerr << "missing: " << m << "\n";
    return kExitOk;
}

struct SampleArgs {
    fs::path checkpoint, output;
    std::size_t n = 16;
    std::uint64_t seed = 1;
};

int cmd_sample(const SampleArgs& a) {
    const auto archive = harness::generate_samples(load_checkpoint(a.checkpoint), a.n, a.seed);
    audio::save_archive(a.output, archive);
    std::cout << archive.segments.size() << " generated segments -> " << a.output.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continual sound classification with rehearsal and generative replay"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* ci = app.add_subcommand("ingest", "WAV directory + manifest -> segment archive");
    ci->add_option("--wav-dir", ingest.wav_dir, "Directory holding the WAV files")->required();
    ci->add_option("--manifest", ingest.manifest, "CSV with filename,class_index,class_name")->required();
    ci->add_option("-o,--output", ingest.output, "Archive to write (splits go to <archive>.splits.json)")->required();
    ci->add_option("--seed", ingest.seed, "Split seed");

    RunArgs run;
    auto* cr = app.add_subcommand("run", "Config -> metrics and checkpoints (resumes when outputs exist)");
    cr->add_option("-c,--config", run.config, "JSON config file");
    cr->add_option("--profile", run.profile, "quick or full");
    cr->add_option("-o,--output", run.output, "Output directory");
    cr->add_option("--strategies", run.strategies, "Comma list, e.g. none,rhs5,ae_gmm");
    cr->add_option("--seeds", run.seeds, "Comma list of seeds");
    cr->add_option("--set", run.overrides, "Override a config key, e.g. classifier.epochs=5");
    cr->add_option("--stop-after-task", run.stop_after_task, "End every cell after this task");
    cr->add_flag("-q,--quiet", run.quiet, "No progress output");

    SummarizeArgs summ;
    auto* cs = app.add_subcommand("summarize", "Metrics files -> CSV and Markdown report");
    cs->add_option("metrics", summ.metrics, "metrics.jsonl files")->required();
    cs->add_option("-o,--output-dir", summ.output_dir, "Write accuracy.csv, storage.csv and report.md here");

    SampleArgs sample;
    auto* cp = app.add_subcommand("sample", "Generator checkpoint -> archive of generated segments");
    cp->add_option("--checkpoint", sample.checkpoint, "generator.ckpt")->required();
    cp->add_option("-n", sample.n, "Number of segments");
    cp->add_option("--seed", sample.seed, "Sampling seed");
    cp->add_option("-o,--output", sample.output, "Archive to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*ci) return cmd_ingest(ingest);
        if (*cr) return cmd_run(run);
        if (*cs) return cmd_summarize(summ);
        if (*cp) return cmd_sample(sample);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ResumeError& e) {
        std::cerr << "resume error: " << e.what() << "\n";
        return kExitResume;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataIsolationError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
