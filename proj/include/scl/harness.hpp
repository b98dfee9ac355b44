#pragma once

// Experiment orchestration: configuration, the strategies x seeds grid with
// per-task checkpoints and resume, metrics records, reports and sampling.
//
// Output directory layout:
//
//   <out>/config.resolved.json      the fully resolved configuration
//   <out>/metrics.jsonl             every MetricsRecord, grid order
//   <out>/cells/<strategy>_seed<s>/
//       state.json                  {"fingerprint", "completed_task"}
//       metrics.jsonl               records of completed tasks
//       episodes.jsonl              per-epoch training log (has wall times)
//       task<t>/classifier.ckpt     f_t
//       task<t>/generator.ckpt      G_t (generative strategies)
//       task<t>/buffer.segs         rehearsal buffer after task t
//       task<t>/*.card.json         model cards

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "scl/archive.hpp"
#include "scl/checkpoint.hpp"
#include "scl/continual.hpp"
#include "scl/synthetic.hpp"

namespace scl::harness {

struct DataSource {
    std::filesystem::path archive;  // empty: use the synthetic corpus
    synthetic::CorpusSpec synthetic;
};

struct ExperimentConfig {
    std::string profile = "quick";
    DataSource data;
    std::vector<std::string> strategies;
    std::vector<std::uint64_t> seeds;
    continual::ClassifierConfig classifier;
    continual::GeneratorConfig generator;
    std::filesystem::path output_dir;
};

// "quick" (desk scale, synthetic corpus) or "full" (paper-scale epochs).
ExperimentConfig profile_defaults(const std::string& profile);

// Starts from the profile named in j["profile"] (default "quick") and
// applies every key present. Unknown keys and bad values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// "a.b.c=value" on a JSON document; value is parsed as JSON when it can be,
// otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Paths exist, seeds distinct, strategies parse, sizes positive.
void validate(const ExperimentConfig& c);

continual::Corpus load_corpus(const DataSource& d);

struct MetricsRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<int> permutation;
    int task = 0;
    double accuracy = 0.0;                 // union of test sets 1..task
    std::vector<double> task_accuracies;   // per task k <= task
    std::size_t buffer_bytes = 0;
    std::size_t generator_param_bytes = 0;  // 32-bit storage of G_t
    std::size_t generator_params = 0;
    std::size_t train_samples = 0;          // sum of training-set sizes so far
};

nlohmann::json to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const nlohmann::json& j);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);
std::string metrics_line(const MetricsRecord& r);

struct RunOptions {
    int stop_after_task = 0;  // > 0: end every cell after this task
    std::ostream* progress = nullptr;
};

struct RunResult {
    std::vector<MetricsRecord> records;
    std::size_t complete_cells = 0;
    std::size_t resumed_cells = 0;
    std::filesystem::path metrics_path;
};

// Runs or resumes the grid. A cell with a state file continues after its
// last completed task; a state or checkpoint that does not match throws
// ResumeError naming the file.
RunResult run_experiment(const ExperimentConfig& c, const RunOptions& opts = {});

std::filesystem::path cell_dir(const ExperimentConfig& c, const std::string& strategy,
                               std::uint64_t seed);

// ---- reports -----------------------------------------------------------------

inline constexpr double kReferenceTrainSegments = 9500.0 * 0.7;

struct CurvePoint {
    std::string strategy;
    int task = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation, 0 for n = 1
};

struct StorageRow {
    std::string strategy;
    double stored_scalars = 0.0;  // buffer values or generator parameters, final task
    double segment_equivalents = 0.0;
    double ratio_run = 0.0;        // against this run's training set
    double ratio_reference = 0.0;  // against 9500 x 0.7 segments
};

struct Summary {
    std::vector<CurvePoint> curve;
    std::map<std::string, double> sd_slope;  // least-squares slope of sd over tasks
    std::vector<StorageRow> storage;
    std::vector<std::string> missing;
};

Summary summarize(const std::vector<MetricsRecord>& records);
std::string curve_csv(const Summary& s);
std::string storage_csv(const Summary& s);
std::string summary_markdown(const Summary& s);

// ---- sampling ----------------------------------------------------------------

// n decoded segments (label -1) from a generator checkpoint.
audio::SegmentArchive generate_samples(const Checkpoint& generator, std::size_t n,
                                       std::uint64_t seed);

}  // namespace scl::harness
