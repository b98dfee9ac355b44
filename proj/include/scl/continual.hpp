#pragma once

// Class-incremental continual learning: task sequencing, rehearsal buffers,
// the rehearsal / generative-replay losses, and the per-task training loops.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "scl/audio.hpp"
#include "scl/gmm.hpp"
#include "scl/models.hpp"
#include "scl/rng.hpp"
#include "scl/tensor.hpp"

namespace scl::continual {

inline constexpr std::size_t kSegmentSize = models::kSegmentSize;
inline constexpr int kTasks = 5;

// Dense rows of 128 x 16 segments with integer labels.
struct SampleSet {
    std::vector<double> x;  // [n x 2048]
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    bool empty() const { return y.empty(); }
    void append(const SampleSet& other);
    void append_row(std::span<const double> row, int label);
    SampleSet subset(std::span<const std::size_t> rows) const;
    // [rows x 128 x 16] input batch.
    Tensor batch(std::span<const std::size_t> rows) const;
    Tensor all() const;
};

SampleSet to_samples(const std::vector<audio::MelSegment>& segments,
                     std::span<const std::size_t> rows);

struct Corpus {
    std::vector<audio::MelSegment> segments;
    audio::Splits splits;
};

// Raw data for one task, together with which reads have happened.
struct TaskDataset {
    std::array<int, 2> classes{};
    SampleSet train, val, test;
};

// Five tasks of two classes; pairs (0,1), (2,3), ... in an order fixed by
// the permutation seed. Training and validation data are only readable for
// the task that is currently open (begin_task); anything else throws
// DataIsolationError. Test data is readable for evaluation.
class TaskSequence {
public:
    const std::vector<int>& permutation() const { return permutation_; }
    int num_tasks() const { return static_cast<int>(tasks_.size()); }
    std::array<int, 2> classes(int task) const;  // 1-based task index

    void begin_task(int task);
    int current_task() const { return current_; }

    const SampleSet& train(int task) const;
    const SampleSet& val(int task) const;
    const SampleSet& test(int task) const;

    // Every (task, "train" | "val") read since construction.
    const std::vector<std::pair<int, std::string>>& access_log() const { return log_; }

    friend TaskSequence make_task_sequence(const Corpus& corpus, std::uint64_t permutation_seed);

private:
    const TaskDataset& at(int task) const;
    const SampleSet& gated(int task, const char* split) const;

    std::vector<int> permutation_;  // pair index per position
    std::vector<TaskDataset> tasks_;
    int current_ = 0;
    mutable std::vector<std::pair<int, std::string>> log_;
};

// Throws DataError if any of the 10 classes is missing from a split.
TaskSequence make_task_sequence(const Corpus& corpus, std::uint64_t permutation_seed);

// ---- rehearsal ---------------------------------------------------------------

struct Batch {
    Tensor x;        // [B x 128 x 16]
    Tensor targets;  // [B x 10], one-hot or soft
};

Batch make_batch(const SampleSet& s, std::span<const std::size_t> rows);

class ReplayBuffer {
public:
    explicit ReplayBuffer(double percent) : percent_(percent) {}

    double percent() const { return percent_; }
    // Stores round(percent% of train) samples chosen uniformly without
    // replacement. Called once per task, at its end.
    void add_task(const SampleSet& train, Rng& rng);
    void restore_task(SampleSet stored) { stores_.push_back(std::move(stored)); }

    std::size_t num_tasks() const { return stores_.size(); }
    const SampleSet& task(std::size_t k) const { return stores_.at(k); }
    std::size_t total_samples() const;
    // Bytes needed to keep the stored segments as 32-bit values.
    std::size_t bytes() const { return total_samples() * kSegmentSize * sizeof(float); }

    // One batch per non-empty stored task, `per_task` rows each, drawn
    // uniformly with replacement.
    std::vector<Batch> sample(std::size_t per_task, Rng& rng) const;

private:
    double percent_;
    std::vector<SampleSet> stores_;
};

// Mean CE on the current batch plus, for each past-task batch, that batch's
// mean CE (every past task weighted like the current one).
Tensor rehearsal_loss(const models::Classifier& f, const Batch& current,
                      const std::vector<Batch>& past);

// ---- generative replay -------------------------------------------------------

struct ReplaySet {
    Tensor x;     // [n x 128 x 16]
    Tensor soft;  // [n x 10], softmax of the frozen previous classifier
    std::size_t size() const { return x.defined() ? x.dim(0) : 0; }
};

// Soft targets from `prev`; throws std::invalid_argument when prev is null
// (there is no classifier before the first task).
ReplaySet distillation_targets(const models::Classifier* prev, const Tensor& x_g);
ReplaySet subset(const ReplaySet& r, std::span<const std::size_t> rows);

// CE(current) + weight * CE(f(x_g), soft targets); both terms batch means.
// A null or empty replay reduces to the current-task CE.
Tensor generative_replay_classifier_loss(const models::Classifier& f, const Batch& current,
                                         const ReplaySet* replay, double replay_weight = 1.0);

enum class GeneratorKind { ae_gmm, vae };

// Autoencoder + latent mixture, or a VAE sampled from its prior.
class Generator {
public:
    static Generator make(GeneratorKind kind, Rng& rng);

    GeneratorKind kind() const { return kind_; }
    int task_index() const { return task_; }
    void set_task_index(int t) { task_ = t; }

    // [n x 128 x 16] decoded samples in (0, 1).
    Tensor sample(std::size_t n, Rng& rng) const;
    Tensor encode(const Tensor& x) const;  // latent means

    ParameterList parameters() const;
    std::size_t param_count() const;  // network + mixture scalars
    models::Autoencoder& ae() { return *ae_; }
    models::Vae& vae() { return *vae_; }
    const gmm::Model& mixture() const { return gmm_; }
    void set_mixture(gmm::Model m) { gmm_ = std::move(m); }
    Generator clone() const;

    Checkpoint to_checkpoint(std::uint64_t seed) const;
    static Generator from_checkpoint(const Checkpoint& c);

private:
    GeneratorKind kind_ = GeneratorKind::ae_gmm;
    int task_ = 0;
    std::optional<models::Autoencoder> ae_;
    std::optional<models::Vae> vae_;
    gmm::Model gmm_;
};

struct GeneratorConfig {
    int epochs = 40;
    std::size_t batch = 100;
    double lr = 1e-3;
    double replay_ratio = 1.0;       // replayed samples per current sample per past task
    std::size_t components_per_class = 2;
    int gmm_max_iter = 100;
    double gmm_tol = 1e-6;
};

// Structured progress reports; one JSON object per epoch.
using EpisodeSink = std::function<void(const nlohmann::json&)>;

// Trains G_t, warm-started from prev (null at the first task) on the
// current data plus replay freshly sampled from prev each epoch, then
// (AE+GMM) refits the mixture on the latents of that union.
Generator generator_episode(const Generator* prev, const SampleSet& current, int task_index,
                            GeneratorKind kind, const GeneratorConfig& cfg, Rng& rng,
                            const EpisodeSink& sink = {});

// Number of replayed samples used at task t.
std::size_t replay_count(std::size_t current_size, int task_index, double ratio);

// ---- classifier episodes -----------------------------------------------------

enum class StrategyKind { none, rehearsal, ae_gmm, vae };

struct Strategy {
    StrategyKind kind = StrategyKind::none;
    double percent = 0.0;  // rehearsal only

    // "none", "rhs5" / "rhs10" / ..., "joint" (= rhs100), "ae_gmm", "vae".
    static Strategy parse(const std::string& name);
    std::string name() const;
    bool generative() const { return kind == StrategyKind::ae_gmm || kind == StrategyKind::vae; }
};

struct ClassifierConfig {
    int epochs = 30;
    std::size_t batch = 100;
    double lr = 5e-4;
    double replay_ratio = 1.0;
};

// Warm-starts from f_prev and trains on task `task_index` with the
// strategy's loss. `buffer` is read for rehearsal, `generator` (G_{t-1}) for
// generative strategies; `val` (optional) is scored after every epoch.
models::Classifier classifier_episode(const models::Classifier& f_prev, const ReplayBuffer* buffer,
                                      const Generator* generator, const SampleSet& current,
                                      const SampleSet* val, int task_index, const Strategy& strategy,
                                      const ClassifierConfig& cfg, Rng& rng,
                                      const EpisodeSink& sink = {});

// ---- evaluation --------------------------------------------------------------

std::vector<int> predict(const models::Classifier& f, const SampleSet& s);
double accuracy(const models::Classifier& f, const SampleSet& s);
// Accuracy over the union of test sets of tasks 1..t.
double evaluate(const models::Classifier& f, const TaskSequence& seq, int t);

}  // namespace scl::continual
