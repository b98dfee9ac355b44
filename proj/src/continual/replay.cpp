#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "scl/adam.hpp"
#include "scl/continual.hpp"
#include "scl/errors.hpp"
#include "scl/ops.hpp"
#include "support.hpp"

namespace scl::continual {

using models::kClasses;

Batch make_batch(const SampleSet& s, std::span<const std::size_t> rows) {
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (auto r : rows) labels.push_back(s.y.at(r));
    return {s.batch(rows), ops::one_hot(labels, kClasses)};
}

// ---- buffer ------------------------------------------------------------------

void ReplayBuffer::add_task(const SampleSet& train, Rng& rng) {
    const auto keep = static_cast<std::size_t>(
        std::llround(percent_ / 100.0 * static_cast<double>(train.size())));
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(std::span(idx));
    idx.resize(std::min(keep, idx.size()));
    std::sort(idx.begin(), idx.end());
    stores_.push_back(train.subset(idx));
}

std::size_t ReplayBuffer::total_samples() const {
    std::size_t n = 0;
    for (const auto& s : stores_) n += s.size();
    return n;
}

std::vector<Batch> ReplayBuffer::sample(std::size_t per_task, Rng& rng) const {
    std::vector<Batch> out;
    for (const auto& s : stores_) {
        if (s.empty()) continue;
        std::vector<std::size_t> rows(per_task);
        for (auto& r : rows) r = static_cast<std::size_t>(rng.below(s.size()));
        out.push_back(make_batch(s, rows));
    }
    return out;
}

LossTerms rehearsal_loss_terms(const models::Classifier& f, const Batch& current,
                               const std::vector<Batch>& past) {
    LossTerms t;
    t.total = ops::cross_entropy(f.forward(current.x), current.targets);
    t.current = t.total.item();
    for (const auto& b : past) {
        auto term = ops::cross_entropy(f.forward(b.x), b.targets);
        t.replay += term.item();
        t.total = ops::add(t.total, term);
    }
    return t;
}

Tensor rehearsal_loss(const models::Classifier& f, const Batch& current,
                      const std::vector<Batch>& past) {
    return rehearsal_loss_terms(f, current, past).total;
}

// ---- distillation ------------------------------------------------------------

ReplaySet distillation_targets(const models::Classifier* prev, const Tensor& x_g) {
    if (!prev) {
        throw std::invalid_argument(
            "replay requires a previous classifier; none exists before the first task");
    }
    ReplaySet r;
    r.x = x_g;
    if (x_g.defined() && x_g.dim(0) > 0) r.soft = ops::softmax(frozen_forward(*prev, x_g));
    return r;
}

ReplaySet subset(const ReplaySet& r, std::span<const std::size_t> rows) {
    ReplaySet s;
    if (rows.empty()) return s;
    const std::size_t n = r.size();
    std::vector<double> x(rows.size() * kSegmentSize), soft(rows.size() * kClasses);
    auto xs = r.x.data();
    auto ss = r.soft.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= n) throw std::out_of_range("replay subset: row out of range");
        std::copy_n(xs.begin() + rows[i] * kSegmentSize, kSegmentSize, x.begin() + i * kSegmentSize);
        std::copy_n(ss.begin() + rows[i] * kClasses, kClasses, soft.begin() + i * kClasses);
    }
    s.x = Tensor::from({rows.size(), models::kMelBins, models::kFrames}, std::move(x));
    s.soft = Tensor::from({rows.size(), kClasses}, std::move(soft));
    return s;
}

LossTerms generative_replay_terms(const models::Classifier& f, const Batch& current,
                                  const ReplaySet* replay, double replay_weight) {
    LossTerms t;
    t.total = ops::cross_entropy(f.forward(current.x), current.targets);
    t.current = t.total.item();
    if (replay && replay->size() > 0) {
        auto term = ops::cross_entropy(f.forward(replay->x), replay->soft);
        t.replay = term.item();
        t.total = ops::add(t.total, ops::scale(term, replay_weight));
    }
    return t;
}

Tensor generative_replay_classifier_loss(const models::Classifier& f, const Batch& current,
                                         const ReplaySet* replay, double replay_weight) {
    return generative_replay_terms(f, current, replay, replay_weight).total;
}

// ---- generator ---------------------------------------------------------------

Generator Generator::make(GeneratorKind kind, Rng& rng) {
    Generator g;
    g.kind_ = kind;
    if (kind == GeneratorKind::ae_gmm) g.ae_.emplace(rng);
    else g.vae_.emplace(rng);
    return g;
}

Tensor Generator::encode(const Tensor& x) const {
    if (ae_) {
        auto frozen = ae_->clone();
        frozen.set_trainable(false);
        return frozen.encode(x);
    }
    auto frozen = vae_->clone();
    frozen.set_trainable(false);
    return frozen.encode(x).first;
}

Tensor Generator::sample(std::size_t n, Rng& rng) const {
    Tensor z;
    if (ae_) {
        if (gmm_.k == 0) throw std::logic_error("Generator::sample: mixture not fitted");
        z = gmm::sample(gmm_, n, rng);
    } else {
        std::vector<double> e(n * models::kLatentDim);
        for (auto& v : e) v = rng.normal();
        z = Tensor::from({n, models::kLatentDim}, std::move(e));
    }
    if (ae_) {
        auto frozen = ae_->clone();
        frozen.set_trainable(false);
        return frozen.decode(z);
    }
    auto frozen = vae_->clone();
    frozen.set_trainable(false);
    return frozen.decode(z);
}

ParameterList Generator::parameters() const { return ae_ ? ae_->parameters() : vae_->parameters(); }

std::size_t Generator::param_count() const {
    std::size_t n = models::param_count(parameters());
    if (ae_) n += gmm_.weights.size() + gmm_.means.size() + gmm_.variances.size();
    return n;
}

Generator Generator::clone() const {
    Generator g;
    g.kind_ = kind_;
    g.task_ = task_;
    if (ae_) g.ae_.emplace(ae_->clone());
    if (vae_) g.vae_.emplace(vae_->clone());
    g.gmm_ = gmm_;
    return g;
}

Checkpoint Generator::to_checkpoint(std::uint64_t seed) const {
    Checkpoint c;
    c.meta.model_kind = kind_ == GeneratorKind::ae_gmm ? "ae_gmm" : "vae";
    c.meta.task_index = task_;
    c.meta.seed = seed;
    c.add_all(parameters(), "net.");
    if (ae_) gmm::to_checkpoint(gmm_, c);
    return c;
}

Generator Generator::from_checkpoint(const Checkpoint& c) {
    GeneratorKind kind;
    if (c.meta.model_kind == "ae_gmm") kind = GeneratorKind::ae_gmm;
    else if (c.meta.model_kind == "vae") kind = GeneratorKind::vae;
    else throw DataError("checkpoint holds a '" + c.meta.model_kind + "', not a generator");
    Rng unused(0);
    Generator g = make(kind, unused);
    g.task_ = c.meta.task_index;
    auto params = g.parameters();
    c.load_into(params, "net.");
    if (kind == GeneratorKind::ae_gmm) g.gmm_ = gmm::from_checkpoint(c);
    return g;
}

std::size_t replay_count(std::size_t current_size, int task_index, double ratio) {
    if (task_index <= 1) return 0;
    return static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(current_size) * (task_index - 1)));
}

std::size_t append_generated(SampleSet& dst, const Tensor& x_g) {
    const std::size_t n = x_g.numel() / kSegmentSize;
    auto xs = x_g.data();
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = xs.subspan(i * kSegmentSize, kSegmentSize);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        if (!(std::sqrt(sq) >= audio::kMinSegmentNorm)) {
            ++excluded;
            continue;
        }
        dst.append_row(row, -1);
    }
    return excluded;
}

namespace {

// Per-row BCE (summed over bins) of recon against target, no tape.
std::vector<double> row_bce(const Tensor& recon, const Tensor& target) {
    const std::size_t n = recon.dim(0);
    auto r = recon.data();
    auto t = target.data();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = i * kSegmentSize; j < (i + 1) * kSegmentSize; ++j) {
            const double p = std::clamp(r[j], ops::kBceEps, 1.0 - ops::kBceEps);
            s -= t[j] * std::log(p) + (1.0 - t[j]) * std::log(1.0 - p);
        }
        out[i] = s;
    }
    return out;
}

}  // namespace

Generator generator_episode(const Generator* prev, const SampleSet& current, int task_index,
                            GeneratorKind kind, const GeneratorConfig& cfg, Rng& rng,
                            const EpisodeSink& sink) {
    if (task_index < 1) throw std::invalid_argument("generator_episode: task index must be >= 1");
    if (task_index == 1 && prev) throw std::invalid_argument("generator_episode: first task has no G_prev");
    if (task_index > 1 && !prev) throw std::invalid_argument("generator_episode: G_prev required after task 1");
    if (prev && prev->kind() != kind) throw std::invalid_argument("generator_episode: generator kind changed");
    if (current.empty()) throw DataError("generator_episode: no training data for the current task");

    Generator g = prev ? prev->clone() : Generator::make(kind, rng);
    g.set_task_index(task_index);
    const std::size_t n_replay = replay_count(current.size(), task_index, cfg.replay_ratio);
    Adam opt(g.parameters(), {.lr = cfg.lr});

    SampleSet train;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const Stopwatch watch;
        train = current;
        std::size_t excluded = 0;
        if (prev && n_replay > 0) excluded = append_generated(train, prev->sample(n_replay, rng));

        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span(order));
        double cur_sum = 0.0, rep_sum = 0.0, kl_sum = 0.0;
        std::size_t cur_n = 0, rep_n = 0;
        for (std::size_t s = 0; s < order.size(); s += cfg.batch) {
            std::span<const std::size_t> rows(order.data() + s, std::min(cfg.batch, order.size() - s));
            auto x = train.batch(rows);
            opt.zero_grad();
            Tensor recon, loss;
            if (kind == GeneratorKind::ae_gmm) {
                recon = g.ae().forward(x);
                loss = ops::bce(recon, x);
            } else {
                auto out = g.vae().forward(x, rng);
                recon = out.recon;
                auto kl = ops::kl_to_unit_gaussian(out.mu, out.logvar);
                kl_sum += kl.item() * static_cast<double>(rows.size());
                loss = ops::add(ops::bce(recon, x), kl);
            }
            loss.backward();
            opt.step();
            auto per_row = row_bce(recon, x);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (train.y[rows[i]] >= 0) {
                    cur_sum += per_row[i];
                    ++cur_n;
                } else {
                    rep_sum += per_row[i];
                    ++rep_n;
                }
            }
        }
        if (sink) {
            nlohmann::json rec{{"model", "generator"},
                               {"task", task_index},
                               {"epoch", epoch},
                               {"loss_current", cur_n ? cur_sum / cur_n : 0.0},
                               {"loss_replay", rep_n ? rep_sum / rep_n : 0.0},
                               {"n_current", cur_n},
                               {"n_replay", rep_n},
                               {"excluded_degenerate", excluded},
                               {"wall_time", watch.seconds()}};
            if (kind == GeneratorKind::vae) rec["loss_kl"] = kl_sum / static_cast<double>(order.size());
            sink(rec);
        }
    }

    if (kind == GeneratorKind::ae_gmm) {
        // Second step: mixture on the latents of the data the AE was trained on.
        const std::size_t n = train.size();
        std::vector<double> lat;
        lat.reserve(n * models::kLatentDim);
        for (std::size_t s = 0; s < n; s += 256) {
            std::vector<std::size_t> rows(std::min<std::size_t>(256, n - s));
            std::iota(rows.begin(), rows.end(), s);
            auto z = g.encode(train.batch(rows));
            lat.insert(lat.end(), z.data().begin(), z.data().end());
        }
        const std::size_t k = std::min(cfg.components_per_class * 2 * static_cast<std::size_t>(task_index), n);
        auto m = gmm::fit_em(Tensor::from({n, models::kLatentDim}, std::move(lat)),
                             {.components = k, .max_iter = cfg.gmm_max_iter, .tol = cfg.gmm_tol}, rng);
        if (sink) {
            sink({{"model", "gmm"},
                  {"task", task_index},
                  {"components", k},
                  {"iterations", m.stats.iterations},
                  {"log_likelihood", m.stats.log_likelihood},
                  {"reseeds", m.stats.reseeds.size()}});
        }
        g.set_mixture(std::move(m));
    }
    return g;
}

}  // namespace scl::continual
