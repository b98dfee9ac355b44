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

Strategy Strategy::parse(const std::string& name) {
    if (name == "none") return {StrategyKind::none, 0.0};
    if (name == "joint") return {StrategyKind::rehearsal, 100.0};
    if (name == "ae_gmm" || name == "ae+gmm") return {StrategyKind::ae_gmm, 0.0};
    if (name == "vae") return {StrategyKind::vae, 0.0};
    std::string digits;
    if (name.rfind("rhs", 0) == 0) digits = name.substr(3);
    else if (name.rfind("rehearsal:", 0) == 0) digits = name.substr(10);
    if (!digits.empty()) {
        std::size_t used = 0;
        double p = -1.0;
        try {
            p = std::stod(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == digits.size() && p > 0.0 && p <= 100.0) return {StrategyKind::rehearsal, p};
    }
    throw ConfigError("unknown strategy '" + name +
                      "' (expected none, rhs<p>, joint, ae_gmm or vae)");
}

std::string Strategy::name() const {
    switch (kind) {
        case StrategyKind::none: return "none";
        case StrategyKind::ae_gmm: return "ae_gmm";
        case StrategyKind::vae: return "vae";
        case StrategyKind::rehearsal: {
            if (percent == 100.0) return "joint";
            std::string s = std::to_string(percent);
            s.erase(s.find_last_not_of('0') + 1);
            if (s.back() == '.') s.pop_back();
            return "rhs" + s;
        }
    }
    return "?";
}

Tensor frozen_forward(const models::Classifier& f, const Tensor& x) {
    auto frozen = f.clone();
    frozen.set_trainable(false);
    const std::size_t n = x.dim(0);
    if (n <= 256) return frozen.forward(x.detach());
    std::vector<double> out;
    out.reserve(n * kClasses);
    auto xs = x.data();
    for (std::size_t s = 0; s < n; s += 256) {
        const std::size_t m = std::min<std::size_t>(256, n - s);
        std::vector<double> chunk(xs.begin() + s * kSegmentSize, xs.begin() + (s + m) * kSegmentSize);
        auto logits = frozen.forward(Tensor::from({m, models::kMelBins, models::kFrames}, std::move(chunk)));
        out.insert(out.end(), logits.data().begin(), logits.data().end());
    }
    return Tensor::from({n, kClasses}, std::move(out));
}

std::vector<int> predict(const models::Classifier& f, const SampleSet& s) {
    if (s.empty()) return {};
    auto logits = frozen_forward(f, s.all());
    std::vector<int> out(s.size());
    auto l = logits.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto row = l.subspan(i * kClasses, kClasses);
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double accuracy(const models::Classifier& f, const SampleSet& s) {
    if (s.empty()) return 0.0;
    auto p = predict(f, s);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == s.y[i];
    return static_cast<double>(ok) / static_cast<double>(p.size());
}

double evaluate(const models::Classifier& f, const TaskSequence& seq, int t) {
    if (t < 1 || t > seq.num_tasks()) throw std::out_of_range("evaluate: task index out of range");
    std::size_t ok = 0, total = 0;
    for (int k = 1; k <= t; ++k) {
        const auto& test = seq.test(k);
        auto p = predict(f, test);
        for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == test.y[i];
        total += p.size();
    }
    return total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0;
}

models::Classifier classifier_episode(const models::Classifier& f_prev, const ReplayBuffer* buffer,
                                      const Generator* generator, const SampleSet& current,
                                      const SampleSet* val, int task_index, const Strategy& strategy,
                                      const ClassifierConfig& cfg, Rng& rng,
                                      const EpisodeSink& sink) {
    if (task_index < 1) throw std::invalid_argument("classifier_episode: task index must be >= 1");
    if (current.empty()) throw DataError("classifier_episode: no training data for the current task");
    if (strategy.kind == StrategyKind::rehearsal && !buffer) {
        throw std::invalid_argument("classifier_episode: rehearsal needs a buffer");
    }
    if (strategy.generative()) {
        if (task_index == 1 && generator) {
            throw std::invalid_argument("classifier_episode: no replay exists at the first task");
        }
        if (task_index > 1 && !generator) {
            throw std::invalid_argument("classifier_episode: generative replay needs G_{t-1}");
        }
    }

    models::Classifier f = f_prev.clone();
    f.set_trainable(true);
    Adam opt(f.parameters(), {.lr = cfg.lr});

    const std::size_t n = current.size();
    const std::size_t steps = (n + cfg.batch - 1) / cfg.batch;
    const bool replaying = strategy.generative() && task_index > 1;
    const std::size_t n_replay = replaying ? replay_count(n, task_index, cfg.replay_ratio) : 0;
    const std::size_t past_tasks = buffer ? buffer->num_tasks() : 0;
    const std::size_t per_task = past_tasks ? std::max<std::size_t>(1, cfg.batch / past_tasks) : 0;

    std::vector<std::size_t> order(n);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const Stopwatch watch;
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span(order));

        ReplaySet replay;
        std::vector<std::size_t> replay_order;
        std::size_t excluded = 0;
        if (replaying && n_replay > 0) {
            SampleSet gen;
            excluded = append_generated(gen, generator->sample(n_replay, rng));
            replay = distillation_targets(&f_prev, gen.all());
            replay_order.resize(replay.size());
            std::iota(replay_order.begin(), replay_order.end(), std::size_t{0});
            rng.shuffle(std::span(replay_order));
        }

        double cur_sum = 0.0, rep_sum = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const std::size_t lo = s * cfg.batch, hi = std::min(n, lo + cfg.batch);
            auto cur = make_batch(current, std::span<const std::size_t>(order.data() + lo, hi - lo));
            opt.zero_grad();
            LossTerms terms;
            if (strategy.kind == StrategyKind::rehearsal) {
                terms = rehearsal_loss_terms(f, cur, buffer->sample(per_task, rng));
            } else if (replaying && replay.size() > 0) {
                const std::size_t rlo = replay.size() * s / steps;
                const std::size_t rhi = replay.size() * (s + 1) / steps;
                auto chunk = subset(replay, std::span<const std::size_t>(replay_order.data() + rlo, rhi - rlo));
                // Weighting the replay mean by |chunk| / |batch| gives every
                // sample the same share, as in the summed loss.
                const double w = static_cast<double>(chunk.size()) / static_cast<double>(hi - lo);
                terms = generative_replay_terms(f, cur, &chunk, w);
            } else {
                terms = generative_replay_terms(f, cur, nullptr, 0.0);
            }
            terms.total.backward();
            opt.step();
            cur_sum += terms.current;
            rep_sum += terms.replay;
        }
        if (sink) {
            nlohmann::json rec{{"model", "classifier"},
                               {"strategy", strategy.name()},
                               {"task", task_index},
                               {"epoch", epoch},
                               {"loss_current", cur_sum / static_cast<double>(steps)},
                               {"loss_replay", rep_sum / static_cast<double>(steps)},
                               {"n_replay", replay.size()},
                               {"excluded_degenerate", excluded}};
            if (val && !val->empty()) rec["val_accuracy"] = accuracy(f, *val);
            rec["wall_time"] = watch.seconds();
            sink(rec);
        }
    }
    return f;
}

}  // namespace scl::continual
