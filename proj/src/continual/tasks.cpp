#include <algorithm>
#include <set>

#include "scl/continual.hpp"
#include "scl/errors.hpp"

namespace scl::continual {

void SampleSet::append(const SampleSet& other) {
    x.insert(x.end(), other.x.begin(), other.x.end());
    y.insert(y.end(), other.y.begin(), other.y.end());
}

void SampleSet::append_row(std::span<const double> row, int label) {
    if (row.size() != kSegmentSize) throw ShapeError("SampleSet: row is not 128x16");
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(label);
}

SampleSet SampleSet::subset(std::span<const std::size_t> rows) const {
    SampleSet s;
    s.x.reserve(rows.size() * kSegmentSize);
    s.y.reserve(rows.size());
    for (auto r : rows) {
        s.x.insert(s.x.end(), x.begin() + r * kSegmentSize, x.begin() + (r + 1) * kSegmentSize);
        s.y.push_back(y.at(r));
    }
    return s;
}

Tensor SampleSet::batch(std::span<const std::size_t> rows) const {
    std::vector<double> v(rows.size() * kSegmentSize);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= size()) throw std::out_of_range("SampleSet::batch: row out of range");
        std::copy_n(x.begin() + rows[i] * kSegmentSize, kSegmentSize, v.begin() + i * kSegmentSize);
    }
    return Tensor::from({rows.size(), models::kMelBins, models::kFrames}, std::move(v));
}

Tensor SampleSet::all() const {
    return Tensor::from({size(), models::kMelBins, models::kFrames}, x);
}

SampleSet to_samples(const std::vector<audio::MelSegment>& segments,
                     std::span<const std::size_t> rows) {
    SampleSet s;
    s.x.reserve(rows.size() * kSegmentSize);
    for (auto r : rows) {
        const auto& seg = segments.at(r);
        if (seg.values.size() != kSegmentSize) throw DataError("segment is not 128x16");
        s.x.insert(s.x.end(), seg.values.begin(), seg.values.end());
        s.y.push_back(seg.label);
    }
    return s;
}

std::array<int, 2> TaskSequence::classes(int task) const { return at(task).classes; }

const TaskDataset& TaskSequence::at(int task) const {
    if (task < 1 || task > num_tasks()) {
        throw std::out_of_range("task index " + std::to_string(task) + " outside 1.." +
                                std::to_string(num_tasks()));
    }
    return tasks_[static_cast<std::size_t>(task - 1)];
}

void TaskSequence::begin_task(int task) {
    at(task);
    current_ = task;
}

const SampleSet& TaskSequence::gated(int task, const char* split) const {
    const auto& d = at(task);
    if (task != current_) {
        throw DataIsolationError(std::string("read of ") + split + " data of task " +
                                 std::to_string(task) + " while task " + std::to_string(current_) +
                                 " is open");
    }
    log_.emplace_back(task, split);
    return std::string_view(split) == "train" ? d.train : d.val;
}

const SampleSet& TaskSequence::train(int task) const { return gated(task, "train"); }
const SampleSet& TaskSequence::val(int task) const { return gated(task, "val"); }
const SampleSet& TaskSequence::test(int task) const { return at(task).test; }

TaskSequence make_task_sequence(const Corpus& corpus, std::uint64_t permutation_seed) {
    TaskSequence seq;
    seq.permutation_ = {0, 1, 2, 3, 4};
    Rng rng(derive_seed(permutation_seed, 0x7065726dULL));
    rng.shuffle(std::span(seq.permutation_));

    auto by_class = [&](const std::vector<std::size_t>& rows, const char* split) {
        std::array<std::vector<std::size_t>, 10> out;
        for (auto r : rows) {
            const int label = corpus.segments.at(r).label;
            if (label < 0 || label > 9) throw DataError("segment label outside 0..9");
            out[static_cast<std::size_t>(label)].push_back(r);
        }
        for (int c = 0; c < 10; ++c)
            if (out[static_cast<std::size_t>(c)].empty())
                throw DataError("class " + std::to_string(c) + " has no " + split + " segments");
        return out;
    };
    const auto tr = by_class(corpus.splits.train, "train");
    const auto va = by_class(corpus.splits.val, "validation");
    const auto te = by_class(corpus.splits.test, "test");

    for (int pair : seq.permutation_) {
        TaskDataset d;
        d.classes = {2 * pair, 2 * pair + 1};
        for (const auto* src : {&tr, &va, &te}) {
            std::vector<std::size_t> rows;
            for (int c : d.classes) {
                const auto& part = (*src)[static_cast<std::size_t>(c)];
                rows.insert(rows.end(), part.begin(), part.end());
            }
            std::sort(rows.begin(), rows.end());
            auto s = to_samples(corpus.segments, rows);
            (src == &tr ? d.train : src == &va ? d.val : d.test) = std::move(s);
        }
        seq.tasks_.push_back(std::move(d));
    }
    return seq;
}

}  // namespace scl::continual
