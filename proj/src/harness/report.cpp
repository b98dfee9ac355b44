#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "scl/errors.hpp"
#include "scl/harness.hpp"

namespace scl::harness {

using nlohmann::json;

json to_json(const MetricsRecord& r) {
    return {{"strategy", r.strategy},
            {"seed", r.seed},
            {"permutation", r.permutation},
            {"task", r.task},
            {"accuracy", r.accuracy},
            {"task_accuracies", r.task_accuracies},
            {"buffer_bytes", r.buffer_bytes},
            {"generator_param_bytes", r.generator_param_bytes},
            {"generator_params", r.generator_params},
            {"train_samples", r.train_samples}};
}

MetricsRecord metrics_from_json(const json& j) {
    MetricsRecord r;
    r.strategy = j.at("strategy").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.permutation = j.value("permutation", std::vector<int>{});
    r.task = j.at("task").get<int>();
    r.accuracy = j.at("accuracy").get<double>();
    r.task_accuracies = j.value("task_accuracies", std::vector<double>{});
    r.buffer_bytes = j.value("buffer_bytes", std::size_t{0});
    r.generator_param_bytes = j.value("generator_param_bytes", std::size_t{0});
    r.generator_params = j.value("generator_params", std::size_t{0});
    r.train_samples = j.value("train_samples", std::size_t{0});
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw DataError("metrics: accuracy outside [0, 1]");
    if (r.task < 1) throw DataError("metrics: task index must be >= 1");
    return r;
}

std::string metrics_line(const MetricsRecord& r) { return to_json(r).dump() + "\n"; }

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open metrics file " + path.string());
    std::vector<MetricsRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(metrics_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

namespace {

double slope(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) mx += x, my += y;
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (auto [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
}

}  // namespace

Summary summarize(const std::vector<MetricsRecord>& records) {
    Summary s;
    std::vector<std::string> order;
    std::map<std::string, std::map<int, std::vector<double>>> acc;
    std::map<std::string, std::set<std::uint64_t>> seeds;
    std::map<std::string, std::map<std::uint64_t, std::set<int>>> have;
    std::map<std::string, std::map<std::uint64_t, const MetricsRecord*>> last;
    int max_task = continual::kTasks;
    for (const auto& r : records) {
        if (!acc.contains(r.strategy)) order.push_back(r.strategy);
        acc[r.strategy][r.task].push_back(r.accuracy);
        seeds[r.strategy].insert(r.seed);
        have[r.strategy][r.seed].insert(r.task);
        auto& l = last[r.strategy][r.seed];
        if (!l || l->task < r.task) l = &r;
        max_task = std::max(max_task, r.task);
    }
    std::set<std::uint64_t> all_seeds;
    for (const auto& [_, ss] : seeds) all_seeds.insert(ss.begin(), ss.end());

    for (const auto& name : order) {
        std::vector<std::pair<double, double>> sd_pts;
        for (int t = 1; t <= max_task; ++t) {
            auto it = acc[name].find(t);
            if (it == acc[name].end()) continue;
            const auto& v = it->second;
            CurvePoint p{name, t, v.size(), 0.0, 0.0};
            for (double a : v) p.mean += a;
            p.mean /= static_cast<double>(v.size());
            if (v.size() > 1) {
                double ss = 0.0;
                for (double a : v) ss += (a - p.mean) * (a - p.mean);
                p.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
                sd_pts.emplace_back(t, p.sd);
            }
            s.curve.push_back(p);
        }
        s.sd_slope[name] = slope(sd_pts);

        for (auto seed : all_seeds) {
            for (int t = 1; t <= max_task; ++t) {
                if (!have[name][seed].contains(t)) {
                    s.missing.push_back(name + " seed " + std::to_string(seed) + " task " + std::to_string(t));
                }
            }
        }

        StorageRow row{name};
        std::size_t n = 0;
        for (const auto& [seed, r] : last[name]) {
            const double scalars = static_cast<double>(r->buffer_bytes) / sizeof(float) +
                                   static_cast<double>(r->generator_params);
            row.stored_scalars += scalars;
            row.ratio_run += r->train_samples ? scalars / static_cast<double>(continual::kSegmentSize) /
                                                    static_cast<double>(r->train_samples)
                                              : 0.0;
            ++n;
        }
        if (n) {
            row.stored_scalars /= static_cast<double>(n);
            row.ratio_run /= static_cast<double>(n);
        }
        row.segment_equivalents = row.stored_scalars / static_cast<double>(continual::kSegmentSize);
        row.ratio_reference = row.segment_equivalents / kReferenceTrainSegments;
        s.storage.push_back(row);
    }
    return s;
}

std::string curve_csv(const Summary& s) {
    std::ostringstream o;
    o << "strategy,task,n,mean,sd\n";
    o << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : s.curve) o << p.strategy << ',' << p.task << ',' << p.n << ',' << p.mean << ',' << p.sd << '\n';
    return o.str();
}

std::string storage_csv(const Summary& s) {
    std::ostringstream o;
    o << "strategy,stored_scalars,segment_equivalents,ratio_run,ratio_reference\n";
    o << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : s.storage) {
        o << r.strategy << ',' << r.stored_scalars << ',' << r.segment_equivalents << ',' << r.ratio_run << ','
          << r.ratio_reference << '\n';
    }
    return o.str();
}

std::string summary_markdown(const Summary& s) {
    std::ostringstream o;
    int max_task = 0;
    std::vector<std::string> names;
    for (const auto& p : s.curve) {
        max_task = std::max(max_task, p.task);
        if (std::find(names.begin(), names.end(), p.strategy) == names.end()) names.push_back(p.strategy);
    }
    o << "# Accuracy after each task\n\nMean ± sd over seeds, test sets of all tasks seen so far.\n\n";
    o << "| strategy |";
    for (int t = 1; t <= max_task; ++t) o << " task " << t << " |";
    o << " sd slope |\n|---|";
    for (int t = 1; t <= max_task; ++t) o << "---|";
    o << "---|\n";
    for (const auto& name : names) {
        o << "| " << name << " |";
        for (int t = 1; t <= max_task; ++t) {
            auto it = std::find_if(s.curve.begin(), s.curve.end(),
                                   [&](const CurvePoint& p) { return p.strategy == name && p.task == t; });
            if (it == s.curve.end()) o << " missing |";
            else o << ' ' << fmt(it->mean, 3) << " ± " << fmt(it->sd, 3) << " (n=" << it->n << ") |";
        }
        const double sl = s.sd_slope.at(name);
        o << ' ' << fmt(sl, 4) << (sl < 0 ? " (decreasing)" : sl > 0 ? " (increasing)" : "") << " |\n";
    }

    o << "\n# Storage after the last task\n\n";
    o << "| strategy | stored scalars | segment equivalents | share of this run's training data | share of 9500 × 0.7 segments |\n";
    o << "|---|---|---|---|---|\n";
    for (const auto& r : s.storage) {
        o << "| " << r.strategy << " | " << fmt(r.stored_scalars, 0) << " | " << fmt(r.segment_equivalents, 1)
          << " | " << fmt(100.0 * r.ratio_run, 2) << "% | " << fmt(100.0 * r.ratio_reference, 2) << "% |\n";
    }

    o << "\n# Missing cells\n\n";
    if (s.missing.empty()) o << "None.\n";
    for (const auto& m : s.missing) o << "- " << m << "\n";
    return o.str();
}

audio::SegmentArchive generate_samples(const Checkpoint& generator, std::size_t n, std::uint64_t seed) {
    auto g = continual::Generator::from_checkpoint(generator);
    Rng rng(seed);
    audio::SegmentArchive a;
    a.seed = seed;
    if (n == 0) return a;
    auto x = g.sample(n, rng);
    auto v = x.data();
    // Keep values strictly inside (0, 1) after rounding to 32 bits.
    const float lo = std::numeric_limits<float>::min();
    const float hi = std::nextafter(1.0f, 0.0f);
    for (std::size_t i = 0; i < n; ++i) {
        audio::MelSegment m;
        m.label = -1;
        m.recording_id = "generated_" + generator.meta.model_kind + "_task" + std::to_string(generator.meta.task_index);
        m.segment_index = static_cast<int>(i);
        m.values.resize(continual::kSegmentSize);
        for (std::size_t j = 0; j < continual::kSegmentSize; ++j) {
            m.values[j] = std::clamp(static_cast<float>(v[i * continual::kSegmentSize + j]), lo, hi);
        }
        a.segments.push_back(std::move(m));
    }
    return a;
}

}  // namespace scl::harness
