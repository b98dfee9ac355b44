#include <fstream>
#include <set>

#include "scl/errors.hpp"
#include "scl/harness.hpp"

namespace scl::harness {

using nlohmann::json;

namespace {

const std::vector<std::string> kAllStrategies{"none", "rhs5", "rhs10", "rhs20", "joint", "ae_gmm", "vae"};

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) throw ConfigError("unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
    }
}

void read_classifier(const json& j, continual::ClassifierConfig& c) {
    reject_unknown(j, {"epochs", "batch", "lr", "replay_ratio"}, "classifier");
    take(j, "epochs", c.epochs);
    take(j, "batch", c.batch);
    take(j, "lr", c.lr);
    take(j, "replay_ratio", c.replay_ratio);
}

void read_generator(const json& j, continual::GeneratorConfig& g) {
    reject_unknown(j, {"epochs", "batch", "lr", "replay_ratio", "components_per_class", "gmm_max_iter", "gmm_tol"},
                   "generator");
    take(j, "epochs", g.epochs);
    take(j, "batch", g.batch);
    take(j, "lr", g.lr);
    take(j, "replay_ratio", g.replay_ratio);
    take(j, "components_per_class", g.components_per_class);
    take(j, "gmm_max_iter", g.gmm_max_iter);
    take(j, "gmm_tol", g.gmm_tol);
}

void read_data(const json& j, DataSource& d) {
    reject_unknown(j, {"archive", "synthetic"}, "data");
    if (j.contains("archive") && j.contains("synthetic")) {
        throw ConfigError("data: give either 'archive' or 'synthetic', not both");
    }
    if (j.contains("archive")) d.archive = j.at("archive").get<std::string>();
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        reject_unknown(s, {"recordings_per_class", "segments_per_recording", "variants", "noise", "seed"},
                       "data.synthetic");
        take(s, "recordings_per_class", d.synthetic.recordings_per_class);
        take(s, "segments_per_recording", d.synthetic.segments_per_recording);
        take(s, "variants", d.synthetic.variants);
        take(s, "noise", d.synthetic.noise);
        take(s, "seed", d.synthetic.seed);
        d.archive.clear();
    }
}

}  // namespace

ExperimentConfig profile_defaults(const std::string& profile) {
    ExperimentConfig c;
    c.profile = profile;
    c.strategies = kAllStrategies;
    c.seeds = {1, 2, 3, 4, 5};
    if (profile == "quick") {
        c.classifier = {.epochs = 30, .batch = 100, .lr = 5e-4, .replay_ratio = 1.0};
        c.generator = {.epochs = 40, .batch = 25, .lr = 1e-3};
        c.output_dir = "runs/quick";
    } else if (profile == "full") {
        c.classifier = {.epochs = 300, .batch = 100, .lr = 5e-4, .replay_ratio = 1.0};
        c.generator = {.epochs = 1700, .batch = 100, .lr = 1e-3};
        c.output_dir = "runs/full";
    } else {
        throw ConfigError("unknown profile '" + profile + "' (expected quick or full)");
    }
    return c;
}

ExperimentConfig config_from_json(const json& j) {
    try {
        reject_unknown(j, {"profile", "data", "strategies", "seeds", "classifier", "generator", "output_dir", "model"},
                       "");
        ExperimentConfig c = profile_defaults(j.value("profile", std::string("quick")));
        if (j.contains("data")) read_data(j.at("data"), c.data);
        take(j, "strategies", c.strategies);
        take(j, "seeds", c.seeds);
        if (j.contains("classifier")) read_classifier(j.at("classifier"), c.classifier);
        if (j.contains("generator")) read_generator(j.at("generator"), c.generator);
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("model")) {
            const auto& m = j.at("model");
            reject_unknown(m, {"init"}, "model");
            if (m.value("init", std::string("he_uniform")) != "he_uniform") {
                throw ConfigError("model.init: only 'he_uniform' is implemented");
            }
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

json to_json(const ExperimentConfig& c) {
    json data;
    if (!c.data.archive.empty()) {
        data["archive"] = c.data.archive.string();
    } else {
        const auto& s = c.data.synthetic;
        data["synthetic"] = {{"recordings_per_class", s.recordings_per_class},
                             {"segments_per_recording", s.segments_per_recording},
                             {"variants", s.variants},
                             {"noise", s.noise},
                             {"seed", s.seed}};
    }
    const auto& g = c.generator;
    return {{"profile", c.profile},
            {"data", data},
            {"strategies", c.strategies},
            {"seeds", c.seeds},
            {"classifier",
             {{"epochs", c.classifier.epochs},
              {"batch", c.classifier.batch},
              {"lr", c.classifier.lr},
              {"replay_ratio", c.classifier.replay_ratio}}},
            {"generator",
             {{"epochs", g.epochs},
              {"batch", g.batch},
              {"lr", g.lr},
              {"replay_ratio", g.replay_ratio},
              {"components_per_class", g.components_per_class},
              {"gmm_max_iter", g.gmm_max_iter},
              {"gmm_tol", g.gmm_tol}}},
            {"model", {{"init", "he_uniform"}}},
            {"output_dir", c.output_dir.string()}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) *node = json::object();
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

void validate(const ExperimentConfig& c) {
    if (c.strategies.empty()) throw ConfigError("no strategies configured");
    std::set<std::string> names;
    for (const auto& s : c.strategies) {
        const auto parsed = continual::Strategy::parse(s);
        if (!names.insert(parsed.name()).second) throw ConfigError("strategy '" + s + "' listed twice");
    }
    if (c.seeds.empty()) throw ConfigError("no seeds configured");
    if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
        throw ConfigError("seeds must be distinct");
    }
    if (c.classifier.epochs < 1 || c.generator.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (c.classifier.batch < 1 || c.generator.batch < 1) throw ConfigError("batch sizes must be >= 1");
    if (!(c.classifier.lr > 0.0) || !(c.generator.lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (c.classifier.replay_ratio < 0.0 || c.generator.replay_ratio < 0.0) {
        throw ConfigError("replay ratios must be >= 0");
    }
    if (c.generator.components_per_class < 1) throw ConfigError("generator.components_per_class must be >= 1");
    if (c.generator.gmm_max_iter < 1) throw ConfigError("generator.gmm_max_iter must be >= 1");
    if (c.output_dir.empty()) throw ConfigError("output_dir is empty");
    if (!c.data.archive.empty()) {
        if (!std::filesystem::is_regular_file(c.data.archive)) {
            throw ConfigError("data.archive: no such file " + c.data.archive.string());
        }
        if (!std::filesystem::is_regular_file(audio::sidecar_path(c.data.archive))) {
            throw ConfigError("data.archive: missing split sidecar " + audio::sidecar_path(c.data.archive).string());
        }
    } else {
        const auto& s = c.data.synthetic;
        if (s.recordings_per_class < 3) throw ConfigError("data.synthetic.recordings_per_class must be >= 3");
        if (s.segments_per_recording < 1) throw ConfigError("data.synthetic.segments_per_recording must be >= 1");
        if (s.noise < 0.0) throw ConfigError("data.synthetic.noise must be >= 0");
    }
}

continual::Corpus load_corpus(const DataSource& d) {
    if (d.archive.empty()) return synthetic::make_corpus(d.synthetic);
    auto a = audio::load_archive(d.archive);
    continual::Corpus c;
    c.splits = audio::load_splits(d.archive, a.segments.size());
    c.segments = std::move(a.segments);
    return c;
}

}  // namespace scl::harness
