#include "scl/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "scl/binio.hpp"
#include "scl/errors.hpp"
#include "scl/rng.hpp"

namespace scl::audio {

void validate_segment(const MelSegment& s) {
    if (s.values.size() != kMels * kSegmentFrames) {
        throw DataError("segment " + s.recording_id + "#" + std::to_string(s.segment_index) +
                        ": expected " + std::to_string(kMels * kSegmentFrames) + " values, got " +
                        std::to_string(s.values.size()));
    }
    double sq = 0.0;
    for (float v : s.values) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DataError("segment " + s.recording_id + "#" + std::to_string(s.segment_index) +
                            ": value outside [0,1]");
        }
        sq += static_cast<double>(v) * v;
    }
    if (std::sqrt(sq) < kMinSegmentNorm) {
        throw DataError("segment " + s.recording_id + "#" + std::to_string(s.segment_index) +
                        ": Frobenius norm below energy floor");
    }
}

// ---- WAV -------------------------------------------------------------------

Recording read_wav(const std::filesystem::path& path) {
    auto bytes = binio::read_file(path);
    binio::Reader r(bytes, path.string());
    if (r.bytes(4) != "RIFF") throw DataError(path.string() + ": not a RIFF file");
    r.u32();
    if (r.bytes(4) != "WAVE") throw DataError(path.string() + ": not a WAVE file");

    int channels = 0, rate = 0, bits = 0;
    bool have_fmt = false;
    while (r.remaining() >= 8) {
        std::string id = r.bytes(4);
        std::uint32_t size = r.u32();
        if (id == "fmt ") {
            std::uint16_t format = r.u16();
            channels = r.u16();
            rate = static_cast<int>(r.u32());
            r.u32();  // byte rate
            r.u16();  // block align
            bits = r.u16();
            if (size > 16) r.bytes(size - 16);
            if (format != 1 && format != 0xFFFE) {
                throw DataError(path.string() + ": only PCM WAV is supported");
            }
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw DataError(path.string() + ": data chunk before fmt chunk");
            if (bits != 16) throw DataError(path.string() + ": only 16-bit PCM is supported");
            if (channels < 1) throw DataError(path.string() + ": bad channel count");
            std::size_t frames = size / (2u * static_cast<unsigned>(channels));
            Recording rec;
            rec.sample_rate = rate;
            rec.samples.resize(frames);
            for (std::size_t i = 0; i < frames; ++i) {
                double acc = 0.0;
                for (int c = 0; c < channels; ++c) {
                    acc += static_cast<std::int16_t>(r.u16()) / 32768.0;
                }
                rec.samples[i] = acc / channels;
            }
            if (rec.samples.empty()) throw DataError(path.string() + ": no samples");
            rec.id = path.stem().string();
            return rec;
        } else {
            r.bytes(size + (size & 1u));
        }
    }
    throw DataError(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const std::vector<double>& samples,
               int sample_rate) {
    binio::Writer w;
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    w.bytes("RIFF");
    w.u32(36 + data_bytes);
    w.bytes("WAVE");
    w.bytes("fmt ");
    w.u32(16);
    w.u16(1);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(sample_rate));
    w.u32(static_cast<std::uint32_t>(sample_rate) * 2);
    w.u16(2);
    w.u16(16);
    w.bytes("data");
    w.u32(data_bytes);
    for (double s : samples) {
        double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
        w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    }
    binio::write_file_atomic(path, w.buffer());
}

// ---- STFT / mel ------------------------------------------------------------

std::size_t stft_frame_count(std::size_t samples, std::size_t window, std::size_t hop) {
    if (samples < window) return 0;
    return (samples - window) / hop + 1;
}

namespace {
// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Tensor stft_magnitude(const Recording& rec, std::size_t window, std::size_t hop) {
    if (rec.sample_rate <= 0) throw DataError(rec.id + ": sample rate must be positive");
    if (rec.samples.size() < window) {
        throw DataError(rec.id + ": recording of " + std::to_string(rec.samples.size()) +
                        " samples is shorter than one " + std::to_string(window) +
                        "-sample window");
    }
    const std::size_t frames = stft_frame_count(rec.samples.size(), window, hop);
    const std::size_t bins = window / 2 + 1;

    std::vector<double> hann(window);
    for (std::size_t n = 0; n < window; ++n)
        hann[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                       static_cast<double>(window));

    double* in = fftw_alloc_real(window);
    fftw_complex* out = fftw_alloc_complex(bins);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(window), in, out, FFTW_ESTIMATE);
    }
    std::vector<double> mag(bins * frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* src = rec.samples.data() + f * hop;
        for (std::size_t n = 0; n < window; ++n) in[n] = src[n] * hann[n];
        fftw_execute(plan);
        for (std::size_t k = 0; k < bins; ++k) mag[k * frames + f] = std::hypot(out[k][0], out[k][1]);
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return Tensor::from({bins, frames}, std::move(mag));
}

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate) {
    const std::size_t bins = n_fft / 2 + 1;
    const double nyquist = sample_rate / 2.0;
    const double mel_max = hz_to_mel(nyquist);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    std::vector<double> fb(n_mels * bins, 0.0);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
            double w = 0.0;
            if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
            fb[m * bins + k] = w;
        }
    }
    return Tensor::from({n_mels, bins}, std::move(fb));
}

Tensor mel_project(const Tensor& mag, std::size_t n_mels, int sample_rate) {
    if (mag.ndim() != 2) throw ShapeError("mel_project: expected [bins x F], got " + shape_str(mag.shape()));
    const std::size_t bins = mag.dim(0), frames = mag.dim(1);
    const std::size_t n_fft = (bins - 1) * 2;
    auto fb = mel_filterbank(n_mels, n_fft, sample_rate);
    auto m = mag.data();
    auto w = fb.data();
    std::vector<double> out(n_mels * frames, 0.0);
    for (std::size_t b = 0; b < n_mels; ++b) {
        double* row = out.data() + b * frames;
        for (std::size_t k = 0; k < bins; ++k) {
            const double wk = w[b * bins + k];
            if (wk == 0.0) continue;
            const double* mrow = m.data() + k * frames;
            for (std::size_t f = 0; f < frames; ++f) row[f] += wk * mrow[f] * mrow[f];
        }
        for (std::size_t f = 0; f < frames; ++f) row[f] = std::sqrt(row[f]);
    }
    return Tensor::from({n_mels, frames}, std::move(out));
}

// ---- segmentation ------------------------------------------------------------

SegmentationResult segment_and_normalize(const Tensor& mel, int label,
                                         const std::string& recording_id) {
    if (mel.ndim() != 2 || mel.dim(0) != kMels) {
        throw ShapeError("segment_and_normalize: expected [128 x F], got " + shape_str(mel.shape()));
    }
    SegmentationResult res;
    const std::size_t frames = mel.dim(1);
    res.candidates = frames / kSegmentFrames;
    if (res.candidates == 0) {
        res.warnings.push_back(recording_id + ": " + std::to_string(frames) +
                               " frames is fewer than one 16-frame segment");
        return res;
    }
    auto m = mel.data();
    double peak = 0.0;
    for (std::size_t b = 0; b < kMels; ++b)
        for (std::size_t f = 0; f < res.candidates * kSegmentFrames; ++f)
            peak = std::max(peak, m[b * frames + f]);
    if (peak <= 0.0) {
        res.warnings.push_back(recording_id + ": silent recording, no segments kept");
        return res;
    }
    for (std::size_t s = 0; s < res.candidates; ++s) {
        MelSegment seg;
        seg.label = label;
        seg.recording_id = recording_id;
        seg.segment_index = static_cast<int>(s);
        seg.values.resize(kMels * kSegmentFrames);
        double sq = 0.0;
        for (std::size_t b = 0; b < kMels; ++b) {
            for (std::size_t t = 0; t < kSegmentFrames; ++t) {
                const double v = m[b * frames + s * kSegmentFrames + t] / peak;
                const float fv = static_cast<float>(v);
                seg.values[b * kSegmentFrames + t] = fv;
                sq += static_cast<double>(fv) * fv;
            }
        }
        if (std::sqrt(sq) < kMinSegmentNorm) continue;
        res.segments.push_back(std::move(seg));
    }
    if (res.segments.empty()) res.warnings.push_back(recording_id + ": all segments below energy floor");
    return res;
}

SegmentationResult extract_segments(const Recording& rec) {
    if (rec.sample_rate != kExpectedSampleRate) {
        throw DataError(rec.id + ": sample rate " + std::to_string(rec.sample_rate) +
                        " Hz, expected " + std::to_string(kExpectedSampleRate) +
                        " (resample before ingesting)");
    }
    auto mag = stft_magnitude(rec);
    auto mel = mel_project(mag, kMels, rec.sample_rate);
    return segment_and_normalize(mel, rec.label, rec.id);
}

// ---- split -----------------------------------------------------------------

Splits split_segments(const std::vector<MelSegment>& segments, std::uint64_t seed,
                      SplitRatio ratio) {
    // label -> recording id -> segment indices
    std::map<int, std::map<std::string, std::vector<std::size_t>>> by_class;
    for (std::size_t i = 0; i < segments.size(); ++i)
        by_class[segments[i].label][segments[i].recording_id].push_back(i);

    const double total = ratio.train + ratio.val + ratio.test;
    Splits out;
    for (auto& [label, recs] : by_class) {
        if (recs.size() < 3) {
            throw DataError("class " + std::to_string(label) + " has " +
                            std::to_string(recs.size()) +
                            " recordings; at least 3 are needed for a stratified split");
        }
        std::vector<const std::vector<std::size_t>*> order;
        for (auto& [id, idx] : recs) order.push_back(&idx);
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
        rng.shuffle(std::span(order));

        const auto n = static_cast<long>(order.size());
        long n_test = std::max(1L, std::lround(n * ratio.test / total));
        long n_val = std::max(1L, std::lround(n * ratio.val / total));
        long n_train = n - n_val - n_test;
        for (long r = 0; r < n; ++r) {
            auto& dst = r < n_train ? out.train : (r < n_train + n_val ? out.val : out.test);
            dst.insert(dst.end(), order[r]->begin(), order[r]->end());
        }
    }
    for (auto* v : {&out.train, &out.val, &out.test}) std::sort(v->begin(), v->end());
    return out;
}

// ---- manifest / ingest -----------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') quoted = !quoted;
        else if (ch == ',' && !quoted) {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') cur += ch;
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty manifest");
    auto header = split_csv_line(line);
    auto find_col = [&](std::initializer_list<const char*> names, int fallback) {
        for (std::size_t i = 0; i < header.size(); ++i)
            for (const char* n : names)
                if (header[i] == n) return static_cast<int>(i);
        return fallback;
    };
    const int c_file = find_col({"filename", "file"}, 0);
    const int c_idx = find_col({"class_index", "class-index", "label", "target"}, 1);
    const int c_name = find_col({"class_name", "class-name", "category"}, 2);

    std::vector<ManifestEntry> entries;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        const int need = std::max({c_file, c_idx, c_name});
        if (static_cast<int>(cells.size()) <= need) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": too few columns");
        }
        ManifestEntry e;
        e.filename = cells[c_file];
        try {
            e.class_index = std::stoi(cells[c_idx]);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad class index '" +
                            cells[c_idx] + "'");
        }
        if (e.class_index < 0 || e.class_index > 9) {
            throw DataError(path.string() + ":" + std::to_string(lineno) +
                            ": class index must be in 0..9");
        }
        e.class_name = cells[c_name];
        entries.push_back(std::move(e));
    }
    return entries;
}

IngestResult ingest(const std::filesystem::path& wav_dir, const std::filesystem::path& manifest,
                    std::uint64_t seed) {
    auto entries = read_manifest(manifest);
    std::vector<SegmentationResult> per(entries.size());
    std::vector<std::string> errors(entries.size());
    const auto n = static_cast<std::ptrdiff_t>(entries.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            auto rec = read_wav(wav_dir / entries[i].filename);
            rec.label = entries[i].class_index;
            rec.id = entries[i].filename;
            per[i] = extract_segments(rec);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    IngestResult out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!errors[i].empty()) throw DataError(errors[i]);
        for (auto& w : per[i].warnings) out.warnings.push_back(std::move(w));
        for (auto& s : per[i].segments) out.segments.push_back(std::move(s));
    }
    for (const auto& s : out.segments) validate_segment(s);
    out.splits = split_segments(out.segments, seed);
    return out;
}

}  // namespace scl::audio
