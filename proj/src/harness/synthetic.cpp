#include "scl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scl::synthetic {

namespace {

constexpr std::size_t kM = audio::kMels;
constexpr std::size_t kT = audio::kSegmentFrames;

double bump(double m, double centre, double width) {
    const double d = (m - centre) / width;
    return std::exp(-0.5 * d * d);
}

// Spectral envelope of class c, variant v, evaluated at (shifted) bin m.
double envelope(int c, std::size_t v, double m) {
    const int pair = c / 2, member = c % 2;
    const double base = 14.0 + 22.0 * pair;
    const double vs = (static_cast<double>(v) - 1.0) * 4.0;
    double e = bump(m, base + vs, 5.0 + v);
    // Secondary band: above the main one for even members, below for odd.
    const double off = member == 0 ? 11.0 + 2.0 * v : -(9.0 + 2.0 * v);
    e += (0.55 + 0.15 * v) * bump(m, base + off - vs, 3.0);
    // A faint wide tail shared by the pair.
    e += 0.15 * bump(m, base + 40.0, 14.0);
    return e;
}

// Temporal envelope: even members steady with slow drift, odd members
// pulsed; variants change the rate.
double temporal(int c, std::size_t v, double t, double phase) {
    const double rate = 0.35 + 0.2 * static_cast<double>(v);
    if (c % 2 == 0) return 0.8 + 0.2 * std::sin(0.15 * t + phase);
    const double s = 0.5 + 0.5 * std::sin(rate * 2.0 * t + phase);
    return 0.25 + 0.75 * s * s;
}

}  // namespace

std::vector<audio::MelSegment> generate_segments(const CorpusSpec& spec) {
    std::vector<audio::MelSegment> out;
    for (int c = 0; c < 10; ++c) {
        for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
            Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(c) * 100003u + r));
            const std::size_t v = spec.variants ? (r % spec.variants) : 0;
            const double gain = rng.uniform(0.5, 1.0);
            const double shift = rng.uniform(-2.0, 2.0);
            const std::string id = "syn_c" + std::to_string(c) + "_r" + std::to_string(r);

            std::vector<std::vector<double>> segs;
            double peak = 0.0;
            for (std::size_t s = 0; s < spec.segments_per_recording; ++s) {
                const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                const double seg_gain = gain * rng.uniform(0.7, 1.0);
                std::vector<double> vals(kM * kT);
                for (std::size_t m = 0; m < kM; ++m) {
                    const double e = envelope(c, v, static_cast<double>(m) - shift);
                    for (std::size_t t = 0; t < kT; ++t) {
                        double x = seg_gain * e * temporal(c, v, static_cast<double>(t), phase);
                        x += spec.noise * std::abs(rng.normal());
                        vals[m * kT + t] = x;
                        peak = std::max(peak, x);
                    }
                }
                segs.push_back(std::move(vals));
            }
            for (std::size_t s = 0; s < segs.size(); ++s) {
                audio::MelSegment seg;
                seg.label = c;
                seg.recording_id = id;
                seg.segment_index = static_cast<int>(s);
                seg.values.resize(kM * kT);
                for (std::size_t i = 0; i < kM * kT; ++i)
                    seg.values[i] = static_cast<float>(std::clamp(segs[s][i] / peak, 0.0, 1.0));
                out.push_back(std::move(seg));
            }
        }
    }
    return out;
}

continual::Corpus make_corpus(const CorpusSpec& spec) {
    continual::Corpus c;
    c.segments = generate_segments(spec);
    c.splits = audio::split_segments(c.segments, spec.seed);
    return c;
}

}  // namespace scl::synthetic
