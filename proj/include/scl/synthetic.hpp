#pragma once

// Synthetic 10-class mel-segment corpus with the real pipeline's geometry.
//
// Classes come in pairs (0,1), (2,3), ...; a pair shares a coarse spectral
// region and its two members differ in a secondary band and in temporal
// texture. Each class has a few sub-variants (shifted / reshaped bands) so a
// small random subset does not cover the class. Recordings add gain, a small
// spectral shift and noise, and are max-normalized like real recordings.

#include <cstdint>

#include "scl/continual.hpp"

namespace scl::synthetic {

struct CorpusSpec {
    std::size_t recordings_per_class = 30;
    std::size_t segments_per_recording = 5;
    std::size_t variants = 3;
    double noise = 0.08;
    std::uint64_t seed = 1;
};

std::vector<audio::MelSegment> generate_segments(const CorpusSpec& spec);
// Segments plus their seeded 7:2:1 recording-level split.
continual::Corpus make_corpus(const CorpusSpec& spec);

}  // namespace scl::synthetic
