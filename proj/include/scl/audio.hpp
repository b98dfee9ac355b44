#pragma once

// Audio ingestion and mel-spectrogram segmentation.
//
// Pipeline per recording: Hann-windowed STFT magnitude (2048 / 512, no edge
// padding) -> 128-band triangular mel filterbank applied to the power
// spectrum, then square-rooted -> non-overlapping 16-frame segments, max
// normalized per recording, low-energy segments dropped. Recordings are then
// split 7:2:1 per class, whole recordings at a time.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scl/tensor.hpp"

namespace scl::audio {

inline constexpr std::size_t kWindow = 2048;
inline constexpr std::size_t kHop = 512;
inline constexpr std::size_t kMels = 128;
inline constexpr std::size_t kSegmentFrames = 16;
inline constexpr double kMinSegmentNorm = 1e-4;
inline constexpr int kExpectedSampleRate = 44100;

struct Recording {
    std::vector<double> samples;  // mono, nominally in [-1, 1]
    int sample_rate = kExpectedSampleRate;
    int label = 0;
    std::string id;
};

// One normalized 128 x 16 slice; values[m * 16 + t], each in [0, 1].
struct MelSegment {
    std::vector<float> values;
    int label = 0;
    std::string recording_id;
    int segment_index = 0;
};

// Throws DataError unless size, range and energy invariants hold.
void validate_segment(const MelSegment& s);

// 16-bit PCM WAV. Multi-channel input is averaged to mono.
Recording read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const std::vector<double>& samples,
               int sample_rate);

std::size_t stft_frame_count(std::size_t samples, std::size_t window = kWindow,
                             std::size_t hop = kHop);
// [window/2 + 1 x F] magnitudes.
Tensor stft_magnitude(const Recording& rec, std::size_t window = kWindow, std::size_t hop = kHop);

// Mel-scale (2595 log10(1 + f/700)) triangular filters spanning 0..sr/2,
// peak 1, shape [n_mels x (n_fft/2 + 1)].
Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate);
// sqrt(filterbank . mag^2), shape [n_mels x F].
Tensor mel_project(const Tensor& mag, std::size_t n_mels, int sample_rate);

struct SegmentationResult {
    std::vector<MelSegment> segments;
    std::vector<std::string> warnings;
    std::size_t candidates = 0;  // floor(F / 16)
};

SegmentationResult segment_and_normalize(const Tensor& mel, int label,
                                         const std::string& recording_id);

// Full per-recording pipeline.
SegmentationResult extract_segments(const Recording& rec);

struct SplitRatio {
    int train = 7;
    int val = 2;
    int test = 1;
};

// Indices into the segment list.
struct Splits {
    std::vector<std::size_t> train, val, test;
};

// Stratified per class over recordings; every segment of one recording
// lands in the same split. Throws DataError for a class with < 3 recordings.
Splits split_segments(const std::vector<MelSegment>& segments, std::uint64_t seed,
                      SplitRatio ratio = {});

struct ManifestEntry {
    std::string filename;
    int class_index = 0;
    std::string class_name;
};

// CSV with header; columns filename,class_index,class_name (extra columns ignored).
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct IngestResult {
    std::vector<MelSegment> segments;
    Splits splits;
    std::vector<std::string> warnings;
};

// WAV directory + manifest -> segments and their split. Recordings are
// processed in parallel; output order follows the manifest.
IngestResult ingest(const std::filesystem::path& wav_dir, const std::filesystem::path& manifest,
                    std::uint64_t seed);

}  // namespace scl::audio
