#pragma once

// Network architectures over [B x 128 x 16] mel-spectrogram batches. The
// 128 mel bins are the convolution channels; convolutions slide along the
// 16 time frames.

#include <string>

#include "json.hpp"

#include "scl/rng.hpp"
#include "scl/tensor.hpp"

namespace scl::models {

inline constexpr std::size_t kMelBins = 128;
inline constexpr std::size_t kFrames = 16;
inline constexpr std::size_t kSegmentSize = kMelBins * kFrames;
inline constexpr std::size_t kClasses = 10;
inline constexpr std::size_t kLatentDim = 50;
// logvar is clamped to this range before use in the VAE.
inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

std::size_t param_count(const ParameterList& params);

// conv(128->64, K3, same) ReLU, conv(64->128, K3, same) ReLU, global mean over
// time, fc(128->50) ReLU, fc(50->10). 56,304 trainable scalars.
class Classifier {
public:
    static constexpr const char* kKind = "classifier";

    explicit Classifier(Rng& rng);

    // [B x 128 x 16] -> [B x 10] logits.
    Tensor forward(const Tensor& batch) const;
    ParameterList parameters() const;
    Classifier clone() const;
    // Toggles requires_grad on every weight; a frozen copy builds no tape.
    void set_trainable(bool on);

private:
    Classifier() = default;
    Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_, fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

// Convolutional autoencoder. Encoder: conv K6/s1, K4/s2, K3/s2 (valid,
// 128 channels, ReLU after the first two) collapsing 16 frames to 1, then
// fc(128->50). Decoder: fc(50->128), transposed conv K4/s2, K4/s2, K7/s1
// (ReLU after the first two) restoring 16 frames, sigmoid output.
// 472,498 trainable scalars.
class Autoencoder {
public:
    static constexpr const char* kKind = "autoencoder";

    explicit Autoencoder(Rng& rng);

    Tensor encode(const Tensor& batch) const;   // [B x 128 x 16] -> [B x 50]
    Tensor decode(const Tensor& latents) const; // [B x 50] -> [B x 128 x 16] in (0,1)
    Tensor forward(const Tensor& batch) const { return decode(encode(batch)); }
    ParameterList parameters() const;
    Autoencoder clone() const;
    void set_trainable(bool on);

    // Time length after each encoder / decoder stage, for shape checks.
    static std::vector<std::size_t> encoder_lengths();
    static std::vector<std::size_t> decoder_lengths();

protected:
    Autoencoder() = default;
    friend class Vae;
    // Encoder body up to (but excluding) the latent projection: [B x 128].
    Tensor encode_features(const Tensor& batch) const;

    Tensor enc1_w_, enc1_b_, enc2_w_, enc2_b_, enc3_w_, enc3_b_, enc_fc_w_, enc_fc_b_;
    Tensor dec_fc_w_, dec_fc_b_, dec1_w_, dec1_b_, dec2_w_, dec2_b_, dec3_w_, dec3_b_;
};

struct VaeOutput {
    Tensor recon;
    Tensor mu;
    Tensor logvar;
};

// Autoencoder topology whose latent projection is the mean head, plus an
// additional linear logvar head (128->50). Sampling uses
// z = mu + exp(logvar / 2) * eps.
class Vae {
public:
    static constexpr const char* kKind = "vae";

    explicit Vae(Rng& rng);

    std::pair<Tensor, Tensor> encode(const Tensor& batch) const;  // (mu, clamped logvar)
    Tensor decode(const Tensor& latents) const { return body_.decode(latents); }
    // Reparameterized forward pass with eps ~ N(0, I) drawn from rng.
    VaeOutput forward(const Tensor& batch, Rng& rng) const;
    // Same with caller-supplied eps [B x 50]; eps = 0 decodes the mean.
    VaeOutput forward_with_noise(const Tensor& batch, const Tensor& eps) const;
    ParameterList parameters() const;
    Vae clone() const;
    void set_trainable(bool on);

private:
    Vae() = default;
    Autoencoder body_;
    Tensor logvar_w_, logvar_b_;
};

// Small JSON description written next to each checkpoint.
nlohmann::json model_card(const std::string& architecture, std::size_t param_count,
                          int task_index, std::uint64_t seed);

// Copies values (not graph) from `src` into `dst`; names and shapes must match.
void copy_parameters(const ParameterList& src, ParameterList& dst);

}  // namespace scl::models
