#include "scl/models.hpp"

#include <cmath>

#include "scl/errors.hpp"
#include "scl/ops.hpp"

namespace scl::models {

namespace {

// He-uniform: Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)), which keeps the
// activation scale roughly constant through ReLU stacks.
Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor init_bias(std::size_t n) { return Tensor::zeros({n}, true); }

void check_segment_batch(const Tensor& batch, const char* who) {
    if (batch.ndim() != 3 || batch.dim(1) != kMelBins || batch.dim(2) != kFrames) {
        throw ShapeError(std::string(who) + ": expected [B x " + std::to_string(kMelBins) + " x " +
                         std::to_string(kFrames) + "], got " + shape_str(batch.shape()));
    }
}

void set_all(const ParameterList& params, bool on) {
    for (auto p : params) p.value.set_requires_grad(on);
}

}  // namespace

std::size_t param_count(const ParameterList& params) { return count_scalars(params); }

void copy_parameters(const ParameterList& src, ParameterList& dst) {
    if (src.size() != dst.size()) throw ShapeError("copy_parameters: parameter count mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].name != dst[i].name || src[i].value.shape() != dst[i].value.shape()) {
            throw ShapeError("copy_parameters: mismatch at '" + src[i].name + "'");
        }
        auto s = src[i].value.data();
        std::copy(s.begin(), s.end(), dst[i].value.data().begin());
    }
}

// ---- Classifier ------------------------------------------------------------

Classifier::Classifier(Rng& rng)
    : conv1_w_(init_weight({64, kMelBins, 3}, kMelBins * 3, rng)),
      conv1_b_(init_bias(64)),
      conv2_w_(init_weight({128, 64, 3}, 64 * 3, rng)),
      conv2_b_(init_bias(128)),
      fc1_w_(init_weight({50, 128}, 128, rng)),
      fc1_b_(init_bias(50)),
      fc2_w_(init_weight({kClasses, 50}, 50, rng)),
      fc2_b_(init_bias(kClasses)) {}

Tensor Classifier::forward(const Tensor& batch) const {
    check_segment_batch(batch, "Classifier::forward");
    using ops::Padding;
    auto h = ops::relu(ops::conv1d(batch, conv1_w_, conv1_b_, 1, Padding::same));
    h = ops::relu(ops::conv1d(h, conv2_w_, conv2_b_, 1, Padding::same));
    auto pooled = ops::mean_over_time(h);
    auto f = ops::relu(ops::linear(pooled, fc1_w_, fc1_b_));
    return ops::linear(f, fc2_w_, fc2_b_);
}

ParameterList Classifier::parameters() const {
    return {{"conv1.w", conv1_w_}, {"conv1.b", conv1_b_}, {"conv2.w", conv2_w_},
            {"conv2.b", conv2_b_}, {"fc1.w", fc1_w_},     {"fc1.b", fc1_b_},
            {"fc2.w", fc2_w_},     {"fc2.b", fc2_b_}};
}

Classifier Classifier::clone() const {
    Classifier c;
    c.conv1_w_ = conv1_w_.clone();
    c.conv1_b_ = conv1_b_.clone();
    c.conv2_w_ = conv2_w_.clone();
    c.conv2_b_ = conv2_b_.clone();
    c.fc1_w_ = fc1_w_.clone();
    c.fc1_b_ = fc1_b_.clone();
    c.fc2_w_ = fc2_w_.clone();
    c.fc2_b_ = fc2_b_.clone();
    return c;
}

void Classifier::set_trainable(bool on) { set_all(parameters(), on); }

// ---- Autoencoder -----------------------------------------------------------

Autoencoder::Autoencoder(Rng& rng)
    : enc1_w_(init_weight({kMelBins, kMelBins, 6}, kMelBins * 6, rng)),
      enc1_b_(init_bias(kMelBins)),
      enc2_w_(init_weight({kMelBins, kMelBins, 4}, kMelBins * 4, rng)),
      enc2_b_(init_bias(kMelBins)),
      enc3_w_(init_weight({kMelBins, kMelBins, 3}, kMelBins * 3, rng)),
      enc3_b_(init_bias(kMelBins)),
      enc_fc_w_(init_weight({kLatentDim, kMelBins}, kMelBins, rng)),
      enc_fc_b_(init_bias(kLatentDim)),
      dec_fc_w_(init_weight({kMelBins, kLatentDim}, kLatentDim, rng)),
      dec_fc_b_(init_bias(kMelBins)),
      dec1_w_(init_weight({kMelBins, kMelBins, 4}, kMelBins * 4, rng)),
      dec1_b_(init_bias(kMelBins)),
      dec2_w_(init_weight({kMelBins, kMelBins, 4}, kMelBins * 4, rng)),
      dec2_b_(init_bias(kMelBins)),
      dec3_w_(init_weight({kMelBins, kMelBins, 7}, kMelBins * 7, rng)),
      dec3_b_(init_bias(kMelBins)) {}

Tensor Autoencoder::encode_features(const Tensor& batch) const {
    check_segment_batch(batch, "Autoencoder::encode");
    using ops::Padding;
    auto h = ops::relu(ops::conv1d(batch, enc1_w_, enc1_b_, 1, Padding::valid));
    h = ops::relu(ops::conv1d(h, enc2_w_, enc2_b_, 2, Padding::valid));
    h = ops::conv1d(h, enc3_w_, enc3_b_, 2, Padding::valid);
    return ops::reshape(h, {batch.dim(0), kMelBins});
}

Tensor Autoencoder::encode(const Tensor& batch) const {
    return ops::linear(encode_features(batch), enc_fc_w_, enc_fc_b_);
}

Tensor Autoencoder::decode(const Tensor& latents) const {
    if (latents.ndim() != 2 || latents.dim(1) != kLatentDim) {
        throw ShapeError("Autoencoder::decode: expected [B x " + std::to_string(kLatentDim) +
                         "] latents, got " + shape_str(latents.shape()));
    }
    const std::size_t b = latents.dim(0);
    auto d = ops::reshape(ops::linear(latents, dec_fc_w_, dec_fc_b_), {b, kMelBins, 1});
    d = ops::relu(ops::conv1d_transpose(d, dec1_w_, dec1_b_, 2));
    d = ops::relu(ops::conv1d_transpose(d, dec2_w_, dec2_b_, 2));
    return ops::sigmoid(ops::conv1d_transpose(d, dec3_w_, dec3_b_, 1));
}

ParameterList Autoencoder::parameters() const {
    return {{"enc.conv1.w", enc1_w_}, {"enc.conv1.b", enc1_b_}, {"enc.conv2.w", enc2_w_},
            {"enc.conv2.b", enc2_b_}, {"enc.conv3.w", enc3_w_}, {"enc.conv3.b", enc3_b_},
            {"enc.fc.w", enc_fc_w_},  {"enc.fc.b", enc_fc_b_},  {"dec.fc.w", dec_fc_w_},
            {"dec.fc.b", dec_fc_b_},  {"dec.deconv1.w", dec1_w_}, {"dec.deconv1.b", dec1_b_},
            {"dec.deconv2.w", dec2_w_}, {"dec.deconv2.b", dec2_b_}, {"dec.deconv3.w", dec3_w_},
            {"dec.deconv3.b", dec3_b_}};
}

Autoencoder Autoencoder::clone() const {
    Autoencoder a;
    auto copy = [](const Tensor& t) { return t.clone(); };
    a.enc1_w_ = copy(enc1_w_);
    a.enc1_b_ = copy(enc1_b_);
    a.enc2_w_ = copy(enc2_w_);
    a.enc2_b_ = copy(enc2_b_);
    a.enc3_w_ = copy(enc3_w_);
    a.enc3_b_ = copy(enc3_b_);
    a.enc_fc_w_ = copy(enc_fc_w_);
    a.enc_fc_b_ = copy(enc_fc_b_);
    a.dec_fc_w_ = copy(dec_fc_w_);
    a.dec_fc_b_ = copy(dec_fc_b_);
    a.dec1_w_ = copy(dec1_w_);
    a.dec1_b_ = copy(dec1_b_);
    a.dec2_w_ = copy(dec2_w_);
    a.dec2_b_ = copy(dec2_b_);
    a.dec3_w_ = copy(dec3_w_);
    a.dec3_b_ = copy(dec3_b_);
    return a;
}

void Autoencoder::set_trainable(bool on) { set_all(parameters(), on); }

std::vector<std::size_t> Autoencoder::encoder_lengths() {
    std::vector<std::size_t> l{kFrames};
    for (auto [k, s] : {std::pair<std::size_t, std::size_t>{6, 1}, {4, 2}, {3, 2}})
        l.push_back((l.back() - k) / s + 1);
    return l;
}

std::vector<std::size_t> Autoencoder::decoder_lengths() {
    std::vector<std::size_t> l{1};
    for (auto [k, s] : {std::pair<std::size_t, std::size_t>{4, 2}, {4, 2}, {7, 1}})
        l.push_back((l.back() - 1) * s + k);
    return l;
}

// ---- Vae -------------------------------------------------------------------

Vae::Vae(Rng& rng)
    : body_(rng),
      logvar_w_(init_weight({kLatentDim, kMelBins}, kMelBins, rng)),
      logvar_b_(init_bias(kLatentDim)) {}

std::pair<Tensor, Tensor> Vae::encode(const Tensor& batch) const {
    auto feats = body_.encode_features(batch);
    auto mu = ops::linear(feats, body_.enc_fc_w_, body_.enc_fc_b_);
    auto logvar = ops::clamp(ops::linear(feats, logvar_w_, logvar_b_), kLogvarMin, kLogvarMax);
    return {mu, logvar};
}

VaeOutput Vae::forward_with_noise(const Tensor& batch, const Tensor& eps) const {
    auto [mu, logvar] = encode(batch);
    if (eps.shape() != mu.shape()) {
        throw ShapeError("Vae::forward_with_noise: eps " + shape_str(eps.shape()) +
                         " does not match latent " + shape_str(mu.shape()));
    }
    auto z = ops::add(mu, ops::mul(ops::exp(ops::scale(logvar, 0.5)), eps));
    return {body_.decode(z), mu, logvar};
}

VaeOutput Vae::forward(const Tensor& batch, Rng& rng) const {
    check_segment_batch(batch, "Vae::forward");
    std::vector<double> e(batch.dim(0) * kLatentDim);
    for (auto& v : e) v = rng.normal();
    return forward_with_noise(batch, Tensor::from({batch.dim(0), kLatentDim}, std::move(e)));
}

ParameterList Vae::parameters() const {
    auto p = body_.parameters();
    p.push_back({"enc.logvar.w", logvar_w_});
    p.push_back({"enc.logvar.b", logvar_b_});
    return p;
}

Vae Vae::clone() const {
    Vae v;
    v.body_ = body_.clone();
    v.logvar_w_ = logvar_w_.clone();
    v.logvar_b_ = logvar_b_.clone();
    return v;
}

void Vae::set_trainable(bool on) { set_all(parameters(), on); }

nlohmann::json model_card(const std::string& architecture, std::size_t param_count,
                          int task_index, std::uint64_t seed) {
    return {{"architecture", architecture},
            {"param_count", param_count},
            {"task_index", task_index},
            {"seed", seed}};
}

}  // namespace scl::models
