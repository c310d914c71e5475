#include "janus/model.hpp"

#include <algorithm>
#include <cmath>

namespace janus {

JanusConfig JanusConfig::mnist_default() {
    JanusConfig c;
    c.image_size = 28;
    c.latent_dim = 16;
    c.encoder_channels = {16, 32};
    c.decoder_channels = {16, 8};
    c.khronos.latent_dim = 16;
    c.khronos.rank = 6;
    c.khronos.basis_count = 8;
    c.khronos.output_dim = 10;
    c.task = TaskKind::Classification;
    return c;
}

JanusConfig JanusConfig::micro_default() {
    JanusConfig c;
    c.image_size = 64;
    c.latent_dim = 64;
    c.encoder_channels = {16, 32, 64};
    c.decoder_channels = {32, 16, 16};
    c.khronos.latent_dim = 64;
    c.khronos.rank = 4;
    c.khronos.basis_count = 8;
    c.khronos.output_dim = 1;
    c.task = TaskKind::Regression;
    return c;
}

void JanusConfig::validate() const {
    khronos.validate();
    if (latent_dim != khronos.latent_dim)
        throw ConfigError("JanusConfig: latent_dim " + std::to_string(latent_dim) +
                          " != khronos.latent_dim " + std::to_string(khronos.latent_dim));
    if (channels != 1) throw ConfigError("JanusConfig: only single-channel images supported");
    if (encoder_channels.empty() || decoder_channels.empty())
        throw ConfigError("JanusConfig: empty channel schedule");
    if (encoder_channels.size() != decoder_channels.size())
        throw ConfigError("JanusConfig: encoder/decoder stage counts must match (" +
                          std::to_string(encoder_channels.size()) + " vs " +
                          std::to_string(decoder_channels.size()) + ")");
    int s = image_size;
    for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
        if (s % 2 != 0)
            throw ConfigError("JanusConfig: image_size " + std::to_string(image_size) +
                              " not divisible by 2^" + std::to_string(encoder_channels.size()));
        s /= 2;
    }
    if (s < 1) throw ConfigError("JanusConfig: too many encoder stages");
    if (task == TaskKind::Classification && khronos.output_dim != 10)
        throw ConfigError("JanusConfig: classification requires khronos.output_dim == 10");
    if (task == TaskKind::Regression && khronos.output_dim != 1)
        throw ConfigError("JanusConfig: regression requires khronos.output_dim == 1");
    if (target_scale <= 0) throw ConfigError("JanusConfig: target_scale must be > 0");
}

JanusModel build_janus(const JanusConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    JanusModel m;
    m.cfg = cfg;
    std::mt19937_64 rng(seed);

    // Encoder: stride-2 convs halving the map each stage, dense to M, logistic
    // so latents land inside the spline domain.
    int in_c = cfg.channels;
    int s = cfg.image_size;
    for (int c : cfg.encoder_channels) {
        m.encoder.add(LayerSpec::conv2d(in_c, c, 3, 2, 1), rng);
        m.encoder.add(LayerSpec::relu(), rng);
        in_c = c;
        s /= 2;
    }
    m.encoder.add(LayerSpec::flatten(), rng);
    m.encoder.add(LayerSpec::dense(in_c * s * s, cfg.latent_dim), rng);
    m.encoder.add(LayerSpec::logistic(), rng);

    // Decoder mirrors: dense to the smallest map, then upsample+conv stages.
    const int base_c = cfg.encoder_channels.back();
    m.decoder.add(LayerSpec::dense(cfg.latent_dim, base_c * s * s), rng);
    m.decoder.add(LayerSpec::relu(), rng);
    m.decoder.add(LayerSpec::reshape({base_c, s, s}), rng);
    in_c = base_c;
    for (int c : cfg.decoder_channels) {
        m.decoder.add(LayerSpec::upsample2x(), rng);
        m.decoder.add(LayerSpec::conv2d(in_c, c, 3, 1, 1), rng);
        m.decoder.add(LayerSpec::relu(), rng);
        in_c = c;
    }
    m.decoder.add(LayerSpec::conv2d(in_c, cfg.channels, 3, 1, 1), rng);
    // Hard clamp, not a logistic: image targets contain exact 0s and 1s, and
    // an absolute-error loss against them drives a logistic's pre-activations
    // into saturation without bound (the sign gradient never decays), after
    // which its ~zero slope freezes the whole decoder under Adam. The clamp
    // reaches the rails exactly, so the pressure stops at the boundary.
    m.decoder.add(LayerSpec::clamp01(), rng);

    m.khronos = init_khronos_params(cfg.khronos, rng);

    const auto enc_out = m.encoder.validate({cfg.channels, cfg.image_size, cfg.image_size});
    if (enc_out != std::vector<int>{cfg.latent_dim})
        throw ConfigError("encoder output " + shape_str(enc_out) + " != latent dim");
    const auto dec_out = m.decoder.validate({cfg.latent_dim});
    if (dec_out != std::vector<int>{cfg.channels, cfg.image_size, cfg.image_size})
        throw ConfigError("decoder output " + shape_str(dec_out) + " != image shape");
    return m;
}

namespace {

void check_image_shape(const JanusModel& m, const Tensor& x) {
    if (x.ndim() != 4 || x.shape[1] != m.cfg.channels || x.shape[2] != m.cfg.image_size ||
        x.shape[3] != m.cfg.image_size)
        throw ConfigError("expected image batch [N," + std::to_string(m.cfg.channels) + "," +
                          std::to_string(m.cfg.image_size) + "," +
                          std::to_string(m.cfg.image_size) + "], got " + shape_str(x.shape));
}

void check_latent_shape(const JanusModel& m, const Tensor& z) {
    if (z.ndim() != 2 || z.shape[1] != m.cfg.latent_dim)
        throw ConfigError("expected latent batch [N," + std::to_string(m.cfg.latent_dim) +
                          "], got " + shape_str(z.shape));
}

}  // namespace

Tensor encode(const JanusModel& m, const Tensor& x, Tape* tape) {
    check_image_shape(m, x);
    return seq_forward(m.encoder, x, tape);
}

Tensor decode(const JanusModel& m, const Tensor& z, Tape* tape) {
    check_latent_shape(m, z);
    return seq_forward(m.decoder, z, tape);
}

Tensor predict(const JanusModel& m, const Tensor& x) {
    return khronos_batch_forward(encode(m, x), m.khronos, m.cfg.khronos);
}

Tensor reconstruct(const JanusModel& m, const Tensor& x) { return decode(m, encode(m, x)); }

Tensor deep_reconstruct(const JanusModel& m, const Tensor& x) {
    return reconstruct(m, reconstruct(m, x));
}

void fit_latent_stats(JanusModel& m, const Tensor& images) {
    check_image_shape(m, images);
    const int n = images.shape[0];
    if (n < 1) throw ConfigError("fit_latent_stats: empty dataset");
    const int M = m.cfg.latent_dim;
    std::vector<double> sum(static_cast<std::size_t>(M), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(M), 0.0);

    const int chunk = 256;
    const std::size_t img_elems = images.numel() / static_cast<std::size_t>(n);
    for (int start = 0; start < n; start += chunk) {
        const int cnt = std::min(chunk, n - start);
        Tensor batch({cnt, m.cfg.channels, m.cfg.image_size, m.cfg.image_size});
        std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(start * img_elems),
                    cnt * img_elems, batch.data.begin());
        const Tensor z = encode(m, batch);
        for (int i = 0; i < cnt; ++i)
            for (int d = 0; d < M; ++d) {
                const double v = z.data[static_cast<std::size_t>(i) * M + d];
                sum[d] += v;
                sumsq[d] += v * v;
            }
    }
    m.latent_mean = Tensor({M});
    m.latent_std = Tensor({M});
    for (int d = 0; d < M; ++d) {
        const double mu = sum[d] / n;
        const double var = std::max(0.0, sumsq[d] / n - mu * mu);
        m.latent_mean.data[d] = mu;
        m.latent_std.data[d] = std::max(1e-6, std::sqrt(var));
    }
}

}  // namespace janus
