#include "janus/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "janus/inversion.hpp"
#include "janus/losses.hpp"
#include "janus/trainer.hpp"

namespace janus {

double grad_rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

namespace {

Tensor random_uniform(const std::vector<int>& shape, std::mt19937_64& rng, double lo, double hi) {
    Tensor t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data) v = dist(rng);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// Central difference with a Richardson consistency test: at a smooth point the
// step-h and step-h/2 estimates agree to O(h^2); a larger disagreement means
// the window straddles a kink and the probe says nothing about the derivative.
struct FdEstimate {
    double deriv = 0.0;
    bool smooth = true;
};

template <typename F>
FdEstimate central_diff(double& slot, double h, F&& f) {
    const double save = slot;
    slot = save + h;
    const double fp = f();
    slot = save - h;
    const double fm = f();
    slot = save + 0.5 * h;
    const double fph = f();
    slot = save - 0.5 * h;
    const double fmh = f();
    slot = save;
    FdEstimate e;
    const double d1 = (fp - fm) / (2 * h);
    const double d2 = (fph - fmh) / h;
    e.deriv = d2;
    e.smooth = std::abs(d1 - d2) <= 1e-7 * std::max({1.0, std::abs(d1), std::abs(d2)});
    return e;
}

bool probe_budget_ok(const GradCheckResult& r) { return r.skipped * 10 <= r.probes; }

}  // namespace

GradCheckResult gradcheck_layer(const LayerSpec& spec, const std::vector<int>& input_shape,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Sequential seq;
    seq.add(spec, rng);
    Tensor x = random_uniform(input_shape, rng, -1.0, 1.0);
    if (spec.kind == LayerKind::ReLU)  // keep probes away from the kink
        for (double& v : x.data) v += v >= 0 ? 0.1 : -0.1;
    if (spec.kind == LayerKind::Clamp01)  // kinks at both rails
        for (double& v : x.data) {
            if (std::abs(v) < 0.05) v += v >= 0 ? 0.05 : -0.05;
            if (std::abs(v - 1.0) < 0.05) v += v >= 1.0 ? 0.05 : -0.05;
        }

    Tape tape;
    const Tensor y0 = seq_forward(seq, x, &tape);
    const Tensor u = random_uniform(y0.shape, rng, -1.0, 1.0);
    seq.zero_grads();
    const Tensor gx = seq_backward(seq, tape, u);

    GradCheckResult res;
    res.name = std::string("layer.") + layer_kind_name(spec.kind);
    const double h = kGradCheckStep;
    const auto fd_probe = [&](Tensor& target, std::size_t k, double analytic) {
        const double save = target.data[k];
        target.data[k] = save + h;
        const double fp = dot(u, seq_forward(seq, x));
        target.data[k] = save - h;
        const double fm = dot(u, seq_forward(seq, x));
        target.data[k] = save;
        res.max_rel_err = std::max(res.max_rel_err, grad_rel_err(analytic, (fp - fm) / (2 * h)));
    };

    for (std::size_t k = 0; k < x.numel(); ++k) fd_probe(x, k, gx.data[k]);
    auto& p = seq.params[0];
    for (std::size_t k = 0; k < p.weights.numel(); ++k)
        fd_probe(p.weights, k, p.weight_grads.data[k]);
    for (std::size_t k = 0; k < p.biases.numel(); ++k)
        fd_probe(p.biases, k, p.bias_grads.data[k]);
    res.pass = res.max_rel_err < kGradCheckTol;
    return res;
}

GradCheckResult gradcheck_khronos(const KhronosConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    KhronosParams params = init_khronos_params(cfg, rng);
    // He-style head init can be microscopic; use O(1) coefficients so products
    // are well-scaled for finite differences.
    std::normal_distribution<double> dist(0.0, 0.5);
    for (double& a : params.alpha.data) a = 1.0 + dist(rng);

    std::vector<double> z(static_cast<std::size_t>(cfg.latent_dim));
    std::uniform_real_distribution<double> uz(0.05, 0.95);
    for (double& v : z) v = uz(rng);
    std::vector<double> dy(static_cast<std::size_t>(cfg.output_dim));
    std::uniform_real_distribution<double> uu(-1.0, 1.0);
    for (double& v : dy) v = uu(rng);

    KhronosCache cache;
    khronos_forward(z, params, cfg, &cache);
    const auto gz = khronos_vjp_z(cache, params, cfg, dy);
    params.alpha_grads.zero();
    khronos_grad_params(cache, dy, cfg, params.alpha_grads);

    GradCheckResult res;
    res.name = "khronos";
    const double h = kGradCheckStep;
    const auto weighted = [&](const std::vector<double>& zz) {
        const auto y = khronos_forward(zz, params, cfg);
        double s = 0.0;
        for (std::size_t o = 0; o < y.size(); ++o) s += dy[o] * y[o];
        return s;
    };
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double save = z[k];
        z[k] = save + h;
        const double fp = weighted(z);
        z[k] = save - h;
        const double fm = weighted(z);
        z[k] = save;
        res.max_rel_err = std::max(res.max_rel_err, grad_rel_err(gz[k], (fp - fm) / (2 * h)));
    }
    for (std::size_t k = 0; k < params.alpha.numel(); ++k) {
        const double save = params.alpha.data[k];
        params.alpha.data[k] = save + h;
        const double fp = weighted(z);
        params.alpha.data[k] = save - h;
        const double fm = weighted(z);
        params.alpha.data[k] = save;
        res.max_rel_err =
            std::max(res.max_rel_err, grad_rel_err(params.alpha_grads.data[k], (fp - fm) / (2 * h)));
    }
    res.pass = res.max_rel_err < kGradCheckTol;
    return res;
}

namespace {

JanusConfig tiny_config(bool classification) {
    JanusConfig c;
    c.image_size = 8;
    c.latent_dim = 4;
    c.encoder_channels = {2, 3};
    c.decoder_channels = {3, 2};
    c.khronos.latent_dim = 4;
    c.khronos.rank = 2;
    c.khronos.basis_count = 5;
    c.khronos.output_dim = classification ? 10 : 1;
    c.task = classification ? TaskKind::Classification : TaskKind::Regression;
    return c;
}

}  // namespace

GradCheckResult gradcheck_composite(bool classification, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    JanusModel m = build_janus(tiny_config(classification), seed);
    // Rescale the head so its output actually moves the task term.
    std::normal_distribution<double> dist(0.0, 0.3);
    for (double& a : m.khronos.alpha.data) a = 1.0 + dist(rng);

    const int n = 2;
    const Tensor x = random_uniform({n, 1, 8, 8}, rng, 0.05, 0.95);
    BatchLabels labels;
    if (classification) {
        labels.classes = {3, 7};
    } else {
        labels.targets = {0.4, 1.3};
    }
    const LossWeights w;

    m.encoder.zero_grads();
    m.decoder.zero_grads();
    m.khronos.alpha_grads.zero();
    composite_forward_backward(m, x, labels, w);

    AdamState slots_owner = make_adam(m, {});
    struct Saved {
        std::string name;
        Tensor grads;
    };
    std::vector<Saved> saved;
    for (const auto& s : slots_owner.slots) saved.push_back({s.name, *s.grad});

    GradCheckResult res;
    res.name = std::string("composite.") + (classification ? "classification" : "regression");
    const double h = kGradCheckStep;
    // The training field routes the cycle term into decoder weights only, so
    // the matching finite-difference scalar keeps the cycle leg's latents and
    // encoder frozen at the probe's base parameters while every other term
    // follows the live graph.
    const auto frozen_total = [&](const Tensor& zbar, const Sequential& enc_frozen) {
        const Tensor z = encode(m, x);
        const Tensor y = khronos_batch_forward(z, m.khronos, m.cfg.khronos);
        const Tensor xh = decode(m, z);
        const Tensor z2 = seq_forward(m.encoder, xh);
        const Tensor xhh = seq_forward(m.decoder, z2);
        const double task = classification ? task_loss_classification(y, labels.classes, nullptr)
                                           : task_loss_regression(y, labels.targets, nullptr);
        const Tensor xhc = decode(m, zbar);
        const Tensor z2c = seq_forward(enc_frozen, xhc);
        return task + w.recon * mean_abs_error(xh, x, nullptr) +
               w.cycle * mean_abs_error(z2c, zbar, nullptr) +
               w.deep * mean_abs_error(xhh, x, nullptr);
    };
    const auto fresh_analytic = [&](std::size_t si, std::size_t k) {
        m.encoder.zero_grads();
        m.decoder.zero_grads();
        m.khronos.alpha_grads.zero();
        composite_forward_backward(m, x, labels, w);
        return slots_owner.slots[si].grad->data[k];
    };
    // A kink at the exact probe point evades the Richardson test (both windows
    // are contaminated identically), so a failing probe is retried at shifted
    // base points: kink failures are localized, real bugs fail everywhere.
    const double offsets[] = {0.0, 10 * h, -10 * h};
    for (std::size_t si = 0; si < slots_owner.slots.size(); ++si) {
        auto& slot = slots_owner.slots[si];
        for (std::size_t k = 0; k < slot.param->numel(); ++k) {
            ++res.probes;
            const double save = slot.param->data[k];
            double best = -1.0;
            for (const double off : offsets) {
                slot.param->data[k] = save + off;
                const double analytic =
                    off == 0.0 ? saved[si].grads.data[k] : fresh_analytic(si, k);
                const Tensor zbar = encode(m, x);
                const Sequential enc_frozen = m.encoder;
                const FdEstimate e = central_diff(slot.param->data[k], h,
                                                  [&] { return frozen_total(zbar, enc_frozen); });
                if (!e.smooth) continue;
                const double re = grad_rel_err(analytic, e.deriv);
                best = best < 0.0 ? re : std::min(best, re);
                if (best < kGradCheckTol) break;
            }
            slot.param->data[k] = save;
            if (best < 0.0) {
                ++res.skipped;
                continue;
            }
            res.max_rel_err = std::max(res.max_rel_err, best);
        }
    }
    res.pass = res.max_rel_err < kGradCheckTol && probe_budget_ok(res);
    return res;
}

GradCheckResult gradcheck_inversion(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    JanusModel m = build_janus(tiny_config(false), seed);
    std::normal_distribution<double> dist(0.0, 0.3);
    for (double& a : m.khronos.alpha.data) a = 1.0 + dist(rng);
    fit_latent_stats(m, random_uniform({16, 1, 8, 8}, rng, 0.05, 0.95));

    GradCheckResult res;
    res.name = "inversion_objective";
    const double h = kGradCheckStep;
    const InversionWeights weights;
    std::uniform_real_distribution<double> uz(0.1, 0.9);
    std::uniform_real_distribution<double> ut(0.2, 1.5);
    for (int probe = 0; probe < 10; ++probe) {
        std::vector<double> z(4);
        for (double& v : z) v = uz(rng);
        const double target = ut(rng);
        const auto objective = [&] {
            return inversion_objective(z, target, m, weights, m.latent_mean, m.latent_std);
        };
        const double offsets[] = {0.0, 10 * h, -10 * h};
        for (std::size_t k = 0; k < z.size(); ++k) {
            ++res.probes;
            const double save = z[k];
            double best = -1.0;
            for (const double off : offsets) {
                z[k] = save + off;
                std::vector<double> grad;
                inversion_objective(z, target, m, weights, m.latent_mean, m.latent_std, &grad);
                const FdEstimate e = central_diff(z[k], h, objective);
                if (!e.smooth) continue;
                const double re = grad_rel_err(grad[k], e.deriv);
                best = best < 0.0 ? re : std::min(best, re);
                if (best < kGradCheckTol) break;
            }
            z[k] = save;
            if (best < 0.0) {
                ++res.skipped;
                continue;
            }
            res.max_rel_err = std::max(res.max_rel_err, best);
        }
    }
    res.pass = res.max_rel_err < kGradCheckTol && probe_budget_ok(res);
    return res;
}

std::vector<GradCheckResult> gradcheck_all(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    out.push_back(gradcheck_layer(LayerSpec::conv2d(2, 3, 3, 2, 1), {2, 2, 5, 7}, seed));
    {
        auto r = gradcheck_layer(LayerSpec::conv2d(3, 2, 3, 1, 1), {2, 3, 4, 5}, seed + 1);
        r.name = "layer.Conv2D.stride1";
        out.push_back(r);
    }
    out.push_back(gradcheck_layer(LayerSpec::dense(6, 4), {3, 6}, seed + 2));
    out.push_back(gradcheck_layer(LayerSpec::upsample2x(), {2, 2, 3, 4}, seed + 3));
    out.push_back(gradcheck_layer(LayerSpec::relu(), {2, 2, 3, 3}, seed + 4));
    out.push_back(gradcheck_layer(LayerSpec::logistic(), {2, 2, 3, 3}, seed + 5));
    out.push_back(gradcheck_layer(LayerSpec::clamp01(), {2, 2, 3, 3}, seed + 8));
    out.push_back(gradcheck_layer(LayerSpec::flatten(), {2, 2, 3, 3}, seed + 6));
    out.push_back(gradcheck_layer(LayerSpec::reshape({3, 2, 2}), {2, 12}, seed + 7));
    {
        KhronosConfig kc;
        kc.latent_dim = 3;
        kc.rank = 2;
        kc.basis_count = 5;
        kc.output_dim = 2;
        out.push_back(gradcheck_khronos(kc, seed + 8));
    }
    out.push_back(gradcheck_composite(false, seed + 9));
    out.push_back(gradcheck_composite(true, seed + 10));
    out.push_back(gradcheck_inversion(seed + 11));
    return out;
}

}  // namespace janus
