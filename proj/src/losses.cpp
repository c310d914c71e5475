#include "janus/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace janus {

void LossWeights::validate() const {
    if (!(recon >= 0) || !(cycle >= 0) || !(deep >= 0))
        throw ConfigError("LossWeights: all weights must be finite and >= 0");
}

double task_loss_classification(const Tensor& logits, const std::vector<int>& labels,
                                Tensor* grad) {
    if (logits.ndim() != 2) throw ConfigError("logits must be [N,C], got " + shape_str(logits.shape));
    const int n = logits.shape[0], c = logits.shape[1];
    if (static_cast<int>(labels.size()) != n)
        throw ConfigError("label count " + std::to_string(labels.size()) + " != batch " +
                          std::to_string(n));
    if (grad) {
        grad->shape = logits.shape;
        grad->data.assign(logits.numel(), 0.0);
    }
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= c)
            throw ConfigError("label " + std::to_string(y) + " out of range [0," +
                              std::to_string(c - 1) + "]");
        const double* row = logits.data.data() + static_cast<std::size_t>(i) * c;
        const double mx = *std::max_element(row, row + c);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - row[y];
        if (grad) {
            double* g = grad->data.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) g[j] = std::exp(row[j] - lse) / n;
            g[y] -= 1.0 / n;
        }
    }
    return loss / n;
}

double task_loss_regression(const Tensor& pred, const std::vector<double>& target, Tensor* grad) {
    if (pred.ndim() != 2 || pred.shape[1] != 1)
        throw ConfigError("regression pred must be [N,1], got " + shape_str(pred.shape));
    const int n = pred.shape[0];
    if (static_cast<int>(target.size()) != n)
        throw ConfigError("target count " + std::to_string(target.size()) + " != batch " +
                          std::to_string(n));
    if (grad) {
        grad->shape = pred.shape;
        grad->data.assign(pred.numel(), 0.0);
    }
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = pred.data[i] - target[i];
        loss += d * d;
        if (grad) grad->data[i] = 2.0 * d / n;
    }
    return loss / n;
}

double mean_abs_error(const Tensor& a, const Tensor& b, Tensor* grad_a) {
    require_same_shape(a, b, "mean_abs_error");
    const std::size_t n = a.numel();
    if (n == 0) throw ConfigError("mean_abs_error: empty tensors");
    if (grad_a) {
        grad_a->shape = a.shape;
        grad_a->data.assign(n, 0.0);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.data[i] - b.data[i];
        sum += std::abs(d);
        if (grad_a) grad_a->data[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / static_cast<double>(n);
    }
    return sum / static_cast<double>(n);
}

LossReport composite_loss(double task, double recon, double cycle, double deep,
                          const LossWeights& w) {
    w.validate();
    LossReport r;
    r.task = task;
    r.recon = recon;
    r.cycle = cycle;
    r.deep = deep;
    r.total = task + w.recon * recon + w.cycle * cycle + w.deep * deep;
    if (!std::isfinite(r.total))
        throw DivergenceError("non-finite loss: task=" + std::to_string(task) +
                              " recon=" + std::to_string(recon) + " cycle=" + std::to_string(cycle) +
                              " deep=" + std::to_string(deep));
    return r;
}

namespace {

void axpy(Tensor& y, double a, const Tensor& x) {
    require_same_shape(y, x, "axpy");
    for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += a * x.data[i];
}

}  // namespace

LossReport composite_forward_backward(JanusModel& m, const Tensor& x, const BatchLabels& labels,
                                      const LossWeights& w) {
    const int n = x.shape[0];
    const int M = m.cfg.latent_dim;
    const int O = m.cfg.khronos.output_dim;

    Tape t_enc1, t_dec1, t_enc2, t_dec2;
    const Tensor z = encode(m, x, &t_enc1);
    std::vector<KhronosCache> caches(static_cast<std::size_t>(n));
    Tensor y({n, O});
    std::vector<double> zrow(static_cast<std::size_t>(M));
    for (int i = 0; i < n; ++i) {
        std::copy_n(z.data.begin() + static_cast<std::ptrdiff_t>(i) * M, M, zrow.begin());
        const auto out = khronos_forward(zrow, m.khronos, m.cfg.khronos, &caches[i]);
        std::copy(out.begin(), out.end(), y.data.begin() + static_cast<std::ptrdiff_t>(i) * O);
    }
    const Tensor xh = decode(m, z, &t_dec1);
    const Tensor z2 = seq_forward(m.encoder, xh, &t_enc2);
    const Tensor xhh = seq_forward(m.decoder, z2, &t_dec2);

    Tensor d_y, d_xh, d_z2, d_xhh;
    double task;
    if (m.cfg.task == TaskKind::Classification)
        task = task_loss_classification(y, labels.classes, &d_y);
    else
        task = task_loss_regression(y, labels.targets, &d_y);
    const double recon = mean_abs_error(xh, x, &d_xh);
    const double cycle = mean_abs_error(z2, z, &d_z2);
    const double deep = mean_abs_error(xhh, x, &d_xhh);
    const LossReport rep = composite_loss(task, recon, cycle, deep, w);

    // Deep path: x -> z -> xh -> z2 -> xhh.
    for (auto& v : d_xhh.data) v *= w.deep;
    Tensor g_z2 = seq_backward(m.decoder, t_dec2, d_xhh);
    Tensor g_xh = seq_backward(m.encoder, t_enc2, g_z2);
    axpy(g_xh, w.recon, d_xh);
    Tensor g_z = seq_backward(m.decoder, t_dec1, g_xh);
    // The cycle term trains only the decoder: with the encoder held as a fixed
    // map it teaches D to place its output where E returns the batch latents.
    // Routing cycle gradients into the encoder (via its weights or via a pull
    // on z) rewards a constant encoder -- E(D(z)) = z is trivially exact once
    // every image encodes to the same point -- and that collapse wins the race
    // against reconstruction while the decoder is still uninformative.
    for (auto& v : d_z2.data) v *= w.cycle;
    std::vector<Tensor> enc_wg, enc_bg;
    enc_wg.reserve(m.encoder.params.size());
    enc_bg.reserve(m.encoder.params.size());
    for (const auto& p : m.encoder.params) {
        enc_wg.push_back(p.weight_grads);
        enc_bg.push_back(p.bias_grads);
    }
    Tensor g_xh_cycle = seq_backward(m.encoder, t_enc2, d_z2);
    for (std::size_t i = 0; i < m.encoder.params.size(); ++i) {
        m.encoder.params[i].weight_grads = enc_wg[i];
        m.encoder.params[i].bias_grads = enc_bg[i];
    }
    seq_backward(m.decoder, t_dec1, g_xh_cycle);  // decoder weights; z is a leaf here
    std::vector<double> dy_row(static_cast<std::size_t>(O));
    for (int i = 0; i < n; ++i) {
        std::copy_n(d_y.data.begin() + static_cast<std::ptrdiff_t>(i) * O, O, dy_row.begin());
        khronos_grad_params(caches[i], dy_row, m.cfg.khronos, m.khronos.alpha_grads);
        const auto gz = khronos_vjp_z(caches[i], m.khronos, m.cfg.khronos, dy_row);
        for (int d = 0; d < M; ++d) g_z.data[static_cast<std::size_t>(i) * M + d] += gz[d];
    }
    seq_backward(m.encoder, t_enc1, g_z);
    return rep;
}

}  // namespace janus
