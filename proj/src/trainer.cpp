#include "janus/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace janus {

void AdamState::attach(const std::string& name, Tensor& param, Tensor& grad) {
    require_same_shape(param, grad, ("AdamState::attach(" + name + ")").c_str());
    AdamSlot s;
    s.name = name;
    s.param = &param;
    s.grad = &grad;
    s.m = Tensor(param.shape);
    s.v = Tensor(param.shape);
    slots.push_back(std::move(s));
}

namespace {

void attach_sequential(AdamState& st, const std::string& prefix, Sequential& seq) {
    for (std::size_t i = 0; i < seq.params.size(); ++i) {
        auto& p = seq.params[i];
        if (p.weights.numel() == 0) continue;
        const std::string base = prefix + "." + std::to_string(i);
        st.attach(base + ".weights", p.weights, p.weight_grads);
        st.attach(base + ".biases", p.biases, p.bias_grads);
    }
}

}  // namespace

AdamState make_adam(JanusModel& m, const AdamConfig& cfg) {
    AdamState st;
    st.cfg = cfg;
    attach_sequential(st, "encoder", m.encoder);
    attach_sequential(st, "decoder", m.decoder);
    st.attach("khronos.alpha", m.khronos.alpha, m.khronos.alpha_grads);
    return st;
}

void adam_step(AdamState& st) {
    ++st.t;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, double(st.t));
    const double c2 = 1.0 - std::pow(b2, double(st.t));
    for (auto& s : st.slots) {
        const std::size_t n = s.param->numel();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = s.grad->data[i];
            if (!std::isfinite(g))
                throw DivergenceError("non-finite gradient in " + s.name + " at element " +
                                      std::to_string(i));
            s.m.data[i] = b1 * s.m.data[i] + (1.0 - b1) * g;
            s.v.data[i] = b2 * s.v.data[i] + (1.0 - b2) * g * g;
            const double mhat = s.m.data[i] / c1;
            const double vhat = s.v.data[i] / c2;
            s.param->data[i] -= st.cfg.learning_rate * mhat / (std::sqrt(vhat) + st.cfg.eps);
        }
        s.grad->zero();
    }
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (!(target_scale > 0)) throw ConfigError("TrainConfig: target_scale must be > 0");
    if (eval_every < 1) throw ConfigError("TrainConfig: eval_every must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw ConfigError("TrainConfig: val_fraction must be in [0,1)");
    weights.validate();
}

namespace {

Dataset take_subset(const Dataset& ds, const std::vector<int>& idx) {
    Dataset out;
    out.kind = ds.kind;
    out.target_scale = ds.target_scale;
    const int n = static_cast<int>(idx.size());
    const std::size_t elems = ds.images.numel() / static_cast<std::size_t>(ds.size());
    out.images = Tensor({n, ds.images.shape[1], ds.images.shape[2], ds.images.shape[3]});
    out.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::copy_n(ds.images.data.begin() + std::ptrdiff_t(idx[i]) * elems, elems,
                    out.images.data.begin() + std::ptrdiff_t(i) * elems);
        out.labels[i] = ds.labels[std::size_t(idx[i])];
    }
    return out;
}

}  // namespace

void split_dataset(const Dataset& ds, double val_fraction, std::uint64_t seed, Dataset& train_out,
                   Dataset& val_out) {
    ds.validate();
    const int n = ds.size();
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, 0x73706c6974ull));  // "split"
    std::shuffle(idx.begin(), idx.end(), rng);
    int n_val = static_cast<int>(std::llround(val_fraction * n));
    n_val = std::min(n_val, n - 1);  // keep at least one training sample
    train_out = take_subset(ds, std::vector<int>(idx.begin(), idx.end() - n_val));
    if (n_val > 0)
        val_out = take_subset(ds, std::vector<int>(idx.end() - n_val, idx.end()));
    else
        val_out = Dataset{};
}

MetricsRecord evaluate(const JanusModel& m, const Dataset& ds, int epoch) {
    ds.validate();
    if ((ds.kind == TaskKind::Classification) != (m.cfg.task == TaskKind::Classification))
        throw ConfigError("evaluate: dataset kind does not match model task");
    const int n = ds.size();
    const int chunk = 64;
    const std::size_t elems = ds.images.numel() / static_cast<std::size_t>(n);
    MetricsRecord rec;
    rec.epoch = epoch;
    double recon_sum = 0, cycle_sum = 0, deep_sum = 0;
    std::size_t recon_cnt = 0, cycle_cnt = 0;
    int correct = 0;
    std::vector<double> preds(static_cast<std::size_t>(n));  // property units (regression)
    for (int lo = 0; lo < n; lo += chunk) {
        const int cnt = std::min(chunk, n - lo);
        Tensor x({cnt, ds.images.shape[1], ds.images.shape[2], ds.images.shape[3]});
        std::copy_n(ds.images.data.begin() + std::ptrdiff_t(lo) * elems, std::size_t(cnt) * elems,
                    x.data.begin());
        const Tensor z = encode(m, x);
        const Tensor y = khronos_batch_forward(z, m.khronos, m.cfg.khronos);
        const Tensor xh = decode(m, z);
        const Tensor z2 = seq_forward(m.encoder, xh);
        const Tensor xhh = seq_forward(m.decoder, z2);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            recon_sum += std::abs(xh.data[i] - x.data[i]);
            deep_sum += std::abs(xhh.data[i] - x.data[i]);
        }
        recon_cnt += x.numel();
        for (std::size_t i = 0; i < z.numel(); ++i) cycle_sum += std::abs(z2.data[i] - z.data[i]);
        cycle_cnt += z.numel();
        const int O = m.cfg.khronos.output_dim;
        for (int i = 0; i < cnt; ++i) {
            const double* row = y.data.data() + std::size_t(i) * O;
            if (m.cfg.task == TaskKind::Classification) {
                const int arg = int(std::max_element(row, row + O) - row);
                if (arg == int(ds.labels[std::size_t(lo + i)])) ++correct;
            } else {
                preds[std::size_t(lo + i)] = row[0] / m.cfg.target_scale;
            }
        }
    }
    rec.recon_mae = recon_sum / double(recon_cnt);
    rec.cycle_mae = cycle_sum / double(cycle_cnt);
    rec.deep_mae = deep_sum / double(recon_cnt);
    if (m.cfg.task == TaskKind::Classification) {
        rec.task_metric = double(correct) / n;
    } else {
        double mae = 0, abs_y = 0, mean_y = 0;
        for (int i = 0; i < n; ++i) {
            mae += std::abs(preds[std::size_t(i)] - ds.labels[std::size_t(i)]);
            abs_y += std::abs(ds.labels[std::size_t(i)]);
            mean_y += ds.labels[std::size_t(i)];
        }
        mae /= n, abs_y /= n, mean_y /= n;
        double ss_res = 0, ss_tot = 0;
        for (int i = 0; i < n; ++i) {
            ss_res += (ds.labels[std::size_t(i)] - preds[std::size_t(i)]) *
                      (ds.labels[std::size_t(i)] - preds[std::size_t(i)]);
            ss_tot += (ds.labels[std::size_t(i)] - mean_y) * (ds.labels[std::size_t(i)] - mean_y);
        }
        rec.task_metric = mae;
        rec.rel_mae = abs_y > 0 ? mae / abs_y : 0.0;
        rec.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
    }
    return rec;
}

std::vector<MetricsRecord> train(JanusModel& m, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate();
    if ((ds.kind == TaskKind::Classification) != (m.cfg.task == TaskKind::Classification))
        throw ConfigError("train: dataset kind does not match model task");
    std::vector<MetricsRecord> history;
    if (cfg.epochs == 0) return history;

    m.cfg.target_scale = cfg.target_scale;
    Dataset tr, val;
    split_dataset(ds, cfg.val_fraction, cfg.seed, tr, val);
    const Dataset& eval_ds = val.size() > 0 ? val : tr;

    AdamConfig ac;
    ac.learning_rate = cfg.learning_rate;
    AdamState adam = make_adam(m, ac);

    const int n = tr.size();
    const std::size_t elems = tr.images.numel() / static_cast<std::size_t>(n);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    JanusModel snapshot = m;
    for (int e = 0; e < cfg.epochs; ++e) {
        std::mt19937_64 rng(mix_seed(cfg.seed, 0x65706f6368ull, std::uint64_t(e)));  // "epoch"
        std::shuffle(order.begin(), order.end(), rng);
        for (int lo = 0; lo < n; lo += cfg.batch_size) {
            const int cnt = std::min(cfg.batch_size, n - lo);
            Tensor x({cnt, tr.images.shape[1], tr.images.shape[2], tr.images.shape[3]});
            BatchLabels labels;
            for (int i = 0; i < cnt; ++i) {
                const int src = order[std::size_t(lo + i)];
                std::copy_n(tr.images.data.begin() + std::ptrdiff_t(src) * elems, elems,
                            x.data.begin() + std::ptrdiff_t(i) * elems);
                if (m.cfg.task == TaskKind::Classification)
                    labels.classes.push_back(int(tr.labels[std::size_t(src)]));
                else
                    labels.targets.push_back(tr.labels[std::size_t(src)] * cfg.target_scale);
            }
            LossReport rep;
            try {
                rep = composite_forward_backward(m, x, labels, cfg.weights);
                if (rep.total > 1e6)
                    throw DivergenceError("loss diverged: total=" + std::to_string(rep.total) +
                                          " at epoch " + std::to_string(e + 1));
                adam_step(adam);
            } catch (const DivergenceError&) {
                m = snapshot;  // last epoch-end state
                throw;
            }
        }
        m.trained_epochs += 1;
        snapshot = m;
        if ((e + 1) % cfg.eval_every == 0 || e + 1 == cfg.epochs)
            history.push_back(evaluate(m, eval_ds, m.trained_epochs));
    }
    fit_latent_stats(m, tr.images);
    return history;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& history) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "epoch,task_metric,recon_mae,cycle_mae,deep_mae\n";
    char line[256];
    for (const auto& r : history) {
        std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g\n", r.epoch, r.task_metric,
                      r.recon_mae, r.cycle_mae, r.deep_mae);
        f << line;
    }
    if (!f) throw ParseError("write failed for " + path);
}

}  // namespace janus
