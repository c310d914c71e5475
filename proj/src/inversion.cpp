#include "janus/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "janus/bspline.hpp"
#include "janus/trainer.hpp"

namespace janus {

void InversionWeights::validate() const {
    if (!(align >= 0) || !(cycle >= 0) || !(deep >= 0))
        throw ConfigError("InversionWeights: all weights must be finite and >= 0");
}

void InversionConfig::validate() const {
    if (swarm_size < 1) throw ConfigError("InversionConfig: swarm_size must be >= 1");
    if (steps < 0) throw ConfigError("InversionConfig: steps must be >= 0");
    if (!(learning_rate > 0)) throw ConfigError("InversionConfig: learning_rate must be > 0");
    weights.validate();
}

double align_loss(const std::vector<double>& z, const Tensor& mu, const Tensor& sigma,
                  std::vector<double>* grad) {
    const std::size_t m = z.size();
    if (mu.numel() != m || sigma.numel() != m)
        throw ConfigError("align_loss: stats dims " + shape_str(mu.shape) + "/" +
                          shape_str(sigma.shape) + " do not match latent dim " +
                          std::to_string(m));
    if (grad) grad->assign(m, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double s = sigma.data[i];
        if (!(s > 0)) throw ConfigError("align_loss: sigma must be > 0");
        const double d = (z[i] - mu.data[i]) / s;
        sum += d * d;
        if (grad) (*grad)[i] = 2.0 * d / s;
    }
    return sum;
}

double inversion_objective(const std::vector<double>& z, double target, const JanusModel& m,
                           const InversionWeights& w, const Tensor& mu, const Tensor& sigma,
                           std::vector<double>* grad) {
    w.validate();
    const int M = m.cfg.latent_dim;
    const int O = m.cfg.khronos.output_dim;
    if (static_cast<int>(z.size()) != M)
        throw ConfigError("inversion_objective: z has " + std::to_string(z.size()) +
                          " dims, model wants " + std::to_string(M));

    KhronosCache cache;
    const auto y = khronos_forward(z, m.khronos, m.cfg.khronos, &cache);
    double task;
    std::vector<double> dy(static_cast<std::size_t>(O), 0.0);
    if (m.cfg.task == TaskKind::Regression) {
        const double diff = y[0] - target;
        task = diff * diff;
        dy[0] = 2.0 * diff;
    } else {
        const int t = static_cast<int>(target);
        if (t < 0 || t >= O || target != std::floor(target))
            throw ConfigError("inversion_objective: target class " + std::to_string(target) +
                              " not in {0.." + std::to_string(O - 1) + "}");
        const double mx = *std::max_element(y.begin(), y.end());
        double sum = 0.0;
        for (double v : y) sum += std::exp(v - mx);
        const double lse = mx + std::log(sum);
        task = lse - y[static_cast<std::size_t>(t)];
        for (int o = 0; o < O; ++o) dy[static_cast<std::size_t>(o)] = std::exp(y[o] - lse);
        dy[static_cast<std::size_t>(t)] -= 1.0;
    }

    std::vector<double> g_align;
    const double align = align_loss(z, mu, sigma, grad ? &g_align : nullptr);

    Tensor zt({1, M});
    std::copy(z.begin(), z.end(), zt.data.begin());
    Tape t_dec, t_enc, t_dec2;
    const Tensor xd = decode(m, zt, &t_dec);
    const Tensor z2 = seq_forward(m.encoder, xd, &t_enc);
    const Tensor xdd = seq_forward(m.decoder, z2, &t_dec2);

    const std::size_t P = xd.numel();
    double cycle = 0.0;
    for (int i = 0; i < M; ++i) cycle += std::abs(z2.data[static_cast<std::size_t>(i)] - z[i]);
    cycle /= M;
    double deep = 0.0;
    for (std::size_t i = 0; i < P; ++i) deep += std::abs(xdd.data[i] - xd.data[i]);
    deep /= static_cast<double>(P);

    const double J = task + w.align * align + w.cycle * cycle + w.deep * deep;
    if (!std::isfinite(J))
        throw InversionError("non-finite inversion objective: task=" + std::to_string(task) +
                             " align=" + std::to_string(align) + " cycle=" +
                             std::to_string(cycle) + " deep=" + std::to_string(deep));
    if (!grad) return J;

    // sign(xdd - xd) feeds the deep term twice: through the forward graph and
    // directly through the subtrahend D(z).
    Tensor d_xdd({1, m.cfg.channels, m.cfg.image_size, m.cfg.image_size});
    for (std::size_t i = 0; i < P; ++i) {
        const double d = xdd.data[i] - xd.data[i];
        d_xdd.data[i] = (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) * w.deep / static_cast<double>(P);
    }
    Tensor g_z2 = seq_backward_input_only(m.decoder, t_dec2, d_xdd);
    for (int i = 0; i < M; ++i) {
        const double d = z2.data[static_cast<std::size_t>(i)] - z[i];
        g_z2.data[static_cast<std::size_t>(i)] +=
            (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) * w.cycle / M;
    }
    Tensor g_xd = seq_backward_input_only(m.encoder, t_enc, g_z2);
    for (std::size_t i = 0; i < P; ++i) g_xd.data[i] -= d_xdd.data[i];
    const Tensor g_zt = seq_backward_input_only(m.decoder, t_dec, g_xd);

    const auto g_task = khronos_vjp_z(cache, m.khronos, m.cfg.khronos, dy);
    grad->assign(static_cast<std::size_t>(M), 0.0);
    for (int i = 0; i < M; ++i) {
        const double d = z2.data[static_cast<std::size_t>(i)] - z[i];
        (*grad)[static_cast<std::size_t>(i)] =
            g_zt.data[static_cast<std::size_t>(i)] + g_task[static_cast<std::size_t>(i)] +
            w.align * g_align[static_cast<std::size_t>(i)] -
            (d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) * w.cycle / M;
    }
    return J;
}

namespace {

void class_prior_stats(const JanusModel& m, const Dataset& ref, int cls, Tensor& mu, Tensor& sigma) {
    ref.validate();
    if (ref.kind != TaskKind::Classification)
        throw ConfigError("conditional prior needs a classification reference dataset");
    std::vector<int> idx;
    for (int i = 0; i < ref.size(); ++i)
        if (static_cast<int>(ref.labels[static_cast<std::size_t>(i)]) == cls) idx.push_back(i);
    if (idx.size() < 8)
        throw ConfigError("conditional prior for class " + std::to_string(cls) + " needs >= 8 "
                          "reference images, found " + std::to_string(idx.size()));
    const int M = m.cfg.latent_dim;
    const std::size_t elems = ref.images.numel() / static_cast<std::size_t>(ref.size());
    Tensor batch({static_cast<int>(idx.size()), ref.images.shape[1], ref.images.shape[2],
                  ref.images.shape[3]});
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(ref.images.data.begin() + std::ptrdiff_t(idx[i]) * elems, elems,
                    batch.data.begin() + std::ptrdiff_t(i) * elems);
    const Tensor z = encode(m, batch);
    mu = Tensor({M});
    sigma = Tensor({M});
    const auto n = static_cast<double>(idx.size());
    for (int d = 0; d < M; ++d) {
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double v = z.data[i * static_cast<std::size_t>(M) + d];
            s += v;
            ss += v * v;
        }
        const double mean = s / n;
        mu.data[d] = mean;
        sigma.data[d] = std::max(1e-6, std::sqrt(std::max(0.0, ss / n - mean * mean)));
    }
}

void prior_stats(const InversionConfig& cfg, const JanusModel& m, const Dataset* reference,
                 Tensor& mu, Tensor& sigma) {
    if (cfg.conditional_prior >= 0) {
        if (m.cfg.task != TaskKind::Classification)
            throw ConfigError("conditional prior is only defined for classification models");
        if (!reference)
            throw ConfigError("conditional prior requested but no reference dataset given");
        class_prior_stats(m, *reference, cfg.conditional_prior, mu, sigma);
    } else {
        if (!m.has_latent_stats())
            throw ConfigError("model has no fitted latent stats; train first");
        mu = m.latent_mean;
        sigma = m.latent_std;
    }
}

double clamp_domain(double v) { return std::clamp(v, kDomainEps, 1.0 - kDomainEps); }

}  // namespace

Tensor init_latents(const InversionConfig& cfg, const JanusModel& m, const Dataset* reference) {
    cfg.validate();
    Tensor mu, sigma;
    prior_stats(cfg, m, reference, mu, sigma);
    const int M = m.cfg.latent_dim;
    Tensor z0({cfg.swarm_size, M});
    for (int k = 0; k < cfg.swarm_size; ++k) {
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(k)));
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int d = 0; d < M; ++d)
            z0.data[static_cast<std::size_t>(k) * M + d] =
                clamp_domain(mu.data[d] + sigma.data[d] * dist(rng));
    }
    return z0;
}

std::vector<Candidate> invert(const JanusModel& m, const InversionConfig& cfg,
                              const Dataset* reference) {
    cfg.validate();
    Tensor mu, sigma;
    prior_stats(cfg, m, reference, mu, sigma);
    const Tensor z0 = init_latents(cfg, m, reference);
    const int M = m.cfg.latent_dim;
    const double target = m.cfg.task == TaskKind::Regression ? cfg.target * m.cfg.target_scale
                                                             : cfg.target;

    std::vector<Candidate> out;
    std::vector<std::string> failures;
    for (int k = 0; k < cfg.swarm_size; ++k) {
        try {
            Candidate c;
            c.member = k;
            Tensor zt({M}), gt({M});
            std::copy_n(z0.data.begin() + std::ptrdiff_t(k) * M, M, zt.data.begin());
            AdamState st;
            st.cfg.learning_rate = cfg.learning_rate;
            st.attach("z", zt, gt);
            c.objective_trace.reserve(static_cast<std::size_t>(cfg.steps));
            for (int step = 0; step < cfg.steps; ++step) {
                const double J =
                    inversion_objective(zt.data, target, m, cfg.weights, mu, sigma, &gt.data);
                c.objective_trace.push_back(J);
                adam_step(st);
                for (double& v : zt.data) v = clamp_domain(v);
            }
            c.z_final = zt.data;
            c.final_objective = inversion_objective(zt.data, target, m, cfg.weights, mu, sigma);
            const auto y = khronos_forward(zt.data, m.khronos, m.cfg.khronos);
            if (m.cfg.task == TaskKind::Regression) {
                c.predicted = y[0] / m.cfg.target_scale;
            } else {
                const auto arg = std::max_element(y.begin(), y.end()) - y.begin();
                c.predicted = static_cast<double>(arg);
                const double mx = *std::max_element(y.begin(), y.end());
                double sum = 0.0;
                for (double v : y) sum += std::exp(v - mx);
                c.confidence = std::exp(y[static_cast<std::size_t>(cfg.target)] - mx) / sum;
            }
            Tensor zrow({1, M});
            zrow.data = zt.data;
            const Tensor img = decode(m, zrow);
            c.image = Tensor({m.cfg.image_size, m.cfg.image_size});
            c.image.data = img.data;
            out.push_back(std::move(c));
        } catch (const InversionError& e) {
            failures.push_back("member " + std::to_string(k) + ": " + e.what());
        } catch (const DivergenceError& e) {
            failures.push_back("member " + std::to_string(k) + ": " + e.what());
        }
    }
    if (out.empty()) {
        std::string msg = "all " + std::to_string(cfg.swarm_size) + " swarm members failed";
        for (const auto& f : failures) msg += "\n  " + f;
        throw InversionError(msg);
    }
    std::stable_sort(out.begin(), out.end(), [&](const Candidate& a, const Candidate& b) {
        const double da = std::abs(a.predicted - cfg.target);
        const double db = std::abs(b.predicted - cfg.target);
        if (da != db) return da < db;
        if (a.final_objective != b.final_objective) return a.final_objective < b.final_objective;
        return a.member < b.member;
    });
    return out;
}

std::vector<Candidate> property_sweep(const std::vector<double>& targets, const JanusModel& m,
                                      const InversionConfig& cfg, const Dataset* reference) {
    if (targets.empty()) throw ConfigError("property_sweep: no targets");
    std::vector<Candidate> best;
    for (double t : targets) {
        InversionConfig c = cfg;
        c.target = t;
        best.push_back(invert(m, c, reference).front());
    }
    return best;
}

Candidate revalidate(Candidate c, double k1, double k2, double tol) {
    if (c.image.ndim() != 2) throw ConfigError("revalidate: candidate image must be [H,W]");
    Tensor binary(c.image.shape);
    for (std::size_t i = 0; i < binary.numel(); ++i)
        binary.data[i] = c.image.data[i] >= 0.5 ? 1.0 : 0.0;
    try {
        const auto sol = effective_conductivity(binary, k1, k2, tol);
        c.oracle_property = sol.k_eff;
        c.has_oracle = true;
        c.oracle_failed = false;
    } catch (const SolverError&) {
        c.has_oracle = false;
        c.oracle_failed = true;
    }
    return c;
}

void write_candidates_csv(const std::string& path, const std::vector<Candidate>& cands,
                          double target) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    f << "member,target,predicted,oracle,rel_err,final_objective\n";
    char line[512];
    for (const auto& c : cands) {
        const double denom = std::abs(target) > 0 ? std::abs(target) : 1.0;
        const double rel = std::abs(c.predicted - target) / denom;
        std::snprintf(line, sizeof line, "%d,%.6g,%.6g,%.6g,%.6g,%.6g\n", c.member, target,
                      c.predicted, c.has_oracle ? c.oracle_property : std::nan(""), rel,
                      c.final_objective);
        f << line;
    }
    if (!f) throw ParseError("write failed for " + path);
}

}  // namespace janus
