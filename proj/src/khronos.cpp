#include "janus/khronos.hpp"

#include <cmath>

namespace janus {

void KhronosConfig::validate() const {
    if (latent_dim < 1 || rank < 1 || output_dim < 1)
        throw ConfigError("KhronosConfig: M, r, O must all be >= 1");
    if (basis_count < degree + 1)
        throw ConfigError("KhronosConfig: basis_count " + std::to_string(basis_count) +
                          " < degree+1");
}

KhronosParams init_khronos_params(const KhronosConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    KhronosParams p;
    p.alpha = Tensor({cfg.basis_count, cfg.latent_dim, cfg.rank, cfg.output_dim});
    p.alpha_grads = Tensor(p.alpha.shape);
    // Mean-one coefficients keep every per-dimension factor near 1 (the basis
    // is a partition of unity), so rank-term products start O(1) for any M.
    // A zero-mean init makes products of M small factors vanish past Adam's
    // epsilon floor and the head never receives a usable gradient.
    std::normal_distribution<double> dist(1.0, 0.1 / std::sqrt(double(cfg.latent_dim)));
    for (double& a : p.alpha.data) a = dist(rng);
    return p;
}

namespace {

inline std::size_t alpha_index(const KhronosConfig& c, int s, int i, int j, int o) {
    return static_cast<std::size_t>(((s * c.latent_dim + i) * c.rank + j) * c.output_dim + o);
}

}  // namespace

std::vector<double> khronos_forward(const std::vector<double>& z, const KhronosParams& params,
                                    const KhronosConfig& cfg, KhronosCache* cache) {
    const int M = cfg.latent_dim, r = cfg.rank, O = cfg.output_dim, S = cfg.basis_count;
    if (static_cast<int>(z.size()) != M)
        throw ConfigError("khronos_forward: z has " + std::to_string(z.size()) +
                          " dims, expected " + std::to_string(M));
    if (!params.alpha.all_finite()) throw ConfigError("khronos_forward: non-finite coefficients");

    static thread_local BSplineBasis basis;
    if (basis.knots.empty() || basis.count != S || basis.degree != cfg.degree)
        basis = BSplineBasis::uniform(S, cfg.degree);

    KhronosCache local;
    KhronosCache& c = cache ? *cache : local;
    c.basis_values.assign(static_cast<std::size_t>(M) * S, 0.0);
    c.basis_derivs.assign(static_cast<std::size_t>(M) * S, 0.0);
    c.factors.assign(static_cast<std::size_t>(M) * r * O, 0.0);

    const double* a = params.alpha.data.data();
    for (int i = 0; i < M; ++i) {
        double* vals = &c.basis_values[static_cast<std::size_t>(i) * S];
        double* ders = &c.basis_derivs[static_cast<std::size_t>(i) * S];
        bspline_eval(basis, z[i], vals, ders);
        double* gi = &c.factors[static_cast<std::size_t>(i) * r * O];
        for (int s = 0; s < S; ++s) {
            const double v = vals[s];
            if (v == 0.0) continue;
            const double* arow = &a[alpha_index(cfg, s, i, 0, 0)];
            for (int jo = 0; jo < r * O; ++jo) gi[jo] += v * arow[jo];
        }
    }

    std::vector<double> y(static_cast<std::size_t>(O), 0.0);
    for (int j = 0; j < r; ++j) {
        for (int o = 0; o < O; ++o) {
            double prod = 1.0;
            for (int i = 0; i < M; ++i)
                prod *= c.factors[(static_cast<std::size_t>(i) * r + j) * O + o];
            y[o] += prod;
        }
    }
    return y;
}

namespace {

// prefix[i] = prod_{i'<i} G[i'], suffix[i] = prod_{i'>=i} G[i'] for one (j,o).
void prefix_suffix(const KhronosCache& c, const KhronosConfig& cfg, int j, int o,
                   std::vector<double>& prefix, std::vector<double>& suffix) {
    const int M = cfg.latent_dim, r = cfg.rank, O = cfg.output_dim;
    prefix.resize(M + 1);
    suffix.resize(M + 1);
    prefix[0] = 1.0;
    for (int i = 0; i < M; ++i)
        prefix[i + 1] = prefix[i] * c.factors[(static_cast<std::size_t>(i) * r + j) * O + o];
    suffix[M] = 1.0;
    for (int i = M; i-- > 0;)
        suffix[i] = suffix[i + 1] * c.factors[(static_cast<std::size_t>(i) * r + j) * O + o];
}

}  // namespace

std::vector<double> khronos_grad_z(const KhronosCache& cache, const KhronosParams& params,
                                   const KhronosConfig& cfg) {
    const int M = cfg.latent_dim, r = cfg.rank, O = cfg.output_dim, S = cfg.basis_count;
    std::vector<double> jac(static_cast<std::size_t>(O) * M, 0.0);
    std::vector<double> pre, suf;
    const double* a = params.alpha.data.data();
    for (int o = 0; o < O; ++o) {
        for (int j = 0; j < r; ++j) {
            prefix_suffix(cache, cfg, j, o, pre, suf);
            for (int i = 0; i < M; ++i) {
                const double others = pre[i] * suf[i + 1];
                if (others == 0.0) continue;
                double dGi = 0.0;
                const double* ders = &cache.basis_derivs[static_cast<std::size_t>(i) * S];
                for (int s = 0; s < S; ++s) {
                    if (ders[s] == 0.0) continue;
                    dGi += a[alpha_index(cfg, s, i, j, o)] * ders[s];
                }
                jac[static_cast<std::size_t>(o) * M + i] += others * dGi;
            }
        }
    }
    return jac;
}

void khronos_grad_params(const KhronosCache& cache, const std::vector<double>& upstream,
                         const KhronosConfig& cfg, Tensor& alpha_grads) {
    const int M = cfg.latent_dim, r = cfg.rank, O = cfg.output_dim, S = cfg.basis_count;
    std::vector<double> pre, suf;
    double* g = alpha_grads.data.data();
    for (int o = 0; o < O; ++o) {
        const double u = upstream[static_cast<std::size_t>(o)];
        if (u == 0.0) continue;
        for (int j = 0; j < r; ++j) {
            prefix_suffix(cache, cfg, j, o, pre, suf);
            for (int i = 0; i < M; ++i) {
                const double scale = u * pre[i] * suf[i + 1];
                if (scale == 0.0) continue;
                const double* vals = &cache.basis_values[static_cast<std::size_t>(i) * S];
                for (int s = 0; s < S; ++s) {
                    if (vals[s] == 0.0) continue;
                    g[alpha_index(cfg, s, i, j, o)] += scale * vals[s];
                }
            }
        }
    }
}

std::vector<double> khronos_vjp_z(const KhronosCache& cache, const KhronosParams& params,
                                  const KhronosConfig& cfg, const std::vector<double>& upstream) {
    const int M = cfg.latent_dim, O = cfg.output_dim;
    const std::vector<double> jac = khronos_grad_z(cache, params, cfg);
    std::vector<double> gz(static_cast<std::size_t>(M), 0.0);
    for (int o = 0; o < O; ++o) {
        const double u = upstream[static_cast<std::size_t>(o)];
        if (u == 0.0) continue;
        for (int i = 0; i < M; ++i) gz[i] += u * jac[static_cast<std::size_t>(o) * M + i];
    }
    return gz;
}

Tensor khronos_batch_forward(const Tensor& z, const KhronosParams& params,
                             const KhronosConfig& cfg) {
    if (z.ndim() != 2 || z.shape[1] != cfg.latent_dim)
        throw ConfigError("khronos_batch_forward: expected [N," +
                          std::to_string(cfg.latent_dim) + "], got " + shape_str(z.shape));
    const int N = z.shape[0], M = cfg.latent_dim, O = cfg.output_dim;
    Tensor y({N, O});
    std::vector<double> row(static_cast<std::size_t>(M));
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i < M; ++i) row[i] = z.data[static_cast<std::size_t>(n) * M + i];
        const std::vector<double> out = khronos_forward(row, params, cfg, nullptr);
        for (int o = 0; o < O; ++o) y.data[static_cast<std::size_t>(n) * O + o] = out[o];
    }
    return y;
}

}  // namespace janus
