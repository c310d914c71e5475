#pragma once

#include <random>
#include <vector>

#include "janus/bspline.hpp"
#include "janus/tensor.hpp"

namespace janus {

/// Rank-r tensor-product expansion of quadratic B-splines on [0,1]^M.
struct KhronosConfig {
    int latent_dim = 64;   // M
    int rank = 4;          // r
    int basis_count = 8;   // S per dimension
    int output_dim = 1;    // O
    int degree = 2;

    void validate() const;
};

struct KhronosParams {
    Tensor alpha;        // [S, M, r, O]
    Tensor alpha_grads;  // same shape
};

KhronosParams init_khronos_params(const KhronosConfig& cfg, std::mt19937_64& rng);

/// Forward cache: per-dimension basis values/derivatives and the factor
/// table G[i,j,o] = sum_s alpha[s,i,j,o] * psi_s(z_i).
struct KhronosCache {
    std::vector<double> basis_values;  // [M, S]
    std::vector<double> basis_derivs;  // [M, S]
    std::vector<double> factors;       // [M, r, O]
};

/// y_o = sum_j prod_i G[i,j,o]. z is clamped into the spline domain.
std::vector<double> khronos_forward(const std::vector<double>& z, const KhronosParams& params,
                                    const KhronosConfig& cfg, KhronosCache* cache = nullptr);

/// Jacobian d y_o / d z_i as a row-major [O, M] matrix, reusing the cache.
std::vector<double> khronos_grad_z(const KhronosCache& cache, const KhronosParams& params,
                                   const KhronosConfig& cfg);

/// Accumulates upstream^T * (d y / d alpha) into `alpha_grads`.
void khronos_grad_params(const KhronosCache& cache, const std::vector<double>& upstream,
                         const KhronosConfig& cfg, Tensor& alpha_grads);

/// Vector-Jacobian product: upstream[O] -> gradient w.r.t. z[M].
std::vector<double> khronos_vjp_z(const KhronosCache& cache, const KhronosParams& params,
                                  const KhronosConfig& cfg, const std::vector<double>& upstream);

/// Row-wise forward over Z[N,M]; returns Y[N,O].
Tensor khronos_batch_forward(const Tensor& z, const KhronosParams& params,
                             const KhronosConfig& cfg);

}  // namespace janus
