#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include "doctest.h"
#include "janus/khronos.hpp"

using namespace janus;

namespace {

// Direct nested-loop evaluation of y_o = sum_j prod_i sum_s alpha[s,i,j,o] *
// psi_s(z_i) -- no factor caching, no prefix products. Reference oracle for
// the separable implementation.
std::vector<double> nested_loop_forward(const std::vector<double>& z, const Tensor& alpha,
                                        const KhronosConfig& cfg) {
    const int M = cfg.latent_dim, r = cfg.rank, S = cfg.basis_count, O = cfg.output_dim;
    const BSplineBasis basis = BSplineBasis::uniform(S, cfg.degree);
    std::vector<double> psi(static_cast<std::size_t>(M) * S), d(static_cast<std::size_t>(S));
    for (int i = 0; i < M; ++i) bspline_eval(basis, z[i], &psi[static_cast<std::size_t>(i) * S], d.data());
    std::vector<double> y(static_cast<std::size_t>(O), 0.0);
    for (int o = 0; o < O; ++o) {
        for (int j = 0; j < r; ++j) {
            double prod = 1.0;
            for (int i = 0; i < M; ++i) {
                double g = 0.0;
                for (int s = 0; s < S; ++s) {
                    // alpha layout [S, M, r, O]
                    const std::size_t idx =
                        ((static_cast<std::size_t>(s) * M + i) * r + j) * O + o;
                    g += alpha.data[idx] * psi[static_cast<std::size_t>(i) * S + s];
                }
                prod *= g;
            }
            y[o] += prod;
        }
    }
    return y;
}

KhronosConfig make_cfg(int M, int r, int S, int O) {
    KhronosConfig cfg;
    cfg.latent_dim = M;
    cfg.rank = r;
    cfg.basis_count = S;
    cfg.output_dim = O;
    return cfg;
}

Tensor random_alpha(const KhronosConfig& cfg, std::mt19937_64& rng, double scale = 1.0) {
    Tensor a({cfg.basis_count, cfg.latent_dim, cfg.rank, cfg.output_dim});
    std::normal_distribution<double> dist(0.0, scale);
    for (double& v : a.data) v = dist(rng);
    return a;
}

std::vector<double> random_z(int M, std::mt19937_64& rng, double lo = 0.05, double hi = 0.95) {
    std::vector<double> z(static_cast<std::size_t>(M));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : z) v = dist(rng);
    return z;
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_NOTHROW(make_cfg(1, 1, 3, 1).validate());
    CHECK_THROWS_AS(make_cfg(0, 1, 5, 1).validate(), ConfigError);
    CHECK_THROWS_AS(make_cfg(2, 0, 5, 1).validate(), ConfigError);
    CHECK_THROWS_AS(make_cfg(2, 1, 2, 1).validate(), ConfigError);  // S < degree+1
    CHECK_THROWS_AS(make_cfg(2, 1, 5, 0).validate(), ConfigError);
}

TEST_CASE("all-ones coefficients collapse to rank by partition of unity") {
    const KhronosConfig cfg = make_cfg(3, 4, 6, 2);
    KhronosParams p;
    p.alpha = Tensor::full({6, 3, 4, 2}, 1.0);
    const auto y = khronos_forward({0.2, 0.5, 0.9}, p, cfg);
    REQUIRE(y.size() == 2);
    CHECK(y[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("zero coefficient slice annihilates its rank term") {
    const KhronosConfig cfg = make_cfg(2, 2, 5, 1);
    KhronosParams p;
    p.alpha = Tensor::full({5, 2, 2, 1}, 1.0);
    // Zero the slice (i=0, j=1, o=0) across s: rank term j=1 contributes 0.
    for (int s = 0; s < 5; ++s) p.alpha.data[((static_cast<std::size_t>(s) * 2 + 0) * 2 + 1) * 1] = 0.0;
    const auto y = khronos_forward({0.3, 0.6}, p, cfg);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-12));  // only j=0 remains
}

TEST_CASE("matches nested-loop reference on the spec instance") {
    const KhronosConfig cfg = make_cfg(2, 1, 6, 1);
    std::mt19937_64 rng(3);
    KhronosParams p;
    p.alpha = random_alpha(cfg, rng);
    const std::vector<double> z{0.3, 0.7};
    const auto y = khronos_forward(z, p, cfg);
    const auto ref = nested_loop_forward(z, p.alpha, cfg);
    CHECK(std::abs(y[0] - ref[0]) < 1e-12);
}

TEST_CASE("matches nested-loop reference on 100 random instances") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> uM(1, 5), ur(1, 3), uS(3, 8), uO(1, 3);
    for (int trial = 0; trial < 100; ++trial) {
        const KhronosConfig cfg = make_cfg(uM(rng), ur(rng), uS(rng), uO(rng));
        KhronosParams p;
        p.alpha = random_alpha(cfg, rng);
        const auto z = random_z(cfg.latent_dim, rng, 0.01, 0.99);
        const auto y = khronos_forward(z, p, cfg);
        const auto ref = nested_loop_forward(z, p.alpha, cfg);
        for (int o = 0; o < cfg.output_dim; ++o) CHECK(std::abs(y[o] - ref[o]) < 1e-12);
    }
}

TEST_CASE("constant-slice coefficients give zero jacobian") {
    // alpha[s,i,j,o] = c_{ijo} independent of s makes each factor a constant
    // (partition of unity), so K is constant in z.
    const KhronosConfig cfg = make_cfg(3, 2, 5, 2);
    std::mt19937_64 rng(5);
    KhronosParams p;
    p.alpha = Tensor({5, 3, 2, 2});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            for (int o = 0; o < 2; ++o) {
                const double c = dist(rng);
                for (int s = 0; s < 5; ++s)
                    p.alpha.data[((static_cast<std::size_t>(s) * 3 + i) * 2 + j) * 2 + o] = c;
            }
    KhronosCache cache;
    khronos_forward({0.2, 0.5, 0.8}, p, cfg, &cache);
    const auto jac = khronos_grad_z(cache, p, cfg);
    for (const double g : jac) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("M=1 jacobian is the direct spline derivative sum") {
    const KhronosConfig cfg = make_cfg(1, 3, 6, 1);
    std::mt19937_64 rng(9);
    KhronosParams p;
    p.alpha = random_alpha(cfg, rng);
    const double z = 0.42;
    KhronosCache cache;
    khronos_forward({z}, p, cfg, &cache);
    const auto jac = khronos_grad_z(cache, p, cfg);

    const BSplineBasis basis = BSplineBasis::uniform(6);
    std::vector<double> vals(6), derivs(6);
    bspline_eval(basis, z, vals.data(), derivs.data());
    double expect = 0.0;
    for (int j = 0; j < 3; ++j)
        for (int s = 0; s < 6; ++s)
            expect += p.alpha.data[(static_cast<std::size_t>(s) * 3 + j)] * derivs[s];
    CHECK(jac[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences on 20 instances") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> uM(1, 4), ur(1, 3), uS(4, 8), uO(1, 2);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        const KhronosConfig cfg = make_cfg(uM(rng), ur(rng), uS(rng), uO(rng));
        KhronosParams p;
        p.alpha = random_alpha(cfg, rng);
        auto z = random_z(cfg.latent_dim, rng);
        // Keep probes off the knot grid by a healthy margin.
        const BSplineBasis basis = BSplineBasis::uniform(cfg.basis_count);
        for (double& zi : z)
            for (const double t : basis.knots)
                if (std::abs(zi - t) < 1e-4) zi += 3e-4;

        KhronosCache cache;
        khronos_forward(z, p, cfg, &cache);
        const auto jac = khronos_grad_z(cache, p, cfg);

        for (int o = 0; o < cfg.output_dim; ++o) {
            for (int i = 0; i < cfg.latent_dim; ++i) {
                auto zp = z, zm = z;
                zp[i] += h;
                zm[i] -= h;
                const double fd =
                    (khronos_forward(zp, p, cfg)[o] - khronos_forward(zm, p, cfg)[o]) / (2 * h);
                const double a = jac[static_cast<std::size_t>(o) * cfg.latent_dim + i];
                const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
                CHECK(std::abs(a - fd) / denom < 1e-5);
            }
        }

        // Parameter gradients through a random upstream weighting.
        std::vector<double> up(static_cast<std::size_t>(cfg.output_dim));
        std::uniform_real_distribution<double> uu(-1.0, 1.0);
        for (double& u : up) u = uu(rng);
        p.alpha_grads = Tensor(p.alpha.shape);
        khronos_grad_params(cache, up, cfg, p.alpha_grads);
        const auto weighted = [&] {
            const auto y = khronos_forward(z, p, cfg);
            double s = 0.0;
            for (int o = 0; o < cfg.output_dim; ++o) s += up[static_cast<std::size_t>(o)] * y[o];
            return s;
        };
        std::uniform_int_distribution<std::size_t> pick(0, p.alpha.numel() - 1);
        for (int probe = 0; probe < 10; ++probe) {
            const std::size_t k = pick(rng);
            const double save = p.alpha.data[k];
            p.alpha.data[k] = save + h;
            const double fp = weighted();
            p.alpha.data[k] = save - h;
            const double fm = weighted();
            p.alpha.data[k] = save;
            const double fd = (fp - fm) / (2 * h);
            const double a = p.alpha_grads.data[k];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
            CHECK(std::abs(a - fd) / denom < 1e-5);
        }
    }
}

TEST_CASE("grad_params trivial cases") {
    const KhronosConfig cfg = make_cfg(1, 1, 5, 1);
    std::mt19937_64 rng(31);
    KhronosParams p;
    p.alpha = random_alpha(cfg, rng);
    p.alpha_grads = Tensor(p.alpha.shape);
    KhronosCache cache;
    khronos_forward({0.37}, p, cfg, &cache);

    khronos_grad_params(cache, {0.0}, cfg, p.alpha_grads);
    for (const double g : p.alpha_grads.data) CHECK(g == 0.0);

    const double up = 1.7;
    khronos_grad_params(cache, {up}, cfg, p.alpha_grads);
    const BSplineBasis basis = BSplineBasis::uniform(5);
    std::vector<double> vals(5), derivs(5);
    bspline_eval(basis, 0.37, vals.data(), derivs.data());
    for (int s = 0; s < 5; ++s)
        CHECK(p.alpha_grads.data[static_cast<std::size_t>(s)] ==
              doctest::Approx(vals[s] * up).epsilon(1e-12));
}

TEST_CASE("vjp_z equals upstream times jacobian") {
    const KhronosConfig cfg = make_cfg(4, 2, 6, 3);
    std::mt19937_64 rng(41);
    KhronosParams p;
    p.alpha = random_alpha(cfg, rng);
    const auto z = random_z(4, rng);
    KhronosCache cache;
    khronos_forward(z, p, cfg, &cache);
    const auto jac = khronos_grad_z(cache, p, cfg);
    const std::vector<double> up{0.3, -1.2, 0.8};
    const auto vjp = khronos_vjp_z(cache, p, cfg, up);
    for (int i = 0; i < 4; ++i) {
        double expect = 0.0;
        for (int o = 0; o < 3; ++o) expect += up[static_cast<std::size_t>(o)] * jac[static_cast<std::size_t>(o) * 4 + i];
        CHECK(vjp[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("batch forward equals row loop") {
    const KhronosConfig cfg = make_cfg(3, 2, 5, 2);
    std::mt19937_64 rng(51);
    KhronosParams p;
    p.alpha = random_alpha(cfg, rng);
    Tensor Z({4, 3});
    std::uniform_real_distribution<double> uz(0.05, 0.95);
    for (double& v : Z.data) v = uz(rng);

    const Tensor Y = khronos_batch_forward(Z, p, cfg);
    REQUIRE(Y.shape == std::vector<int>{4, 2});
    for (int n = 0; n < 4; ++n) {
        const std::vector<double> z(Z.data.begin() + n * 3, Z.data.begin() + (n + 1) * 3);
        const auto y = khronos_forward(z, p, cfg);
        for (int o = 0; o < 2; ++o)
            CHECK(std::abs(Y.data[static_cast<std::size_t>(n) * 2 + o] - y[o]) < 1e-15);
    }

    // Permuting rows permutes outputs identically.
    Tensor Zp({4, 3});
    const int perm[4] = {2, 0, 3, 1};
    for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 3; ++i)
            Zp.data[static_cast<std::size_t>(n) * 3 + i] = Z.data[static_cast<std::size_t>(perm[n]) * 3 + i];
    const Tensor Yp = khronos_batch_forward(Zp, p, cfg);
    for (int n = 0; n < 4; ++n)
        for (int o = 0; o < 2; ++o)
            CHECK(Yp.data[static_cast<std::size_t>(n) * 2 + o] ==
                  Y.data[static_cast<std::size_t>(perm[n]) * 2 + o]);
}

TEST_CASE("second-order remainder shrinks quadratically") {
    // K is piecewise quadratic per coordinate, so within one knot span the
    // Taylor remainder is exactly (d^2K/dz^2) * delta^2 / 2: a 10x smaller
    // delta gives a 100x smaller remainder.
    const KhronosConfig cfg = make_cfg(3, 2, 8, 1);
    std::mt19937_64 rng(61);
    KhronosParams p;
    p.alpha = random_alpha(cfg, rng);
    // Mid-span point: knot spans are ~1/6 wide, so +-1e-2 stays inside.
    const std::vector<double> z{0.25 + 1e-3, 0.4 + 2e-3, 0.75 - 1e-3};
    KhronosCache cache;
    const double y0 = khronos_forward(z, p, cfg, &cache)[0];
    const auto jac = khronos_grad_z(cache, p, cfg);
    int asserted = 0;
    for (int i = 0; i < 3; ++i) {
        const auto rem = [&](double delta) {
            auto zp = z;
            zp[static_cast<std::size_t>(i)] += delta;
            return std::abs(khronos_forward(zp, p, cfg)[0] - y0 - delta * jac[static_cast<std::size_t>(i)]);
        };
        const double r2 = rem(1e-2), r3 = rem(1e-3);
        if (r2 > 1e-10) {
            CHECK(r2 / r3 == doctest::Approx(100.0).epsilon(0.05));
            ++asserted;
        }
    }
    CHECK(asserted >= 1);
}

TEST_CASE("init keeps factors near one with spread 0.1/sqrt(M)") {
    KhronosConfig cfg = make_cfg(16, 6, 8, 10);
    std::mt19937_64 rng(71);
    const KhronosParams p = init_khronos_params(cfg, rng);
    REQUIRE(p.alpha.shape == std::vector<int>{8, 16, 6, 10});
    REQUIRE(p.alpha_grads.shape == p.alpha.shape);
    double mean = 0.0, var = 0.0;
    for (const double v : p.alpha.data) mean += v;
    mean /= static_cast<double>(p.alpha.numel());
    for (const double v : p.alpha.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.alpha.numel());
    const double want = 0.1 / std::sqrt(16.0);
    CHECK(std::abs(mean - 1.0) < 0.002);
    CHECK(std::sqrt(var) == doctest::Approx(want).epsilon(0.05));
    for (const double v : p.alpha_grads.data) CHECK(v == 0.0);

    // The point of the init: an untrained head must produce O(1) outputs and
    // O(1) coefficient gradients, not products that vanish with M.
    std::vector<double> z = random_z(16, rng);
    KhronosCache cache;
    const auto y = khronos_forward(z, p, cfg, &cache);
    for (const double v : y) {
        CHECK(std::abs(v) > 1.0);
        CHECK(std::abs(v) < 50.0);
    }
    Tensor ag(p.alpha.shape);
    std::vector<double> up(10, 1.0);
    khronos_grad_params(cache, up, cfg, ag);
    double gmax = 0.0;
    for (const double g : ag.data) gmax = std::max(gmax, std::abs(g));
    CHECK(gmax > 0.05);
    CHECK(gmax < 100.0);
}

TEST_CASE("first evaluation on a fresh thread handles default-sized configs") {
    // The per-thread basis cache must not mistake its default-constructed
    // state for an already-built S=8 degree-2 basis.
    KhronosConfig cfg = make_cfg(16, 6, 8, 10);
    std::mt19937_64 rng(81);
    const Tensor alpha = random_alpha(cfg, rng, 0.3);
    KhronosParams p;
    p.alpha = alpha;
    const std::vector<double> z = random_z(16, rng);
    const std::vector<double> want = nested_loop_forward(z, alpha, cfg);
    std::vector<double> got;
    std::thread worker([&] { got = khronos_forward(z, p, cfg); });
    worker.join();
    REQUIRE(got.size() == want.size());
    for (std::size_t o = 0; o < want.size(); ++o)
        CHECK(got[o] == doctest::Approx(want[o]).epsilon(1e-12));
}
