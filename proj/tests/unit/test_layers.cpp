#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "janus/layers.hpp"

using namespace janus;

namespace {

Tensor randn(const std::vector<int>& shape, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(shape);
    std::normal_distribution<double> dist(0.0, scale);
    for (double& v : t.data) v = dist(rng);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// <F(dx), u> == <dx, F^T(u)> for layers that are linear maps of their input
// (with biases zeroed); exactness up to floating-point reassociation.
void check_adjoint(const LayerSpec& spec, const std::vector<int>& in_shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Sequential seq;
    seq.add(spec, rng);
    if (!seq.params[0].biases.data.empty()) seq.params[0].biases.zero();

    const Tensor dx = randn(in_shape, rng);
    Tape tape;
    const Tensor y = seq_forward(seq, dx, &tape);
    const Tensor u = randn(y.shape, rng);
    seq.zero_grads();
    const Tensor dxt = seq_backward(seq, tape, u);
    const double lhs = dot(y, u);
    const double rhs = dot(dx, dxt);
    const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    CHECK(std::abs(lhs - rhs) / denom < 1e-8);
}

}  // namespace

TEST_CASE("conv2d zero input yields bias everywhere") {
    std::mt19937_64 rng(1);
    Sequential seq;
    seq.add(LayerSpec::conv2d(1, 2, 3, 1, 1), rng);
    seq.params[0].biases.data = {0.5, -1.25};
    const Tensor x({1, 1, 3, 3});
    const Tensor y = seq_forward(seq, x);
    REQUIRE(y.shape == std::vector<int>{1, 2, 3, 3});
    for (int h = 0; h < 3; ++h)
        for (int w = 0; w < 3; ++w) {
            CHECK(y.at4(0, 0, h, w) == 0.5);
            CHECK(y.at4(0, 1, h, w) == -1.25);
        }
}

TEST_CASE("conv2d 1x1 identity kernel is the identity") {
    std::mt19937_64 rng(2);
    Sequential seq;
    seq.add(LayerSpec::conv2d(1, 1, 1, 1, 0), rng);
    seq.params[0].weights.data = {1.0};
    seq.params[0].biases.data = {0.0};
    Tensor x({1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) x.data[static_cast<std::size_t>(i)] = i + 1.0;
    Tape tape;
    const Tensor y = seq_forward(seq, x, &tape);
    for (std::size_t i = 0; i < 9; ++i) CHECK(y.data[i] == x.data[i]);

    // Adjoint of the identity: input grad equals upstream.
    std::mt19937_64 rng2(3);
    const Tensor u = randn(y.shape, rng2);
    seq.zero_grads();
    const Tensor gx = seq_backward(seq, tape, u);
    for (std::size_t i = 0; i < 9; ++i) CHECK(gx.data[i] == u.data[i]);
}

TEST_CASE("conv2d hand-evaluated sliding window") {
    std::mt19937_64 rng(4);
    Sequential seq;
    seq.add(LayerSpec::conv2d(1, 1, 2, 1, 0), rng);
    seq.params[0].weights.fill(1.0);
    seq.params[0].biases.data = {0.0};
    Tensor x({1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) x.data[static_cast<std::size_t>(i)] = i + 1.0;
    const Tensor y = seq_forward(seq, x);
    REQUIRE(y.shape == std::vector<int>{1, 1, 2, 2});
    CHECK(y.data[0] == 12.0);
    CHECK(y.data[1] == 16.0);
    CHECK(y.data[2] == 24.0);
    CHECK(y.data[3] == 28.0);
}

TEST_CASE("conv2d backward trivial cases") {
    std::mt19937_64 rng(5);
    Sequential seq;
    seq.add(LayerSpec::conv2d(1, 1, 3, 1, 1), rng);
    Tensor x = randn({1, 1, 4, 4}, rng);
    Tape tape;
    const Tensor y = seq_forward(seq, x, &tape);
    seq.zero_grads();
    const Tensor gx = seq_backward(seq, tape, Tensor(y.shape));
    for (const double g : gx.data) CHECK(g == 0.0);
    for (const double g : seq.params[0].weight_grads.data) CHECK(g == 0.0);
    for (const double g : seq.params[0].bias_grads.data) CHECK(g == 0.0);
}

TEST_CASE("conv2d stride-2 output uses floor shapes") {
    const LayerSpec s = LayerSpec::conv2d(1, 4, 3, 2, 1);
    CHECK(layer_output_shape(s, {1, 1, 8, 8}) == std::vector<int>{1, 4, 4, 4});
    CHECK(layer_output_shape(s, {2, 1, 28, 28}) == std::vector<int>{2, 4, 14, 14});
    CHECK(layer_output_shape(s, {1, 1, 64, 64}) == std::vector<int>{1, 4, 32, 32});
    CHECK(layer_output_shape(s, {1, 1, 7, 7}) == std::vector<int>{1, 4, 4, 4});
    CHECK_THROWS_AS(layer_output_shape(s, {1, 2, 8, 8}), ConfigError);  // wrong channels
    CHECK_THROWS_AS(layer_output_shape(LayerSpec::conv2d(1, 1, 9, 1, 0), {1, 1, 4, 4}),
                    ConfigError);  // kernel larger than padded input
}

TEST_CASE("bilinear upsample hand cases") {
    std::mt19937_64 rng(6);
    Sequential seq;
    seq.add(LayerSpec::upsample2x(), rng);

    Tensor c = Tensor::full({1, 1, 3, 2}, 0.7);
    const Tensor yc = seq_forward(seq, c);
    REQUIRE(yc.shape == std::vector<int>{1, 1, 6, 4});
    for (const double v : yc.data) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

    Tensor single = Tensor::full({1, 1, 1, 1}, 3.25);
    const Tensor ys = seq_forward(seq, single);
    REQUIRE(ys.shape == std::vector<int>{1, 1, 2, 2});
    for (const double v : ys.data) CHECK(v == 3.25);

    // align_corners=false: output (1,1) samples input at (0.25, 0.25), giving
    // 0.5625*0 + 0.1875*1 + 0.1875*2 + 0.0625*3 = 0.75.
    Tensor q({1, 1, 2, 2});
    q.data = {0.0, 1.0, 2.0, 3.0};
    const Tensor yq = seq_forward(seq, q);
    REQUIRE(yq.shape == std::vector<int>{1, 1, 4, 4});
    CHECK(yq.at4(0, 0, 1, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("dense trivial cases") {
    std::mt19937_64 rng(7);
    Sequential seq;
    seq.add(LayerSpec::dense(3, 3), rng);
    auto& p = seq.params[0];
    p.weights.zero();
    // Identity weight matrix.
    for (int i = 0; i < 3; ++i) p.weights.data[static_cast<std::size_t>(i) * 3 + i] = 1.0;
    p.biases.zero();
    Tensor x({2, 3});
    x.data = {1.0, -2.0, 3.0, 0.5, 0.25, -0.125};
    const Tensor y = seq_forward(seq, x);
    for (std::size_t i = 0; i < 6; ++i) CHECK(y.data[i] == x.data[i]);

    p.biases.data = {0.1, 0.2, 0.3};
    const Tensor yb = seq_forward(seq, Tensor({1, 3}));
    CHECK(yb.data[0] == 0.1);
    CHECK(yb.data[1] == 0.2);
    CHECK(yb.data[2] == 0.3);
}

TEST_CASE("activations") {
    std::mt19937_64 rng(8);
    Sequential relu, logi;
    relu.add(LayerSpec::relu(), rng);
    logi.add(LayerSpec::logistic(), rng);

    Tensor x({1, 3});
    x.data = {-2.0, 0.0, 3.0};
    const Tensor yr = seq_forward(relu, x);
    CHECK(yr.data[0] == 0.0);
    CHECK(yr.data[1] == 0.0);
    CHECK(yr.data[2] == 3.0);

    const Tensor yl = seq_forward(logi, x);
    CHECK(yl.data[1] == 0.5);
    for (const double v : yl.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    // Logistic'(0) = 0.25 against a central difference.
    const double h = 1e-6;
    Tensor xp({1, 1}), xm({1, 1});
    xp.data = {h};
    xm.data = {-h};
    const double fd = (seq_forward(logi, xp).data[0] - seq_forward(logi, xm).data[0]) / (2 * h);
    CHECK(std::abs(fd - 0.25) < 1e-8);

    Tape tape;
    Tensor x0({1, 1});
    seq_forward(logi, x0, &tape);
    Tensor u({1, 1});
    u.data = {1.0};
    const Tensor g = seq_backward(logi, tape, u);
    CHECK(g.data[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("clamp01 saturates at both rails with pass-through gradient inside") {
    std::mt19937_64 rng(8);
    Sequential cl;
    cl.add(LayerSpec::clamp01(), rng);

    Tensor x({1, 5});
    x.data = {-0.5, 0.0, 0.4, 1.0, 2.3};
    Tape tape;
    const Tensor y = seq_forward(cl, x, &tape);
    CHECK(y.data == std::vector<double>{0.0, 0.0, 0.4, 1.0, 1.0});

    Tensor u({1, 5});
    u.data = {1.0, 2.0, 3.0, 4.0, 5.0};
    const Tensor g = seq_backward(cl, tape, u);
    // gradient only where the clamp is strictly inside (0,1); rails count as
    // saturated so the loss pressure stops there
    CHECK(g.data == std::vector<double>{0.0, 0.0, 3.0, 0.0, 0.0});
}

TEST_CASE("relu subgradient at zero is zero") {
    std::mt19937_64 rng(9);
    Sequential relu;
    relu.add(LayerSpec::relu(), rng);
    Tape tape;
    Tensor x({1, 1});
    seq_forward(relu, x, &tape);
    Tensor u({1, 1});
    u.data = {2.5};
    const Tensor g = seq_backward(relu, tape, u);
    CHECK(g.data[0] == 0.0);
}

TEST_CASE("flatten and reshape round trip") {
    std::mt19937_64 rng(10);
    Sequential seq;
    seq.add(LayerSpec::flatten(), rng);
    seq.add(LayerSpec::reshape({2, 3, 2}), rng);
    const Tensor x = randn({2, 2, 3, 2}, rng);
    Tape tape;
    const Tensor y = seq_forward(seq, x, &tape);
    REQUIRE(y.shape == std::vector<int>{2, 2, 3, 2});
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data[i] == x.data[i]);

    const Tensor u = randn(y.shape, rng);
    const Tensor g = seq_backward(seq, tape, u);
    for (std::size_t i = 0; i < u.numel(); ++i) CHECK(g.data[i] == u.data[i]);

    CHECK_THROWS_AS(layer_output_shape(LayerSpec::reshape({5, 5}), {1, 24}), ConfigError);
}

TEST_CASE("adjoint identity for linear layers") {
    check_adjoint(LayerSpec::conv2d(2, 3, 3, 1, 1), {2, 2, 5, 4}, 101);
    check_adjoint(LayerSpec::conv2d(1, 2, 3, 2, 1), {2, 1, 7, 8}, 102);
    check_adjoint(LayerSpec::dense(6, 4), {3, 6}, 103);
    check_adjoint(LayerSpec::upsample2x(), {2, 2, 3, 4}, 104);
    check_adjoint(LayerSpec::flatten(), {2, 3, 2, 2}, 105);
    check_adjoint(LayerSpec::reshape({4, 3}), {2, 12}, 106);
}

TEST_CASE("forward passes are pure") {
    std::mt19937_64 rng(11);
    Sequential seq;
    seq.add(LayerSpec::conv2d(1, 3, 3, 2, 1), rng);
    seq.add(LayerSpec::relu(), rng);
    seq.add(LayerSpec::flatten(), rng);
    seq.add(LayerSpec::dense(3 * 4 * 4, 5), rng);
    seq.add(LayerSpec::logistic(), rng);
    const Tensor x = randn({2, 1, 8, 8}, rng);
    const Tensor y1 = seq_forward(seq, x);
    const Tensor y2 = seq_forward(seq, x);
    REQUIRE(y1.shape == y2.shape);
    for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1.data[i] == y2.data[i]);
}

TEST_CASE("sequential validate reports shape chains") {
    std::mt19937_64 rng(12);
    Sequential seq;
    seq.add(LayerSpec::conv2d(1, 2, 3, 2, 1), rng);
    seq.add(LayerSpec::flatten(), rng);
    seq.add(LayerSpec::dense(2 * 4 * 4, 3), rng);
    CHECK(seq.validate({1, 8, 8}) == std::vector<int>{3});
    // Batched forward honors the same chain for any N.
    for (const int n : {1, 2, 5}) {
        const Tensor y = seq_forward(seq, Tensor({n, 1, 8, 8}));
        CHECK(y.shape == std::vector<int>{n, 3});
    }
    Sequential bad;
    bad.add(LayerSpec::conv2d(1, 2, 3, 2, 1), rng);
    bad.add(LayerSpec::dense(10, 3), rng);  // dense straight after conv: rank mismatch
    CHECK_THROWS_AS(bad.validate({1, 8, 8}), ConfigError);
}
