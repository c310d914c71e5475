#include <cmath>
#include <limits>

#include "doctest.h"
#include "janus/tensor.hpp"

using namespace janus;

TEST_CASE("tensor construction and shape accounting") {
    Tensor t({2, 3, 4});
    CHECK(t.ndim() == 3);
    CHECK(t.numel() == 24);
    CHECK(t.dim(1) == 3);
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);

    Tensor f = Tensor::full({2, 2}, 1.5);
    CHECK(f.numel() == 4);
    CHECK(f[3] == 1.5);

    Tensor empty;
    CHECK(empty.ndim() == 0);
    CHECK(empty.numel() == 0);
}

TEST_CASE("at4 uses row-major NCHW order") {
    Tensor t({2, 3, 4, 5});
    t.at4(1, 2, 3, 4) = 7.0;
    // flat = ((n*C + c)*H + h)*W + w
    CHECK(t[((1 * 3 + 2) * 4 + 3) * 5 + 4] == 7.0);
    t[0] = -1.0;
    CHECK(t.at4(0, 0, 0, 0) == -1.0);
}

TEST_CASE("fill, zero and all_finite") {
    Tensor t({3});
    t.fill(2.0);
    CHECK(t[0] == 2.0);
    CHECK(t[2] == 2.0);
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK(!t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    CHECK(!t.all_finite());
    t.zero();
    CHECK(t.all_finite());
    CHECK(t[1] == 0.0);
}

TEST_CASE("shape helpers") {
    CHECK(numel_of({2, 3}) == 6);
    CHECK(numel_of({}) == 1);
    CHECK(shape_str({2, 3}) == "[2,3]");

    Tensor a({2, 3}), b({2, 3}), c({3, 2});
    CHECK_NOTHROW(require_same_shape(a, b, "test"));
    CHECK_THROWS_AS(require_same_shape(a, c, "test"), ConfigError);
    try {
        require_same_shape(a, c, "somewhere");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("somewhere") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[3,2]") != std::string::npos);
    }
}

TEST_CASE("error taxonomy is distinct but runtime_error based") {
    CHECK_THROWS_AS(throw ConfigError("x"), std::runtime_error);
    CHECK_THROWS_AS(throw ParseError("x"), std::runtime_error);
    CHECK_THROWS_AS(throw SolverError("x"), std::runtime_error);
    CHECK_THROWS_AS(throw DivergenceError("x"), std::runtime_error);
    CHECK_THROWS_AS(throw InversionError("x"), std::runtime_error);
}
