#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace janus {

// Error taxonomy shared across the library.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};
struct InversionError : std::runtime_error {
    explicit InversionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense n-dimensional array of doubles, row-major flat storage.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v);

    std::size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 4-d accessor for [N,C,H,W] tensors (tests and small paths).
    double& at4(int n, int c, int h, int w);
    double at4(int n, int c, int h, int w) const;

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    void fill(double v);
    void zero() { fill(0.0); }
    bool all_finite() const;
};

std::size_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Throws ConfigError naming both shapes if they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace janus
