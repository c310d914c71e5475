#include "janus/tensor.hpp"

#include <cmath>
#include <sstream>

namespace janus {

std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ConfigError("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

Tensor Tensor::full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    t.fill(v);
    return t;
}

double& Tensor::at4(int n, int c, int h, int w) {
    const int C = shape[1], H = shape[2], W = shape[3];
    return data[static_cast<std::size_t>(((n * C + c) * H + h) * W + w)];
}

double Tensor::at4(int n, int c, int h, int w) const {
    const int C = shape[1], H = shape[2], W = shape[3];
    return data[static_cast<std::size_t>(((n * C + c) * H + h) * W + w)];
}

void Tensor::fill(double v) {
    for (double& x : data) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw ConfigError(std::string(where) + ": shape mismatch " + shape_str(a.shape) +
                          " vs " + shape_str(b.shape));
}

}  // namespace janus
