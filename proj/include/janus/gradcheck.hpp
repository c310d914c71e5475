#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "janus/khronos.hpp"
#include "janus/layers.hpp"

namespace janus {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    // Probes whose difference window straddles a |.| or ReLU kink are skipped
    // (the central difference is meaningless there); more than 10% skipped
    // fails the check.
    int probes = 0;
    int skipped = 0;
    bool pass = false;
};

inline constexpr double kGradCheckTol = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

// max(|a|, |b|, 1e-6)-normalized disagreement.
double grad_rel_err(double analytic, double numeric);

// Input, weight and bias gradients of a single layer against central
// finite differences of a random linear functional of its output.
GradCheckResult gradcheck_layer(const LayerSpec& spec, const std::vector<int>& input_shape,
                                std::uint64_t seed);

// dK/dz and dK/dalpha of the head on a random instance.
GradCheckResult gradcheck_khronos(const KhronosConfig& cfg, std::uint64_t seed);

// Composite training loss on a tiny end-to-end model (both task kinds),
// probing elements of every parameter tensor.
GradCheckResult gradcheck_composite(bool classification, std::uint64_t seed);

// dJ/dz of the inversion objective on a tiny model.
GradCheckResult gradcheck_inversion(std::uint64_t seed);

// The full suite at tolerance 1e-4.
std::vector<GradCheckResult> gradcheck_all(std::uint64_t seed = 42);

}  // namespace janus
