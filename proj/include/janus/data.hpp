#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "janus/model.hpp"
#include "janus/tensor.hpp"

namespace janus {

struct Dataset {
    Tensor images;               // [N,1,H,W], values in [0,1]
    std::vector<double> labels;  // class index (classification) or property value (regression)
    TaskKind kind = TaskKind::Classification;
    double target_scale = 1.0;
    int size() const { return images.ndim() == 4 ? images.shape[0] : 0; }
    void validate() const;
};

// MNIST-style IDX pair: big-endian, image magic 0x00000803, label magic
// 0x00000801. Pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

struct MicroGenParams {
    int grid = 64;
    double corr_len_min = 3.0;
    double corr_len_max = 12.0;
    double phi_min = 0.2;
    double phi_max = 0.8;
    double k1 = 1.0;
    double k2 = 50.0;
    double cg_tol = 1e-8;
    void validate() const;
};

// White Gaussian noise blurred by an isotropic Gaussian of std corr_len
// (kernel truncated at 3*corr_len, periodic wrap), standardized to mean 0,
// variance 1.
Tensor gen_gaussian_field(int size, double corr_len, std::uint64_t seed);

// Binary image with exactly round(phi * H * W) ones, placed at the largest
// field values; ties broken by flat index order.
Tensor threshold_to_fraction(const Tensor& field, double phi);

struct ConductivitySolution {
    Tensor temperature;  // [H,W]
    double k_eff = 0.0;
    int cg_iterations = 0;
    double residual_norm = 0.0;   // final |r|
    double initial_residual = 0.0;
};

// Steady-state -div(k grad T) = 0 on the pixel grid, T=1 left / T=0 right,
// insulated top/bottom, harmonic-mean face conductances, Jacobi-preconditioned
// CG. k_eff measures left-to-right transport.
ConductivitySolution effective_conductivity(const Tensor& image, double k1, double k2,
                                            double tol = 1e-8);

Dataset build_micro_dataset(int n, const MicroGenParams& params, std::uint64_t seed);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// image: [H,W] or [1,H,W] (or [1,1,H,W]) in [0,1], written as binary PGM (P5).
void write_pgm(const std::string& path, const Tensor& image);

// Deterministic stream splitting for per-sample seeding.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace janus
