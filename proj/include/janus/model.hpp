#pragma once

#include <cstdint>
#include <vector>

#include "janus/khronos.hpp"
#include "janus/layers.hpp"
#include "janus/tensor.hpp"

namespace janus {

enum class TaskKind { Classification, Regression };

struct JanusConfig {
    int image_size = 64;
    int channels = 1;
    int latent_dim = 64;
    std::vector<int> encoder_channels{16, 32, 64};
    std::vector<int> decoder_channels{32, 16, 16};
    KhronosConfig khronos;
    TaskKind task = TaskKind::Regression;
    double target_scale = 1.0;  // regression targets are multiplied by this for training

    /// MNIST-shaped preset: 28x28, M=16, classification over 10 classes.
    static JanusConfig mnist_default();
    /// Microstructure preset: 64x64, M=64, scalar regression.
    static JanusConfig micro_default();

    void validate() const;
};

struct JanusModel {
    JanusConfig cfg;
    Sequential encoder;
    Sequential decoder;
    KhronosParams khronos;
    Tensor latent_mean;  // [M], valid after fit_latent_stats
    Tensor latent_std;   // [M], floored at 1e-6
    int trained_epochs = 0;

    bool has_latent_stats() const { return !latent_mean.data.empty(); }
};

JanusModel build_janus(const JanusConfig& cfg, std::uint64_t seed);

Tensor encode(const JanusModel& m, const Tensor& x, Tape* tape = nullptr);
Tensor decode(const JanusModel& m, const Tensor& z, Tape* tape = nullptr);
/// khronos_batch_forward(encode(x)).
Tensor predict(const JanusModel& m, const Tensor& x);
Tensor reconstruct(const JanusModel& m, const Tensor& x);
Tensor deep_reconstruct(const JanusModel& m, const Tensor& x);

/// Per-dimension mean/std of encode over `images`; std floored at 1e-6.
void fit_latent_stats(JanusModel& m, const Tensor& images);

}  // namespace janus
