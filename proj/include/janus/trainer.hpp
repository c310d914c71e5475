#pragma once

#include <string>
#include <vector>

#include "janus/data.hpp"
#include "janus/losses.hpp"

namespace janus {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamSlot {
    std::string name;
    Tensor* param = nullptr;
    Tensor* grad = nullptr;
    Tensor m, v;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<AdamSlot> slots;
    long long t = 0;
    void attach(const std::string& name, Tensor& param, Tensor& grad);
};

// Registers every trainable tensor of the model (encoder, decoder, head).
AdamState make_adam(JanusModel& m, const AdamConfig& cfg);

// One Adam update over all attached tensors; zeroes gradients afterwards.
// Throws DivergenceError naming the parameter if any gradient is non-finite.
void adam_step(AdamState& st);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-3;
    LossWeights weights;
    std::uint64_t seed = 0;
    double target_scale = 1.0;  // regression targets multiplied by this before the loss
    int eval_every = 1;
    double val_fraction = 0.1;  // seeded held-out split; 0 evaluates on the training set
    void validate() const;
};

struct MetricsRecord {
    int epoch = 0;
    double task_metric = 0.0;  // accuracy, or MAE in property units for regression
    double recon_mae = 0.0;
    double cycle_mae = 0.0;
    double deep_mae = 0.0;
    double rel_mae = 0.0;  // regression only
    double r2 = 0.0;       // regression only
};

// Deterministic shuffle split; val receives round(val_fraction * N) samples.
void split_dataset(const Dataset& ds, double val_fraction, std::uint64_t seed, Dataset& train_out,
                   Dataset& val_out);

MetricsRecord evaluate(const JanusModel& m, const Dataset& ds, int epoch = 0);

// Shuffled mini-batch epochs over the train split, jointly updating encoder,
// decoder and head; records metrics on the held-out split every eval_every
// epochs; fits latent stats after the final epoch. On divergence the model is
// restored to the last epoch-end state and DivergenceError is thrown.
std::vector<MetricsRecord> train(JanusModel& m, const Dataset& ds, const TrainConfig& cfg);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& history);

}  // namespace janus
