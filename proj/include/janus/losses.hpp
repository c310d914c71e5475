#pragma once

#include <vector>

#include "janus/model.hpp"

namespace janus {

struct LossWeights {
    double recon = 1.0;
    double cycle = 0.5;
    double deep = 0.25;
    void validate() const;
};

struct LossReport {
    double task = 0.0;
    double recon = 0.0;
    double cycle = 0.0;
    double deep = 0.0;
    double total = 0.0;
};

// Mean softmax cross-entropy over the batch, log-sum-exp stabilized.
// If grad is given it receives d(loss)/d(logits), shape [N,C].
double task_loss_classification(const Tensor& logits, const std::vector<int>& labels,
                                Tensor* grad = nullptr);

// Mean squared error for [N,1] predictions against an N-vector of targets.
double task_loss_regression(const Tensor& pred, const std::vector<double>& target,
                            Tensor* grad = nullptr);

// Mean absolute error over all elements; grad_a receives d/da = sign(a-b)/numel
// with the subgradient at 0 taken as 0.
double mean_abs_error(const Tensor& a, const Tensor& b, Tensor* grad_a = nullptr);

// Weighted combination; total = task + w.recon*recon + w.cycle*cycle + w.deep*deep.
LossReport composite_loss(double task, double recon, double cycle, double deep,
                          const LossWeights& w);

// Labels for one batch: class indices for classification, scaled property
// values for regression. Exactly one is consulted per task kind.
struct BatchLabels {
    std::vector<int> classes;
    std::vector<double> targets;
};

// Full composite pass over a batch: forward through encode -> (head, decode ->
// encode -> decode), all four loss terms, then backpropagation accumulating
// gradients into encoder, decoder and head parameters. Cycle loss gradients
// flow through both the round trip and the inner encode.
LossReport composite_forward_backward(JanusModel& m, const Tensor& x, const BatchLabels& labels,
                                      const LossWeights& w);

}  // namespace janus
