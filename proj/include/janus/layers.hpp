#pragma once

#include <random>
#include <vector>

#include "janus/tensor.hpp"

namespace janus {

enum class LayerKind { Conv2D, Dense, BilinearUpsample2x, ReLU, Logistic, Clamp01, Flatten, Reshape };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    // Conv2D
    int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, padding = 0;
    // Dense
    int in_features = 0, out_features = 0;
    // Reshape: per-sample target shape, e.g. {C,H,W}
    std::vector<int> target_shape;

    static LayerSpec conv2d(int in_c, int out_c, int kernel, int stride, int padding);
    static LayerSpec dense(int in_f, int out_f);
    static LayerSpec upsample2x();
    static LayerSpec relu();
    static LayerSpec logistic();
    static LayerSpec clamp01();
    static LayerSpec flatten();
    static LayerSpec reshape(std::vector<int> per_sample_shape);
};

/// Weights plus matching gradient accumulators. Parameter-free layers keep
/// all four tensors empty.
struct LayerParams {
    Tensor weights;
    Tensor biases;
    Tensor weight_grads;
    Tensor bias_grads;

    bool has_params() const { return !weights.data.empty() || !biases.data.empty(); }
    void zero_grads();
};

LayerParams init_layer_params(const LayerSpec& spec, std::mt19937_64& rng);

/// Computed output shape for a given input shape; throws ConfigError with the
/// offending dimensions named when the pair is inconsistent.
std::vector<int> layer_output_shape(const LayerSpec& spec, const std::vector<int>& in_shape);

Tensor layer_forward(const LayerSpec& spec, const LayerParams& params, const Tensor& input);

/// Gradient sink for one layer's parameters. Null members mean "do not
/// accumulate" (used when backpropagating through a frozen model).
struct LayerGradSink {
    Tensor* weight_grads = nullptr;
    Tensor* bias_grads = nullptr;
};

/// Exact adjoint of layer_forward. `output` is the forward result for
/// `input` (needed by Logistic); `upstream` must match its shape.
Tensor layer_backward(const LayerSpec& spec, const LayerParams& params, const Tensor& input,
                      const Tensor& output, const Tensor& upstream, LayerGradSink sink);

/// An ordered layer chain with shared parameters.
struct Sequential {
    std::vector<LayerSpec> specs;
    std::vector<LayerParams> params;

    void add(LayerSpec spec, std::mt19937_64& rng);
    /// Validates the whole chain for a batch-1 input and returns the final
    /// per-sample shape (leading N excluded from `sample_shape`).
    std::vector<int> validate(const std::vector<int>& sample_shape) const;
    void zero_grads();
};

/// Activation record of one sequential pass: acts[0] is the input,
/// acts[i+1] the output of layer i.
struct Tape {
    std::vector<Tensor> acts;
};

Tensor seq_forward(const Sequential& seq, const Tensor& x, Tape* tape = nullptr);

/// Backward pass over a recorded tape; accumulates parameter gradients into
/// the layers' own accumulators when `accumulate_params` is true. Returns
/// the gradient with respect to the input.
Tensor seq_backward(Sequential& seq, const Tape& tape, const Tensor& upstream,
                    bool accumulate_params = true);

/// Read-only variant: never touches parameter gradients, safe to call
/// concurrently on a shared model.
Tensor seq_backward_input_only(const Sequential& seq, const Tape& tape, const Tensor& upstream);

}  // namespace janus
