#include "janus/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace janus {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::Dense: return "Dense";
        case LayerKind::BilinearUpsample2x: return "BilinearUpsample2x";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Logistic: return "Logistic";
        case LayerKind::Clamp01: return "Clamp01";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Reshape: return "Reshape";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(int in_c, int out_c, int kernel, int stride, int padding) {
    if (kernel < 1 || stride < 1 || padding < 0)
        throw ConfigError("Conv2D: kernel=" + std::to_string(kernel) + " stride=" +
                          std::to_string(stride) + " padding=" + std::to_string(padding));
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::dense(int in_f, int out_f) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_features = in_f;
    s.out_features = out_f;
    return s;
}

LayerSpec LayerSpec::upsample2x() {
    LayerSpec s;
    s.kind = LayerKind::BilinearUpsample2x;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    return s;
}

LayerSpec LayerSpec::logistic() {
    LayerSpec s;
    s.kind = LayerKind::Logistic;
    return s;
}

LayerSpec LayerSpec::clamp01() {
    LayerSpec s;
    s.kind = LayerKind::Clamp01;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

LayerSpec LayerSpec::reshape(std::vector<int> per_sample_shape) {
    LayerSpec s;
    s.kind = LayerKind::Reshape;
    s.target_shape = std::move(per_sample_shape);
    return s;
}

void LayerParams::zero_grads() {
    weight_grads.zero();
    bias_grads.zero();
}

LayerParams init_layer_params(const LayerSpec& spec, std::mt19937_64& rng) {
    LayerParams p;
    auto he = [&](int fan_in, Tensor& w) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (double& x : w.data) x = dist(rng);
    };
    switch (spec.kind) {
        case LayerKind::Conv2D: {
            p.weights = Tensor({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
            p.biases = Tensor({spec.out_channels});
            he(spec.in_channels * spec.kernel * spec.kernel, p.weights);
            break;
        }
        case LayerKind::Dense: {
            p.weights = Tensor({spec.out_features, spec.in_features});
            p.biases = Tensor({spec.out_features});
            he(spec.in_features, p.weights);
            break;
        }
        default:
            break;  // parameter-free
    }
    p.weight_grads = Tensor(p.weights.shape);
    p.bias_grads = Tensor(p.biases.shape);
    return p;
}

std::vector<int> layer_output_shape(const LayerSpec& spec, const std::vector<int>& in) {
    auto bad = [&](const std::string& why) {
        throw ConfigError(std::string(layer_kind_name(spec.kind)) + ": " + why +
                          " (input " + shape_str(in) + ")");
    };
    switch (spec.kind) {
        case LayerKind::Conv2D: {
            if (in.size() != 4) bad("expected [N,C,H,W]");
            const int C = in[1], H = in[2], W = in[3];
            if (C != spec.in_channels)
                bad("input channels " + std::to_string(C) + " != configured " +
                    std::to_string(spec.in_channels));
            // floor((H+2p-K)/s)+1; trailing rows that don't fit a full stride are dropped
            const int num_h = H + 2 * spec.padding - spec.kernel;
            const int num_w = W + 2 * spec.padding - spec.kernel;
            if (num_h < 0 || num_w < 0)
                bad("kernel " + std::to_string(spec.kernel) + " exceeds padded input H=" +
                    std::to_string(H) + " W=" + std::to_string(W) +
                    " p=" + std::to_string(spec.padding));
            return {in[0], spec.out_channels, num_h / spec.stride + 1, num_w / spec.stride + 1};
        }
        case LayerKind::Dense: {
            if (in.size() != 2) bad("expected [N,F]");
            if (in[1] != spec.in_features)
                bad("input features " + std::to_string(in[1]) + " != configured " +
                    std::to_string(spec.in_features));
            return {in[0], spec.out_features};
        }
        case LayerKind::BilinearUpsample2x: {
            if (in.size() != 4) bad("expected [N,C,H,W]");
            if (in[2] < 1 || in[3] < 1) bad("H,W must be >= 1");
            return {in[0], in[1], 2 * in[2], 2 * in[3]};
        }
        case LayerKind::ReLU:
        case LayerKind::Logistic:
        case LayerKind::Clamp01:
            return in;
        case LayerKind::Flatten: {
            if (in.size() < 2) bad("expected at least [N,...]");
            int f = 1;
            for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
            return {in[0], f};
        }
        case LayerKind::Reshape: {
            std::size_t want = numel_of(spec.target_shape);
            std::size_t have = 1;
            for (std::size_t i = 1; i < in.size(); ++i) have *= static_cast<std::size_t>(in[i]);
            if (want != have)
                bad("per-sample numel " + std::to_string(have) + " != target " +
                    shape_str(spec.target_shape));
            std::vector<int> out{in[0]};
            out.insert(out.end(), spec.target_shape.begin(), spec.target_shape.end());
            return out;
        }
    }
    bad("unknown layer kind");
    return {};
}

namespace {

void conv2d_fwd(const LayerSpec& s, const LayerParams& p, const Tensor& in, Tensor& out) {
    const int N = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
    const int Co = out.shape[1], Ho = out.shape[2], Wo = out.shape[3];
    const int K = s.kernel, st = s.stride, pad = s.padding;
    const double* wd = p.weights.data.data();
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            double* op = &out.data[static_cast<std::size_t>((n * Co + co)) * Ho * Wo];
            const double b = p.biases.data[co];
            for (int i = 0; i < Ho * Wo; ++i) op[i] = b;
            for (int ci = 0; ci < Ci; ++ci) {
                const double* ip = &in.data[static_cast<std::size_t>((n * Ci + ci)) * H * W];
                const double* wp = &wd[static_cast<std::size_t>((co * Ci + ci)) * K * K];
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        const double w = wp[kh * K + kw];
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * st - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            // valid ow range: 0 <= ow*st - pad + kw < W
                            int ow_lo = 0, ow_hi = Wo;
                            {
                                const int off = kw - pad;
                                if (off < 0) ow_lo = (-off + st - 1) / st;
                                const int lim = W - off;  // need ow*st < lim
                                if (lim <= 0)
                                    ow_hi = 0;
                                else
                                    ow_hi = std::min(Wo, (lim + st - 1) / st);
                            }
                            double* orow = op + oh * Wo;
                            const double* irow = ip + ih * W + (ow_lo * st - pad + kw);
                            if (st == 1) {
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    orow[ow] += w * irow[ow - ow_lo];
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    orow[ow] += w * irow[(ow - ow_lo) * st];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_bwd(const LayerSpec& s, const LayerParams& p, const Tensor& in, const Tensor& up,
                Tensor& din, LayerGradSink sink) {
    const int N = in.shape[0], Ci = in.shape[1], H = in.shape[2], W = in.shape[3];
    const int Co = up.shape[1], Ho = up.shape[2], Wo = up.shape[3];
    const int K = s.kernel, st = s.stride, pad = s.padding;
    const double* wd = p.weights.data.data();
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            const double* upp = &up.data[static_cast<std::size_t>((n * Co + co)) * Ho * Wo];
            if (sink.bias_grads) {
                double sb = 0;
                for (int i = 0; i < Ho * Wo; ++i) sb += upp[i];
                sink.bias_grads->data[co] += sb;
            }
            for (int ci = 0; ci < Ci; ++ci) {
                const double* ip = &in.data[static_cast<std::size_t>((n * Ci + ci)) * H * W];
                double* dip = &din.data[static_cast<std::size_t>((n * Ci + ci)) * H * W];
                const double* wp = &wd[static_cast<std::size_t>((co * Ci + ci)) * K * K];
                double* gwp = sink.weight_grads
                                  ? &sink.weight_grads->data[static_cast<std::size_t>(
                                        (co * Ci + ci)) * K * K]
                                  : nullptr;
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        const double w = wp[kh * K + kw];
                        double gw = 0;
                        for (int oh = 0; oh < Ho; ++oh) {
                            const int ih = oh * st - pad + kh;
                            if (ih < 0 || ih >= H) continue;
                            int ow_lo = 0, ow_hi = Wo;
                            {
                                const int off = kw - pad;
                                if (off < 0) ow_lo = (-off + st - 1) / st;
                                const int lim = W - off;
                                if (lim <= 0)
                                    ow_hi = 0;
                                else
                                    ow_hi = std::min(Wo, (lim + st - 1) / st);
                            }
                            const double* urow = upp + oh * Wo;
                            const int base = ih * W + (ow_lo * st - pad + kw);
                            if (st == 1) {
                                const double* irow = ip + base;
                                double* drow = dip + base;
                                for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                    const double u = urow[ow];
                                    gw += u * irow[ow - ow_lo];
                                    drow[ow - ow_lo] += w * u;
                                }
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                    const double u = urow[ow];
                                    const int idx = base + (ow - ow_lo) * st;
                                    gw += u * ip[idx];
                                    dip[idx] += w * u;
                                }
                            }
                        }
                        if (gwp) gwp[kh * K + kw] += gw;
                    }
                }
            }
        }
    }
}

void dense_fwd(const LayerParams& p, const Tensor& in, Tensor& out) {
    const int N = in.shape[0], F = in.shape[1], Fo = out.shape[1];
    const double* wd = p.weights.data.data();
    for (int n = 0; n < N; ++n) {
        const double* x = &in.data[static_cast<std::size_t>(n) * F];
        double* y = &out.data[static_cast<std::size_t>(n) * Fo];
        for (int o = 0; o < Fo; ++o) {
            const double* wrow = &wd[static_cast<std::size_t>(o) * F];
            double acc = p.biases.data[o];
            for (int f = 0; f < F; ++f) acc += wrow[f] * x[f];
            y[o] = acc;
        }
    }
}

void dense_bwd(const LayerParams& p, const Tensor& in, const Tensor& up, Tensor& din,
               LayerGradSink sink) {
    const int N = in.shape[0], F = in.shape[1], Fo = up.shape[1];
    const double* wd = p.weights.data.data();
    for (int n = 0; n < N; ++n) {
        const double* x = &in.data[static_cast<std::size_t>(n) * F];
        const double* u = &up.data[static_cast<std::size_t>(n) * Fo];
        double* dx = &din.data[static_cast<std::size_t>(n) * F];
        for (int o = 0; o < Fo; ++o) {
            const double uo = u[o];
            const double* wrow = &wd[static_cast<std::size_t>(o) * F];
            for (int f = 0; f < F; ++f) dx[f] += uo * wrow[f];
            if (sink.weight_grads) {
                double* gw = &sink.weight_grads->data[static_cast<std::size_t>(o) * F];
                for (int f = 0; f < F; ++f) gw[f] += uo * x[f];
            }
            if (sink.bias_grads) sink.bias_grads->data[o] += uo;
        }
    }
}

// Source coordinate mix for one output index under the half-pixel
// (align_corners=false) convention with edge clamping.
struct Lerp {
    int lo, hi;
    double w_hi;  // weight on hi; (1-w_hi) on lo
};

Lerp lerp_coord(int out_idx, int in_size) {
    const double src = 0.5 * (out_idx + 0.5) - 0.5;
    Lerp l;
    if (src <= 0.0) {
        l.lo = l.hi = 0;
        l.w_hi = 0.0;
    } else if (src >= in_size - 1) {
        l.lo = l.hi = in_size - 1;
        l.w_hi = 0.0;
    } else {
        l.lo = static_cast<int>(src);
        l.hi = l.lo + 1;
        l.w_hi = src - l.lo;
    }
    return l;
}

void upsample_fwd(const Tensor& in, Tensor& out) {
    const int N = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    const int Ho = 2 * H, Wo = 2 * W;
    std::vector<Lerp> ly(Ho), lx(Wo);
    for (int i = 0; i < Ho; ++i) ly[i] = lerp_coord(i, H);
    for (int i = 0; i < Wo; ++i) lx[i] = lerp_coord(i, W);
    for (int nc = 0; nc < N * C; ++nc) {
        const double* ip = &in.data[static_cast<std::size_t>(nc) * H * W];
        double* op = &out.data[static_cast<std::size_t>(nc) * Ho * Wo];
        for (int oy = 0; oy < Ho; ++oy) {
            const Lerp& y = ly[oy];
            const double* r0 = ip + y.lo * W;
            const double* r1 = ip + y.hi * W;
            double* orow = op + oy * Wo;
            for (int ox = 0; ox < Wo; ++ox) {
                const Lerp& x = lx[ox];
                const double top = r0[x.lo] + x.w_hi * (r0[x.hi] - r0[x.lo]);
                const double bot = r1[x.lo] + x.w_hi * (r1[x.hi] - r1[x.lo]);
                orow[ox] = top + y.w_hi * (bot - top);
            }
        }
    }
}

void upsample_bwd(const Tensor& in, const Tensor& up, Tensor& din) {
    const int N = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    const int Ho = 2 * H, Wo = 2 * W;
    std::vector<Lerp> ly(Ho), lx(Wo);
    for (int i = 0; i < Ho; ++i) ly[i] = lerp_coord(i, H);
    for (int i = 0; i < Wo; ++i) lx[i] = lerp_coord(i, W);
    for (int nc = 0; nc < N * C; ++nc) {
        const double* upp = &up.data[static_cast<std::size_t>(nc) * Ho * Wo];
        double* dp = &din.data[static_cast<std::size_t>(nc) * H * W];
        for (int oy = 0; oy < Ho; ++oy) {
            const Lerp& y = ly[oy];
            for (int ox = 0; ox < Wo; ++ox) {
                const Lerp& x = lx[ox];
                const double u = upp[oy * Wo + ox];
                dp[y.lo * W + x.lo] += (1 - y.w_hi) * (1 - x.w_hi) * u;
                dp[y.lo * W + x.hi] += (1 - y.w_hi) * x.w_hi * u;
                dp[y.hi * W + x.lo] += y.w_hi * (1 - x.w_hi) * u;
                dp[y.hi * W + x.hi] += y.w_hi * x.w_hi * u;
            }
        }
    }
}

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor layer_forward(const LayerSpec& spec, const LayerParams& params, const Tensor& input) {
    Tensor out(layer_output_shape(spec, input.shape));
    switch (spec.kind) {
        case LayerKind::Conv2D:
            conv2d_fwd(spec, params, input, out);
            break;
        case LayerKind::Dense:
            dense_fwd(params, input, out);
            break;
        case LayerKind::BilinearUpsample2x:
            upsample_fwd(input, out);
            break;
        case LayerKind::ReLU:
            for (std::size_t i = 0; i < input.numel(); ++i)
                out.data[i] = input.data[i] > 0 ? input.data[i] : 0.0;
            break;
        case LayerKind::Logistic:
            for (std::size_t i = 0; i < input.numel(); ++i) out.data[i] = logistic(input.data[i]);
            break;
        case LayerKind::Clamp01:
            for (std::size_t i = 0; i < input.numel(); ++i)
                out.data[i] = std::clamp(input.data[i], 0.0, 1.0);
            break;
        case LayerKind::Flatten:
        case LayerKind::Reshape:
            out.data = input.data;
            break;
    }
    return out;
}

Tensor layer_backward(const LayerSpec& spec, const LayerParams& params, const Tensor& input,
                      const Tensor& output, const Tensor& upstream, LayerGradSink sink) {
    if (upstream.shape != output.shape)
        throw ConfigError(std::string(layer_kind_name(spec.kind)) + ": upstream shape " +
                          shape_str(upstream.shape) + " != output shape " +
                          shape_str(output.shape));
    Tensor din(input.shape);
    switch (spec.kind) {
        case LayerKind::Conv2D:
            conv2d_bwd(spec, params, input, upstream, din, sink);
            break;
        case LayerKind::Dense:
            dense_bwd(params, input, upstream, din, sink);
            break;
        case LayerKind::BilinearUpsample2x:
            upsample_bwd(input, upstream, din);
            break;
        case LayerKind::ReLU:
            // subgradient at 0 taken as 0
            for (std::size_t i = 0; i < input.numel(); ++i)
                din.data[i] = input.data[i] > 0 ? upstream.data[i] : 0.0;
            break;
        case LayerKind::Logistic:
            for (std::size_t i = 0; i < input.numel(); ++i) {
                const double y = output.data[i];
                din.data[i] = upstream.data[i] * y * (1.0 - y);
            }
            break;
        case LayerKind::Clamp01:
            // subgradient 0 on both saturated rails
            for (std::size_t i = 0; i < input.numel(); ++i) {
                const double v = input.data[i];
                din.data[i] = v > 0.0 && v < 1.0 ? upstream.data[i] : 0.0;
            }
            break;
        case LayerKind::Flatten:
        case LayerKind::Reshape:
            din.data = upstream.data;
            break;
    }
    return din;
}

void Sequential::add(LayerSpec spec, std::mt19937_64& rng) {
    params.push_back(init_layer_params(spec, rng));
    specs.push_back(std::move(spec));
}

std::vector<int> Sequential::validate(const std::vector<int>& sample_shape) const {
    std::vector<int> s{1};
    s.insert(s.end(), sample_shape.begin(), sample_shape.end());
    for (const auto& spec : specs) s = layer_output_shape(spec, s);
    return std::vector<int>(s.begin() + 1, s.end());
}

void Sequential::zero_grads() {
    for (auto& p : params) p.zero_grads();
}

Tensor seq_forward(const Sequential& seq, const Tensor& x, Tape* tape) {
    if (tape) {
        tape->acts.clear();
        tape->acts.reserve(seq.specs.size() + 1);
        tape->acts.push_back(x);
        for (std::size_t i = 0; i < seq.specs.size(); ++i)
            tape->acts.push_back(layer_forward(seq.specs[i], seq.params[i], tape->acts.back()));
        return tape->acts.back();
    }
    Tensor cur = x;
    for (std::size_t i = 0; i < seq.specs.size(); ++i)
        cur = layer_forward(seq.specs[i], seq.params[i], cur);
    return cur;
}

namespace {

Tensor seq_backward_impl(const Sequential& seq, const Tape& tape, const Tensor& upstream,
                         std::vector<LayerParams>* sink_params) {
    if (tape.acts.size() != seq.specs.size() + 1)
        throw ConfigError("seq_backward: tape does not match layer chain");
    Tensor grad = upstream;
    for (std::size_t i = seq.specs.size(); i-- > 0;) {
        LayerGradSink sink;
        if (sink_params && (*sink_params)[i].has_params()) {
            sink.weight_grads = &(*sink_params)[i].weight_grads;
            sink.bias_grads = &(*sink_params)[i].bias_grads;
        }
        grad = layer_backward(seq.specs[i], seq.params[i], tape.acts[i], tape.acts[i + 1], grad,
                              sink);
    }
    return grad;
}

}  // namespace

Tensor seq_backward(Sequential& seq, const Tape& tape, const Tensor& upstream,
                    bool accumulate_params) {
    return seq_backward_impl(seq, tape, upstream, accumulate_params ? &seq.params : nullptr);
}

Tensor seq_backward_input_only(const Sequential& seq, const Tape& tape, const Tensor& upstream) {
    return seq_backward_impl(seq, tape, upstream, nullptr);
}

}  // namespace janus
