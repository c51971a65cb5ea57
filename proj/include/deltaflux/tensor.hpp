#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "deltaflux/common.hpp"

namespace dflx {

// Dense CHW float32 feature map. The common currency of the dense oracle
// path and the sparse delta path.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w) {
        check(c >= 1 && h >= 1 && w >= 1, "tensor dims must be >= 1");
        data.assign(static_cast<size_t>(c) * h * w, 0.0f);
    }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }
};

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "max_abs_diff: shape mismatch");
    float m = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

inline float max_abs(const Tensor& a) {
    float m = 0.0f;
    for (float v : a.data) m = std::max(m, std::fabs(v));
    return m;
}

// Convolution parameters, weights laid out O-I-Kh-Kw. Odd square kernels
// and uniform stride only; base padding is the "same"-style floor(k/2).
struct ConvParams {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int padding = 0;
    std::vector<float> weights;
    std::vector<float> bias;  // empty means no bias

    float weight_at(int o, int i, int ky, int kx) const {
        return weights[((static_cast<size_t>(o) * in_channels + i) * kernel_h + ky) * kernel_w +
                       kx];
    }
    bool has_bias() const { return !bias.empty(); }
    int radius() const { return kernel_h / 2; }

    void validate() const {
        check(in_channels >= 1 && out_channels >= 1, "conv: channel counts must be >= 1");
        check(kernel_h >= 1 && kernel_w >= 1 && kernel_h % 2 == 1 && kernel_w % 2 == 1,
              "conv: kernel dims must be odd");
        check(stride >= 1, "conv: stride must be >= 1");
        check(padding >= 0, "conv: padding must be >= 0");
        check(weights.size() == static_cast<size_t>(out_channels) * in_channels * kernel_h *
                                    kernel_w,
              "conv: weight count does not match dims");
        check(bias.empty() || bias.size() == static_cast<size_t>(out_channels),
              "conv: bias count does not match out_channels");
    }
};

// Dense layer reference implementations. These are the correctness oracle
// for the delta path: plain loops, zero padding, no tricks.
Tensor dense_conv2d(const Tensor& input, const ConvParams& params);
Tensor dense_relu(const Tensor& input);
Tensor dense_maxpool(const Tensor& input, int k, int stride, int padding = 0);
Tensor dense_avgpool(const Tensor& input, int k, int stride, int padding = 0);
Tensor dense_upsample_nearest(const Tensor& input, int factor);
Tensor dense_add(const Tensor& a, const Tensor& b);
Tensor dense_batchnorm(const Tensor& input, const std::vector<float>& scale,
                       const std::vector<float>& shift);

// FLOP accounting. Convention: one multiply-add = 2 FLOPs, convolutions
// only; bias and non-conv layers are excluded from the report.
uint64_t count_conv_flops(const ConvParams& params, int out_h, int out_w,
                          int64_t processed_pixels);

struct FlopReport {
    struct Layer {
        std::string name;
        uint64_t flops = 0;
        uint64_t dense_flops = 0;
    };
    std::vector<Layer> layers;
    uint64_t total = 0;
    uint64_t dense_total = 0;

    void add(const std::string& name, uint64_t flops, uint64_t dense_flops) {
        layers.push_back({name, flops, dense_flops});
        total += flops;
        dense_total += dense_flops;
    }
    double ratio() const {
        return dense_total == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(dense_total);
    }
};

}  // namespace dflx
