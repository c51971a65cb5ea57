#include "deltaflux/tensor.hpp"

namespace dflx {

Tensor dense_conv2d(const Tensor& input, const ConvParams& params) {
    params.validate();
    check(input.channels == params.in_channels, "dense_conv2d: channel mismatch");

    const int out_h = (input.height + 2 * params.padding - params.kernel_h) / params.stride + 1;
    const int out_w = (input.width + 2 * params.padding - params.kernel_w) / params.stride + 1;
    check(out_h >= 1 && out_w >= 1, "dense_conv2d: non-positive output dims");

    Tensor out(params.out_channels, out_h, out_w);
    for (int o = 0; o < params.out_channels; ++o) {
        const float b = params.has_bias() ? params.bias[o] : 0.0f;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float acc = 0.0f;
                for (int i = 0; i < params.in_channels; ++i) {
                    for (int ky = 0; ky < params.kernel_h; ++ky) {
                        const int y = oy * params.stride + ky - params.padding;
                        if (y < 0 || y >= input.height) continue;
                        for (int kx = 0; kx < params.kernel_w; ++kx) {
                            const int x = ox * params.stride + kx - params.padding;
                            if (x < 0 || x >= input.width) continue;
                            acc += input.at(i, y, x) * params.weight_at(o, i, ky, kx);
                        }
                    }
                }
                out.at(o, oy, ox) = acc + b;
            }
        }
    }
    return out;
}

Tensor dense_relu(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor dense_maxpool(const Tensor& input, int k, int stride, int padding) {
    check(k >= 1 && stride >= 1 && padding >= 0, "dense_maxpool: bad params");
    const int out_h = (input.height + 2 * padding - k) / stride + 1;
    const int out_w = (input.width + 2 * padding - k) / stride + 1;
    check(out_h >= 1 && out_w >= 1, "dense_maxpool: non-positive output dims");

    // Out-of-bounds positions count as zero; this matches the delta path,
    // which pools accumulated buffers that are zero where nothing was seen.
    Tensor out(input.channels, out_h, out_w);
    for (int c = 0; c < input.channels; ++c) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float m = 0.0f;
                bool first = true;
                for (int ky = 0; ky < k; ++ky) {
                    const int y = oy * stride + ky - padding;
                    for (int kx = 0; kx < k; ++kx) {
                        const int x = ox * stride + kx - padding;
                        const float v = (y < 0 || y >= input.height || x < 0 || x >= input.width)
                                            ? 0.0f
                                            : input.at(c, y, x);
                        m = first ? v : std::max(m, v);
                        first = false;
                    }
                }
                out.at(c, oy, ox) = m;
            }
        }
    }
    return out;
}

Tensor dense_avgpool(const Tensor& input, int k, int stride, int padding) {
    check(k >= 1 && stride >= 1 && padding >= 0, "dense_avgpool: bad params");
    const int out_h = (input.height + 2 * padding - k) / stride + 1;
    const int out_w = (input.width + 2 * padding - k) / stride + 1;
    check(out_h >= 1 && out_w >= 1, "dense_avgpool: non-positive output dims");

    // Divisor is always k*k (zero padding included) so the op stays linear.
    const float inv = 1.0f / static_cast<float>(k * k);
    Tensor out(input.channels, out_h, out_w);
    for (int c = 0; c < input.channels; ++c) {
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                float s = 0.0f;
                for (int ky = 0; ky < k; ++ky) {
                    const int y = oy * stride + ky - padding;
                    if (y < 0 || y >= input.height) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int x = ox * stride + kx - padding;
                        if (x < 0 || x >= input.width) continue;
                        s += input.at(c, y, x);
                    }
                }
                out.at(c, oy, ox) = s * inv;
            }
        }
    }
    return out;
}

Tensor dense_upsample_nearest(const Tensor& input, int factor) {
    check(factor >= 1, "dense_upsample_nearest: factor must be >= 1");
    Tensor out(input.channels, input.height * factor, input.width * factor);
    for (int c = 0; c < input.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = input.at(c, y / factor, x / factor);
    return out;
}

Tensor dense_add(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "dense_add: shape mismatch");
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor dense_batchnorm(const Tensor& input, const std::vector<float>& scale,
                       const std::vector<float>& shift) {
    check(scale.size() == static_cast<size_t>(input.channels) && scale.size() == shift.size(),
          "dense_batchnorm: per-channel param count mismatch");
    Tensor out = input;
    for (int c = 0; c < input.channels; ++c) {
        const float s = scale[c];
        const float t = shift[c];
        float* p = &out.at(c, 0, 0);
        const size_t n = static_cast<size_t>(input.height) * input.width;
        for (size_t i = 0; i < n; ++i) p[i] = p[i] * s + t;
    }
    return out;
}

uint64_t count_conv_flops(const ConvParams& params, int out_h, int out_w,
                          int64_t processed_pixels) {
    check(processed_pixels >= 0 &&
              processed_pixels <= static_cast<int64_t>(out_h) * out_w,
          "count_conv_flops: processed pixels out of range");
    return 2ull * params.kernel_h * params.kernel_w * params.in_channels * params.out_channels *
           static_cast<uint64_t>(processed_pixels);
}

}  // namespace dflx
