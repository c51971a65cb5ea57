#pragma once

#include <functional>
#include <optional>
#include <string>

#include "deltaflux/tensor.hpp"

namespace dflx {

enum class LayerKind { Conv, Relu, Truncate, MaxPool, AvgPool, Upsample, BatchNorm, Add, Output };

const char* layer_kind_name(LayerKind k);

struct LayerDef {
    std::string name;
    LayerKind kind = LayerKind::Output;
    std::vector<std::string> inputs;  // layer names; "input" refers to the network input

    ConvParams conv;                        // Conv
    int pool_k = 2;                         // MaxPool / AvgPool (k == stride)
    int pool_stride = 2;
    int factor = 2;                         // Upsample
    std::vector<float> bn_scale, bn_shift;  // BatchNorm
    std::optional<float> threshold;         // Relu / Truncate
    bool truncate_enabled = true;           // Relu / Truncate
};

struct NetworkSpec {
    int in_channels = 1;
    std::vector<LayerDef> layers;
};

// Static per-layer facts derived at validation time.
struct LayerInfo {
    int in_channels = 0;
    int channels = 0;        // at the layer output
    int in_cum_stride = 1;   // cumulative downsampling at the layer input
    int cum_stride = 1;      // and at its output
    int in_tile = 0;         // tile size in px at input/output resolution
    int tile = 0;
    int halo_in = 0;         // accumulated dilation radius arriving (px, input res)
    int halo_out = 0;
    std::vector<float> beta;  // uniform zero-input bias response at the output
};

struct ValidatedNet {
    NetworkSpec spec;
    int tile_size = 32;
    std::vector<int> topo;        // layer indices in execution order
    std::vector<LayerInfo> info;  // parallel to spec.layers
    int output_layer = -1;
    int out_cum_stride = 1;
    int out_channels = 0;
    int ring_tiles = 1;  // stash ring width the buffer manager must pre-claim

    const LayerDef& layer(int idx) const { return spec.layers[idx]; }
    int index_of(const std::string& name) const;
};

// Fixes the topological order, assigns per-layer tile sizes (input tile /
// cumulative stride), propagates halos and bias responses, and rejects
// cycles, dangling edges, channel mismatches, stride-inconsistent joins
// and tile sizes that do not divide evenly.
ValidatedNet validate(const NetworkSpec& spec, int tile_size = 32);

// Plain dense execution; the correctness oracle for the delta engine.
// `post_layer`, when given, may edit each layer's output in place (the
// fused-canvas oracle uses it to zero truncation points outside the
// covered region).
using DenseHook = std::function<void(int layer_idx, Tensor& out)>;
Tensor run_dense(const ValidatedNet& net, const Tensor& frame, FlopReport* flops = nullptr,
                 const DenseHook& post_layer = {});

// Dense conv FLOPs for a given input size without running anything.
FlopReport dense_flops(const ValidatedNet& net, int height, int width);

// Network description file: JSON with a documented schema; weights live in
// tensor-format files next to the net file (or under weights_dir when
// given) and are checked against the manifest's shapes when present.
NetworkSpec load_network(const std::string& net_path, const std::string& weights_dir = "");
void save_network(const NetworkSpec& spec, const std::string& net_path);

}  // namespace dflx
