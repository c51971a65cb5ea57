#include "deltaflux/network.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <queue>

#include <json.hpp>

#include "deltaflux/io.hpp"

namespace dflx {

namespace {

// Output halo of a windowed op, mirrored from the delta path.
int out_halo_of(int in_halo, int span, int back, int stride) {
    const int64_t lo = ceil_div(in_halo + span - back, stride) - 1;
    const int64_t hi = ceil_div(in_halo + back, stride);
    return static_cast<int>(std::max<int64_t>({0, lo, hi}));
}

}  // namespace

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::Truncate: return "truncate";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::Upsample: return "upsample";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Add: return "add";
        case LayerKind::Output: return "output";
    }
    return "?";
}

int ValidatedNet::index_of(const std::string& name) const {
    for (size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].name == name) return static_cast<int>(i);
    return -1;
}

ValidatedNet validate(const NetworkSpec& spec, int tile_size) {
    check(tile_size >= 1, "validate: tile size must be >= 1");
    check(spec.in_channels >= 1, "validate: input channels must be >= 1");
    check(!spec.layers.empty(), "validate: network has no layers");

    std::map<std::string, int> by_name;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDef& l = spec.layers[i];
        check(!l.name.empty() && l.name != "input", "validate: bad layer name '" + l.name + "'");
        check(by_name.emplace(l.name, static_cast<int>(i)).second,
              "validate: duplicate layer name '" + l.name + "'");
        const size_t want_inputs = l.kind == LayerKind::Add ? 2 : 1;
        if (l.inputs.size() != want_inputs)
            throw ValidationError("layer '" + l.name + "' needs " + std::to_string(want_inputs) +
                                  " input(s)");
    }

    ValidatedNet net;
    net.spec = spec;
    net.tile_size = tile_size;
    net.info.assign(spec.layers.size(), {});

    // Kahn topological sort over the name graph; "input" is the source.
    std::vector<int> indegree(spec.layers.size(), 0);
    std::vector<std::vector<int>> consumers(spec.layers.size());
    for (size_t i = 0; i < spec.layers.size(); ++i)
        for (const std::string& in : spec.layers[i].inputs) {
            if (in == "input") continue;
            auto it = by_name.find(in);
            if (it == by_name.end())
                throw ValidationError("layer '" + spec.layers[i].name + "' references unknown '" +
                                      in + "'");
            consumers[it->second].push_back(static_cast<int>(i));
            ++indegree[i];
        }
    std::queue<int> ready;
    for (size_t i = 0; i < spec.layers.size(); ++i)
        if (indegree[i] == 0) ready.push(static_cast<int>(i));
    while (!ready.empty()) {
        const int i = ready.front();
        ready.pop();
        net.topo.push_back(i);
        for (int c : consumers[i])
            if (--indegree[c] == 0) ready.push(c);
    }
    if (net.topo.size() != spec.layers.size()) throw ValidationError("network graph has a cycle");

    // The implicit input node.
    const LayerInfo input_info{spec.in_channels, spec.in_channels, 1,        1,
                               tile_size,        tile_size,        0,        0,
                               std::vector<float>(spec.in_channels, 0.0f)};

    const auto in_info = [&](const std::string& name) -> const LayerInfo& {
        return name == "input" ? input_info : net.info[by_name.at(name)];
    };

    int output_count = 0;
    for (int idx : net.topo) {
        const LayerDef& l = spec.layers[idx];
        LayerInfo& o = net.info[idx];
        const LayerInfo& a = in_info(l.inputs[0]);

        o.in_channels = a.channels;
        o.in_cum_stride = a.cum_stride;
        o.in_tile = a.tile;
        o.halo_in = a.halo_out;

        const auto set_cum = [&](int cum) {
            o.cum_stride = cum;
            if (tile_size % cum != 0)
                throw ValidationError("layer '" + l.name +
                                      "': tile size is not a multiple of the cumulative stride");
            o.tile = std::max(1, tile_size / cum);
        };

        switch (l.kind) {
            case LayerKind::Conv: {
                l.conv.validate();
                if (l.conv.in_channels != a.channels)
                    throw ValidationError("layer '" + l.name + "': expects " +
                                          std::to_string(l.conv.in_channels) + " channels, gets " +
                                          std::to_string(a.channels));
                if (l.conv.padding != l.conv.radius())
                    throw ValidationError("layer '" + l.name +
                                          "': engine convolutions need same-style padding");
                if (a.tile % l.conv.stride != 0)
                    throw ValidationError("layer '" + l.name + "': stride misaligned with tile");
                o.channels = l.conv.out_channels;
                set_cum(a.cum_stride * l.conv.stride);
                o.halo_out = out_halo_of(a.halo_out, l.conv.kernel_h, l.conv.radius(),
                                         l.conv.stride);
                // beta' = bias + (sum over kernel of W) * beta
                o.beta.assign(o.channels, 0.0f);
                for (int oc = 0; oc < o.channels; ++oc) {
                    float v = l.conv.has_bias() ? l.conv.bias[oc] : 0.0f;
                    for (int ic = 0; ic < l.conv.in_channels; ++ic) {
                        float wsum = 0.0f;
                        for (int ky = 0; ky < l.conv.kernel_h; ++ky)
                            for (int kx = 0; kx < l.conv.kernel_w; ++kx)
                                wsum += l.conv.weight_at(oc, ic, ky, kx);
                        v += wsum * a.beta[ic];
                    }
                    o.beta[oc] = v;
                }
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Truncate:
            case LayerKind::Output:
                o.channels = a.channels;
                set_cum(a.cum_stride);
                o.halo_out = 0;  // the truncation point stashes the halo
                o.beta.assign(o.channels, 0.0f);  // captured by the state's bias init
                if (l.kind == LayerKind::Output && ++output_count > 1)
                    throw ValidationError("network has more than one output");
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool: {
                if (l.pool_k != l.pool_stride)
                    throw ValidationError("layer '" + l.name +
                                          "': engine pooling requires k == stride");
                if (l.pool_stride < 1 || a.tile % l.pool_stride != 0)
                    throw ValidationError("layer '" + l.name + "': stride misaligned with tile");
                o.channels = a.channels;
                set_cum(a.cum_stride * l.pool_stride);
                o.halo_out = out_halo_of(a.halo_out, l.pool_k, 0, l.pool_stride);
                o.beta = a.beta;  // uniform fields pass through pooling unchanged
                break;
            }
            case LayerKind::Upsample: {
                if (l.factor < 1 || a.cum_stride % l.factor != 0)
                    throw ValidationError("layer '" + l.name +
                                          "': upsample factor does not divide cumulative stride");
                o.channels = a.channels;
                set_cum(a.cum_stride / l.factor);
                o.halo_out = a.halo_out * l.factor;
                o.beta = a.beta;
                break;
            }
            case LayerKind::BatchNorm: {
                if (l.bn_scale.size() != static_cast<size_t>(a.channels) ||
                    l.bn_shift.size() != l.bn_scale.size())
                    throw ValidationError("layer '" + l.name + "': batchnorm param count");
                o.channels = a.channels;
                set_cum(a.cum_stride);
                o.halo_out = a.halo_out;
                o.beta.assign(o.channels, 0.0f);
                for (int c = 0; c < o.channels; ++c)
                    o.beta[c] = l.bn_scale[c] * a.beta[c] + l.bn_shift[c];
                break;
            }
            case LayerKind::Add: {
                const LayerInfo& b = in_info(l.inputs[1]);
                if (a.channels != b.channels)
                    throw ValidationError("layer '" + l.name + "': add channel mismatch");
                if (a.cum_stride != b.cum_stride)
                    throw ValidationError("layer '" + l.name +
                                          "': add joins branches of different cumulative stride");
                o.channels = a.channels;
                set_cum(a.cum_stride);
                o.halo_out = std::max(a.halo_out, b.halo_out);
                o.beta.assign(o.channels, 0.0f);
                for (int c = 0; c < o.channels; ++c) o.beta[c] = a.beta[c] + b.beta[c];
                break;
            }
        }
    }
    if (output_count != 1) throw ValidationError("network needs exactly one output layer");

    // Every non-output layer must feed something.
    std::vector<bool> consumed(spec.layers.size(), false);
    for (const LayerDef& l : spec.layers)
        for (const std::string& in : l.inputs)
            if (in != "input") consumed[by_name.at(in)] = true;
    for (size_t i = 0; i < spec.layers.size(); ++i)
        if (!consumed[i] && spec.layers[i].kind != LayerKind::Output)
            throw ValidationError("layer '" + spec.layers[i].name + "' is dangling");

    for (size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].kind == LayerKind::Output) net.output_layer = static_cast<int>(i);
    net.out_cum_stride = net.info[net.output_layer].cum_stride;
    net.out_channels = net.info[net.output_layer].channels;

    // How far beyond the placement stateful writes and reads can reach,
    // in tiles; the buffer manager pre-claims a ring this wide.
    int ring = 1;
    for (int idx : net.topo) {
        const LayerDef& l = spec.layers[idx];
        const LayerInfo& o = net.info[idx];
        switch (l.kind) {
            case LayerKind::Relu:
            case LayerKind::Truncate:
            case LayerKind::Output:
                ring = std::max<int64_t>(ring, ceil_div(o.halo_in, o.in_tile));
                break;
            case LayerKind::MaxPool: {
                const int oh = out_halo_of(o.halo_in, l.pool_k, 0, l.pool_stride);
                ring = std::max<int64_t>(ring, ceil_div(o.halo_in, o.in_tile));
                ring = std::max<int64_t>(ring, ceil_div(oh, o.tile));
                ring = std::max<int64_t>(
                    ring, ceil_div(static_cast<int64_t>(oh) * l.pool_stride + l.pool_k, o.in_tile));
                break;
            }
            default: break;
        }
    }
    net.ring_tiles = ring;
    return net;
}

Tensor run_dense(const ValidatedNet& net, const Tensor& frame, FlopReport* flops,
                 const DenseHook& post_layer) {
    check(frame.channels == net.spec.in_channels, "run_dense: input channel mismatch");
    std::vector<Tensor> outs(net.spec.layers.size());
    const auto get = [&](const std::string& name) -> const Tensor& {
        if (name == "input") return frame;
        const int i = net.index_of(name);
        return outs[i];
    };

    Tensor result;
    for (int idx : net.topo) {
        const LayerDef& l = net.spec.layers[idx];
        const Tensor& a = get(l.inputs[0]);
        switch (l.kind) {
            case LayerKind::Conv: {
                outs[idx] = dense_conv2d(a, l.conv);
                if (flops) {
                    const uint64_t n = count_conv_flops(
                        l.conv, outs[idx].height, outs[idx].width,
                        static_cast<int64_t>(outs[idx].height) * outs[idx].width);
                    flops->add(l.name, n, n);
                }
                break;
            }
            case LayerKind::Relu: outs[idx] = dense_relu(a); break;
            case LayerKind::Truncate: outs[idx] = a; break;
            case LayerKind::MaxPool: outs[idx] = dense_maxpool(a, l.pool_k, l.pool_stride); break;
            case LayerKind::AvgPool: outs[idx] = dense_avgpool(a, l.pool_k, l.pool_stride); break;
            case LayerKind::Upsample: outs[idx] = dense_upsample_nearest(a, l.factor); break;
            case LayerKind::BatchNorm: outs[idx] = dense_batchnorm(a, l.bn_scale, l.bn_shift); break;
            case LayerKind::Add: outs[idx] = dense_add(a, get(l.inputs[1])); break;
            case LayerKind::Output:
                outs[idx] = a;
                break;
        }
        if (post_layer) post_layer(idx, outs[idx]);
        if (l.kind == LayerKind::Output) result = outs[idx];
    }
    return result;
}

FlopReport dense_flops(const ValidatedNet& net, int height, int width) {
    FlopReport report;
    for (int idx : net.topo) {
        const LayerDef& l = net.spec.layers[idx];
        const LayerInfo& o = net.info[idx];
        if (l.kind != LayerKind::Conv) continue;
        const int oh = height / o.cum_stride;
        const int ow = width / o.cum_stride;
        const uint64_t n =
            count_conv_flops(l.conv, oh, ow, static_cast<int64_t>(oh) * ow);
        report.add(l.name, n, n);
    }
    return report;
}

namespace {

using nlohmann::json;

std::vector<float> load_param_file(const std::string& dir, const std::string& rel,
                                   const json& manifest, size_t expect) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(dir) / rel).string();
    const Tensor t = load_tensor(path);
    if (manifest.contains(rel)) {
        size_t n = 1;
        for (const auto& d : manifest.at(rel)) n *= d.get<size_t>();
        if (n != t.size())
            throw IoError("weight file " + rel + " does not match its manifest shape");
    }
    if (t.size() != expect)
        throw IoError("weight file " + rel + " holds " + std::to_string(t.size()) +
                      " values, expected " + std::to_string(expect));
    return t.data;
}

std::vector<float> load_params(const json& j, const char* file_key, const char* inline_key,
                               const std::string& dir, const json& manifest, size_t expect) {
    if (j.contains(inline_key)) {
        std::vector<float> v = j.at(inline_key).get<std::vector<float>>();
        if (v.size() != expect)
            throw IoError(std::string("inline weights under '") + inline_key + "' hold " +
                          std::to_string(v.size()) + " values, expected " + std::to_string(expect));
        return v;
    }
    if (j.contains(file_key))
        return load_param_file(dir, j.at(file_key).get<std::string>(), manifest, expect);
    throw IoError(std::string("layer is missing '") + file_key + "'");
}

}  // namespace

NetworkSpec load_network(const std::string& net_path, const std::string& weights_dir) {
    namespace fs = std::filesystem;
    std::ifstream in(net_path);
    if (!in) throw IoError("cannot open: " + net_path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("bad JSON in " + net_path + ": " + e.what());
    }

    try {
        if (root.value("version", 1) != 1) throw IoError("unsupported network schema version");
        const std::string dir =
            weights_dir.empty() ? fs::path(net_path).parent_path().string() : weights_dir;
        const json manifest = root.value("manifest", json::object());

        NetworkSpec spec;
        spec.in_channels = root.at("input").at("channels").get<int>();
        for (const json& jl : root.at("layers")) {
            LayerDef l;
            l.name = jl.at("name").get<std::string>();
            const std::string kind = jl.at("kind").get<std::string>();
            if (jl.contains("inputs"))
                l.inputs = jl.at("inputs").get<std::vector<std::string>>();
            else if (jl.contains("input"))
                l.inputs = {jl.at("input").get<std::string>()};

            if (kind == "conv") {
                l.kind = LayerKind::Conv;
                l.conv.out_channels = jl.at("out_channels").get<int>();
                l.conv.in_channels = jl.at("in_channels").get<int>();
                l.conv.kernel_h = l.conv.kernel_w = jl.at("kernel").get<int>();
                l.conv.stride = jl.value("stride", 1);
                l.conv.padding = jl.value("padding", l.conv.kernel_h / 2);
                const size_t wn = static_cast<size_t>(l.conv.out_channels) * l.conv.in_channels *
                                  l.conv.kernel_h * l.conv.kernel_w;
                l.conv.weights = load_params(jl, "weights", "weights_inline", dir, manifest, wn);
                if (jl.contains("bias_file") || jl.contains("bias_inline")) {
                    l.conv.bias = load_params(jl, "bias_file", "bias_inline", dir, manifest,
                                              static_cast<size_t>(l.conv.out_channels));
                }
            } else if (kind == "relu" || kind == "truncate") {
                l.kind = kind == "relu" ? LayerKind::Relu : LayerKind::Truncate;
                if (jl.contains("threshold")) l.threshold = jl.at("threshold").get<float>();
                l.truncate_enabled = jl.value("truncate", true);
            } else if (kind == "maxpool" || kind == "avgpool") {
                l.kind = kind == "maxpool" ? LayerKind::MaxPool : LayerKind::AvgPool;
                l.pool_k = jl.value("k", 2);
                l.pool_stride = jl.value("stride", l.pool_k);
            } else if (kind == "upsample") {
                l.kind = LayerKind::Upsample;
                l.factor = jl.value("factor", 2);
            } else if (kind == "batchnorm") {
                l.kind = LayerKind::BatchNorm;
                const int c = jl.at("channels").get<int>();
                l.bn_scale = load_params(jl, "scale_file", "scale_inline", dir, manifest,
                                         static_cast<size_t>(c));
                l.bn_shift = load_params(jl, "shift_file", "shift_inline", dir, manifest,
                                         static_cast<size_t>(c));
            } else if (kind == "add") {
                l.kind = LayerKind::Add;
            } else if (kind == "output") {
                l.kind = LayerKind::Output;
            } else {
                throw IoError("unknown layer kind '" + kind + "' in " + net_path);
            }
            spec.layers.push_back(std::move(l));
        }
        return spec;
    } catch (const json::exception& e) {
        throw IoError("bad network schema in " + net_path + ": " + e.what());
    }
}

void save_network(const NetworkSpec& spec, const std::string& net_path) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(net_path).parent_path();
    json root;
    root["version"] = 1;
    root["input"] = {{"channels", spec.in_channels}};
    json layers = json::array();
    json manifest = json::object();

    for (const LayerDef& l : spec.layers) {
        json jl;
        jl["name"] = l.name;
        jl["kind"] = layer_kind_name(l.kind);
        if (l.kind == LayerKind::Add)
            jl["inputs"] = l.inputs;
        else
            jl["input"] = l.inputs.at(0);
        switch (l.kind) {
            case LayerKind::Conv: {
                jl["out_channels"] = l.conv.out_channels;
                jl["in_channels"] = l.conv.in_channels;
                jl["kernel"] = l.conv.kernel_h;
                jl["stride"] = l.conv.stride;
                const std::string wfile = l.name + "_w.dflx";
                Tensor w(l.conv.out_channels, l.conv.in_channels,
                         l.conv.kernel_h * l.conv.kernel_w);
                w.data = l.conv.weights;
                save_tensor(w, (dir / wfile).string());
                jl["weights"] = wfile;
                manifest[wfile] = {l.conv.out_channels, l.conv.in_channels, l.conv.kernel_h,
                                   l.conv.kernel_w};
                if (l.conv.has_bias()) {
                    const std::string bfile = l.name + "_b.dflx";
                    Tensor b(l.conv.out_channels, 1, 1);
                    b.data = l.conv.bias;
                    save_tensor(b, (dir / bfile).string());
                    jl["bias_file"] = bfile;
                    manifest[bfile] = {l.conv.out_channels};
                }
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Truncate:
                if (l.threshold) jl["threshold"] = *l.threshold;
                jl["truncate"] = l.truncate_enabled;
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool:
                jl["k"] = l.pool_k;
                jl["stride"] = l.pool_stride;
                break;
            case LayerKind::Upsample: jl["factor"] = l.factor; break;
            case LayerKind::BatchNorm: {
                jl["channels"] = static_cast<int>(l.bn_scale.size());
                const std::string sfile = l.name + "_scale.dflx";
                const std::string tfile = l.name + "_shift.dflx";
                Tensor s(static_cast<int>(l.bn_scale.size()), 1, 1);
                s.data = l.bn_scale;
                save_tensor(s, (dir / sfile).string());
                Tensor t(static_cast<int>(l.bn_shift.size()), 1, 1);
                t.data = l.bn_shift;
                save_tensor(t, (dir / tfile).string());
                jl["scale_file"] = sfile;
                jl["shift_file"] = tfile;
                manifest[sfile] = {static_cast<int>(l.bn_scale.size())};
                manifest[tfile] = {static_cast<int>(l.bn_shift.size())};
                break;
            }
            default: break;
        }
        layers.push_back(jl);
    }
    root["layers"] = layers;
    root["manifest"] = manifest;

    std::ofstream out(net_path);
    if (!out) throw IoError("cannot open for writing: " + net_path);
    out << root.dump(2) << "\n";
}

}  // namespace dflx
