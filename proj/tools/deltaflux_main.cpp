// deltaflux command line: run sparse video inference, compare it against
// dense references, generate synthetic sequences and report FLOPs.
//
// Exit codes: 0 ok, 1 tolerance exceeded, 2 input/usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "deltaflux/canvas_oracle.hpp"
#include "deltaflux/engine.hpp"
#include "deltaflux/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dflx;

namespace {

std::vector<std::string> list_frames(const std::string& dir) {
    std::vector<std::string> files;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string ext = e.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm" || ext == ".dflx") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no frames (.ppm/.pgm/.dflx) in " + dir);
    return files;
}

struct ThresholdArgs {
    std::optional<float> input;
    std::optional<float> rest;
    std::map<std::string, float> per_layer;
};

ThresholdArgs parse_thresholds(const std::string& arg) {
    ThresholdArgs t;
    if (arg.empty()) return t;
    if (arg[0] == '@') {
        std::ifstream in(arg.substr(1));
        if (!in) throw IoError("cannot open threshold file: " + arg.substr(1));
        std::string name;
        float value;
        while (in >> name >> value) {
            if (name == "input")
                t.input = value;
            else
                t.per_layer[name] = value;
        }
        return t;
    }
    std::stringstream ss(arg);
    std::string item;
    std::vector<float> vals;
    while (std::getline(ss, item, ',')) vals.push_back(std::stof(item));
    if (vals.size() == 1) {
        t.input = vals[0];
        t.rest = vals[0];
    } else if (vals.size() == 2) {
        t.input = vals[0];
        t.rest = vals[1];
    } else {
        throw IoError("--thresholds expects 'input,rest' or a single value or @file");
    }
    return t;
}

struct CommonArgs {
    std::string net_path;
    std::string weights_dir;
    std::string frames_dir;
    std::string homography_path;
    std::string roi_path;
    std::string out_dir = "out";
    std::string thresholds;
    std::string grid;
    std::string noise = "off";
    std::string padded = "on";
    int tile_size = 32;
    int mask_dilation = 10;
    double tolerance = 1e-4;
    uint64_t seed = 42;
    bool debug = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--net", a.net_path, "network description JSON")->required();
    cmd->add_option("--weights", a.weights_dir, "weights directory (default: net file's dir)");
    cmd->add_option("--frames", a.frames_dir, "directory of frames (.ppm/.pgm/.dflx)")->required();
    cmd->add_option("--homographies", a.homography_path,
                    "text file, 9 floats per line, frame -> reference");
    cmd->add_option("--tile-size", a.tile_size, "input tile size in pixels");
    cmd->add_option("--grid", a.grid, "buffer grid dims as RxC (default: frame tiles + ring)");
    cmd->add_option("--thresholds", a.thresholds, "'input,rest' comma list or @per-layer-file");
    cmd->add_option("--roi-mask", a.roi_path, "single-channel ROI mask image (pgm)");
    cmd->add_option("--noise-suppression", a.noise, "on|off (default off)");
    cmd->add_option("--mask-dilation", a.mask_dilation, "update-mask dilation radius in px");
    cmd->add_option("--padded-convs", a.padded, "on|off (off demonstrates seam artifacts)");
    cmd->add_option("--tolerance", a.tolerance, "comparison tolerance");
    cmd->add_option("--seed", a.seed, "random seed");
    cmd->add_option("--out-dir", a.out_dir, "output directory");
    cmd->add_flag("--debug", a.debug, "dump per-layer buffers per frame");
}

EngineConfig make_config(CommonArgs& a, NetworkSpec& spec) {
    EngineConfig cfg;
    cfg.tile_size = a.tile_size;
    cfg.mask_dilation = a.mask_dilation;
    cfg.noise_suppression = a.noise == "on";
    cfg.padded_convolutions = a.padded != "off";
    cfg.roi_enabled = !a.roi_path.empty();
    if (!a.grid.empty()) {
        const auto x = a.grid.find('x');
        if (x == std::string::npos) throw IoError("--grid expects RxC");
        cfg.grid_rows = std::stoi(a.grid.substr(0, x));
        cfg.grid_cols = std::stoi(a.grid.substr(x + 1));
    }
    const ThresholdArgs t = parse_thresholds(a.thresholds);
    if (t.input) cfg.input_threshold = *t.input;
    if (t.rest) {
        cfg.default_threshold = *t.rest;
        cfg.override_net_thresholds = true;
    }
    for (auto& l : spec.layers) {
        auto it = t.per_layer.find(l.name);
        if (it != t.per_layer.end()) l.threshold = it->second;
    }
    return cfg;
}

std::vector<Homography> homographies_for(const CommonArgs& a, size_t n_frames) {
    if (a.homography_path.empty())
        return std::vector<Homography>(n_frames, Homography::identity());
    auto hs = load_homographies(a.homography_path);
    if (hs.size() < n_frames)
        throw IoError("homography file has " + std::to_string(hs.size()) + " lines, need " +
                      std::to_string(n_frames));
    hs.resize(n_frames);
    return hs;
}

// Align a frame the same way the engine does, for dense comparisons.
AlignedFrame align_like_engine(const Tensor& frame, const Homography& h, const EngineConfig& cfg,
                               const DeltaEngine& engine) {
    const int64_t off_x = static_cast<int64_t>(std::llround(h.m[2]));
    const int64_t off_y = static_cast<int64_t>(std::llround(h.m[5]));
    const Homography residual =
        Homography::translation(static_cast<float>(-off_x), static_cast<float>(-off_y)).compose(h);
    const Warped w = warp(frame, residual);
    const GridSpec g = engine.input_grid();
    return snap_to_grid(w, off_x, off_y, cfg.tile_size, engine.initialized() ? g.rows : 0,
                        engine.initialized() ? g.cols : 0);
}

void write_mask_pgm(const TileMask& mask, int tile, const std::string& path) {
    Tensor img(1, std::max(1, mask.tiles_h * tile), std::max(1, mask.tiles_w * tile));
    for (int tr = 0; tr < mask.tiles_h; ++tr)
        for (int tc = 0; tc < mask.tiles_w; ++tc) {
            if (!mask.get(tr, tc)) continue;
            for (int y = tr * tile; y < (tr + 1) * tile; ++y)
                for (int x = tc * tile; x < (tc + 1) * tile; ++x) img.at(0, y, x) = 1.0f;
        }
    save_pgm(img, path);
}

json frame_record(int index, const FrameResult& r) {
    json j;
    j["index"] = index;
    j["origin"] = {r.events.origin.ty, r.events.origin.tx};
    j["tiles"] = {r.place.tiles_h, r.place.tiles_w};
    j["update_rate"] = r.update_rate;
    j["conv_flops"] = r.flops.total;
    j["dense_flops"] = r.flops.dense_total;
    j["flop_ratio"] = r.flops.ratio();
    j["fresh"] = r.events.fresh;
    j["evicted"] = r.events.evicted;
    j["reset"] = r.events.reset;
    j["dropped_pixels"] = r.events.dropped_pixels;
    return j;
}

int cmd_run(CommonArgs& a, bool compare_dense) {
    NetworkSpec spec = load_network(a.net_path, a.weights_dir);
    const EngineConfig cfg = make_config(a, spec);
    DeltaEngine engine(spec, cfg);
    const ValidatedNet& vnet = engine.net();

    const auto files = list_frames(a.frames_dir);
    const auto hs = homographies_for(a, files.size());
    Tensor roi;
    if (!a.roi_path.empty()) roi = load_pgm(a.roi_path);

    fs::create_directories(a.out_dir);
    json report;
    report["schema"] = "deltaflux-run-report/1";
    report["net"] = a.net_path;
    report["frames"] = json::array();

    double sum_update = 0.0;
    uint64_t total_flops = 0, total_dense = 0;
    int resets = 0;
    double worst_diff = 0.0;

    for (size_t i = 0; i < files.size(); ++i) {
        const Tensor frame = load_frame(files[i]);
        const FrameResult r = engine.run_frame(frame, hs[i], roi.empty() ? nullptr : &roi);

        char name[64];
        std::snprintf(name, sizeof(name), "output_%04zu.dflx", i);
        save_tensor(r.output, (fs::path(a.out_dir) / name).string());
        std::snprintf(name, sizeof(name), "mask_%04zu.pgm", i);
        write_mask_pgm(r.input_mask, cfg.tile_size, (fs::path(a.out_dir) / name).string());

        json jf = frame_record(static_cast<int>(i), r);
        if (compare_dense) {
            const AlignedFrame al = align_like_engine(frame, hs[i], cfg, engine);
            const Tensor dense = run_dense(vnet, al.image);
            const float d = max_abs_diff(r.output, dense);
            jf["max_abs_diff"] = d;
            worst_diff = std::max(worst_diff, static_cast<double>(d));
        }
        if (a.debug) {
            std::snprintf(name, sizeof(name), "debug/frame_%04zu", i);
            engine.dump_state((fs::path(a.out_dir) / name).string());
        }
        report["frames"].push_back(jf);

        std::cout << "frame " << i << ": origin (" << r.events.origin.ty << ","
                  << r.events.origin.tx << ") update_rate " << r.update_rate << " flops "
                  << r.flops.total << " fresh " << r.events.fresh << " evicted "
                  << r.events.evicted << (r.events.reset ? " RESET" : "") << "\n";

        sum_update += r.update_rate;
        total_flops += r.flops.total;
        total_dense += r.flops.dense_total;
        resets += r.events.reset ? 1 : 0;
    }

    json agg;
    agg["frames"] = files.size();
    agg["mean_update_rate"] = sum_update / static_cast<double>(files.size());
    agg["total_conv_flops"] = total_flops;
    agg["total_dense_flops"] = total_dense;
    agg["flop_ratio"] =
        total_dense ? static_cast<double>(total_flops) / static_cast<double>(total_dense) : 0.0;
    agg["resets"] = resets;
    if (compare_dense) agg["max_abs_diff"] = worst_diff;
    report["aggregate"] = agg;

    std::ofstream(fs::path(a.out_dir) / "report.json") << report.dump(2) << "\n";
    std::cout << "report: " << (fs::path(a.out_dir) / "report.json").string() << "\n";

    if (compare_dense && worst_diff > a.tolerance) {
        std::cerr << "tolerance exceeded: " << worst_diff << " > " << a.tolerance << "\n";
        return 1;
    }
    return 0;
}

int cmd_compare(CommonArgs& a, const std::string& mode) {
    if (mode != "dense" && mode != "fused-canvas")
        throw IoError("--mode must be dense or fused-canvas");
    NetworkSpec spec = load_network(a.net_path, a.weights_dir);
    const EngineConfig cfg = make_config(a, spec);
    DeltaEngine engine(spec, cfg);
    const ValidatedNet& vnet = engine.net();

    const auto files = list_frames(a.frames_dir);
    const auto hs = homographies_for(a, files.size());

    if (mode == "fused-canvas")
        for (const Homography& h : hs)
            if (!h.is_integer_translation())
                throw IoError("fused-canvas mode requires integer-translation homographies");

    FusedCanvas canvas(spec.in_channels, cfg.tile_size);
    fs::create_directories(a.out_dir);
    json report;
    report["schema"] = "deltaflux-compare-report/1";
    report["mode"] = mode;
    report["tolerance"] = a.tolerance;
    report["frames"] = json::array();

    double worst = 0.0;
    for (size_t i = 0; i < files.size(); ++i) {
        const Tensor frame = load_frame(files[i]);
        const FrameResult r = engine.run_frame(frame, hs[i], nullptr);
        const AlignedFrame al = align_like_engine(frame, hs[i], cfg, engine);

        float d = 0.0f;
        if (mode == "dense") {
            d = max_abs_diff(r.output, run_dense(vnet, al.image));
        } else {
            if (r.events.reset) canvas.reset();
            canvas.paste(al);
            d = max_abs_diff(r.output, canvas.run_crop(vnet, r.place));
        }
        worst = std::max(worst, static_cast<double>(d));

        json jf = frame_record(static_cast<int>(i), r);
        jf["max_abs_diff"] = d;
        report["frames"].push_back(jf);
        std::cout << "frame " << i << ": max_abs_diff " << d << (r.events.reset ? " RESET" : "")
                  << "\n";
    }

    report["max_abs_diff"] = worst;
    report["pass"] = worst <= a.tolerance;
    std::ofstream(fs::path(a.out_dir) / "compare.json") << report.dump(2) << "\n";
    std::cout << "worst diff " << worst << " tolerance " << a.tolerance
              << (worst <= a.tolerance ? " OK" : " EXCEEDED") << "\n";
    return worst <= a.tolerance ? 0 : 1;
}

// A small demonstration net matching the synth channel count.
NetworkSpec demo_net(int channels, uint64_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> uni(-0.4f, 0.4f);
    const auto conv = [&](const std::string& name, const std::string& in, int ic, int oc, int k,
                          bool bias) {
        LayerDef l;
        l.name = name;
        l.kind = LayerKind::Conv;
        l.inputs = {in};
        l.conv.in_channels = ic;
        l.conv.out_channels = oc;
        l.conv.kernel_h = l.conv.kernel_w = k;
        l.conv.stride = 1;
        l.conv.padding = k / 2;
        l.conv.weights.resize(static_cast<size_t>(oc) * ic * k * k);
        for (float& v : l.conv.weights) v = uni(rng);
        if (bias) {
            l.conv.bias.resize(oc);
            for (float& v : l.conv.bias) v = uni(rng);
        }
        return l;
    };
    const auto relu = [](const std::string& name, const std::string& in) {
        LayerDef l;
        l.name = name;
        l.kind = LayerKind::Relu;
        l.inputs = {in};
        return l;
    };

    NetworkSpec spec;
    spec.in_channels = channels;
    spec.layers.push_back(conv("conv1", "input", channels, 8, 3, true));
    spec.layers.push_back(relu("relu1", "conv1"));
    LayerDef pool;
    pool.name = "pool1";
    pool.kind = LayerKind::MaxPool;
    pool.inputs = {"relu1"};
    spec.layers.push_back(pool);
    spec.layers.push_back(conv("conv2", "pool1", 8, 8, 3, true));
    spec.layers.push_back(relu("relu2", "conv2"));
    spec.layers.push_back(conv("conv3", "relu2", 8, 4, 1, false));
    LayerDef out;
    out.name = "out";
    out.kind = LayerKind::Output;
    out.inputs = {"conv3"};
    spec.layers.push_back(out);
    return spec;
}

int cmd_synth(const std::string& kind, int width, int height, int frames, int pan_x, int pan_y,
              float noise_amp, bool object, uint64_t seed, const std::string& out_dir,
              bool emit_net) {
    SynthParams p;
    if (kind == "pan")
        p.kind = SynthParams::Kind::Pan;
    else if (kind == "static" || kind == "zoomless-static")
        p.kind = SynthParams::Kind::Static;
    else if (kind == "noise-field")
        p.kind = SynthParams::Kind::NoiseField;
    else if (kind == "moving-object")
        p.kind = SynthParams::Kind::MovingObject;
    else
        throw IoError("unknown synth kind: " + kind);
    p.width = width;
    p.height = height;
    p.frames = frames;
    p.pan_x = pan_x;
    p.pan_y = pan_y;
    p.noise_amplitude = noise_amp;
    p.with_object = object;
    p.seed = seed;

    const SynthSequence seq = synth_sequence(p);
    fs::create_directories(out_dir);
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%04zu.ppm", i);
        save_ppm(seq.frames[i], (fs::path(out_dir) / name).string());
    }
    save_homographies(seq.homographies, (fs::path(out_dir) / "homographies.txt").string());
    std::cout << "wrote " << seq.frames.size() << " frames + homographies.txt to " << out_dir
              << "\n";

    if (emit_net) {
        const fs::path net_dir = fs::path(out_dir) / "net";
        fs::create_directories(net_dir);
        save_network(demo_net(p.channels, seed), (net_dir / "net.json").string());
        std::cout << "wrote demo net to " << (net_dir / "net.json").string() << "\n";
    }
    return 0;
}

int cmd_flops(const std::string& net_path, const std::string& weights_dir, int width, int height,
              int tile_size) {
    const NetworkSpec spec = load_network(net_path, weights_dir);
    const ValidatedNet net = validate(spec, tile_size);
    const FlopReport r = dense_flops(net, height, width);
    std::cout << "dense conv FLOPs for " << width << "x" << height << " input:\n";
    for (const auto& l : r.layers) std::cout << "  " << l.name << ": " << l.flops << "\n";
    std::cout << "total: " << r.total << " (" << static_cast<double>(r.total) / 1e9
              << " GFLOPs)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deltaflux: sparse CNN inference on frame differences with moving cameras"};
    app.require_subcommand(1);

    CommonArgs run_args;
    bool compare_dense = false;
    CLI::App* run = app.add_subcommand("run", "process a sequence with the delta engine");
    add_common(run, run_args);
    run->add_flag("--compare-dense", compare_dense, "also diff each frame against dense inference");

    CommonArgs cmp_args;
    std::string cmp_mode = "dense";
    CLI::App* cmp = app.add_subcommand("compare", "run both executors and diff them");
    add_common(cmp, cmp_args);
    cmp->add_option("--mode", cmp_mode, "dense|fused-canvas")->required();

    std::string synth_kind = "pan", synth_out = "synth_out";
    int synth_w = 128, synth_h = 96, synth_frames = 6, synth_px = 0, synth_py = 0;
    float synth_amp = 0.05f;
    bool synth_obj = false, synth_net = false;
    uint64_t synth_seed = 42;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic test sequence");
    synth->add_option("--kind", synth_kind, "pan|static|noise-field|moving-object")->required();
    synth->add_option("--width", synth_w, "frame width");
    synth->add_option("--height", synth_h, "frame height");
    synth->add_option("--frames", synth_frames, "frame count");
    synth->add_option("--pan-x", synth_px, "camera pan px/frame");
    synth->add_option("--pan-y", synth_py, "camera pan px/frame");
    synth->add_option("--noise-amp", synth_amp, "noise amplitude (peak to peak)");
    synth->add_flag("--object", synth_obj, "add a moving object");
    synth->add_option("--seed", synth_seed, "random seed");
    synth->add_option("--out-dir", synth_out, "output directory")->required();
    synth->add_flag("--emit-net", synth_net, "also write a small demo network");

    std::string flops_net, flops_weights;
    int flops_w = 384, flops_h = 384, flops_tile = 32;
    CLI::App* flops = app.add_subcommand("flops", "dense FLOP report for a network");
    flops->add_option("--net", flops_net, "network description JSON")->required();
    flops->add_option("--weights", flops_weights, "weights directory");
    flops->add_option("--width", flops_w, "input width");
    flops->add_option("--height", flops_h, "input height");
    flops->add_option("--tile-size", flops_tile, "input tile size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_args, compare_dense);
        if (cmp->parsed()) return cmd_compare(cmp_args, cmp_mode);
        if (synth->parsed())
            return cmd_synth(synth_kind, synth_w, synth_h, synth_frames, synth_px, synth_py,
                             synth_amp, synth_obj, synth_seed, synth_out, synth_net);
        if (flops->parsed())
            return cmd_flops(flops_net, flops_weights, flops_w, flops_h, flops_tile);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
