#include "deltaflux/engine.hpp"

#include <filesystem>

namespace dflx {

DeltaEngine::DeltaEngine(const NetworkSpec& spec, const EngineConfig& config)
    : net_(validate(spec, config.tile_size)), config_(config) {
    check(config_.tile_size >= 1, "engine: tile size must be >= 1");
    check(config_.input_threshold >= 0.0f && config_.default_threshold >= 0.0f,
          "engine: thresholds must be >= 0");
    check(config_.mask_dilation >= 0, "engine: mask dilation must be >= 0");
    trunc_states_.resize(net_.spec.layers.size());
    pool_states_.resize(net_.spec.layers.size());
}

GridSpec DeltaEngine::input_grid() const {
    return {config_.tile_size, config_.tile_size, grid_rows_, grid_cols_};
}

const TruncationState* DeltaEngine::truncation_state(const std::string& layer) const {
    const int i = net_.index_of(layer);
    if (i < 0 || !trunc_states_[i]) return nullptr;
    return &*trunc_states_[i];
}

const MaxPoolState* DeltaEngine::maxpool_state(const std::string& layer) const {
    const int i = net_.index_of(layer);
    if (i < 0 || !pool_states_[i]) return nullptr;
    return &*pool_states_[i];
}

void DeltaEngine::allocate(const FramePlacement& first) {
    const int ring = config_.padded_convolutions ? net_.ring_tiles : 1;
    grid_rows_ = config_.grid_rows > 0 ? config_.grid_rows : first.tiles_h + 2 * ring;
    grid_cols_ = config_.grid_cols > 0 ? config_.grid_cols : first.tiles_w + 2 * ring;
    check(grid_rows_ >= 1 && grid_cols_ >= 1, "engine: bad grid dims");

    ledger_ = TileLedger(grid_rows_, grid_cols_);
    input_state_ = TruncationState({config_.tile_size, config_.tile_size, grid_rows_, grid_cols_},
                                   net_.spec.in_channels, config_.input_threshold);

    for (size_t i = 0; i < net_.spec.layers.size(); ++i) {
        const LayerDef& l = net_.spec.layers[i];
        const LayerInfo& info = net_.info[i];
        switch (l.kind) {
            case LayerKind::Relu:
            case LayerKind::Truncate:
            case LayerKind::Output: {
                float thr = 0.0f;
                if (l.kind != LayerKind::Output && l.truncate_enabled) {
                    thr = config_.override_net_thresholds || !l.threshold
                              ? config_.default_threshold
                              : *l.threshold;
                }
                const GridSpec g{info.in_tile, info.in_tile, grid_rows_, grid_cols_};
                trunc_states_[i] = TruncationState(g, info.in_channels, thr);
                // Bias of the chain since the previous truncation point.
                const int src = net_.spec.layers[i].inputs[0] == "input"
                                    ? -1
                                    : net_.index_of(net_.spec.layers[i].inputs[0]);
                trunc_states_[i]->bias_init =
                    src < 0 ? std::vector<float>(info.in_channels, 0.0f) : net_.info[src].beta;
                break;
            }
            case LayerKind::MaxPool: {
                const GridSpec gi{info.in_tile, info.in_tile, grid_rows_, grid_cols_};
                const GridSpec go{info.tile, info.tile, grid_rows_, grid_cols_};
                pool_states_[i] = MaxPoolState(gi, go, info.in_channels, l.pool_k, l.pool_stride, 0);
                break;
            }
            default: break;
        }
    }
    initialized_ = true;
}

void DeltaEngine::zero_tile_everywhere(const TileCoord& t) {
    input_state_.accumulated.zero_tile(t);
    input_state_.truncated.zero_tile(t);
    for (auto& s : trunc_states_)
        if (s) {
            s->accumulated.zero_tile(t);
            s->truncated.zero_tile(t);
        }
    for (auto& s : pool_states_)
        if (s) {
            s->accumulated.zero_tile(t);
            s->prev_out.zero_tile(t);
        }
}

void DeltaEngine::reset() {
    if (!initialized_) return;
    ledger_.clear();
    input_state_.accumulated.zero_all();
    input_state_.truncated.zero_all();
    for (auto& s : trunc_states_)
        if (s) {
            s->accumulated.zero_all();
            s->truncated.zero_all();
        }
    for (auto& s : pool_states_)
        if (s) {
            s->accumulated.zero_all();
            s->prev_out.zero_all();
        }
}

TileMask DeltaEngine::input_gate(const DeltaPacket& raw, const FramePlan& plan,
                                 const Tensor* roi) const {
    const int eh = raw.extent_h();
    const int ew = raw.extent_w();
    const int64_t gy0 = raw.place.origin.ty * raw.tile_h;
    const int64_t gx0 = raw.place.origin.tx * raw.tile_w;

    // Candidate = withheld input mass + new delta; the significance test
    // (ROI-scaled when enabled) runs on it per pixel.
    Tensor cand(raw.channels(), eh, ew);
    for (int c = 0; c < raw.channels(); ++c)
        for (int y = 0; y < eh; ++y)
            for (int x = 0; x < ew; ++x)
                cand.at(c, y, x) =
                    input_state_.truncated.at_global(c, gy0 + y, gx0 + x) + raw.at(c, y, x);

    Tensor factors;
    if (config_.roi_enabled && roi) {
        check(roi->channels == 1 && roi->height == eh && roi->width == ew,
              "roi mask must be single-channel at aligned-frame resolution");
        factors = roi_factor_map(*roi);
    }

    Tensor sig(1, eh, ew);
    for (int y = 0; y < eh; ++y)
        for (int x = 0; x < ew; ++x) {
            float m = 0.0f;
            for (int c = 0; c < raw.channels(); ++c) m = std::max(m, std::fabs(cand.at(c, y, x)));
            if (!factors.empty()) m *= factors.at(0, y, x);
            sig.at(0, y, x) = m > config_.input_threshold ? 1.0f : 0.0f;
        }

    if (config_.noise_suppression) {
        // Re-run the supporter rule on the significance map directly.
        Tensor kept(1, eh, ew);
        for (int y = 0; y < eh; ++y)
            for (int x = 0; x < ew; ++x) {
                if (sig.at(0, y, x) == 0.0f) continue;
                int supporters = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= eh || xx < 0 || xx >= ew) continue;
                        if (sig.at(0, yy, xx) > 0.0f) ++supporters;
                    }
                if (supporters >= 2) kept.at(0, y, x) = 1.0f;
            }
        sig = std::move(kept);
    }

    if (config_.mask_dilation > 0) sig = mask_dilate(sig, config_.mask_dilation);

    TileMask gate(raw.place.tiles_h, raw.place.tiles_w);
    for (int tr = 0; tr < raw.place.tiles_h; ++tr)
        for (int tc = 0; tc < raw.place.tiles_w; ++tc) {
            if (!raw.mask.get(tr, tc)) continue;  // tile untouched by this frame
            bool any = false;
            for (int y = tr * raw.tile_h; y < (tr + 1) * raw.tile_h && !any; ++y)
                for (int x = tc * raw.tile_w; x < (tc + 1) * raw.tile_w && !any; ++x)
                    if (sig.at(0, y, x) > 0.0f) any = true;
            if (any) gate.set(tr, tc);
        }

    // Newly unveiled regions are propagated directly.
    for (const TileCoord& t : plan.fresh_tiles) {
        const int tr = static_cast<int>(t.ty - raw.place.origin.ty);
        const int tc = static_cast<int>(t.tx - raw.place.origin.tx);
        if (tr >= 0 && tr < raw.place.tiles_h && tc >= 0 && tc < raw.place.tiles_w &&
            raw.mask.get(tr, tc))
            gate.set(tr, tc);
    }
    return gate;
}

FrameResult DeltaEngine::run_frame(const Tensor& frame, const Homography& h, const Tensor* roi) {
    check(frame.channels == net_.spec.in_channels, "run_frame: input channel mismatch");

    // Factor the integer translation out of the homography so that pure
    // pans stay exact and the residual warp stays within the frame window.
    const int64_t off_x = static_cast<int64_t>(std::llround(h.m[2]));
    const int64_t off_y = static_cast<int64_t>(std::llround(h.m[5]));
    const Homography residual =
        Homography::translation(static_cast<float>(-off_x), static_cast<float>(-off_y)).compose(h);
    const Warped warped = warp(frame, residual);
    AlignedFrame aligned = snap_to_grid(warped, off_x, off_y, config_.tile_size,
                                        initialized_ ? grid_rows_ : config_.grid_rows,
                                        initialized_ ? grid_cols_ : config_.grid_cols);
    if (!initialized_) allocate(aligned.place);

    FrameResult result;
    result.place = aligned.place;
    result.events.frame_index = frame_index_;
    result.events.origin = aligned.place.origin;
    result.events.dropped_pixels = aligned.dropped_pixels;

    const int ring = config_.padded_convolutions ? net_.ring_tiles : 0;
    FramePlan plan = plan_frame(ledger_, aligned.place, ring);
    if (plan.needs_full_reset) {
        reset();
        result.events.reset = true;
        plan = plan_frame(ledger_, aligned.place, ring);
    }
    apply_plan(plan, ledger_, [this](const TileCoord& t) { zero_tile_everywhere(t); });
    for (auto& s : trunc_states_)
        if (s) inject_bias_implicit(plan, *s);

    result.events.fresh = static_cast<int>(plan.fresh_tiles.size());
    result.events.evicted = static_cast<int>(plan.evicted_tiles.size());

    const SlotFilter filter = [this](const TileCoord& t) { return ledger_.holds(t); };

    // Align the previous-frame ROI mask the same way as the frame.
    Tensor aligned_roi;
    if (config_.roi_enabled && roi) {
        check(roi->channels == 1 && roi->height == frame.height && roi->width == frame.width,
              "run_frame: roi mask must be single channel at frame resolution");
        const Warped wroi = warp(*roi, residual);
        aligned_roi = snap_to_grid(wroi, off_x, off_y, config_.tile_size, grid_rows_, grid_cols_)
                          .image;
    }

    DeltaPacket raw = compute_input_delta(aligned, input_state_);
    const TileMask gate = input_gate(raw, plan, aligned_roi.empty() ? nullptr : &aligned_roi);
    DeltaPacket packet = delta_activation_truncate(raw, input_state_, ActKind::Identity, filter,
                                                   &gate);
    result.update_rate =
        static_cast<double>(packet.mask.count()) /
        (static_cast<double>(aligned.place.tiles_h) * aligned.place.tiles_w);
    result.input_mask = packet.mask;
    if (observer_) observer_("input", packet);

    std::vector<std::optional<DeltaPacket>> outs(net_.spec.layers.size());
    const auto get = [&](const std::string& name) -> const DeltaPacket& {
        if (name == "input") return packet;
        return *outs[net_.index_of(name)];
    };

    for (int idx : net_.topo) {
        const LayerDef& l = net_.spec.layers[idx];
        const DeltaPacket& a = get(l.inputs[0]);
        DeltaPacket out;
        switch (l.kind) {
            case LayerKind::Conv:
                out = padded_delta_conv(a, l.conv, &result.flops, l.name);
                if (!config_.padded_convolutions && out.halo > 0) {
                    // Control mode: drop the dilated border instead of stashing.
                    DeltaPacket cropped =
                        make_packet(out.place, out.tile_h, out.tile_w, out.channels(), 0);
                    for (int c = 0; c < out.channels(); ++c)
                        for (int y = 0; y < cropped.extent_h(); ++y)
                            for (int x = 0; x < cropped.extent_w(); ++x)
                                cropped.at(c, y, x) = out.at(c, y, x);
                    cropped.mask = out.mask;
                    out = std::move(cropped);
                }
                break;
            case LayerKind::Relu:
                out = delta_activation_truncate(a, *trunc_states_[idx], ActKind::Relu, filter);
                break;
            case LayerKind::Truncate:
            case LayerKind::Output:
                out = delta_activation_truncate(a, *trunc_states_[idx], ActKind::Identity, filter);
                break;
            case LayerKind::MaxPool: out = delta_maxpool(a, *pool_states_[idx], filter); break;
            case LayerKind::AvgPool: out = delta_avgpool(a, l.pool_k, l.pool_stride); break;
            case LayerKind::Upsample: out = delta_upsample_nearest(a, l.factor); break;
            case LayerKind::BatchNorm: out = delta_batchnorm_scale(a, l.bn_scale); break;
            case LayerKind::Add: out = delta_add(a, get(l.inputs[1])); break;
        }
        if (observer_) observer_(l.name, out);
        outs[idx] = std::move(out);
    }

    const FramePlacement out_place = aligned.place;
    result.output = densify(*trunc_states_[net_.output_layer], out_place);
    ++frame_index_;
    return result;
}

void DeltaEngine::dump_state(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    dump_buffer(input_state_.accumulated, &ledger_, (fs::path(dir) / "input_acc.dflx").string());
    dump_buffer(input_state_.truncated, &ledger_, (fs::path(dir) / "input_trunc.dflx").string());
    for (size_t i = 0; i < net_.spec.layers.size(); ++i) {
        const std::string& name = net_.spec.layers[i].name;
        if (trunc_states_[i]) {
            dump_buffer(trunc_states_[i]->accumulated, &ledger_,
                        (fs::path(dir) / (name + "_acc.dflx")).string());
            dump_buffer(trunc_states_[i]->truncated, &ledger_,
                        (fs::path(dir) / (name + "_trunc.dflx")).string());
        }
        if (pool_states_[i]) {
            dump_buffer(pool_states_[i]->accumulated, &ledger_,
                        (fs::path(dir) / (name + "_acc.dflx")).string());
            dump_buffer(pool_states_[i]->prev_out, &ledger_,
                        (fs::path(dir) / (name + "_prev.dflx")).string());
        }
    }
}

}  // namespace dflx
