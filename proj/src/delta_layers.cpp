#include "deltaflux/delta_layers.hpp"

namespace dflx {

namespace {

// Pixel bitmap over a packet's grown output area, extent-relative with a
// halo offset. Used to collect which output pixels a sparse op must
// actually compute.
struct PixelSet {
    int halo = 0;
    int ext_h = 0;
    int ext_w = 0;
    std::vector<uint8_t> bits;

    PixelSet(int halo_, int eh, int ew)
        : halo(halo_), ext_h(eh), ext_w(ew),
          bits(static_cast<size_t>(eh + 2 * halo_) * (ew + 2 * halo_), 0) {}

    int gh() const { return ext_h + 2 * halo; }
    int gw() const { return ext_w + 2 * halo; }
    void set(int y, int x) { bits[static_cast<size_t>(y + halo) * gw() + (x + halo)] = 1; }
    bool get(int y, int x) const {
        return bits[static_cast<size_t>(y + halo) * gw() + (x + halo)] != 0;
    }
    int64_t count() const {
        int64_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }

    // Mark every output pixel whose input window [o*s - back, o*s - back + span)
    // intersects the input rect [y0, y1) x [x0, x1).
    void mark_window_targets(int y0, int y1, int x0, int x1, int span, int back, int stride) {
        const auto lo = [&](int v0) {
            return static_cast<int>(floor_div(v0 + back - span, stride)) + 1;
        };
        const auto hi = [&](int v1) { return static_cast<int>(floor_div(v1 - 1 + back, stride)); };
        const int oy0 = std::max(lo(y0), -halo);
        const int oy1 = std::min(hi(y1), ext_h + halo - 1);
        const int ox0 = std::max(lo(x0), -halo);
        const int ox1 = std::min(hi(x1), ext_w + halo - 1);
        for (int y = oy0; y <= oy1; ++y)
            for (int x = ox0; x <= ox1; ++x) set(y, x);
    }
};

// Output halo needed so that every nonzero output of a windowed op over
// inputs supported within `in_halo` of the extent is representable. The
// stride lattice anchors at the extent origin, so the two sides need
// different amounts; the larger one is used symmetrically.
int windowed_out_halo(int in_halo, int span, int back, int stride) {
    const int64_t lo = ceil_div(in_halo + span - back, stride) - 1;
    const int64_t hi = ceil_div(in_halo + back, stride);
    return static_cast<int>(std::max<int64_t>({0, lo, hi}));
}

// Marks targets for every masked tile grown by the input halo (nonzero
// values can only live within `halo` pixels of a masked tile).
void mark_masked_sources(PixelSet& set, const DeltaPacket& in, int span, int back, int stride) {
    for (int tr = 0; tr < in.place.tiles_h; ++tr)
        for (int tc = 0; tc < in.place.tiles_w; ++tc) {
            if (!in.mask.get(tr, tc)) continue;
            const int y0 = tr * in.tile_h - in.halo;
            const int y1 = (tr + 1) * in.tile_h + in.halo;
            const int x0 = tc * in.tile_w - in.halo;
            const int x1 = (tc + 1) * in.tile_w + in.halo;
            set.mark_window_targets(y0, y1, x0, x1, span, back, stride);
        }
}

TileMask mask_from_pixels(const PixelSet& set, int tiles_h, int tiles_w, int tile_h, int tile_w) {
    TileMask m(tiles_h, tiles_w);
    for (int tr = 0; tr < tiles_h; ++tr)
        for (int tc = 0; tc < tiles_w; ++tc) {
            bool any = false;
            for (int y = tr * tile_h; y < (tr + 1) * tile_h && !any; ++y)
                for (int x = tc * tile_w; x < (tc + 1) * tile_w && !any; ++x)
                    if (set.get(y, x)) any = true;
            if (any) m.set(tr, tc);
        }
    return m;
}

}  // namespace

DeltaPacket make_packet(const FramePlacement& place, int tile_h, int tile_w, int channels,
                        int halo) {
    DeltaPacket p;
    p.place = place;
    p.tile_h = tile_h;
    p.tile_w = tile_w;
    p.halo = halo;
    p.delta = Tensor(channels, place.tiles_h * tile_h + 2 * halo,
                     place.tiles_w * tile_w + 2 * halo);
    p.mask = TileMask(place.tiles_h, place.tiles_w);
    return p;
}

DeltaPacket padded_delta_conv(const DeltaPacket& packet, const ConvParams& params,
                              FlopReport* flops, const std::string& name) {
    params.validate();
    check(packet.channels() == params.in_channels, "padded_delta_conv: channel mismatch");
    check(params.padding == params.radius(),
          "padded_delta_conv: engine convolutions need same-style padding");
    check(packet.tile_h % params.stride == 0 && packet.tile_w % params.stride == 0,
          "padded_delta_conv: stride misaligned with tile size");

    const int r = params.radius();
    const int s = params.stride;
    const int out_tile_h = packet.tile_h / s;
    const int out_tile_w = packet.tile_w / s;
    const int out_halo = windowed_out_halo(packet.halo, params.kernel_h, r, s);

    DeltaPacket out =
        make_packet(packet.place, out_tile_h, out_tile_w, params.out_channels, out_halo);

    PixelSet targets(out_halo, out.extent_h(), out.extent_w());
    mark_masked_sources(targets, packet, params.kernel_h, r, s);

    for (int oy = -out_halo; oy < out.extent_h() + out_halo; ++oy) {
        for (int ox = -out_halo; ox < out.extent_w() + out_halo; ++ox) {
            if (!targets.get(oy, ox)) continue;
            for (int o = 0; o < params.out_channels; ++o) {
                float acc = 0.0f;
                for (int i = 0; i < params.in_channels; ++i)
                    for (int ky = 0; ky < params.kernel_h; ++ky)
                        for (int kx = 0; kx < params.kernel_w; ++kx)
                            acc += packet.sample(i, oy * s - r + ky, ox * s - r + kx) *
                                   params.weight_at(o, i, ky, kx);
                out.at(o, oy, ox) = acc;
            }
        }
    }

    out.mask = mask_from_pixels(targets, packet.place.tiles_h, packet.place.tiles_w, out_tile_h,
                                out_tile_w);

    if (flops) {
        const uint64_t per_px =
            2ull * params.kernel_h * params.kernel_w * params.in_channels * params.out_channels;
        const uint64_t dense_px =
            static_cast<uint64_t>(out.extent_h()) * static_cast<uint64_t>(out.extent_w());
        flops->add(name, per_px * static_cast<uint64_t>(targets.count()), per_px * dense_px);
    }
    return out;
}

DeltaPacket delta_activation_truncate(const DeltaPacket& packet, TruncationState& state,
                                      ActKind kind, const SlotFilter& filter,
                                      const TileMask* gate) {
    const GridSpec& grid = state.accumulated.spec();
    check(packet.channels() == state.accumulated.channels(),
          "delta_activation_truncate: channel mismatch with state");
    check(packet.tile_h == grid.tile_h && packet.tile_w == grid.tile_w,
          "delta_activation_truncate: tile size misaligned with state buffers");
    check(!gate || (gate->tiles_h == packet.place.tiles_h && gate->tiles_w == packet.place.tiles_w),
          "delta_activation_truncate: gate dims mismatch");

    const int eh = packet.extent_h();
    const int ew = packet.extent_w();
    const int64_t gy0 = packet.place.origin.ty * packet.tile_h;
    const int64_t gx0 = packet.place.origin.tx * packet.tile_w;
    const int c_n = packet.channels();

    DeltaPacket out = make_packet(packet.place, packet.tile_h, packet.tile_w, c_n, 0);

    // Stash dilated border pixels for later unveiling.
    if (packet.halo > 0) {
        for (int y = -packet.halo; y < eh + packet.halo; ++y) {
            for (int x = -packet.halo; x < ew + packet.halo; ++x) {
                if (y >= 0 && y < eh && x >= 0 && x < ew) {
                    x = ew - 1;  // skip the interior of this row
                    continue;
                }
                const TileCoord t{floor_div(gx0 + x, packet.tile_w),
                                  floor_div(gy0 + y, packet.tile_h)};
                if (!slot_allows(filter, t)) continue;
                for (int c = 0; c < c_n; ++c)
                    state.truncated.add_global(c, gy0 + y, gx0 + x, packet.at(c, y, x));
            }
        }
    }

    for (int tr = 0; tr < packet.place.tiles_h; ++tr) {
        for (int tc = 0; tc < packet.place.tiles_w; ++tc) {
            if (!packet.mask.get(tr, tc)) continue;
            const TileCoord tile = packet.global_tile(tr, tc);
            if (!slot_allows(filter, tile)) continue;

            const int y0 = tr * packet.tile_h;
            const int x0 = tc * packet.tile_w;

            float tile_max = 0.0f;
            for (int c = 0; c < c_n; ++c)
                for (int y = y0; y < y0 + packet.tile_h; ++y)
                    for (int x = x0; x < x0 + packet.tile_w; ++x) {
                        const float cand =
                            state.truncated.at_global(c, gy0 + y, gx0 + x) + packet.at(c, y, x);
                        tile_max = std::max(tile_max, std::fabs(cand));
                    }

            const bool fire = gate ? gate->get(tr, tc)
                                   : (tile_max >= state.threshold && tile_max > 0.0f);
            if (fire) {
                for (int c = 0; c < c_n; ++c)
                    for (int y = y0; y < y0 + packet.tile_h; ++y)
                        for (int x = x0; x < x0 + packet.tile_w; ++x) {
                            float& trunc = state.truncated.at_global(c, gy0 + y, gx0 + x);
                            float& acc = state.accumulated.at_global(c, gy0 + y, gx0 + x);
                            const float cand = trunc + packet.at(c, y, x);
                            const float prev = acc;
                            acc = prev + cand;
                            trunc = 0.0f;
                            float d;
                            if (kind == ActKind::Relu)
                                d = std::max(acc, 0.0f) - std::max(prev, 0.0f);
                            else
                                d = cand;
                            out.at(c, y, x) = d;
                        }
                out.mask.set(tr, tc);
            } else {
                for (int c = 0; c < c_n; ++c)
                    for (int y = y0; y < y0 + packet.tile_h; ++y)
                        for (int x = x0; x < x0 + packet.tile_w; ++x)
                            state.truncated.add_global(c, gy0 + y, gx0 + x, packet.at(c, y, x));
            }
        }
    }
    return out;
}

DeltaPacket delta_maxpool(const DeltaPacket& packet, MaxPoolState& state,
                          const SlotFilter& filter) {
    const int k = state.k;
    const int s = state.stride;
    const int pad = state.padding;
    check(packet.channels() == state.accumulated.channels(), "delta_maxpool: channel mismatch");
    check(packet.tile_h == state.accumulated.spec().tile_h &&
              packet.tile_w == state.accumulated.spec().tile_w,
          "delta_maxpool: tile size misaligned with state");
    check(packet.tile_h % s == 0 && packet.tile_w % s == 0,
          "delta_maxpool: stride misaligned with tile size");

    const int eh = packet.extent_h();
    const int ew = packet.extent_w();
    const int c_n = packet.channels();
    const int64_t gy0 = packet.place.origin.ty * packet.tile_h;
    const int64_t gx0 = packet.place.origin.tx * packet.tile_w;

    // Fold the incoming delta into the accumulated input.
    for (int tr = 0; tr < packet.place.tiles_h; ++tr)
        for (int tc = 0; tc < packet.place.tiles_w; ++tc) {
            if (!packet.mask.get(tr, tc)) continue;
            if (!slot_allows(filter, packet.global_tile(tr, tc))) continue;
            for (int c = 0; c < c_n; ++c)
                for (int y = tr * packet.tile_h; y < (tr + 1) * packet.tile_h; ++y)
                    for (int x = tc * packet.tile_w; x < (tc + 1) * packet.tile_w; ++x)
                        state.accumulated.add_global(c, gy0 + y, gx0 + x, packet.at(c, y, x));
        }
    if (packet.halo > 0) {
        for (int y = -packet.halo; y < eh + packet.halo; ++y)
            for (int x = -packet.halo; x < ew + packet.halo; ++x) {
                if (y >= 0 && y < eh && x >= 0 && x < ew) {
                    x = ew - 1;
                    continue;
                }
                const TileCoord t{floor_div(gx0 + x, packet.tile_w),
                                  floor_div(gy0 + y, packet.tile_h)};
                if (!slot_allows(filter, t)) continue;
                for (int c = 0; c < c_n; ++c)
                    state.accumulated.add_global(c, gy0 + y, gx0 + x, packet.at(c, y, x));
            }
    }

    const int out_tile_h = packet.tile_h / s;
    const int out_tile_w = packet.tile_w / s;
    const int out_halo = windowed_out_halo(packet.halo, k, pad, s);
    DeltaPacket out = make_packet(packet.place, out_tile_h, out_tile_w, c_n, out_halo);

    PixelSet targets(out_halo, out.extent_h(), out.extent_w());
    mark_masked_sources(targets, packet, k, pad, s);

    const int64_t oy0 = packet.place.origin.ty * out_tile_h;
    const int64_t ox0 = packet.place.origin.tx * out_tile_w;
    for (int oy = -out_halo; oy < out.extent_h() + out_halo; ++oy) {
        for (int ox = -out_halo; ox < out.extent_w() + out_halo; ++ox) {
            if (!targets.get(oy, ox)) continue;
            const TileCoord out_tile{floor_div(ox0 + ox, out_tile_w),
                                     floor_div(oy0 + oy, out_tile_h)};
            if (!slot_allows(filter, out_tile)) continue;
            for (int c = 0; c < c_n; ++c) {
                float m = 0.0f;
                bool first = true;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int64_t iy = (oy0 + oy) * s - pad + ky;
                        const int64_t ix = (ox0 + ox) * s - pad + kx;
                        const TileCoord in_tile{floor_div(ix, packet.tile_w),
                                                floor_div(iy, packet.tile_h)};
                        const float v = slot_allows(filter, in_tile)
                                            ? state.accumulated.at_global(c, iy, ix)
                                            : 0.0f;
                        m = first ? v : std::max(m, v);
                        first = false;
                    }
                float& prev = state.prev_out.at_global(c, oy0 + oy, ox0 + ox);
                out.at(c, oy, ox) = m - prev;
                prev = m;
            }
        }
    }

    out.mask = mask_from_pixels(targets, packet.place.tiles_h, packet.place.tiles_w, out_tile_h,
                                out_tile_w);
    return out;
}

DeltaPacket delta_avgpool(const DeltaPacket& packet, int k, int stride, int padding) {
    check(packet.tile_h % stride == 0 && packet.tile_w % stride == 0,
          "delta_avgpool: stride misaligned with tile size");
    const int out_tile_h = packet.tile_h / stride;
    const int out_tile_w = packet.tile_w / stride;
    const int out_halo = windowed_out_halo(packet.halo, k, padding, stride);
    const int c_n = packet.channels();

    DeltaPacket out = make_packet(packet.place, out_tile_h, out_tile_w, c_n, out_halo);
    PixelSet targets(out_halo, out.extent_h(), out.extent_w());
    mark_masked_sources(targets, packet, k, padding, stride);

    const float inv = 1.0f / static_cast<float>(k * k);
    for (int oy = -out_halo; oy < out.extent_h() + out_halo; ++oy)
        for (int ox = -out_halo; ox < out.extent_w() + out_halo; ++ox) {
            if (!targets.get(oy, ox)) continue;
            for (int c = 0; c < c_n; ++c) {
                float sum = 0.0f;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx)
                        sum += packet.sample(c, oy * stride - padding + ky,
                                             ox * stride - padding + kx);
                out.at(c, oy, ox) = sum * inv;
            }
        }

    out.mask = mask_from_pixels(targets, packet.place.tiles_h, packet.place.tiles_w, out_tile_h,
                                out_tile_w);
    return out;
}

DeltaPacket delta_upsample_nearest(const DeltaPacket& packet, int factor) {
    check(factor >= 1, "delta_upsample_nearest: factor must be >= 1");
    const int c_n = packet.channels();
    DeltaPacket out = make_packet(packet.place, packet.tile_h * factor, packet.tile_w * factor,
                                  c_n, packet.halo * factor);
    for (int c = 0; c < c_n; ++c)
        for (int y = -out.halo; y < out.extent_h() + out.halo; ++y)
            for (int x = -out.halo; x < out.extent_w() + out.halo; ++x)
                out.at(c, y, x) = packet.at(c, static_cast<int>(floor_div(y, factor)),
                                            static_cast<int>(floor_div(x, factor)));
    out.mask = packet.mask;
    return out;
}

DeltaPacket delta_batchnorm_scale(const DeltaPacket& packet, const std::vector<float>& scale) {
    check(scale.size() == static_cast<size_t>(packet.channels()),
          "delta_batchnorm_scale: per-channel count mismatch");
    DeltaPacket out = packet;
    for (int c = 0; c < out.channels(); ++c) {
        const float s = scale[c];
        const size_t plane = static_cast<size_t>(out.grown_h()) * out.grown_w();
        float* p = out.delta.data.data() + static_cast<size_t>(c) * plane;
        for (size_t i = 0; i < plane; ++i) p[i] *= s;
    }
    return out;
}

DeltaPacket delta_add(const DeltaPacket& a, const DeltaPacket& b) {
    check(a.place == b.place, "delta_add: placement mismatch");
    check(a.tile_h == b.tile_h && a.tile_w == b.tile_w, "delta_add: tile size mismatch");
    check(a.channels() == b.channels(), "delta_add: channel mismatch");

    const int halo = std::max(a.halo, b.halo);
    DeltaPacket out = make_packet(a.place, a.tile_h, a.tile_w, a.channels(), halo);
    for (int c = 0; c < out.channels(); ++c)
        for (int y = -halo; y < out.extent_h() + halo; ++y)
            for (int x = -halo; x < out.extent_w() + halo; ++x)
                out.at(c, y, x) = a.sample(c, y, x) + b.sample(c, y, x);
    for (int tr = 0; tr < out.place.tiles_h; ++tr)
        for (int tc = 0; tc < out.place.tiles_w; ++tc)
            out.mask.set(tr, tc, a.mask.get(tr, tc) || b.mask.get(tr, tc));
    return out;
}

Tensor densify(const TruncationState& state, const FramePlacement& place) {
    Tensor out = state.accumulated.read_region(place);
    const Tensor trunc = state.truncated.read_region(place);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += trunc.data[i];
    return out;
}

}  // namespace dflx
