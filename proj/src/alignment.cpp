#include "deltaflux/alignment.hpp"

namespace dflx {

double Homography::det() const {
    return static_cast<double>(m[0]) * (static_cast<double>(m[4]) * m[8] - static_cast<double>(m[5]) * m[7]) -
           static_cast<double>(m[1]) * (static_cast<double>(m[3]) * m[8] - static_cast<double>(m[5]) * m[6]) +
           static_cast<double>(m[2]) * (static_cast<double>(m[3]) * m[7] - static_cast<double>(m[4]) * m[6]);
}

Homography Homography::inverse() const {
    const double d = det();
    check(std::fabs(d) > 1e-9, "homography: singular matrix");
    const double inv = 1.0 / d;
    const auto& a = m;
    Homography r;
    r.m[0] = static_cast<float>((static_cast<double>(a[4]) * a[8] - static_cast<double>(a[5]) * a[7]) * inv);
    r.m[1] = static_cast<float>((static_cast<double>(a[2]) * a[7] - static_cast<double>(a[1]) * a[8]) * inv);
    r.m[2] = static_cast<float>((static_cast<double>(a[1]) * a[5] - static_cast<double>(a[2]) * a[4]) * inv);
    r.m[3] = static_cast<float>((static_cast<double>(a[5]) * a[6] - static_cast<double>(a[3]) * a[8]) * inv);
    r.m[4] = static_cast<float>((static_cast<double>(a[0]) * a[8] - static_cast<double>(a[2]) * a[6]) * inv);
    r.m[5] = static_cast<float>((static_cast<double>(a[2]) * a[3] - static_cast<double>(a[0]) * a[5]) * inv);
    r.m[6] = static_cast<float>((static_cast<double>(a[3]) * a[7] - static_cast<double>(a[4]) * a[6]) * inv);
    r.m[7] = static_cast<float>((static_cast<double>(a[1]) * a[6] - static_cast<double>(a[0]) * a[7]) * inv);
    r.m[8] = static_cast<float>((static_cast<double>(a[0]) * a[4] - static_cast<double>(a[1]) * a[3]) * inv);
    return r;
}

Homography Homography::compose(const Homography& inner) const {
    Homography r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                s += static_cast<double>(m[i * 3 + k]) * inner.m[k * 3 + j];
            r.m[i * 3 + j] = static_cast<float>(s);
        }
    // Renormalize so the bottom-right entry stays 1.
    if (r.m[8] != 0.0f && r.m[8] != 1.0f)
        for (float& v : r.m) v /= r.m[8];
    return r;
}

bool Homography::is_integer_translation(int64_t* dx, int64_t* dy) const {
    const auto is = [](float v, float target) { return std::fabs(v - target) < 1e-6f; };
    if (!is(m[0], 1) || !is(m[1], 0) || !is(m[3], 0) || !is(m[4], 1) || !is(m[6], 0) ||
        !is(m[7], 0) || !is(m[8], 1))
        return false;
    const float tx = m[2];
    const float ty = m[5];
    if (std::fabs(tx - std::round(tx)) > 1e-4f || std::fabs(ty - std::round(ty)) > 1e-4f)
        return false;
    if (dx) *dx = static_cast<int64_t>(std::llround(tx));
    if (dy) *dy = static_cast<int64_t>(std::llround(ty));
    return true;
}

Warped warp(const Tensor& frame, const Homography& h) {
    const Homography inv = h.inverse();

    Warped out;
    out.image = Tensor(frame.channels, frame.height, frame.width);
    out.footprint = Tensor(1, frame.height, frame.width);

    // Exact path for integer translations: no interpolation error.
    int64_t idx = 0, idy = 0;
    if (h.is_integer_translation(&idx, &idy)) {
        for (int y = 0; y < frame.height; ++y) {
            const int64_t sy = y - idy;
            if (sy < 0 || sy >= frame.height) continue;
            for (int x = 0; x < frame.width; ++x) {
                const int64_t sx = x - idx;
                if (sx < 0 || sx >= frame.width) continue;
                for (int c = 0; c < frame.channels; ++c)
                    out.image.at(c, y, x) = frame.at(c, static_cast<int>(sy), static_cast<int>(sx));
                out.footprint.at(0, y, x) = 1.0f;
            }
        }
        return out;
    }

    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const auto [sx, sy] = inv.apply(x, y);
            if (sx < 0.0 || sx > frame.width - 1 || sy < 0.0 || sy > frame.height - 1) continue;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const float fx = static_cast<float>(sx - x0);
            const float fy = static_cast<float>(sy - y0);
            const int x1 = std::min(x0 + 1, frame.width - 1);
            const int y1 = std::min(y0 + 1, frame.height - 1);
            for (int c = 0; c < frame.channels; ++c) {
                const float v00 = frame.at(c, y0, x0);
                const float v01 = frame.at(c, y0, x1);
                const float v10 = frame.at(c, y1, x0);
                const float v11 = frame.at(c, y1, x1);
                out.image.at(c, y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                        fy * ((1 - fx) * v10 + fx * v11);
            }
            out.footprint.at(0, y, x) = 1.0f;
        }
    }
    return out;
}

AlignedFrame snap_to_grid(const Warped& warped, int64_t off_x, int64_t off_y, int tile,
                          int max_rows, int max_cols) {
    check(tile >= 1, "snap_to_grid: tile must be >= 1");
    const int h = warped.image.height;
    const int w = warped.image.width;

    const int64_t ty0 = floor_div(off_y, tile);
    const int64_t tx0 = floor_div(off_x, tile);
    const int margin_y = static_cast<int>(off_y - ty0 * tile);
    const int margin_x = static_cast<int>(off_x - tx0 * tile);
    int tiles_h = static_cast<int>(ceil_div(margin_y + h, tile));
    int tiles_w = static_cast<int>(ceil_div(margin_x + w, tile));

    AlignedFrame out;
    out.place = {{tx0, ty0}, tiles_h, tiles_w};
    out.image = Tensor(warped.image.channels, tiles_h * tile, tiles_w * tile);
    out.valid = Tensor(1, tiles_h * tile, tiles_w * tile);
    for (int c = 0; c < warped.image.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.image.at(c, margin_y + y, margin_x + x) = warped.image.at(c, y, x);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.valid.at(0, margin_y + y, margin_x + x) = warped.footprint.at(0, y, x);

    // Crop tile-aligned when the aligned frame exceeds the buffer extent.
    const auto crop_axis = [&](int tiles, int max_tiles, int& drop_lo) {
        drop_lo = 0;
        if (max_tiles <= 0 || tiles <= max_tiles) return tiles;
        const int excess = tiles - max_tiles;
        drop_lo = excess / 2;
        return max_tiles;
    };
    int drop_top = 0, drop_left = 0;
    const int new_th = crop_axis(tiles_h, max_rows, drop_top);
    const int new_tw = crop_axis(tiles_w, max_cols, drop_left);
    if (new_th != tiles_h || new_tw != tiles_w) {
        Tensor img(out.image.channels, new_th * tile, new_tw * tile);
        Tensor val(1, new_th * tile, new_tw * tile);
        const int y_off = drop_top * tile;
        const int x_off = drop_left * tile;
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    img.at(c, y, x) = out.image.at(c, y + y_off, x + x_off);
        int64_t kept = 0;
        for (int y = 0; y < val.height; ++y)
            for (int x = 0; x < val.width; ++x) {
                val.at(0, y, x) = out.valid.at(0, y + y_off, x + x_off);
                if (val.at(0, y, x) > 0.0f) ++kept;
            }
        int64_t total = 0;
        for (float v : out.valid.data)
            if (v > 0.0f) ++total;
        out.dropped_pixels = total - kept;
        out.image = std::move(img);
        out.valid = std::move(val);
        out.place = {{tx0 + drop_left, ty0 + drop_top}, new_th, new_tw};
    }
    return out;
}

DeltaPacket compute_input_delta(const AlignedFrame& aligned, const TruncationState& input_state) {
    const GridSpec& grid = input_state.accumulated.spec();
    check(aligned.image.height == aligned.place.tiles_h * grid.tile_h &&
              aligned.image.width == aligned.place.tiles_w * grid.tile_w,
          "compute_input_delta: aligned frame does not match the input grid");

    DeltaPacket p = make_packet(aligned.place, grid.tile_h, grid.tile_w, aligned.image.channels);
    const Tensor prev = input_state.accumulated.read_region(aligned.place);

    for (int tr = 0; tr < aligned.place.tiles_h; ++tr) {
        for (int tc = 0; tc < aligned.place.tiles_w; ++tc) {
            bool covered = false;
            for (int y = tr * grid.tile_h; y < (tr + 1) * grid.tile_h && !covered; ++y)
                for (int x = tc * grid.tile_w; x < (tc + 1) * grid.tile_w && !covered; ++x)
                    if (aligned.valid.at(0, y, x) > 0.0f) covered = true;
            if (!covered) continue;
            p.mask.set(tr, tc);
            for (int c = 0; c < p.channels(); ++c)
                for (int y = tr * grid.tile_h; y < (tr + 1) * grid.tile_h; ++y)
                    for (int x = tc * grid.tile_w; x < (tc + 1) * grid.tile_w; ++x)
                        p.at(c, y, x) = aligned.image.at(c, y, x) - prev.at(c, y, x);
        }
    }
    return p;
}

namespace {

// Sliding window maximum along rows then columns; window covers
// [i - floor((k-1)/2), i + ceil((k-1)/2)], so odd k is centered.
Tensor window_max(const Tensor& in, int k) {
    const int lo = (k - 1) / 2;
    const int hi = k - 1 - lo;
    Tensor mid(1, in.height, in.width);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            float m = 0.0f;
            for (int d = -lo; d <= hi; ++d) {
                const int xx = x + d;
                if (xx < 0 || xx >= in.width) continue;
                m = std::max(m, in.at(0, y, xx));
            }
            mid.at(0, y, x) = m;
        }
    Tensor out(1, in.height, in.width);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            float m = 0.0f;
            for (int d = -lo; d <= hi; ++d) {
                const int yy = y + d;
                if (yy < 0 || yy >= in.height) continue;
                m = std::max(m, mid.at(0, yy, x));
            }
            out.at(0, y, x) = m;
        }
    return out;
}

}  // namespace

Tensor roi_factor_map(const Tensor& prev_mask, int k0, int k1, int k2) {
    check(prev_mask.channels == 1, "roi_factor_map: mask must be single channel");
    const Tensor d0 = window_max(prev_mask, k0);
    const Tensor d1 = window_max(prev_mask, k1);
    const Tensor d2 = window_max(prev_mask, k2);
    Tensor out(1, prev_mask.height, prev_mask.width);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const float m = (d0.data[i] + d1.data[i] + d2.data[i]) / 3.0f;
        out.data[i] = 0.4f + 0.6f * m;
    }
    return out;
}

Tensor roi_scale(const Tensor& delta, const Tensor& prev_mask) {
    check(prev_mask.height == delta.height && prev_mask.width == delta.width,
          "roi_scale: mask resolution mismatch");
    const Tensor f = roi_factor_map(prev_mask);
    Tensor out = delta;
    for (int c = 0; c < delta.channels; ++c)
        for (int y = 0; y < delta.height; ++y)
            for (int x = 0; x < delta.width; ++x) out.at(c, y, x) *= f.at(0, y, x);
    return out;
}

Tensor suppress_noise_pixels(const Tensor& delta, float threshold) {
    Tensor sig(1, delta.height, delta.width);
    for (int y = 0; y < delta.height; ++y)
        for (int x = 0; x < delta.width; ++x) {
            float m = 0.0f;
            for (int c = 0; c < delta.channels; ++c)
                m = std::max(m, std::fabs(delta.at(c, y, x)));
            sig.at(0, y, x) = m > threshold ? 1.0f : 0.0f;
        }

    Tensor out(1, delta.height, delta.width);
    for (int y = 0; y < delta.height; ++y)
        for (int x = 0; x < delta.width; ++x) {
            if (sig.at(0, y, x) == 0.0f) continue;
            int supporters = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy < 0 || yy >= delta.height || xx < 0 || xx >= delta.width) continue;
                    if (sig.at(0, yy, xx) > 0.0f) ++supporters;
                }
            if (supporters >= 2) out.at(0, y, x) = 1.0f;
        }
    return out;
}

TileMask suppress_noise(const Tensor& delta, float threshold, int tile_h, int tile_w) {
    check(delta.height % tile_h == 0 && delta.width % tile_w == 0,
          "suppress_noise: delta dims must be tile multiples");
    const Tensor surv = suppress_noise_pixels(delta, threshold);
    TileMask mask(delta.height / tile_h, delta.width / tile_w);
    for (int tr = 0; tr < mask.tiles_h; ++tr)
        for (int tc = 0; tc < mask.tiles_w; ++tc) {
            bool any = false;
            for (int y = tr * tile_h; y < (tr + 1) * tile_h && !any; ++y)
                for (int x = tc * tile_w; x < (tc + 1) * tile_w && !any; ++x)
                    if (surv.at(0, y, x) > 0.0f) any = true;
            if (any) mask.set(tr, tc);
        }
    return mask;
}

Tensor mask_dilate(const Tensor& mask, int radius) {
    check(mask.channels == 1, "mask_dilate: mask must be single channel");
    check(radius >= 0, "mask_dilate: radius must be >= 0");
    if (radius == 0) return mask;
    return window_max(mask, 2 * radius + 1);
}

}  // namespace dflx
