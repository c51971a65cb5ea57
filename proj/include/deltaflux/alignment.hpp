#pragma once

#include <array>

#include "deltaflux/delta_layers.hpp"

namespace dflx {

// 3x3 projective transform, 8 DoF, bottom-right normalized to 1. Maps
// current-frame pixel coordinates into the reference coordinate system.
struct Homography {
    std::array<float, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    static Homography translation(float dx, float dy) {
        Homography h;
        h.m = {1, 0, dx, 0, 1, dy, 0, 0, 1};
        return h;
    }

    std::pair<double, double> apply(double x, double y) const {
        const double w = m[6] * x + m[7] * y + m[8];
        check(std::fabs(w) > 1e-12, "homography: point maps to infinity");
        return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
    }

    Homography inverse() const;
    // this ∘ inner: applies `inner` first.
    Homography compose(const Homography& inner) const;
    double det() const;
    bool is_integer_translation(int64_t* dx = nullptr, int64_t* dy = nullptr) const;
};

// Result of resampling a frame on the reference pixel grid over the input
// window: out-of-source samples are zero and marked in the footprint.
struct Warped {
    Tensor image;
    Tensor footprint;  // 1 channel, 1.0 where the sample came from the source
};

// Inverse-mapping warp with bilinear interpolation. Integer translations
// reproduce source pixels exactly.
Warped warp(const Tensor& frame, const Homography& h);

// A frame embedded in the smallest tile-multiple canvas covering it, plus
// its tile placement in global space. `valid` marks real frame pixels as
// opposed to zero fill.
struct AlignedFrame {
    Tensor image;
    Tensor valid;  // 1 channel
    FramePlacement place;
    int64_t dropped_pixels = 0;  // valid pixels lost to buffer-size cropping
};

// Embeds a warped frame with integer pixel offset (off_x, off_y) onto the
// tile grid, zero-filling the margins. When the canvas would exceed
// max_rows x max_cols tiles it is cropped symmetrically and the number of
// dropped valid pixels is reported.
AlignedFrame snap_to_grid(const Warped& warped, int64_t off_x, int64_t off_y, int tile,
                          int max_rows = 0, int max_cols = 0);

// Input delta against the previously processed content. Covered tiles
// (any valid pixel) carry aligned - accumulated, which also erases stale
// content under the zero-filled margins; tiles fully outside the footprint
// stay unmasked and untouched.
DeltaPacket compute_input_delta(const AlignedFrame& aligned, const TruncationState& input_state);

// ROI-focused sensing: m = mean of three max-pool dilations (kernels 10,
// 20, 40) of the previous region-of-interest mask; scale = 0.4 + 0.6 * m.
Tensor roi_factor_map(const Tensor& prev_mask, int k0 = 10, int k1 = 20, int k2 = 40);
Tensor roi_scale(const Tensor& delta, const Tensor& prev_mask);

// Pixels whose channel-max |delta| exceeds the threshold survive only with
// at least two supporters in their 3x3 neighborhood (self included), which
// kills isolated salt-and-pepper updates while coherent blobs pass.
Tensor suppress_noise_pixels(const Tensor& delta, float threshold);
TileMask suppress_noise(const Tensor& delta, float threshold, int tile_h, int tile_w);

// Binary max filter of side 2*radius+1 over a 0/1 map.
Tensor mask_dilate(const Tensor& mask, int radius);

}  // namespace dflx
