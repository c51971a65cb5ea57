#pragma once

#include <functional>
#include <optional>

#include "deltaflux/tile_grid.hpp"

namespace dflx {

// Sparse update flowing through the network: a delta tensor over the
// placement extent (grown by `halo` pixels per side at this layer's
// resolution), plus a per-tile update mask. Invariants:
//   - unmasked tiles of the extent are all-zero
//   - values in the halo ring are zero beyond `halo` px of a masked tile
// The halo carries convolution outputs that fall outside the placement
// ("dilated pixels"); it accumulates across chained convolutions and is
// stashed into the consuming truncation state's buffer.
struct DeltaPacket {
    FramePlacement place;
    int tile_h = 1;
    int tile_w = 1;
    int halo = 0;
    Tensor delta;
    TileMask mask;

    int channels() const { return delta.channels; }
    int extent_h() const { return place.tiles_h * tile_h; }
    int extent_w() const { return place.tiles_w * tile_w; }
    int grown_h() const { return extent_h() + 2 * halo; }
    int grown_w() const { return extent_w() + 2 * halo; }

    // Extent-relative access; y/x may range over [-halo, extent+halo).
    float at(int c, int y, int x) const { return delta.at(c, y + halo, x + halo); }
    float& at(int c, int y, int x) { return delta.at(c, y + halo, x + halo); }

    // Zero-fill sample for reads beyond the grown array.
    float sample(int c, int y, int x) const {
        if (y < -halo || y >= extent_h() + halo || x < -halo || x >= extent_w() + halo)
            return 0.0f;
        return at(c, y, x);
    }

    TileCoord global_tile(int tr, int tc) const {
        return {place.origin.tx + tc, place.origin.ty + tr};
    }
};

DeltaPacket make_packet(const FramePlacement& place, int tile_h, int tile_w, int channels,
                        int halo = 0);

// Decides whether a stateful write to a global tile is allowed. The engine
// binds this to the tile ledger so that values destined for tiles whose
// slot belongs to another coordinate are dropped instead of corrupting it.
using SlotFilter = std::function<bool(const TileCoord&)>;

inline bool slot_allows(const SlotFilter& f, const TileCoord& c) { return !f || f(c); }

// Persistent memory of a truncation point (activation or identity). The
// accumulated buffer mirrors the full dense layer input on every tile it
// has seen; the truncated buffer holds delta mass withheld below threshold
// plus dilated border pixels stashed for tiles awaiting unveiling.
struct TruncationState {
    SphericalBuffer accumulated;
    SphericalBuffer truncated;
    float threshold = 0.0f;
    std::vector<float> bias_init;  // per-channel value claimed tiles start from

    TruncationState() = default;
    TruncationState(const GridSpec& grid, int channels, float thr)
        : accumulated(grid, channels),
          truncated(grid, channels),
          threshold(thr),
          bias_init(channels, 0.0f) {}
};

enum class ActKind { Relu, Identity };

// Per-layer state of a max pooling layer: the accumulated layer input and
// the previous output. Deltas are always computed against the previous
// output so tiles reset to zero mid-sequence stay consistent.
struct MaxPoolState {
    SphericalBuffer accumulated;
    SphericalBuffer prev_out;
    int k = 2;
    int stride = 2;
    int padding = 0;

    MaxPoolState() = default;
    MaxPoolState(const GridSpec& in_grid, const GridSpec& out_grid, int channels, int k_, int s_,
                 int pad_)
        : accumulated(in_grid, channels),
          prev_out(out_grid, channels),
          k(k_),
          stride(s_),
          padding(pad_) {}
};

// Convolution over masked tiles only, with enough extra padding that every
// output pixel the kernel can reach is produced. The packet's halo grows
// by floor(k/2) (divided by stride); cropping back and stashing the grown
// border happens at the consuming truncation point. Output mask = input
// mask dilated by the kernel's tile reach. Bias is never applied here.
DeltaPacket padded_delta_conv(const DeltaPacket& packet, const ConvParams& params,
                              FlopReport* flops = nullptr, const std::string& name = "conv");

// Truncation point. Stashes the packet's halo ring into the truncated
// buffer at wrapped coordinates, then per masked tile decides: candidate =
// truncated + incoming; if it clears the threshold the full candidate
// propagates through f and the truncated tile resets, otherwise the
// candidate folds back into the truncated buffer and the tile unmasks.
// `gate`, when given, overrides the threshold rule per tile (the input
// stage uses it for ROI/noise gating and for forcing fresh tiles).
DeltaPacket delta_activation_truncate(const DeltaPacket& packet, TruncationState& state,
                                      ActKind kind, const SlotFilter& filter = {},
                                      const TileMask* gate = nullptr);

DeltaPacket delta_maxpool(const DeltaPacket& packet, MaxPoolState& state,
                          const SlotFilter& filter = {});

DeltaPacket delta_avgpool(const DeltaPacket& packet, int k, int stride, int padding = 0);
DeltaPacket delta_upsample_nearest(const DeltaPacket& packet, int factor);
DeltaPacket delta_batchnorm_scale(const DeltaPacket& packet, const std::vector<float>& scale);
DeltaPacket delta_add(const DeltaPacket& a, const DeltaPacket& b);

// Best current estimate of the dense value at a truncation point:
// accumulated plus not-yet-propagated truncated mass.
Tensor densify(const TruncationState& state, const FramePlacement& place);

}  // namespace dflx
