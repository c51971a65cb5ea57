#pragma once

#include <utility>
#include <vector>

#include "deltaflux/tensor.hpp"

namespace dflx {

// Global tile index. Signed: panning left/up of the reference frame
// produces negative coordinates.
struct TileCoord {
    int64_t tx = 0;
    int64_t ty = 0;

    friend bool operator==(const TileCoord& a, const TileCoord& b) {
        return a.tx == b.tx && a.ty == b.ty;
    }
};

// Tile geometry of one buffer: tile size in pixels at this layer's
// resolution and the tile counts of the wrapped grid.
struct GridSpec {
    int tile_h = 1;
    int tile_w = 1;
    int rows = 1;
    int cols = 1;

    int pixel_h() const { return rows * tile_h; }
    int pixel_w() const { return cols * tile_w; }
    void validate() const {
        check(tile_h >= 1 && tile_w >= 1 && rows >= 1 && cols >= 1, "grid spec dims must be >= 1");
    }
};

// Local (row, col) slot of a global tile in the wrapped grid.
inline std::pair<int, int> wrap_tile(const TileCoord& coord, const GridSpec& spec) {
    return {static_cast<int>(floor_mod(coord.ty, spec.rows)),
            static_cast<int>(floor_mod(coord.tx, spec.cols))};
}

// Rectangle of tiles a frame occupies in global tile space.
struct FramePlacement {
    TileCoord origin;
    int tiles_h = 0;
    int tiles_w = 0;

    int64_t min_tx() const { return origin.tx; }
    int64_t max_tx() const { return origin.tx + tiles_w - 1; }
    int64_t min_ty() const { return origin.ty; }
    int64_t max_ty() const { return origin.ty + tiles_h - 1; }
    bool covers(const TileCoord& c) const {
        return c.tx >= min_tx() && c.tx <= max_tx() && c.ty >= min_ty() && c.ty <= max_ty();
    }
    friend bool operator==(const FramePlacement& a, const FramePlacement& b) {
        return a.origin == b.origin && a.tiles_h == b.tiles_h && a.tiles_w == b.tiles_w;
    }
};

// Per-tile bitmask over a placement's tile rectangle.
struct TileMask {
    int tiles_h = 0;
    int tiles_w = 0;
    std::vector<uint8_t> bits;

    TileMask() = default;
    TileMask(int th, int tw, bool value = false)
        : tiles_h(th), tiles_w(tw), bits(static_cast<size_t>(th) * tw, value ? 1 : 0) {}

    bool get(int r, int c) const { return bits[static_cast<size_t>(r) * tiles_w + c] != 0; }
    void set(int r, int c, bool v = true) {
        bits[static_cast<size_t>(r) * tiles_w + c] = v ? 1 : 0;
    }
    int count() const {
        int n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }
    bool any() const { return count() > 0; }
    bool empty_dims() const { return tiles_h == 0 || tiles_w == 0; }
};

// Tile-grid-organized persistent feature storage. Global tile coordinates
// wrap onto the fixed-size grid with the mathematical modulo, so the
// camera can pan indefinitely without reallocation. Two global tiles
// collide iff they are congruent mod (rows, cols); arbitration of who owns
// a slot is the buffer manager's job, not the buffer's.
class SphericalBuffer {
  public:
    SphericalBuffer() = default;
    SphericalBuffer(const GridSpec& spec, int channels);

    const GridSpec& spec() const { return spec_; }
    int channels() const { return channels_; }

    // Contract operations over tile-aligned regions.
    Tensor read_region(const FramePlacement& place) const;
    void accumulate_region(const FramePlacement& place, const Tensor& delta, const TileMask& mask);
    void reset_tiles(const std::vector<std::pair<int, int>>& local_tiles);
    void zero_all();

    // Pixel-level access in global coordinates (wrapped). The workhorses
    // of the delta layers; (gy, gx) may be negative.
    float at_global(int c, int64_t gy, int64_t gx) const {
        return data_[index(c, gy, gx)];
    }
    float& at_global(int c, int64_t gy, int64_t gx) { return data_[index(c, gy, gx)]; }
    void add_global(int c, int64_t gy, int64_t gx, float v) { data_[index(c, gy, gx)] += v; }

    // Zero one tile, or set every pixel of a tile to a per-channel value.
    void zero_tile(const TileCoord& coord);
    void fill_tile(const TileCoord& coord, const std::vector<float>& per_channel);

    // Sum of |v| over one tile, and direct storage access for dumps.
    float tile_abs_sum(const TileCoord& coord) const;
    const std::vector<float>& storage() const { return data_; }

  private:
    size_t index(int c, int64_t gy, int64_t gx) const {
        const int py = static_cast<int>(floor_mod(gy, spec_.pixel_h()));
        const int px = static_cast<int>(floor_mod(gx, spec_.pixel_w()));
        return (static_cast<size_t>(c) * spec_.pixel_h() + py) * spec_.pixel_w() + px;
    }

    GridSpec spec_;
    int channels_ = 0;
    std::vector<float> data_;
};

}  // namespace dflx
