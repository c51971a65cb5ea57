#include "deltaflux/tile_grid.hpp"

namespace dflx {

SphericalBuffer::SphericalBuffer(const GridSpec& spec, int channels)
    : spec_(spec), channels_(channels) {
    spec_.validate();
    check(channels >= 1, "spherical buffer needs >= 1 channel");
    data_.assign(static_cast<size_t>(channels) * spec_.pixel_h() * spec_.pixel_w(), 0.0f);
}

Tensor SphericalBuffer::read_region(const FramePlacement& place) const {
    check(place.tiles_h >= 1 && place.tiles_w >= 1, "read_region: empty placement");
    check(place.tiles_h <= spec_.rows && place.tiles_w <= spec_.cols,
          "read_region: extent exceeds grid dims");

    Tensor out(channels_, place.tiles_h * spec_.tile_h, place.tiles_w * spec_.tile_w);
    const int64_t gy0 = place.origin.ty * spec_.tile_h;
    const int64_t gx0 = place.origin.tx * spec_.tile_w;
    for (int c = 0; c < channels_; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = at_global(c, gy0 + y, gx0 + x);
    return out;
}

void SphericalBuffer::accumulate_region(const FramePlacement& place, const Tensor& delta,
                                        const TileMask& mask) {
    check(place.tiles_h <= spec_.rows && place.tiles_w <= spec_.cols,
          "accumulate_region: extent exceeds grid dims");
    check(delta.channels == channels_ && delta.height == place.tiles_h * spec_.tile_h &&
              delta.width == place.tiles_w * spec_.tile_w,
          "accumulate_region: delta shape does not match placement");
    check(mask.tiles_h == place.tiles_h && mask.tiles_w == place.tiles_w,
          "accumulate_region: mask dims do not match placement");

    const int64_t gy0 = place.origin.ty * spec_.tile_h;
    const int64_t gx0 = place.origin.tx * spec_.tile_w;
    for (int tr = 0; tr < place.tiles_h; ++tr) {
        for (int tc = 0; tc < place.tiles_w; ++tc) {
            if (!mask.get(tr, tc)) continue;
            for (int c = 0; c < channels_; ++c)
                for (int y = 0; y < spec_.tile_h; ++y)
                    for (int x = 0; x < spec_.tile_w; ++x) {
                        const int ly = tr * spec_.tile_h + y;
                        const int lx = tc * spec_.tile_w + x;
                        add_global(c, gy0 + ly, gx0 + lx, delta.at(c, ly, lx));
                    }
        }
    }
}

void SphericalBuffer::reset_tiles(const std::vector<std::pair<int, int>>& local_tiles) {
    for (const auto& [r, c] : local_tiles) {
        check(r >= 0 && r < spec_.rows && c >= 0 && c < spec_.cols,
              "reset_tiles: tile index out of range");
        zero_tile({static_cast<int64_t>(c), static_cast<int64_t>(r)});
    }
}

void SphericalBuffer::zero_all() { std::fill(data_.begin(), data_.end(), 0.0f); }

void SphericalBuffer::zero_tile(const TileCoord& coord) {
    const int64_t gy0 = coord.ty * spec_.tile_h;
    const int64_t gx0 = coord.tx * spec_.tile_w;
    for (int c = 0; c < channels_; ++c)
        for (int y = 0; y < spec_.tile_h; ++y)
            for (int x = 0; x < spec_.tile_w; ++x) at_global(c, gy0 + y, gx0 + x) = 0.0f;
}

void SphericalBuffer::fill_tile(const TileCoord& coord, const std::vector<float>& per_channel) {
    check(per_channel.size() == static_cast<size_t>(channels_),
          "fill_tile: per-channel value count mismatch");
    const int64_t gy0 = coord.ty * spec_.tile_h;
    const int64_t gx0 = coord.tx * spec_.tile_w;
    for (int c = 0; c < channels_; ++c)
        for (int y = 0; y < spec_.tile_h; ++y)
            for (int x = 0; x < spec_.tile_w; ++x) at_global(c, gy0 + y, gx0 + x) = per_channel[c];
}

float SphericalBuffer::tile_abs_sum(const TileCoord& coord) const {
    const int64_t gy0 = coord.ty * spec_.tile_h;
    const int64_t gx0 = coord.tx * spec_.tile_w;
    float s = 0.0f;
    for (int c = 0; c < channels_; ++c)
        for (int y = 0; y < spec_.tile_h; ++y)
            for (int x = 0; x < spec_.tile_w; ++x)
                s += std::fabs(at_global(c, gy0 + y, gx0 + x));
    return s;
}

}  // namespace dflx
