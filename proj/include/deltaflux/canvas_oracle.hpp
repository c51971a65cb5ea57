#pragma once

#include "deltaflux/alignment.hpp"
#include "deltaflux/network.hpp"

namespace dflx {

// Dense reference for moving-camera fusion: every aligned frame is pasted
// onto an unbounded canvas (later frames overwrite intersections on the
// tiles they cover), the dense network runs over the union window with
// standard zero padding, and the result is cropped to the current
// placement. Matching this in-view is what padded convolutions buy.
class FusedCanvas {
  public:
    FusedCanvas(int channels, int tile) : channels_(channels), tile_(tile) {}

    void paste(const AlignedFrame& aligned);
    Tensor run_crop(const ValidatedNet& net, const FramePlacement& place) const;
    void reset();
    bool empty() const { return window_.tiles_h == 0; }
    const FramePlacement& window() const { return window_; }
    const Tensor& content() const { return content_; }

  private:
    int channels_;
    int tile_;
    Tensor content_;  // union window, tile-aligned
    FramePlacement window_{};
    std::vector<uint8_t> covered_;  // per window tile: ever pasted

    bool covered_at(int tr, int tc) const {
        return covered_[static_cast<size_t>(tr) * window_.tiles_w + tc] != 0;
    }
};

}  // namespace dflx
