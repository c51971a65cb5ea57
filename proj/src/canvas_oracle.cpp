#include "deltaflux/canvas_oracle.hpp"

namespace dflx {

void FusedCanvas::paste(const AlignedFrame& aligned) {
    check(aligned.image.channels == channels_, "fused canvas: channel mismatch");
    const FramePlacement& p = aligned.place;

    if (window_.tiles_h == 0) {
        window_ = p;
        content_ = Tensor(channels_, p.tiles_h * tile_, p.tiles_w * tile_);
        covered_.assign(static_cast<size_t>(p.tiles_h) * p.tiles_w, 0);
    } else if (!(p.min_tx() >= window_.min_tx() && p.max_tx() <= window_.max_tx() &&
                 p.min_ty() >= window_.min_ty() && p.max_ty() <= window_.max_ty())) {
        FramePlacement grown;
        grown.origin = {std::min(window_.min_tx(), p.min_tx()),
                        std::min(window_.min_ty(), p.min_ty())};
        grown.tiles_w =
            static_cast<int>(std::max(window_.max_tx(), p.max_tx()) - grown.origin.tx + 1);
        grown.tiles_h =
            static_cast<int>(std::max(window_.max_ty(), p.max_ty()) - grown.origin.ty + 1);
        Tensor bigger(channels_, grown.tiles_h * tile_, grown.tiles_w * tile_);
        std::vector<uint8_t> bigger_cov(static_cast<size_t>(grown.tiles_h) * grown.tiles_w, 0);
        const int dty = static_cast<int>(window_.origin.ty - grown.origin.ty);
        const int dtx = static_cast<int>(window_.origin.tx - grown.origin.tx);
        for (int c = 0; c < channels_; ++c)
            for (int y = 0; y < content_.height; ++y)
                for (int x = 0; x < content_.width; ++x)
                    bigger.at(c, y + dty * tile_, x + dtx * tile_) = content_.at(c, y, x);
        for (int tr = 0; tr < window_.tiles_h; ++tr)
            for (int tc = 0; tc < window_.tiles_w; ++tc)
                bigger_cov[static_cast<size_t>(tr + dty) * grown.tiles_w + (tc + dtx)] =
                    covered_[static_cast<size_t>(tr) * window_.tiles_w + tc];
        content_ = std::move(bigger);
        covered_ = std::move(bigger_cov);
        window_ = grown;
    }

    // Overwrite the covered tiles (any valid pixel), zero fill included,
    // mirroring how the engine's input delta treats snap margins.
    const int oty = static_cast<int>(p.origin.ty - window_.origin.ty);
    const int otx = static_cast<int>(p.origin.tx - window_.origin.tx);
    for (int tr = 0; tr < p.tiles_h; ++tr)
        for (int tc = 0; tc < p.tiles_w; ++tc) {
            bool covered = false;
            for (int y = tr * tile_; y < (tr + 1) * tile_ && !covered; ++y)
                for (int x = tc * tile_; x < (tc + 1) * tile_ && !covered; ++x)
                    if (aligned.valid.at(0, y, x) > 0.0f) covered = true;
            if (!covered) continue;
            covered_[static_cast<size_t>(tr + oty) * window_.tiles_w + (tc + otx)] = 1;
            for (int c = 0; c < channels_; ++c)
                for (int y = tr * tile_; y < (tr + 1) * tile_; ++y)
                    for (int x = tc * tile_; x < (tc + 1) * tile_; ++x)
                        content_.at(c, oty * tile_ + y, otx * tile_ + x) =
                            aligned.image.at(c, y, x);
        }
}

Tensor FusedCanvas::run_crop(const ValidatedNet& net, const FramePlacement& place) const {
    check(window_.tiles_h > 0, "fused canvas: nothing pasted yet");
    check(place.min_tx() >= window_.min_tx() && place.max_tx() <= window_.max_tx() &&
              place.min_ty() >= window_.min_ty() && place.max_ty() <= window_.max_ty(),
          "fused canvas: placement outside the pasted window");

    // The dense reference mirrors the padded-convolution semantics: layers
    // run on a window grown by the accumulated dilation radius so chained
    // convolutions keep their dilated outputs, while truncation points
    // zero everything outside the covered region, exactly like the stash
    // that waits for unveiling.
    const int margin = net.ring_tiles;
    Tensor grown(channels_, (window_.tiles_h + 2 * margin) * tile_,
                 (window_.tiles_w + 2 * margin) * tile_);
    for (int c = 0; c < channels_; ++c)
        for (int y = 0; y < content_.height; ++y)
            for (int x = 0; x < content_.width; ++x)
                grown.at(c, y + margin * tile_, x + margin * tile_) = content_.at(c, y, x);

    const DenseHook mask_truncation_points = [&](int idx, Tensor& out) {
        const LayerKind kind = net.spec.layers[idx].kind;
        if (kind != LayerKind::Relu && kind != LayerKind::Truncate) return;
        const int lt = net.info[idx].tile;  // tile size at this resolution
        for (int tr = 0; tr < window_.tiles_h + 2 * margin; ++tr)
            for (int tc = 0; tc < window_.tiles_w + 2 * margin; ++tc) {
                const bool inside = tr >= margin && tr < margin + window_.tiles_h &&
                                    tc >= margin && tc < margin + window_.tiles_w;
                if (inside && covered_at(tr - margin, tc - margin)) continue;
                for (int c = 0; c < out.channels; ++c)
                    for (int y = tr * lt; y < (tr + 1) * lt; ++y)
                        for (int x = tc * lt; x < (tc + 1) * lt; ++x) out.at(c, y, x) = 0.0f;
            }
    };

    const Tensor full = run_dense(net, grown, nullptr, mask_truncation_points);
    const int s = net.out_cum_stride;
    const int out_tile = tile_ / s;
    const int y0 = static_cast<int>((place.origin.ty - window_.origin.ty + margin) * out_tile);
    const int x0 = static_cast<int>((place.origin.tx - window_.origin.tx + margin) * out_tile);

    Tensor out(full.channels, place.tiles_h * out_tile, place.tiles_w * out_tile);
    for (int c = 0; c < full.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) out.at(c, y, x) = full.at(c, y0 + y, x0 + x);
    return out;
}

void FusedCanvas::reset() {
    content_ = Tensor();
    covered_.clear();
    window_ = FramePlacement{};
}

}  // namespace dflx
