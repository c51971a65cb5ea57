#pragma once

#include <optional>

#include "deltaflux/delta_layers.hpp"

namespace dflx {

// Tracks which global coordinate each wrapped slot currently holds, plus
// the directions in which growth is restricted. A slot is "covered" once a
// frame has actually integrated content for its coordinate; slots claimed
// only to hold stashed dilated pixels stay uncovered until unveiled.
class TileLedger {
  public:
    struct Slot {
        bool used = false;
        TileCoord coord{};
        bool covered = false;
    };

    TileLedger() = default;
    TileLedger(int rows, int cols) : rows_(rows), cols_(cols), slots_(rows * cols) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    Slot& slot(const TileCoord& c) {
        const auto [r, col] = wrap({c.tx, c.ty});
        return slots_[static_cast<size_t>(r) * cols_ + col];
    }
    const Slot& slot(const TileCoord& c) const {
        const auto [r, col] = wrap({c.tx, c.ty});
        return slots_[static_cast<size_t>(r) * cols_ + col];
    }
    const Slot& slot_local(int r, int c) const {
        return slots_[static_cast<size_t>(r) * cols_ + c];
    }

    // True iff the wrapped slot currently belongs to exactly this
    // coordinate; stateful writes elsewhere must be dropped.
    bool holds(const TileCoord& c) const {
        const Slot& s = slot(c);
        return s.used && s.coord == c;
    }

    void clear() {
        for (Slot& s : slots_) s = Slot{};
        left_.reset();
        right_.reset();
        up_.reset();
        down_.reset();
    }

    // Restriction frontiers. Covering a coordinate at or beyond a frontier
    // forces a full reset.
    std::optional<int64_t> left_frontier() const { return left_; }
    std::optional<int64_t> right_frontier() const { return right_; }
    std::optional<int64_t> up_frontier() const { return up_; }
    std::optional<int64_t> down_frontier() const { return down_; }

    void restrict_from_eviction(const TileCoord& evicted, const FramePlacement& place) {
        if (evicted.tx < place.min_tx())
            left_ = left_ ? std::max(*left_, evicted.tx) : evicted.tx;
        if (evicted.tx > place.max_tx())
            right_ = right_ ? std::min(*right_, evicted.tx) : evicted.tx;
        if (evicted.ty < place.min_ty()) up_ = up_ ? std::max(*up_, evicted.ty) : evicted.ty;
        if (evicted.ty > place.max_ty())
            down_ = down_ ? std::min(*down_, evicted.ty) : evicted.ty;
    }

    bool placement_hits_restriction(const FramePlacement& p) const {
        if (left_ && p.min_tx() <= *left_) return true;
        if (right_ && p.max_tx() >= *right_) return true;
        if (up_ && p.min_ty() <= *up_) return true;
        if (down_ && p.max_ty() >= *down_) return true;
        return false;
    }

  private:
    std::pair<int, int> wrap(const TileCoord& c) const {
        return {static_cast<int>(floor_mod(c.ty, rows_)), static_cast<int>(floor_mod(c.tx, cols_))};
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<Slot> slots_;
    std::optional<int64_t> left_, right_, up_, down_;
};

// Decisions for one frame: which slots get claimed (zeroed and
// bias-initialized), which placement tiles are newly covered and must be
// propagated densely, and which coordinates the claims destroy.
struct FramePlan {
    struct Claim {
        TileCoord coord;
        std::optional<TileCoord> evicts;
    };

    FramePlacement place;
    bool needs_full_reset = false;
    std::vector<Claim> claims;             // placement and stash-ring slots to (re)initialize
    std::vector<TileCoord> fresh_tiles;    // placement tiles newly covered this frame
    std::vector<TileCoord> evicted_tiles;  // coordinates destroyed by the claims
};

// Classifies every covered tile as held (reuse), fresh (claim + reset) or
// conflicting, pre-claims the stash ring of `ring_tiles` around the
// placement, and requests a full reset when the placement re-enters a
// restricted region. Does not mutate the ledger.
FramePlan plan_frame(const TileLedger& ledger, const FramePlacement& place, int ring_tiles = 1);

// Commits a plan: claims slots (recording growth restrictions for every
// eviction), marks covered tiles, and zeroes each claimed tile in every
// layer buffer through the callback.
void apply_plan(const FramePlan& plan, TileLedger& ledger,
                const std::function<void(const TileCoord&)>& zero_tile);

// Implicit bias application: claimed tiles of a truncation state's
// truncated buffer start from the per-channel bias instead of zero, so the
// bias is added the first time the activation fires.
void inject_bias_implicit(const FramePlan& plan, TruncationState& state);

// Explicit variant for layers with no downstream truncation point: the
// bias is added onto the delta packet over the newly covered tiles.
void inject_bias_explicit(const FramePlan& plan, DeltaPacket& packet,
                          const std::vector<float>& bias);

}  // namespace dflx
