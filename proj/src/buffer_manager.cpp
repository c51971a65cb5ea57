#include "deltaflux/buffer_manager.hpp"

#include <set>

namespace dflx {

FramePlan plan_frame(const TileLedger& ledger, const FramePlacement& place, int ring_tiles) {
    check(place.tiles_h >= 1 && place.tiles_w >= 1, "plan_frame: empty placement");
    check(place.tiles_h <= ledger.rows() && place.tiles_w <= ledger.cols(),
          "plan_frame: placement larger than grid");

    FramePlan plan;
    plan.place = place;

    if (ledger.placement_hits_restriction(place)) {
        plan.needs_full_reset = true;
        return plan;
    }

    // Slots already assigned by this plan (placement first, then ring).
    std::set<std::pair<int64_t, int64_t>> planned;
    const auto slot_key = [&](const TileCoord& c) {
        return std::make_pair(floor_mod(c.ty, ledger.rows()), floor_mod(c.tx, ledger.cols()));
    };

    for (int tr = 0; tr < place.tiles_h; ++tr) {
        for (int tc = 0; tc < place.tiles_w; ++tc) {
            const TileCoord t{place.origin.tx + tc, place.origin.ty + tr};
            const TileLedger::Slot& s = ledger.slot(t);
            planned.insert(slot_key(t));
            if (!s.used) {
                plan.claims.push_back({t, std::nullopt});
                plan.fresh_tiles.push_back(t);
            } else if (s.coord == t) {
                if (!s.covered) plan.fresh_tiles.push_back(t);  // unveiling a stash holder
            } else {
                plan.claims.push_back({t, s.coord});
                plan.fresh_tiles.push_back(t);
                plan.evicted_tiles.push_back(s.coord);
            }
        }
    }

    // Pre-claim the dilated-pixel ring so layer execution never has to
    // touch the ledger. Ring tiles whose slot is taken by a live placement
    // tile are skipped; their stash will simply be dropped.
    for (int tr = -ring_tiles; tr < place.tiles_h + ring_tiles; ++tr) {
        for (int tc = -ring_tiles; tc < place.tiles_w + ring_tiles; ++tc) {
            if (tr >= 0 && tr < place.tiles_h && tc >= 0 && tc < place.tiles_w) {
                tc = place.tiles_w - 1;
                continue;
            }
            const TileCoord t{place.origin.tx + tc, place.origin.ty + tr};
            if (!planned.insert(slot_key(t)).second) continue;
            const TileLedger::Slot& s = ledger.slot(t);
            if (!s.used) {
                plan.claims.push_back({t, std::nullopt});
            } else if (!(s.coord == t)) {
                if (place.covers(s.coord)) continue;  // never evict a live tile
                plan.claims.push_back({t, s.coord});
                plan.evicted_tiles.push_back(s.coord);
            }
        }
    }
    return plan;
}

void apply_plan(const FramePlan& plan, TileLedger& ledger,
                const std::function<void(const TileCoord&)>& zero_tile) {
    check(!plan.needs_full_reset, "apply_plan: plan requires a full reset first");

    for (const FramePlan::Claim& c : plan.claims) {
        if (c.evicts) ledger.restrict_from_eviction(*c.evicts, plan.place);
        TileLedger::Slot& s = ledger.slot(c.coord);
        s.used = true;
        s.coord = c.coord;
        s.covered = false;
        if (zero_tile) zero_tile(c.coord);
    }
    for (const TileCoord& t : plan.fresh_tiles) ledger.slot(t).covered = true;
}

void inject_bias_implicit(const FramePlan& plan, TruncationState& state) {
    bool any = false;
    for (float b : state.bias_init)
        if (b != 0.0f) any = true;
    if (!any) return;
    for (const FramePlan::Claim& c : plan.claims) state.truncated.fill_tile(c.coord, state.bias_init);
}

void inject_bias_explicit(const FramePlan& plan, DeltaPacket& packet,
                          const std::vector<float>& bias) {
    check(bias.size() == static_cast<size_t>(packet.channels()),
          "inject_bias_explicit: bias count mismatch");
    for (const TileCoord& t : plan.fresh_tiles) {
        const int tr = static_cast<int>(t.ty - packet.place.origin.ty);
        const int tc = static_cast<int>(t.tx - packet.place.origin.tx);
        if (tr < 0 || tr >= packet.place.tiles_h || tc < 0 || tc >= packet.place.tiles_w) continue;
        for (int c = 0; c < packet.channels(); ++c)
            for (int y = tr * packet.tile_h; y < (tr + 1) * packet.tile_h; ++y)
                for (int x = tc * packet.tile_w; x < (tc + 1) * packet.tile_w; ++x)
                    packet.at(c, y, x) += bias[c];
    }
}

}  // namespace dflx
