#include <doctest.h>

#include <set>

#include "deltaflux/buffer_manager.hpp"
#include "support/ledger_sim.hpp"
#include "support/testutil.hpp"

using namespace dflx;
using testutil::TestRng;

namespace {

// Mirrors the engine's reset-and-replan handling.
FramePlan plan_and_apply(TileLedger& ledger, const FramePlacement& place, int ring,
                         const std::function<void(const TileCoord&)>& zero = {}) {
    FramePlan plan = plan_frame(ledger, place, ring);
    if (plan.needs_full_reset) {
        ledger.clear();
        FramePlan again = plan_frame(ledger, place, ring);
        again.needs_full_reset = true;
        plan = again;
    }
    apply_plan(plan, ledger, zero);
    return plan;
}

}  // namespace

TEST_SUITE_BEGIN("buffer_manager");

TEST_CASE("identical second frame claims nothing") {
    TileLedger ledger(5, 5);
    const FramePlacement place{{0, 0}, 3, 3};
    plan_and_apply(ledger, place, 1);

    const FramePlan p2 = plan_frame(ledger, place, 1);
    CHECK(!p2.needs_full_reset);
    CHECK(p2.fresh_tiles.empty());
    CHECK(p2.claims.empty());
    CHECK(p2.evicted_tiles.empty());
}

TEST_CASE("wrap eviction restricts the opposite direction; revisiting resets") {
    // 4x4 grid, full-grid frame at (0,0), then a one-tile pan right.
    TileLedger ledger(4, 4);
    plan_and_apply(ledger, {{0, 0}, 4, 4}, 1);
    CHECK(!ledger.left_frontier());

    const FramePlan p2 = plan_and_apply(ledger, {{1, 0}, 4, 4}, 1);
    CHECK(!p2.needs_full_reset);
    CHECK(p2.fresh_tiles.size() == 4);    // the unveiled column
    CHECK(p2.evicted_tiles.size() == 4);  // the wrapped-out column
    for (const TileCoord& t : p2.evicted_tiles) CHECK(t.tx == 0);
    REQUIRE(ledger.left_frontier().has_value());
    CHECK(*ledger.left_frontier() == 0);

    // Moving back over the restricted column forces a full reset.
    const FramePlan p3 = plan_frame(ledger, {{0, 0}, 4, 4}, 1);
    CHECK(p3.needs_full_reset);
}

TEST_CASE("monotone pans never reset") {
    SUBCASE("full-grid frames, 8 steps") {
        TileLedger ledger(4, 4);
        for (int f = 0; f < 8; ++f) {
            const FramePlan p = plan_and_apply(ledger, {{f, 0}, 4, 4}, 1);
            CHECK(!p.needs_full_reset);
        }
    }
    SUBCASE("default-sized grid, many wraps, all four directions") {
        for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -2}, {2, 1}}) {
            TileLedger ledger(5, 5);
            for (int f = 0; f < 30; ++f) {
                const FramePlan p =
                    plan_and_apply(ledger, {{dx * f, dy * f}, 3, 3}, 1);
                CHECK(!p.needs_full_reset);
            }
        }
    }
}

TEST_CASE("pan out and back within the grid reuses held tiles") {
    TileLedger ledger(6, 6);
    plan_and_apply(ledger, {{0, 0}, 4, 4}, 1);
    const FramePlan out = plan_and_apply(ledger, {{1, 0}, 4, 4}, 1);
    CHECK(out.fresh_tiles.size() == 4);
    const FramePlan back = plan_frame(ledger, {{0, 0}, 4, 4}, 1);
    CHECK(!back.needs_full_reset);
    CHECK(back.fresh_tiles.empty());  // column 0 is still held
}

TEST_CASE("apply_plan zeroes exactly the claimed tiles") {
    TileLedger ledger(4, 4);
    SphericalBuffer buf({2, 2, 4, 4}, 1);
    const FramePlacement all{{0, 0}, 4, 4};
    Tensor ones(1, 8, 8);
    ones.fill(1.0f);

    const auto zero = [&](const TileCoord& t) { buf.zero_tile(t); };
    plan_and_apply(ledger, all, 1, zero);
    buf.accumulate_region(all, ones, TileMask(4, 4, true));

    // Same placement again: nothing fresh, buffer untouched.
    const std::vector<float> before = buf.storage();
    plan_and_apply(ledger, all, 1, zero);
    CHECK(buf.storage() == before);

    // Pan right one: the unveiled column's slot gets zeroed.
    plan_and_apply(ledger, {{1, 0}, 4, 4}, 1, zero);
    CHECK(buf.tile_abs_sum({4, 0}) == 0.0f);
    CHECK(buf.tile_abs_sum({1, 0}) == doctest::Approx(4.0f));  // untouched interior
}

TEST_CASE("implicit bias injection seeds claimed truncated tiles") {
    TileLedger ledger(4, 4);
    TruncationState state({2, 2, 4, 4}, 2, 0.0f);
    state.bias_init = {0.5f, -1.0f};

    FramePlan plan = plan_frame(ledger, {{0, 0}, 2, 2}, 1);
    apply_plan(plan, ledger, [&](const TileCoord& t) {
        state.accumulated.zero_tile(t);
        state.truncated.zero_tile(t);
    });
    inject_bias_implicit(plan, state);

    CHECK(state.truncated.at_global(0, 0, 0) == doctest::Approx(0.5f));
    CHECK(state.truncated.at_global(1, 3, 3) == doctest::Approx(-1.0f));
    // The ring was claimed too, so unveiling later starts from the bias.
    CHECK(state.truncated.at_global(0, -1, -1) == doctest::Approx(0.5f));
    CHECK(state.accumulated.at_global(0, 0, 0) == 0.0f);
}

TEST_CASE("explicit bias injection adds onto fresh tiles of a packet") {
    TileLedger ledger(4, 4);
    const FramePlacement place{{0, 0}, 2, 2};
    FramePlan plan1 = plan_frame(ledger, place, 1);
    apply_plan(plan1, ledger, {});

    // Second frame shifted: only the new column is fresh.
    const FramePlacement place2{{1, 0}, 2, 2};
    FramePlan plan2 = plan_frame(ledger, place2, 1);
    apply_plan(plan2, ledger, {});

    DeltaPacket packet = make_packet(place2, 4, 4, 1, 0);
    inject_bias_explicit(plan2, packet, {2.0f});
    CHECK(packet.at(0, 0, 4) == doctest::Approx(2.0f));  // fresh column
    CHECK(packet.at(0, 0, 0) == doctest::Approx(0.0f));  // held column
}

TEST_CASE("placement larger than the grid is rejected") {
    TileLedger ledger(3, 3);
    CHECK_THROWS_AS(plan_frame(ledger, {{0, 0}, 4, 3}, 1), Error);
}

TEST_CASE("ledger agrees with the brute-force simulator on random pans") {
    TestRng rng(17);
    for (int run = 0; run < 20; ++run) {
        const int rows = rng.uniform_int(3, 6);
        const int cols = rng.uniform_int(3, 6);
        const int th = rng.uniform_int(1, rows);
        const int tw = rng.uniform_int(1, cols);
        const int ring = 1;

        TileLedger ledger(rows, cols);
        ledgersim::Simulator sim(rows, cols, ring);
        TileCoord origin{0, 0};

        for (int f = 0; f < 60; ++f) {
            origin.tx += rng.uniform_int(-2, 2);
            origin.ty += rng.uniform_int(-2, 2);
            const FramePlacement place{origin, th, tw};

            FramePlan plan = plan_frame(ledger, place, ring);
            const bool reset = plan.needs_full_reset;
            if (reset) {
                ledger.clear();
                plan = plan_frame(ledger, place, ring);
            }
            apply_plan(plan, ledger, {});

            const auto outcome = sim.step(place);
            CHECK(reset == outcome.reset);

            std::set<std::pair<int64_t, int64_t>> fresh;
            for (const TileCoord& t : plan.fresh_tiles) fresh.insert({t.ty, t.tx});
            CHECK(fresh == outcome.fresh);

            std::set<std::pair<int64_t, int64_t>> evicted;
            for (const TileCoord& t : plan.evicted_tiles) evicted.insert({t.ty, t.tx});
            CHECK(evicted == outcome.evicted);
        }
    }
}

TEST_SUITE_END();
