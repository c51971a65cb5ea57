#include <doctest.h>

#include "deltaflux/canvas_oracle.hpp"
#include "deltaflux/engine.hpp"
#include "support/netgen.hpp"

using namespace dflx;
using testutil::TestRng;

namespace {

AlignedFrame align_for(const Tensor& frame, int64_t wx, int64_t wy, int tile) {
    Warped w;
    w.image = frame;
    w.footprint = Tensor(1, frame.height, frame.width);
    w.footprint.fill(1.0f);
    return snap_to_grid(w, wx, wy, tile);
}

EngineConfig zero_threshold_config(int tile) {
    EngineConfig cfg;
    cfg.tile_size = tile;
    cfg.input_threshold = 0.0f;
    cfg.default_threshold = 0.0f;
    cfg.override_net_thresholds = true;
    cfg.mask_dilation = 0;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("engine");

TEST_CASE("static camera, thresholds 0: every frame matches the dense oracle") {
    TestRng rng(100);
    for (int trial = 0; trial < 5; ++trial) {
        netgen::GenOptions opt;
        opt.max_channels = 6;
        opt.tile_size = 16;
        const NetworkSpec spec = netgen::random_network(rng, opt);
        const ValidatedNet vnet = validate(spec, 16);

        DeltaEngine engine(spec, zero_threshold_config(16));
        const auto frames = netgen::random_sequence(rng, spec.in_channels, 48, 48, 4);
        for (const Tensor& f : frames) {
            const FrameResult r = engine.run_frame(f, Homography::identity());
            const Tensor dense = run_dense(vnet, f);
            CHECK(max_abs_diff(r.output, dense) <= 1e-4f);
        }
    }
}

TEST_CASE("identical repeated frame: zero conv FLOPs and update rate after frame 1") {
    TestRng rng(101);
    netgen::GenOptions opt;
    opt.max_channels = 6;
    opt.tile_size = 16;
    const NetworkSpec spec = netgen::random_network(rng, opt);

    EngineConfig cfg;
    cfg.tile_size = 16;
    cfg.input_threshold = 0.05f;
    cfg.default_threshold = 0.02f;
    cfg.mask_dilation = 0;
    DeltaEngine engine(spec, cfg);

    const Tensor frame = testutil::random_tensor(spec.in_channels, 48, 48, rng, 0.0f, 1.0f);
    const FrameResult r1 = engine.run_frame(frame, Homography::identity());
    CHECK(r1.update_rate == doctest::Approx(1.0));
    CHECK(r1.flops.total > 0);

    const FrameResult r2 = engine.run_frame(frame, Homography::identity());
    CHECK(r2.flops.total == 0);
    CHECK(r2.update_rate == doctest::Approx(0.0));
}

TEST_CASE("integer-tile pans, threshold 0: output matches the fused canvas in view") {
    TestRng rng(102);
    for (int trial = 0; trial < 3; ++trial) {
        netgen::GenOptions opt;
        opt.max_channels = 5;
        opt.tile_size = 16;
        const NetworkSpec spec = netgen::random_network(rng, opt);
        const ValidatedNet vnet = validate(spec, 16);

        DeltaEngine engine(spec, zero_threshold_config(16));
        FusedCanvas canvas(spec.in_channels, 16);

        const int fw = 48, fh = 32, pan = 16, steps = 4;
        const Tensor world =
            testutil::random_tensor(spec.in_channels, fh, fw + pan * (steps - 1), rng, 0.0f, 1.0f);
        for (int k = 0; k < steps; ++k) {
            const int wx = pan * k;
            Tensor frame(spec.in_channels, fh, fw);
            for (int c = 0; c < frame.channels; ++c)
                for (int y = 0; y < fh; ++y)
                    for (int x = 0; x < fw; ++x) frame.at(c, y, x) = world.at(c, y, wx + x);

            const FrameResult r = engine.run_frame(
                frame, Homography::translation(static_cast<float>(wx), 0.0f));
            canvas.paste(align_for(frame, wx, 0, 16));
            const Tensor expect = canvas.run_crop(vnet, r.place);
            CHECK(max_abs_diff(r.output, expect) <= 1e-4f);
        }
    }
}

TEST_CASE("halo chains and strided convs fuse exactly under pans") {
    TestRng rng(112);
    const auto pan_worst = [&](const NetworkSpec& spec) {
        const ValidatedNet vnet = validate(spec, 16);
        DeltaEngine engine(spec, zero_threshold_config(16));
        FusedCanvas canvas(1, 16);
        TestRng content(7);
        const int fw = 48, fh = 32, pan = 16, steps = 4;
        const Tensor world =
            testutil::random_tensor(1, fh, fw + pan * (steps - 1), content, 0.0f, 1.0f);
        float worst = 0.0f;
        for (int k = 0; k < steps; ++k) {
            const int wx = pan * k;
            Tensor frame(1, fh, fw);
            for (int y = 0; y < fh; ++y)
                for (int x = 0; x < fw; ++x) frame.at(0, y, x) = world.at(0, y, wx + x);
            const FrameResult r =
                engine.run_frame(frame, Homography::translation(static_cast<float>(wx), 0.0f));
            canvas.paste(align_for(frame, wx, 0, 16));
            worst = std::max(worst, max_abs_diff(r.output, canvas.run_crop(vnet, r.place)));
        }
        return worst;
    };

    SUBCASE("two convs between truncation points accumulate their radius") {
        NetworkSpec spec;
        spec.in_channels = 1;
        spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 3, 3, 1, rng, true));
        spec.layers.push_back(netgen::conv_layer("c2", "c1", 3, 2, 3, 1, rng, true));
        spec.layers.push_back(netgen::relu_layer("r", "c2"));
        spec.layers.push_back(netgen::output_layer("r"));
        CHECK(pan_worst(spec) <= 1e-4f);
    }
    SUBCASE("strided conv keeps its right-edge dilated pixels") {
        NetworkSpec spec;
        spec.in_channels = 1;
        spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 3, 3, 2, rng, true));
        spec.layers.push_back(netgen::relu_layer("r", "c1"));
        spec.layers.push_back(netgen::output_layer("r"));
        CHECK(pan_worst(spec) <= 1e-4f);
    }
}

TEST_CASE("disabling padded convolutions breaks moving-camera fusion") {
    TestRng rng(103);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 4, 3, 1, rng, true));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::conv_layer("c2", "r1", 4, 2, 3, 1, rng, false));
    spec.layers.push_back(netgen::relu_layer("r2", "c2"));
    spec.layers.push_back(netgen::output_layer("r2"));
    const ValidatedNet vnet = validate(spec, 16);

    EngineConfig cfg = zero_threshold_config(16);
    cfg.padded_convolutions = false;
    DeltaEngine engine(spec, cfg);
    FusedCanvas canvas(1, 16);

    const int fw = 48, fh = 32, pan = 16, steps = 4;
    TestRng content(7);
    const Tensor world = testutil::random_tensor(1, fh, fw + pan * (steps - 1), content, 0.0f, 1.0f);
    float worst = 0.0f;
    for (int k = 0; k < steps; ++k) {
        const int wx = pan * k;
        Tensor frame(1, fh, fw);
        for (int y = 0; y < fh; ++y)
            for (int x = 0; x < fw; ++x) frame.at(0, y, x) = world.at(0, y, wx + x);
        const FrameResult r =
            engine.run_frame(frame, Homography::translation(static_cast<float>(wx), 0.0f));
        canvas.paste(align_for(frame, wx, 0, 16));
        worst = std::max(worst, max_abs_diff(r.output, canvas.run_crop(vnet, r.place)));
    }
    CHECK(worst > 1e-4f);  // seam artifacts without the dilated-pixel stash
}

TEST_CASE("unveiled blank region carries exactly relu(bias)") {
    TestRng rng(104);
    NetworkSpec spec;
    spec.in_channels = 1;
    LayerDef c = netgen::conv_layer("c1", "input", 1, 3, 3, 1, rng, false);
    c.conv.bias = {0.75f, -0.5f, 0.25f};
    spec.layers.push_back(c);
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));

    DeltaEngine engine(spec, zero_threshold_config(16));

    // World: 32px of content, then blank.
    Tensor world(1, 32, 64);
    TestRng content(8);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) world.at(0, y, x) = content.uniform(0.2f, 1.0f);

    for (int k = 0; k < 2; ++k) {
        const int wx = 16 * k;
        Tensor frame(1, 32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) frame.at(0, y, x) = world.at(0, y, wx + x);
        const FrameResult r =
            engine.run_frame(frame, Homography::translation(static_cast<float>(wx), 0.0f));
        if (k == 1) {
            // The right tile column is blank; away from the content seam the
            // output must be relu(bias) per channel.
            const float expect[3] = {0.75f, 0.0f, 0.25f};
            for (int ch = 0; ch < 3; ++ch)
                for (int y = 2; y < 30; ++y)
                    for (int x = 18; x < 32; ++x)
                        CHECK(r.output.at(ch, y, x) == doctest::Approx(expect[ch]).epsilon(1e-5));
        }
    }
}

TEST_CASE("raising thresholds never raises conv FLOPs") {
    TestRng rng(105);
    netgen::GenOptions opt;
    opt.max_channels = 6;
    opt.tile_size = 16;
    const NetworkSpec spec = netgen::random_network(rng, opt);
    const auto frames = netgen::random_sequence(rng, spec.in_channels, 48, 48, 5);

    uint64_t prev = ~0ull;
    for (const float thr : {0.0f, 0.05f, 0.2f}) {
        EngineConfig cfg;
        cfg.tile_size = 16;
        cfg.input_threshold = thr;
        cfg.default_threshold = thr;
        cfg.override_net_thresholds = true;
        cfg.mask_dilation = 0;
        DeltaEngine engine(spec, cfg);
        uint64_t total = 0;
        for (const Tensor& f : frames) total += engine.run_frame(f, Homography::identity()).flops.total;
        CHECK(total <= prev);
        prev = total;
    }
}

TEST_CASE("two engines over the same stream are bit-identical") {
    TestRng rng(106);
    netgen::GenOptions opt;
    opt.max_channels = 5;
    opt.tile_size = 16;
    const NetworkSpec spec = netgen::random_network(rng, opt);
    const auto frames = netgen::random_sequence(rng, spec.in_channels, 32, 48, 4);

    EngineConfig cfg;
    cfg.tile_size = 16;
    cfg.input_threshold = 0.03f;
    DeltaEngine e1(spec, cfg);
    DeltaEngine e2(spec, cfg);
    for (size_t i = 0; i < frames.size(); ++i) {
        const Homography h = Homography::translation(static_cast<float>(16 * (i % 2)), 0.0f);
        const FrameResult r1 = e1.run_frame(frames[i], h);
        const FrameResult r2 = e2.run_frame(frames[i], h);
        CHECK(r1.output.data == r2.output.data);
        CHECK(r1.flops.total == r2.flops.total);
        CHECK(r1.update_rate == r2.update_rate);
    }
}

TEST_CASE("pan reversal over a restricted frontier resets, then runs dense") {
    TestRng rng(107);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 4, 3, 1, rng, true));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));
    const ValidatedNet vnet = validate(spec, 16);

    EngineConfig cfg = zero_threshold_config(16);
    cfg.grid_rows = 4;
    cfg.grid_cols = 4;  // tight grid so the reversal hits a restriction fast
    DeltaEngine engine(spec, cfg);

    const int fw = 64, fh = 64;
    TestRng content(9);
    const Tensor world = testutil::random_tensor(1, fh, fw + 16 * 6, content, 0.0f, 1.0f);
    const auto frame_at = [&](int wx) {
        Tensor f(1, fh, fw);
        for (int y = 0; y < fh; ++y)
            for (int x = 0; x < fw; ++x) f.at(0, y, x) = world.at(0, y, wx + x);
        return f;
    };

    // Pan right across the wrap, then jump back to the start.
    int resets = 0;
    for (const int wx : {0, 16, 32, 48}) {
        const FrameResult r =
            engine.run_frame(frame_at(wx), Homography::translation(static_cast<float>(wx), 0.0f));
        CHECK(!r.events.reset);
        resets += r.events.reset ? 1 : 0;
    }
    const FrameResult back = engine.run_frame(frame_at(0), Homography::translation(0.0f, 0.0f));
    CHECK(back.events.reset);
    CHECK(max_abs_diff(back.output, run_dense(vnet, frame_at(0))) <= 1e-4f);

    // And the stream keeps working afterwards.
    const FrameResult next = engine.run_frame(frame_at(0), Homography::identity());
    CHECK(!next.events.reset);
    CHECK(next.flops.total == 0);
}

TEST_CASE("a mild rotation homography runs through the full pipeline") {
    TestRng rng(116);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 2, 3, 1, rng, true));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));

    EngineConfig cfg;
    cfg.tile_size = 16;
    DeltaEngine engine(spec, cfg);

    const Tensor frame = testutil::random_tensor(1, 48, 64, rng, 0.0f, 1.0f);
    const FrameResult r0 = engine.run_frame(frame, Homography::identity());
    CHECK(r0.update_rate == doctest::Approx(1.0));

    // ~1 degree rotation with a small translation: bilinear warp path.
    const float c = std::cos(0.018f), s = std::sin(0.018f);
    Homography h;
    h.m = {c, -s, 5.3f, s, c, -2.1f, 0, 0, 1};
    const FrameResult r1 = engine.run_frame(frame, h);
    CHECK(r1.output.channels == 2);
    CHECK(r1.update_rate <= 1.0);
    CHECK(r1.update_rate >= 0.0);
    // Imperfectly aligned content produces some updates but no blowup.
    CHECK(max_abs(r1.output) < 100.0f);
}

TEST_CASE("frames exceeding a fixed grid are cropped and reported") {
    TestRng rng(117);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 2, 3, 1, rng, false));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));

    EngineConfig cfg = zero_threshold_config(16);
    cfg.grid_rows = 3;
    cfg.grid_cols = 3;
    DeltaEngine engine(spec, cfg);

    const Tensor big = testutil::random_tensor(1, 80, 80, rng, 0.0f, 1.0f);
    const FrameResult r = engine.run_frame(big, Homography::identity());
    CHECK(r.place.tiles_h == 3);
    CHECK(r.place.tiles_w == 3);
    CHECK(r.events.dropped_pixels == 80 * 80 - 48 * 48);
    CHECK(r.output.height == 48);
}

TEST_CASE("fresh-tile counts track the pan speed") {
    TestRng rng(108);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 2, 3, 1, rng, false));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));

    DeltaEngine engine(spec, zero_threshold_config(16));
    TestRng content(10);
    const Tensor world = testutil::random_tensor(1, 32, 48 + 16 * 5, content, 0.0f, 1.0f);
    for (int k = 0; k < 5; ++k) {
        Tensor f(1, 32, 48);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 48; ++x) f.at(0, y, x) = world.at(0, y, 16 * k + x);
        const FrameResult r =
            engine.run_frame(f, Homography::translation(static_cast<float>(16 * k), 0.0f));
        if (k == 0)
            CHECK(r.events.fresh == 2 * 3);  // whole first frame
        else
            CHECK(r.events.fresh == 2);  // one fresh tile column per step
    }
}

TEST_CASE("deep-stride nets reach 1x1 tiles and still fuse exactly") {
    // Four stride-2 convs: cumulative stride 16 on a 16px tile, so the
    // deepest buffers hold one pixel per tile; then upsample back with a
    // skip join.
    TestRng rng(115);
    NetworkSpec spec;
    spec.in_channels = 1;
    std::string cur = "input";
    int ch = 1;
    for (int i = 0; i < 4; ++i) {
        const std::string cname = "c" + std::to_string(i);
        spec.layers.push_back(netgen::conv_layer(cname, cur, ch, 4, 3, 2, rng, i == 0));
        ch = 4;
        const std::string rname = "r" + std::to_string(i);
        spec.layers.push_back(netgen::relu_layer(rname, cname));
        cur = rname;
    }
    for (int i = 0; i < 2; ++i) {
        LayerDef u;
        u.name = "u" + std::to_string(i);
        u.kind = LayerKind::Upsample;
        u.inputs = {cur};
        spec.layers.push_back(u);
        cur = u.name;
    }
    LayerDef a;
    a.name = "skip";
    a.kind = LayerKind::Add;
    a.inputs = {cur, "r1"};  // both at cumulative stride 4
    spec.layers.push_back(a);
    spec.layers.push_back(netgen::relu_layer("rj", "skip"));
    spec.layers.push_back(netgen::output_layer("rj"));

    const ValidatedNet vnet = validate(spec, 16);
    CHECK(vnet.info[vnet.index_of("r3")].tile == 1);

    DeltaEngine engine(spec, zero_threshold_config(16));
    FusedCanvas canvas(1, 16);
    TestRng content(15);
    const Tensor world = testutil::random_tensor(1, 64, 64 + 16 * 3, content, 0.0f, 1.0f);
    for (int k = 0; k < 4; ++k) {
        const int wx = 16 * k;
        Tensor f(1, 64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) f.at(0, y, x) = world.at(0, y, wx + x);
        const FrameResult r =
            engine.run_frame(f, Homography::translation(static_cast<float>(wx), 0.0f));
        canvas.paste(align_for(f, wx, 0, 16));
        CHECK(max_abs_diff(r.output, canvas.run_crop(vnet, r.place)) <= 1e-4f);
    }
}

TEST_CASE("mask soundness: super-threshold pixels always land in masked tiles") {
    TestRng rng(113);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 3, 3, 1, rng, false));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));

    EngineConfig cfg;
    cfg.tile_size = 16;
    cfg.input_threshold = 0.1f;
    cfg.default_threshold = 0.05f;
    cfg.override_net_thresholds = true;
    cfg.mask_dilation = 0;
    DeltaEngine engine(spec, cfg);

    Tensor prev;
    const auto frames = netgen::random_sequence(rng, 1, 48, 48, 5);
    for (const Tensor& f : frames) {
        const FrameResult r = engine.run_frame(f, Homography::identity());
        if (!prev.empty()) {
            for (int tr = 0; tr < 3; ++tr)
                for (int tc = 0; tc < 3; ++tc) {
                    float tile_max = 0.0f;
                    for (int y = tr * 16; y < (tr + 1) * 16; ++y)
                        for (int x = tc * 16; x < (tc + 1) * 16; ++x)
                            tile_max = std::max(tile_max,
                                                std::fabs(f.at(0, y, x) - prev.at(0, y, x)));
                    // A tile whose accumulated pixel delta clearly exceeds the
                    // input threshold must be masked this frame.
                    if (tile_max > cfg.input_threshold) CHECK(r.input_mask.get(tr, tc));
                }
        }
        // When everything propagated (mask hit), remember the content the
        // engine has integrated; unmasked tiles keep the old reference.
        if (prev.empty()) {
            prev = f;
        } else {
            for (int tr = 0; tr < 3; ++tr)
                for (int tc = 0; tc < 3; ++tc) {
                    if (!r.input_mask.get(tr, tc)) continue;
                    for (int y = tr * 16; y < (tr + 1) * 16; ++y)
                        for (int x = tc * 16; x < (tc + 1) * 16; ++x)
                            prev.at(0, y, x) = f.at(0, y, x);
                }
        }
    }
}

TEST_CASE("roi scaling gates masking only: identical outputs at threshold 0") {
    TestRng rng(114);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 3, 3, 1, rng, true));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::output_layer("r1"));

    EngineConfig base = zero_threshold_config(16);
    EngineConfig with_roi = base;
    with_roi.roi_enabled = true;

    DeltaEngine plain(spec, base);
    DeltaEngine gated(spec, with_roi);
    Tensor roi(1, 32, 48);  // m = 0 everywhere: factor 0.4, the harsh end
    const auto frames = netgen::random_sequence(rng, 1, 32, 48, 4);
    for (const Tensor& f : frames) {
        const FrameResult a = plain.run_frame(f, Homography::identity());
        const FrameResult b = gated.run_frame(f, Homography::identity(), &roi);
        CHECK(a.output.data == b.output.data);
    }
}

TEST_CASE("mass conservation at the first truncation point, thresholds > 0") {
    TestRng rng(109);
    NetworkSpec spec;
    spec.in_channels = 2;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 2, 4, 3, 1, rng, true));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    spec.layers.push_back(netgen::conv_layer("c2", "r1", 4, 2, 3, 1, rng, false));
    spec.layers.push_back(netgen::relu_layer("r2", "c2"));
    spec.layers.push_back(netgen::output_layer("r2"));

    EngineConfig cfg;
    cfg.tile_size = 16;
    cfg.input_threshold = 0.04f;
    cfg.default_threshold = 0.03f;
    cfg.override_net_thresholds = true;
    cfg.mask_dilation = 0;
    DeltaEngine engine(spec, cfg);

    // Mirror everything the conv layers emit into dense accumulators.
    Tensor mirror_r1, mirror_r2;
    engine.set_observer([&](const std::string& layer, const DeltaPacket& p) {
        Tensor* m = layer == "c1" ? &mirror_r1 : layer == "c2" ? &mirror_r2 : nullptr;
        if (!m) return;
        if (m->empty()) *m = Tensor(p.channels(), p.extent_h(), p.extent_w());
        for (int c = 0; c < p.channels(); ++c)
            for (int y = 0; y < p.extent_h(); ++y)
                for (int x = 0; x < p.extent_w(); ++x) m->at(c, y, x) += p.at(c, y, x);
    });

    const auto frames = netgen::random_sequence(rng, 2, 48, 48, 5);
    for (const Tensor& f : frames) {
        const FrameResult r = engine.run_frame(f, Homography::identity());
        for (const auto& [name, mirror] : {std::pair<std::string, Tensor*>{"r1", &mirror_r1},
                                           {"r2", &mirror_r2}}) {
            const TruncationState* st = engine.truncation_state(name);
            REQUIRE(st != nullptr);
            const Tensor acc = st->accumulated.read_region(r.place);
            const Tensor tr = st->truncated.read_region(r.place);
            Tensor sum = acc;
            for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += tr.data[i];
            // The state also carries the bias injected once per tile.
            Tensor expect = *mirror;
            for (int c = 0; c < expect.channels; ++c)
                for (int y = 0; y < expect.height; ++y)
                    for (int x = 0; x < expect.width; ++x)
                        expect.at(c, y, x) += st->bias_init[c];
            CHECK(max_abs_diff(sum, expect) <= 1e-4f);
        }
    }
}

TEST_CASE("maxpool networks match the dense oracle through pans and resets") {
    TestRng rng(110);
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.layers.push_back(netgen::conv_layer("c1", "input", 1, 4, 3, 1, rng, true));
    spec.layers.push_back(netgen::relu_layer("r1", "c1"));
    LayerDef pool;
    pool.name = "p1";
    pool.kind = LayerKind::MaxPool;
    pool.inputs = {"r1"};
    spec.layers.push_back(pool);
    spec.layers.push_back(netgen::conv_layer("c2", "p1", 4, 2, 3, 1, rng, false));
    spec.layers.push_back(netgen::relu_layer("r2", "c2"));
    spec.layers.push_back(netgen::output_layer("r2"));
    const ValidatedNet vnet = validate(spec, 16);

    DeltaEngine engine(spec, zero_threshold_config(16));
    FusedCanvas canvas(1, 16);
    TestRng content(11);
    const Tensor world = testutil::random_tensor(1, 32, 48 + 16 * 4, content, 0.0f, 1.0f);
    for (int k = 0; k < 5; ++k) {
        const int wx = 16 * std::min(k, 3);  // pan, then hold still
        Tensor f(1, 32, 48);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 48; ++x) f.at(0, y, x) = world.at(0, y, wx + x);
        const FrameResult r =
            engine.run_frame(f, Homography::translation(static_cast<float>(wx), 0.0f));
        canvas.paste(align_for(f, wx, 0, 16));
        CHECK(max_abs_diff(r.output, canvas.run_crop(vnet, r.place)) <= 1e-4f);
    }
}

TEST_SUITE_END();
