#pragma once

#include "deltaflux/alignment.hpp"
#include "deltaflux/buffer_manager.hpp"
#include "deltaflux/io.hpp"
#include "deltaflux/network.hpp"

namespace dflx {

struct EngineConfig {
    int tile_size = 32;
    int grid_rows = 0;  // 0: first frame's tiles + 2 * ring per axis
    int grid_cols = 0;
    float input_threshold = 0.15f;    // first truncation, on the image delta
    float default_threshold = 0.02f;  // truncating layers without their own
    bool override_net_thresholds = false;
    int mask_dilation = 10;  // radius in pixels on the input update mask
    bool roi_enabled = false;
    bool noise_suppression = false;
    bool padded_convolutions = true;  // disable only to demonstrate the failure mode
};

struct FrameEvents {
    int64_t frame_index = 0;
    TileCoord origin;
    int fresh = 0;
    int evicted = 0;
    bool reset = false;
    int64_t dropped_pixels = 0;
};

struct FrameResult {
    Tensor output;  // densified network output over the placement
    FramePlacement place;
    FlopReport flops;
    FrameEvents events;
    double update_rate = 0.0;  // masked fraction of placement tiles after gating
    TileMask input_mask;       // gated update mask at input resolution
};

// One engine instance per video stream. Frames arrive with a homography
// mapping them into the reference coordinate system; the engine aligns,
// snaps to the tile grid, plans buffer allocation, computes the gated
// input delta and pushes it through every layer sparsely.
class DeltaEngine {
  public:
    DeltaEngine(const NetworkSpec& spec, const EngineConfig& config);

    // `roi`, when given with roi_enabled, is a single-channel map in [0,1]
    // at frame resolution; it is aligned alongside the frame.
    FrameResult run_frame(const Tensor& frame, const Homography& h, const Tensor* roi = nullptr);

    // Full reset: clears every buffer and the ledger; the next frame
    // becomes the new reference and is processed densely.
    void reset();

    const ValidatedNet& net() const { return net_; }
    const EngineConfig& config() const { return config_; }
    bool initialized() const { return initialized_; }
    int64_t frame_index() const { return frame_index_; }
    GridSpec input_grid() const;

    // Introspection for tests, debugging and buffer dumps.
    const TileLedger& ledger() const { return ledger_; }
    const TruncationState& input_state() const { return input_state_; }
    const TruncationState* truncation_state(const std::string& layer) const;
    const MaxPoolState* maxpool_state(const std::string& layer) const;

    using Observer = std::function<void(const std::string& layer, const DeltaPacket& packet)>;
    void set_observer(Observer obs) { observer_ = std::move(obs); }

    void dump_state(const std::string& dir) const;

  private:
    void allocate(const FramePlacement& first);
    void zero_tile_everywhere(const TileCoord& t);
    TileMask input_gate(const DeltaPacket& raw, const FramePlan& plan, const Tensor* roi) const;

    ValidatedNet net_;
    EngineConfig config_;
    bool initialized_ = false;
    int64_t frame_index_ = 0;
    int grid_rows_ = 0;
    int grid_cols_ = 0;

    TileLedger ledger_;
    TruncationState input_state_;
    std::vector<std::optional<TruncationState>> trunc_states_;  // per layer index
    std::vector<std::optional<MaxPoolState>> pool_states_;
    Observer observer_;
};

}  // namespace dflx
