#pragma once

#include <random>

#include "deltaflux/alignment.hpp"

namespace dflx {

// Deterministic synthetic sequences: textured background, optional moving
// object, camera pan in integer pixels per frame. A desk-scale stand-in
// for real stabilized footage.
struct SynthParams {
    enum class Kind { Pan, Static, NoiseField, MovingObject };
    Kind kind = Kind::Pan;
    int width = 128;
    int height = 96;
    int channels = 3;
    int frames = 6;
    int pan_x = 0;  // camera pan per frame, pixels
    int pan_y = 0;
    float noise_amplitude = 0.05f;  // peak-to-peak, NoiseField only
    bool with_object = false;
    uint64_t seed = 42;
};

struct SynthSequence {
    std::vector<Tensor> frames;
    std::vector<Homography> homographies;  // frame -> reference
};

SynthSequence synth_sequence(const SynthParams& params);

// Smooth seeded texture in [0,1]; shared by the generator and tests.
Tensor synth_texture(int channels, int height, int width, std::mt19937& rng);

}  // namespace dflx
