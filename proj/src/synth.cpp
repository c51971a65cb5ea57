#include "deltaflux/synth.hpp"

namespace dflx {

Tensor synth_texture(int channels, int height, int width, std::mt19937& rng) {
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    Tensor noise(channels, height, width);
    for (float& v : noise.data) v = uni(rng);

    // Box blur twice for smooth coherent structure.
    const auto blur = [&](const Tensor& in) {
        Tensor out(in.channels, in.height, in.width);
        for (int c = 0; c < in.channels; ++c)
            for (int y = 0; y < in.height; ++y)
                for (int x = 0; x < in.width; ++x) {
                    float s = 0.0f;
                    int n = 0;
                    for (int dy = -2; dy <= 2; ++dy)
                        for (int dx = -2; dx <= 2; ++dx) {
                            const int yy = y + dy, xx = x + dx;
                            if (yy < 0 || yy >= in.height || xx < 0 || xx >= in.width) continue;
                            s += in.at(c, yy, xx);
                            ++n;
                        }
                    out.at(c, y, x) = s / static_cast<float>(n);
                }
        return out;
    };
    return blur(blur(noise));
}

SynthSequence synth_sequence(const SynthParams& p) {
    check(p.width >= 8 && p.height >= 8 && p.frames >= 1 && p.channels >= 1,
          "synth: bad dimensions");
    std::mt19937 rng(p.seed);

    const bool pans = p.kind == SynthParams::Kind::Pan;
    const int span_x = pans ? std::abs(p.pan_x) * (p.frames - 1) : 0;
    const int span_y = pans ? std::abs(p.pan_y) * (p.frames - 1) : 0;
    const Tensor world = synth_texture(p.channels, p.height + span_y, p.width + span_x, rng);

    const bool object = p.with_object || p.kind == SynthParams::Kind::MovingObject;
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    std::vector<float> obj_color(p.channels);
    for (float& v : obj_color) v = uni(rng);
    const int obj_size = std::max(6, std::min(p.width, p.height) / 6);

    SynthSequence seq;
    for (int f = 0; f < p.frames; ++f) {
        // World-space window of this frame; panning right means the camera
        // window moves right, so content appears to move left.
        const int wx = pans ? (p.pan_x >= 0 ? p.pan_x * f : span_x + p.pan_x * f) : 0;
        const int wy = pans ? (p.pan_y >= 0 ? p.pan_y * f : span_y + p.pan_y * f) : 0;

        Tensor frame(p.channels, p.height, p.width);
        for (int c = 0; c < p.channels; ++c)
            for (int y = 0; y < p.height; ++y)
                for (int x = 0; x < p.width; ++x)
                    frame.at(c, y, x) = world.at(c, wy + y, wx + x);

        if (p.kind == SynthParams::Kind::NoiseField) {
            std::uniform_real_distribution<float> jitter(-p.noise_amplitude / 2.0f,
                                                         p.noise_amplitude / 2.0f);
            for (float& v : frame.data) v = std::min(1.0f, std::max(0.0f, v + jitter(rng)));
        }

        if (object) {
            // A square moving diagonally in world space.
            const int ox = 4 + (f * 3) % std::max(1, p.width - obj_size - 8);
            const int oy = 4 + (f * 2) % std::max(1, p.height - obj_size - 8);
            const int fx = ox - (pans ? 0 : 0);
            for (int c = 0; c < p.channels; ++c)
                for (int y = oy; y < oy + obj_size && y < p.height; ++y)
                    for (int x = fx; x < fx + obj_size && x < p.width; ++x)
                        frame.at(c, y, x) = obj_color[c];
        }

        seq.frames.push_back(std::move(frame));
        seq.homographies.push_back(Homography::translation(static_cast<float>(wx),
                                                           static_cast<float>(wy)));
    }
    return seq;
}

}  // namespace dflx
