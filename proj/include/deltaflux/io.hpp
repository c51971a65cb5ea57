#pragma once

#include <string>

#include "deltaflux/alignment.hpp"
#include "deltaflux/buffer_manager.hpp"

namespace dflx {

// Tensor file format: magic "DFLX", u32 version=1, u32 channels,
// u32 height, then u32 width, then channels*height*width little-endian
// 32-bit floats. Used for weights, golden outputs and debug dumps.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

// Binary PPM (P6, 8-bit), values normalized to [0,1] on load.
Tensor load_ppm(const std::string& path);
void save_ppm(const Tensor& t, const std::string& path);

// Binary PGM (P5, 8-bit), single channel in [0,1].
Tensor load_pgm(const std::string& path);
void save_pgm(const Tensor& t, const std::string& path);

// Loads a frame by extension: .ppm/.pgm images or .dflx tensors.
Tensor load_frame(const std::string& path);

// Homography file: one frame per line, 9 whitespace-separated floats in
// row-major order; line 1 is the identity for the reference frame.
std::vector<Homography> load_homographies(const std::string& path);
void save_homographies(const std::vector<Homography>& hs, const std::string& path);

// Debug dump of a spherical buffer: storage as a tensor file plus a
// sidecar text file listing each local tile's held global coordinate.
void dump_buffer(const SphericalBuffer& buf, const TileLedger* ledger, const std::string& path);

}  // namespace dflx
