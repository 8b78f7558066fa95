#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mgbp/tensor.hpp"

namespace mgbp {

/// Reads an 8-bit PNG (gray or RGB), a binary PGM/PPM (P5/P6, maxval 255) or
/// an MGT1 raw tensor. 8-bit samples map to [0, 1] as value / 255.
Tensor read_image(const std::filesystem::path& path);

/// Format chosen by extension: .png, .pgm, .ppm quantize to 8 bits after
/// clamping to [0, 1]; .mgt writes the raw tensor bit-exactly.
void write_image(const Tensor& t, const std::filesystem::path& path);

/// MGT1: "MGT1", uint32 LE H, W, C, then H*W*C float64 LE, row-major.
Tensor read_tensor(std::istream& in);
void write_tensor(const Tensor& t, std::ostream& out);
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Quantizes a sample to the nearest 1/255 step after clamping to [0, 1].
unsigned char quantize_u8(double v);

}  // namespace mgbp
