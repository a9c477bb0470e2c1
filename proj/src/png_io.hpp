#pragma once

#include "voxens/dataset.hpp"

#include <filesystem>

namespace voxens::detail {

/// Decodes an 8/16-bit gray/RGB(A)/palette PNG into [0,1] RGB; alpha is
/// composited over `background`.
ImageBuffer read_png(const std::filesystem::path& path, const Rgb& background);

/// Writes 8-bit RGB, rounding each channel to the nearest level.
void write_png(const ImageBuffer& image, const std::filesystem::path& path);

}  // namespace voxens::detail
