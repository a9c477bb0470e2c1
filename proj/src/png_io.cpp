#include "png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace voxens::detail {

ImageBuffer read_png(const std::filesystem::path& path, const Rgb& background) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    fail(ErrorKind::Io, "cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    fail(ErrorKind::Io, "cannot decode PNG " + path.string() + ": " + img.message);
  }
  ImageBuffer out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const double a = buf[4 * p + 3] / 255.0;
    for (int c = 0; c < 3; ++c) {
      const double v = buf[4 * p + c] / 255.0;
      out.pixels[3 * p + c] = a == 1.0 ? v : a * v + (1.0 - a) * background[c];
    }
  }
  return out;
}

void write_png(const ImageBuffer& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(image.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    buf[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    fail(ErrorKind::Io, "cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace voxens::detail
