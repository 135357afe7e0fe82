#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctcv {

// 8-bit interleaved image, rows top to bottom. channels is 1 (gray) or 3 (RGB).
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  bool operator==(const Image8&) const = default;
};

// Decodes PNG or JPEG (detected from the file signature). Alpha is dropped,
// palettes and sub-byte gray depths are expanded; 16-bit samples are
// rejected. Throws DecodeError carrying the path.
Image8 read_image(const std::filesystem::path& path);

// Reads only the header; returns false for anything read_image would reject.
bool probe_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image8& image);

}  // namespace ctcv
