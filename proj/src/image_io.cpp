#include "ctcv/image_io.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <csetjmp>
#include <cstring>
#include <memory>
#include <string>

#include "ctcv/error.hpp"

namespace ctcv {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  return FilePtr(std::fopen(path.c_str(), mode));
}

enum class Format { png, jpeg, unknown };

Format sniff(std::FILE* f) {
  unsigned char sig[8] = {};
  const std::size_t got = std::fread(sig, 1, sizeof sig, f);
  std::rewind(f);
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return Format::png;
  if (got >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return Format::jpeg;
  return Format::unknown;
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw DecodeError(path.string() + ": " + why);
}

// ---- PNG ----

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadGuard() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Returns false if the decode failed (message in `err`). Only plain locals
// live across setjmp here.
bool png_decode(std::FILE* f, bool header_only, Image8& img, std::string& err) {
  PngReadGuard g;
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!g.png) {
    err = "out of memory";
    return false;
  }
  g.info = png_create_info_struct(g.png);
  if (!g.info) {
    err = "out of memory";
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(g.png))) {
    if (err.empty()) err = "corrupt PNG stream";
    return false;
  }
  png_init_io(g.png, f);
  png_read_info(g.png, g.info);
  const png_uint_32 width = png_get_image_width(g.png, g.info);
  const png_uint_32 height = png_get_image_height(g.png, g.info);
  const int depth = png_get_bit_depth(g.png, g.info);
  const int color = png_get_color_type(g.png, g.info);
  if (depth > 8) {
    err = "unsupported bit depth " + std::to_string(depth);
    return false;
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(g.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(g.png);
  if (png_get_valid(g.png, g.info, PNG_INFO_tRNS)) png_set_strip_alpha(g.png);
  png_read_update_info(g.png, g.info);
  const int channels = png_get_channels(g.png, g.info);
  if (channels != 1 && channels != 3) {
    err = "unsupported channel count " + std::to_string(channels);
    return false;
  }
  img.width = width;
  img.height = height;
  img.channels = static_cast<std::size_t>(channels);
  if (header_only) return true;
  img.pixels.resize(img.width * img.height * img.channels);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = img.pixels.data() + y * img.width * img.channels;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);
  return true;
}

// ---- JPEG ----

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* e = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, e->message);
  std::longjmp(e->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

bool jpeg_decode(std::FILE* f, bool header_only, Image8& img, std::string& err) {
  jpeg_decompress_struct cinfo;
  JpegError jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit;
  jerr.mgr.emit_message = jpeg_silent;
  jerr.message[0] = '\0';
  if (setjmp(jerr.jump)) {
    err = jerr.message[0] ? jerr.message : "corrupt JPEG stream";
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.num_components != 1) cinfo.out_color_space = JCS_RGB;
  jpeg_calc_output_dimensions(&cinfo);
  img.width = cinfo.output_width;
  img.height = cinfo.output_height;
  img.channels = static_cast<std::size_t>(cinfo.output_components);
  if (img.channels != 1 && img.channels != 3) {
    err = "unsupported channel count " + std::to_string(img.channels);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  if (header_only) {
    jpeg_destroy_decompress(&cinfo);
    return true;
  }
  img.pixels.resize(img.width * img.height * img.channels);
  jpeg_start_decompress(&cinfo);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + cinfo.output_scanline * img.width * img.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

bool decode(const std::filesystem::path& path, bool header_only, Image8& img, std::string& err) {
  FilePtr f = open_file(path, "rb");
  if (!f) {
    err = "cannot open file";
    return false;
  }
  switch (sniff(f.get())) {
    case Format::png: return png_decode(f.get(), header_only, img, err);
    case Format::jpeg: return jpeg_decode(f.get(), header_only, img, err);
    case Format::unknown: break;
  }
  err = "not a PNG or JPEG image";
  return false;
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  Image8 img;
  std::string err;
  if (!decode(path, false, img, err)) fail(path, err);
  return img;
}

bool probe_image(const std::filesystem::path& path) {
  Image8 img;
  std::string err;
  return decode(path, true, img, err);
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidArgument("write_png supports 1 or 3 channels");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw InvalidArgument("write_png: pixel buffer size does not match dimensions");
  }
  FilePtr f = open_file(path, "wb");
  if (!f) throw IoError("cannot write " + path.string());
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("out of memory writing " + path.string());
  }
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string() + ": " + err);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + y * image.width * image.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace ctcv
