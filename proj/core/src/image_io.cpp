#include "ihpe/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <memory>

namespace ihpe {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorState {
  char message[256] = {0};
};

void png_fail(png_structp png, png_const_charp msg) {
  auto* st = static_cast<ErrorState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  png_longjmp(png, 1);
}
void png_warn(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  int color = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
};

// Returns false on a libpng error; nothing with a destructor is created after setjmp.
bool decode_raw(std::FILE* file, bool want_rgb, Decoded& out, ErrorState& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  out.color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
  if (out.color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (want_rgb) {
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (out.color == PNG_COLOR_TYPE_GRAY || out.color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  } else {
    png_set_swap(png);
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t row = png_get_rowbytes(png, info);
  out.bytes.resize(row * out.height);
  out.rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) out.rows[y] = out.bytes.data() + row * y;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Decoded decode(const std::filesystem::path& path, bool want_rgb) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path.string() + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file", 0);
  }
  Decoded out;
  ErrorState err;
  if (!decode_raw(file.get(), want_rgb, out, err)) {
    throw FormatError("'" + path.string() + "': PNG error: " + err.message, 0);
  }
  return out;
}

bool encode_raw(std::FILE* file, int width, int height, int color, int bit_depth, std::vector<png_bytep>& rows,
                ErrorState& err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

// `bytes` holds little-endian samples for 16-bit images.
void encode(const std::filesystem::path& path, int width, int height, int color, int bit_depth,
            const std::vector<std::uint8_t>& bytes, std::size_t row_bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(bytes.data() + row_bytes * y);
  ErrorState err;
  if (!encode_raw(file.get(), width, height, color, bit_depth, rows, err)) {
    throw IoError("failed writing '" + path.string() + "': " + err.message);
  }
  if (std::fflush(file.get()) != 0) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

DepthImage read_depth_png(const std::filesystem::path& path, float background) {
  const Decoded d = decode(path, false);
  if (d.color != PNG_COLOR_TYPE_GRAY || d.channels != 1) throw FormatError("'" + path.string() + "' is not a single-channel PNG", 0);
  std::vector<float> depths(static_cast<std::size_t>(d.width) * d.height);
  for (std::size_t i = 0; i < depths.size(); ++i) {
    float v;
    if (d.bit_depth == 16) {
      v = static_cast<float>(d.bytes[2 * i] | (d.bytes[2 * i + 1] << 8));
    } else {
      v = static_cast<float>(d.bytes[i]);
    }
    depths[i] = v > 0.0f ? v : background;
  }
  return DepthImage(d.width, d.height, std::move(depths), background);
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& img) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.width()) * img.height() * 2);
  const auto depths = img.depths();
  for (std::size_t i = 0; i < depths.size(); ++i) {
    const float d = depths[i];
    std::uint16_t v = 0;
    if (d < img.background() && d <= 65535.0f) v = static_cast<std::uint16_t>(std::lround(d));
    bytes[2 * i] = static_cast<std::uint8_t>(v & 0xff);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(v >> 8);
  }
  encode(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 16, bytes, static_cast<std::size_t>(img.width()) * 2);
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
  encode(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, img.data, static_cast<std::size_t>(img.width) * 3);
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  const Decoded d = decode(path, true);
  RgbImage out(d.width, d.height);
  out.data = d.bytes;
  return out;
}

}  // namespace ihpe
