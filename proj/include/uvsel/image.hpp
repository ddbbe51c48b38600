// Color/depth image containers and PNG encode/decode through libpng.

#ifndef UVSEL_IMAGE_HPP
#define UVSEL_IMAGE_HPP

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "uvsel/core.hpp"
#include "uvsel/mask.hpp"

namespace uvsel {

/// Interleaved 8-bit RGB.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * 3, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t* pixel(int x, int y) {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// 16-bit depth in sensor units (millimeters by default); 0 marks invalid.
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint16_t at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int x, int y, std::uint16_t v) {
    data_[static_cast<std::size_t>(y) * width_ + x] = v;
  }
  std::span<const std::uint16_t> data() const { return data_; }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint16_t> data_;
};

namespace png_detail {

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 or 3
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint8_t> bytes;  // row-major; 16-bit samples big-endian
};

// libpng reports errors by longjmp; the message is parked in the error pointer
// and rethrown as IoError once control is back in C++ frames.
[[noreturn]] inline void on_error(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
  if (slot) *slot = msg;
  png_longjmp(png, 1);
}
inline void on_warning(png_structp, png_const_charp) {}

inline std::vector<std::uint8_t> encode(const RawImage& img) {
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error,
                                            &on_error, &on_warning);
  if (!png) throw IoError("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (setjmp(png_jmpbuf(png))) throw IoError("png: " + error);

  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), img.bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride =
      static_cast<std::size_t>(img.width) * img.channels * (img.bit_depth / 8);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.bytes.data() + y * stride));
  }
  png_write_end(png, nullptr);
  return out;
}

inline RawImage decode(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) {
    throw IoError("png: not a PNG stream");
  }
  std::string error;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, &on_error, &on_warning);
  if (!png) throw IoError("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  struct Cursor {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
  } cursor{data};
  RawImage img;
  if (setjmp(png_jmpbuf(png))) throw IoError("png: " + error);
  png_set_read_fn(png, &cursor, [](png_structp p, png_bytep out, png_size_t len) {
    auto* c = static_cast<Cursor*>(png_get_io_ptr(p));
    if (c->pos + len > c->data.size()) png_error(p, "truncated stream");
    std::memcpy(out, c->data.data() + c->pos, len);
    c->pos += len;
  });
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  if (img.channels != 1 && img.channels != 3) {
    throw IoError("png: unsupported channel count " + std::to_string(img.channels));
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  img.bytes.resize(stride * img.height);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, img.bytes.data() + y * stride, nullptr);
  }
  png_read_end(png, nullptr);
  return img;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RawImage read_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace png_detail

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  png_detail::RawImage raw{img.width(), img.height(), 3, 8,
                           {img.data().begin(), img.data().end()}};
  return png_detail::encode(raw);
}

inline std::vector<std::uint8_t> encode_png(const DepthImage& img) {
  png_detail::RawImage raw{img.width(), img.height(), 1, 16, {}};
  raw.bytes.reserve(img.data().size() * 2);
  for (auto v : img.data()) {
    raw.bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    raw.bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return png_detail::encode(raw);
}

/// Masks are stored as 8-bit single-channel images: 0 clear, 255 set.
inline std::vector<std::uint8_t> encode_png(const BinaryMask& m) {
  png_detail::RawImage raw{m.width(), m.height(), 1, 8, {}};
  raw.bytes.reserve(m.size());
  for (auto b : m.bits()) raw.bytes.push_back(b ? 255 : 0);
  return png_detail::encode(raw);
}

inline RgbImage decode_rgb(std::span<const std::uint8_t> png) {
  auto raw = png_detail::decode(png);
  if (raw.bit_depth != 8) throw IoError("color image must be 8-bit");
  RgbImage img(raw.width, raw.height);
  auto dst = img.data();
  if (raw.channels == 3) {
    std::copy(raw.bytes.begin(), raw.bytes.end(), dst.begin());
  } else {
    for (std::size_t i = 0; i < raw.bytes.size(); ++i) {
      dst[i * 3] = dst[i * 3 + 1] = dst[i * 3 + 2] = raw.bytes[i];
    }
  }
  return img;
}

inline RgbImage read_rgb(const std::filesystem::path& path) {
  auto bytes = png_detail::read_file(path);
  return decode_rgb(bytes);
}

inline DepthImage read_depth(const std::filesystem::path& path) {
  auto raw = png_detail::read_png(path);
  if (raw.channels != 1 || raw.bit_depth != 16) {
    throw IoError(path.string() + ": depth image must be 16-bit single-channel");
  }
  DepthImage img(raw.width, raw.height);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * raw.width + x) * 2;
      img.set(x, y, static_cast<std::uint16_t>((raw.bytes[i] << 8) | raw.bytes[i + 1]));
    }
  }
  return img;
}

inline BinaryMask read_mask(const std::filesystem::path& path) {
  auto raw = png_detail::read_png(path);
  if (raw.channels != 1 || raw.bit_depth != 8) {
    throw IoError(path.string() + ": mask image must be 8-bit single-channel");
  }
  BinaryMask m(raw.width, raw.height);
  auto dst = m.bits();
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) dst[i] = raw.bytes[i] ? 1 : 0;
  return m;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_file_atomic(path, encode_png(img));
}
inline void write_png(const std::filesystem::path& path, const DepthImage& img) {
  write_file_atomic(path, encode_png(img));
}
inline void write_png(const std::filesystem::path& path, const BinaryMask& m) {
  write_file_atomic(path, encode_png(m));
}

}  // namespace uvsel

#endif  // UVSEL_IMAGE_HPP
