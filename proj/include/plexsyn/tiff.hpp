#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "plexsyn/error.hpp"
#include "plexsyn/stack.hpp"
#include "plexsyn/stack_io.hpp"

namespace plexsyn {

namespace tiff {

enum Tag : std::uint16_t {
  image_width = 256,
  image_length = 257,
  bits_per_sample = 258,
  compression = 259,
  photometric = 262,
  strip_offsets = 273,
  samples_per_pixel = 277,
  rows_per_strip = 278,
  strip_byte_counts = 279,
  planar_configuration = 284,
  page_name = 285,
  tile_width = 322,
  tile_length = 323,
  tile_offsets = 324,
  tile_byte_counts = 325,
  sample_format = 339,
};

enum Type : std::uint16_t {
  byte = 1,
  ascii = 2,
  short_ = 3,
  long_ = 4,
};

struct Entry {
  std::uint16_t tag = 0;
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::uint32_t value_offset = 0;  // raw field; inline when it fits
  std::size_t field_position = 0;  // file offset of the value field
};

class Buffer {
 public:
  Buffer(std::vector<std::uint8_t> bytes, bool big_endian)
      : bytes_(std::move(bytes)), big_endian_(big_endian) {}

  std::size_t size() const { return bytes_.size(); }

  void need(std::uint64_t offset, std::uint64_t length) const {
    if (offset + length > bytes_.size()) {
      fail(ErrorKind::truncation, "TIFF data extends past end of file");
    }
  }

  std::uint8_t u8(std::uint64_t offset) const {
    need(offset, 1);
    return bytes_[offset];
  }

  std::uint16_t u16(std::uint64_t offset) const {
    need(offset, 2);
    const std::uint16_t a = bytes_[offset];
    const std::uint16_t b = bytes_[offset + 1];
    return big_endian_ ? static_cast<std::uint16_t>((a << 8) | b)
                       : static_cast<std::uint16_t>((b << 8) | a);
  }

  std::uint32_t u32(std::uint64_t offset) const {
    need(offset, 4);
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint32_t byte = bytes_[offset + i];
      value |= big_endian_ ? byte << (8 * (3 - i)) : byte << (8 * i);
    }
    return value;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  bool big_endian_;
};

inline std::size_t type_size(std::uint16_t type) {
  switch (type) {
    case byte:
    case ascii: return 1;
    case short_: return 2;
    case long_: return 4;
    default: return 0;
  }
}

/// Integer values of an entry (BYTE, SHORT or LONG arrays).
inline std::vector<std::uint32_t> values(const Buffer& file, const Entry& e) {
  const std::size_t width = type_size(e.type);
  if (width == 0 || e.type == ascii) {
    fail(ErrorKind::unsupported,
         "TIFF tag " + std::to_string(e.tag) + " has unsupported field type " +
             std::to_string(e.type));
  }
  const std::uint64_t total = static_cast<std::uint64_t>(width) * e.count;
  const std::uint64_t base = total <= 4 ? e.field_position : e.value_offset;
  file.need(base, total);
  std::vector<std::uint32_t> out;
  out.reserve(e.count);
  for (std::uint32_t i = 0; i < e.count; ++i) {
    const std::uint64_t at = base + i * width;
    out.push_back(width == 1 ? file.u8(at)
                  : width == 2 ? file.u16(at)
                               : file.u32(at));
  }
  return out;
}

inline std::string ascii_value(const Buffer& file, const Entry& e) {
  const std::uint64_t base = e.count <= 4 ? e.field_position : e.value_offset;
  file.need(base, e.count);
  std::string text;
  for (std::uint32_t i = 0; i < e.count; ++i) {
    const char ch = static_cast<char>(file.u8(base + i));
    if (ch == '\0') break;
    text += ch;
  }
  return text;
}

struct Page {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t bits = 1;
  std::uint32_t photometric = 1;
  std::vector<std::uint32_t> strip_offsets;
  std::vector<std::uint32_t> strip_byte_counts;
  std::uint32_t rows_per_strip = UINT32_MAX;
  std::string name;
};

inline Page read_page(const Buffer& file, std::uint32_t ifd_offset) {
  const std::uint16_t count = file.u16(ifd_offset);
  Page page;
  bool has_width = false;
  bool has_height = false;
  for (std::uint16_t i = 0; i < count; ++i) {
    const std::uint64_t at = ifd_offset + 2ull + 12ull * i;
    Entry e;
    e.tag = file.u16(at);
    e.type = file.u16(at + 2);
    e.count = file.u32(at + 4);
    e.value_offset = file.u32(at + 8);
    e.field_position = at + 8;
    const auto first = [&] {
      const auto v = values(file, e);
      require(!v.empty(), "TIFF tag " + std::to_string(e.tag) + " is empty");
      return v.front();
    };
    switch (e.tag) {
      case image_width: page.width = first(); has_width = true; break;
      case image_length: page.height = first(); has_height = true; break;
      case bits_per_sample: {
        const auto bits = values(file, e);
        for (auto b : bits) {
          if (b != bits.front()) {
            fail(ErrorKind::unsupported, "mixed bits-per-sample in TIFF page");
          }
        }
        page.bits = bits.empty() ? 1 : bits.front();
        break;
      }
      case compression:
        if (first() != 1) {
          fail(ErrorKind::unsupported,
               "compressed TIFF (compression=" + std::to_string(first()) +
                   ") is not supported");
        }
        break;
      case photometric: page.photometric = first(); break;
      case strip_offsets: page.strip_offsets = values(file, e); break;
      case samples_per_pixel:
        if (first() != 1) {
          fail(ErrorKind::unsupported, "only single-sample grayscale TIFF pages are supported");
        }
        break;
      case rows_per_strip: page.rows_per_strip = first(); break;
      case strip_byte_counts: page.strip_byte_counts = values(file, e); break;
      case planar_configuration:
        if (first() != 1) {
          fail(ErrorKind::unsupported, "planar TIFF configuration is not supported");
        }
        break;
      case page_name: page.name = ascii_value(file, e); break;
      case tile_width:
      case tile_length:
      case tile_offsets:
      case tile_byte_counts:
        fail(ErrorKind::unsupported, "tiled TIFF is not supported");
      case sample_format:
        if (first() != 1) {
          fail(ErrorKind::unsupported, "only unsigned integer TIFF samples are supported");
        }
        break;
      default: break;
    }
  }
  if (!has_width || !has_height || page.width == 0 || page.height == 0) {
    fail(ErrorKind::format, "TIFF page is missing its dimensions");
  }
  if (page.bits != 8 && page.bits != 16) {
    fail(ErrorKind::unsupported,
         "only 8- and 16-bit TIFF samples are supported, got " +
             std::to_string(page.bits));
  }
  if (page.photometric > 1) {
    fail(ErrorKind::unsupported, "only grayscale TIFF pages are supported");
  }
  if (page.strip_offsets.empty() ||
      page.strip_offsets.size() != page.strip_byte_counts.size()) {
    fail(ErrorKind::format, "TIFF page has inconsistent strip tables");
  }
  return page;
}

inline std::vector<float> decode_pixels(const Buffer& file, const Page& page) {
  const std::size_t bytes_per_sample = page.bits / 8;
  const std::uint64_t row_bytes =
      static_cast<std::uint64_t>(page.width) * bytes_per_sample;
  const std::uint64_t rows_per_strip =
      std::min<std::uint64_t>(page.rows_per_strip, page.height);
  const std::uint64_t expected_strips =
      (page.height + rows_per_strip - 1) / rows_per_strip;
  if (page.strip_offsets.size() != expected_strips) {
    fail(ErrorKind::format, "TIFF strip count does not match image height");
  }

  const double scale = page.bits == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
  const std::uint32_t max_value = page.bits == 8 ? 255u : 65535u;
  std::vector<float> pixels(static_cast<std::size_t>(page.width) * page.height);
  std::size_t row = 0;
  for (std::size_t s = 0; s < page.strip_offsets.size(); ++s) {
    const std::uint64_t rows =
        std::min<std::uint64_t>(rows_per_strip, page.height - row);
    const std::uint64_t need = rows * row_bytes;
    if (page.strip_byte_counts[s] < need) {
      fail(ErrorKind::truncation, "TIFF strip is shorter than its rows");
    }
    const std::uint64_t base = page.strip_offsets[s];
    file.need(base, need);
    for (std::uint64_t i = 0; i < rows * page.width; ++i) {
      std::uint32_t raw = bytes_per_sample == 1
                              ? file.u8(base + i)
                              : file.u16(base + 2 * i);
      if (page.photometric == 0) raw = max_value - raw;
      pixels[row * page.width + i] = static_cast<float>(raw * scale);
    }
    row += rows;
  }
  return pixels;
}

}  // namespace tiff

/// Reads an uncompressed, stripped, single-sample 8/16-bit multi-page TIFF.
/// Page i becomes channel i, named by its PageName tag or "ch<i>".
inline ChannelStack import_tiff(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() < 8) fail(ErrorKind::format, "file too short to be a TIFF");
  bool big_endian = false;
  if (bytes[0] == 'I' && bytes[1] == 'I') {
    big_endian = false;
  } else if (bytes[0] == 'M' && bytes[1] == 'M') {
    big_endian = true;
  } else {
    fail(ErrorKind::format, "missing TIFF byte-order mark");
  }
  const tiff::Buffer file(std::move(bytes), big_endian);
  const std::uint16_t magic = file.u16(2);
  if (magic == 43) fail(ErrorKind::unsupported, "BigTIFF is not supported");
  if (magic != 42) fail(ErrorKind::format, "bad TIFF magic number");

  std::vector<std::string> names;
  std::vector<float> data;
  std::size_t height = 0;
  std::size_t width = 0;
  std::set<std::uint32_t> visited;
  std::uint32_t offset = file.u32(4);
  while (offset != 0) {
    if (!visited.insert(offset).second) {
      fail(ErrorKind::format, "TIFF page chain contains a cycle");
    }
    const tiff::Page page = tiff::read_page(file, offset);
    if (names.empty()) {
      height = page.height;
      width = page.width;
    } else if (page.height != height || page.width != width) {
      fail(ErrorKind::validation, "TIFF pages have mixed dimensions");
    }
    const auto pixels = tiff::decode_pixels(file, page);
    data.insert(data.end(), pixels.begin(), pixels.end());
    names.push_back(page.name.empty() ? "ch" + std::to_string(names.size())
                                      : page.name);
    const std::uint16_t count = file.u16(offset);
    offset = file.u32(offset + 2ull + 12ull * count);
  }
  if (names.empty()) fail(ErrorKind::format, "TIFF contains no pages");
  return ChannelStack(height, width, std::move(names), std::move(data));
}

}  // namespace plexsyn
