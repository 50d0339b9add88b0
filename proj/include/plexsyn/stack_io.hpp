#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "plexsyn/error.hpp"
#include "plexsyn/stack.hpp"

// MCS1 layout, little-endian throughout:
//   "MCS1" | u16 version=1 | u32 height | u32 width | u32 channel_count
//   | channel_count * { u16 name_len, name bytes } | f32 pixel data

namespace plexsyn {

namespace mcs1 {

inline constexpr char magic[4] = {'M', 'C', 'S', '1'};
inline constexpr std::uint16_t version = 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(
          (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
    }
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(bytes_[offset_ + i]) << (8 * i);
    }
    offset_ += sizeof(T);
    return static_cast<T>(value);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string get_string(std::size_t size) {
    need(size);
    std::string out(reinterpret_cast<const char*>(bytes_.data() + offset_),
                    size);
    offset_ += size;
    return out;
  }
  std::size_t remaining() const { return bytes_.size() - offset_; }
  void need(std::size_t size) const {
    if (remaining() < size) {
      fail(ErrorKind::truncation, "MCS1 file is truncated");
    }
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t offset_ = 0;
};

}  // namespace mcs1

inline std::vector<std::uint8_t> read_file_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "error reading '" + path.string() + "'");
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) fail(ErrorKind::io, "error writing '" + path.string() + "'");
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

inline std::vector<std::uint8_t> encode_mcs1(const ChannelStack& stack) {
  stack.validate();
  constexpr auto u32_max = std::numeric_limits<std::uint32_t>::max();
  require(stack.height() <= u32_max && stack.width() <= u32_max &&
              stack.channels() <= u32_max,
          "stack too large for MCS1");
  mcs1::Writer out;
  out.put_bytes(mcs1::magic, sizeof(mcs1::magic));
  out.put<std::uint16_t>(mcs1::version);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.height()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.width()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.channels()));
  for (const auto& name : stack.names()) {
    require(name.size() <= std::numeric_limits<std::uint16_t>::max(),
            "channel name too long for MCS1");
    out.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    out.put_bytes(name.data(), name.size());
  }
  for (float value : stack.data()) out.put_f32(value);
  return out.bytes();
}

inline ChannelStack decode_mcs1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), mcs1::magic, 4) != 0) {
    fail(ErrorKind::format, "missing MCS1 magic bytes");
  }
  mcs1::Reader in(bytes);
  in.get_string(4);
  const auto version = in.get<std::uint16_t>();
  if (version != mcs1::version) {
    fail(ErrorKind::format,
         "unsupported MCS1 version " + std::to_string(version));
  }
  const std::size_t height = in.get<std::uint32_t>();
  const std::size_t width = in.get<std::uint32_t>();
  const std::size_t count = in.get<std::uint32_t>();
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t length = in.get<std::uint16_t>();
    names.push_back(in.get_string(length));
  }
  const std::uint64_t values = static_cast<std::uint64_t>(height) * width * count;
  if (values > in.remaining() / 4) {
    fail(ErrorKind::truncation, "MCS1 pixel data is truncated");
  }
  std::vector<float> data(values);
  for (auto& value : data) value = in.get_f32();
  if (in.remaining() != 0) {
    fail(ErrorKind::format, "trailing bytes after MCS1 pixel data");
  }
  return ChannelStack(height, width, std::move(names), std::move(data));
}

inline void save_raw(const ChannelStack& stack,
                     const std::filesystem::path& path) {
  const auto bytes = encode_mcs1(stack);
  write_file_bytes(path, bytes.data(), bytes.size());
}

inline ChannelStack load_raw(const std::filesystem::path& path) {
  return decode_mcs1(read_file_bytes(path));
}

}  // namespace plexsyn
