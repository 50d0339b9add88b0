#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "plexsyn/error.hpp"

namespace plexsyn {

/// Read-only view of one channel with its geometry.
struct ChannelView {
  std::span<const float> values;
  std::size_t height = 0;
  std::size_t width = 0;

  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// Named multi-channel 2-D image. Pixel data is channel-major, and each
/// channel is stored row-major: index = (c * height + y) * width + x.
class ChannelStack {
 public:
  ChannelStack() = default;

  ChannelStack(std::size_t height, std::size_t width,
               std::vector<std::string> names, std::vector<float> data)
      : height_(height),
        width_(width),
        names_(std::move(names)),
        data_(std::move(data)) {
    validate();
  }

  /// Zero-filled stack with the given shape.
  static ChannelStack zeros(std::size_t height, std::size_t width,
                            std::vector<std::string> names) {
    std::vector<float> data(height * width * names.size(), 0.0f);
    return ChannelStack(height, width, std::move(names), std::move(data));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t channels() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t c) const { return names_.at(c); }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> channel(std::size_t c) const {
    require(c < channels(), "channel index out of range");
    return std::span<const float>(data_).subspan(c * pixels(), pixels());
  }

  std::span<float> channel(std::size_t c) {
    require(c < channels(), "channel index out of range");
    return std::span<float>(data_).subspan(c * pixels(), pixels());
  }

  ChannelView view(std::size_t c) const { return {channel(c), height_, width_}; }

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  /// Index of the channel called `name`, or channels() if absent.
  std::size_t find(const std::string& name) const {
    for (std::size_t c = 0; c < names_.size(); ++c) {
      if (names_[c] == name) return c;
    }
    return names_.size();
  }

  /// New stack holding the listed channels in the listed order.
  ChannelStack subset(std::span<const std::size_t> indices) const {
    std::vector<std::string> names;
    std::vector<float> data;
    data.reserve(indices.size() * pixels());
    for (std::size_t c : indices) {
      const auto values = channel(c);
      names.push_back(names_[c]);
      data.insert(data.end(), values.begin(), values.end());
    }
    return ChannelStack(height_, width_, std::move(names), std::move(data));
  }

  /// Throws ErrorKind::validation unless every stack invariant holds.
  void validate() const {
    require(!names_.empty(), "stack must have at least one channel");
    require(height_ > 0 && width_ > 0, "stack dimensions must be positive");
    require(data_.size() == height_ * width_ * names_.size(),
            "stack data length does not match height * width * channels");
    std::unordered_set<std::string> seen;
    for (const auto& name : names_) {
      require(seen.insert(name).second, "duplicate channel name '" + name + "'");
    }
    for (float value : data_) {
      require(std::isfinite(value), "stack contains a non-finite value");
    }
  }

  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::string> names_;
  std::vector<float> data_;
};

}  // namespace plexsyn
