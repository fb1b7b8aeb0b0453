#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gamo {

inline constexpr int kMinImageSide = 16;

// 8-bit RGB, row-major, interleaved. Always satisfies the size invariants.
class FaceImage {
 public:
  FaceImage(int width, int height, std::vector<std::uint8_t> rgb);

  static FaceImage filled(int width, int height, std::uint8_t r,
                          std::uint8_t g, std::uint8_t b);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> data() const { return data_; }

  const std::uint8_t* pixel(int x, int y) const {
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  friend bool operator==(const FaceImage&, const FaceImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> data_;
};

struct FaceRegion {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const FaceRegion&, const FaceRegion&) = default;
};

bool fits(const FaceRegion& region, const FaceImage& image);

// Copies the region out; throws invalid_image if the region does not fit
// or the crop would violate the minimum image size.
FaceImage crop(const FaceImage& image, const FaceRegion& region);

}  // namespace gamo
