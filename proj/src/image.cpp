#include "gamo/image.hpp"

#include <algorithm>
#include <string>

#include "gamo/error.hpp"

namespace gamo {

FaceImage::FaceImage(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), data_(std::move(rgb)) {
  if (width_ < kMinImageSide || height_ < kMinImageSide) {
    throw Error(Errc::invalid_image,
                "image " + std::to_string(width_) + "x" +
                    std::to_string(height_) + " is smaller than 16x16");
  }
  const auto expected = static_cast<std::size_t>(width_) * height_ * 3;
  if (data_.size() != expected) {
    throw Error(Errc::invalid_image,
                "pixel buffer holds " + std::to_string(data_.size()) +
                    " bytes, expected " + std::to_string(expected));
  }
}

FaceImage FaceImage::filled(int width, int height, std::uint8_t r,
                            std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> data;
  if (width > 0 && height > 0) {
    data.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = r;
      data[i + 1] = g;
      data[i + 2] = b;
    }
  }
  return FaceImage(width, height, std::move(data));
}

bool fits(const FaceRegion& region, const FaceImage& image) {
  return region.width > 0 && region.height > 0 && region.x >= 0 &&
         region.y >= 0 && region.x + region.width <= image.width() &&
         region.y + region.height <= image.height();
}

FaceImage crop(const FaceImage& image, const FaceRegion& region) {
  if (!fits(region, image)) {
    throw Error(Errc::invalid_image, "face region outside image bounds");
  }
  if (region.x == 0 && region.y == 0 && region.width == image.width() &&
      region.height == image.height()) {
    return image;
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(region.width) *
                                region.height * 3);
  const auto row_bytes = static_cast<std::size_t>(region.width) * 3;
  for (int row = 0; row < region.height; ++row) {
    const std::uint8_t* src = image.pixel(region.x, region.y + row);
    std::copy_n(src, row_bytes, out.data() + row * row_bytes);
  }
  return FaceImage(region.width, region.height, std::move(out));
}

}  // namespace gamo
