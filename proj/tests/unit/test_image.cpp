#include <doctest.h>

#include <fstream>

#include "gamo/error.hpp"
#include "gamo/image.hpp"
#include "gamo/image_codec.hpp"
#include "test_support.hpp"

using namespace gamo;

TEST_CASE("FaceImage size invariants") {
  CHECK_NOTHROW(FaceImage::filled(16, 16, 0, 0, 0));
  CHECK_THROWS_AS(FaceImage::filled(15, 16, 0, 0, 0), Error);
  CHECK_THROWS_AS(FaceImage::filled(16, 15, 0, 0, 0), Error);
  CHECK_THROWS_AS(FaceImage(16, 16, std::vector<std::uint8_t>(16 * 16 * 3 - 1)), Error);
  const auto img = FaceImage::filled(20, 17, 1, 2, 3);
  CHECK(img.data().size() == 20u * 17 * 3);
  CHECK(img.pixel(19, 16)[2] == 3);
}

TEST_CASE("crop copies the region and enforces bounds") {
  const auto img = testing::noise_image(1, 40, 30);
  const FaceRegion r{5, 3, 20, 18};
  CHECK(fits(r, img));
  const auto c = crop(img, r);
  CHECK(c.width() == 20);
  CHECK(c.height() == 18);
  for (int y = 0; y < 18; ++y) {
    for (int x = 0; x < 20; ++x) {
      for (int k = 0; k < 3; ++k) CHECK(c.pixel(x, y)[k] == img.pixel(x + 5, y + 3)[k]);
    }
  }
  CHECK_FALSE(fits(FaceRegion{25, 0, 16, 16}, img));
  CHECK_FALSE(fits(FaceRegion{0, 0, 0, 16}, img));
  CHECK_FALSE(fits(FaceRegion{-1, 0, 16, 16}, img));
  CHECK_THROWS_AS(crop(img, FaceRegion{25, 0, 16, 16}), Error);
  CHECK_THROWS_AS(crop(img, FaceRegion{0, 0, 10, 10}), Error);  // below the minimum side
}

TEST_CASE("PNG round trip is lossless") {
  const auto img = testing::noise_image(2, 33, 21);
  const auto bytes = encode_png(img);
  REQUIRE(bytes.size() > 8);
  CHECK(bytes[1] == 'P');
  CHECK(decode_image(bytes) == img);

  testing::TempDir dir;
  write_png(img, dir / "x.png");
  CHECK(read_image(dir / "x.png") == img);
}

TEST_CASE("JPEG payloads decode") {
  const auto gray = read_image(testing::fixture_path("gray16.jpg"));
  CHECK(gray.width() == 16);
  CHECK(gray.height() == 16);
  for (auto v : gray.data()) CHECK(std::abs(int(v) - 128) <= 2);

  const auto gradient = read_image(testing::fixture_path("gradient24x20.jpg"));
  CHECK(gradient.width() == 24);
  CHECK(gradient.height() == 20);
  std::ifstream in(testing::fixture_path("gradient24x20.jpg"), std::ios::binary);
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
  CHECK(decode_image(base64_decode(base64_encode(bytes))) == gradient);
}

TEST_CASE("decoding rejects garbage") {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK_THROWS_AS(decode_image(junk), Error);
  CHECK_THROWS_AS(decode_image(std::vector<std::uint8_t>{}), Error);
  auto png = encode_png(testing::noise_image(3));
  png.resize(png.size() / 2);
  CHECK_THROWS_AS(decode_image(png), Error);
  const std::vector<std::uint8_t> jpeg_head{0xFF, 0xD8, 0xFF, 0xE0, 0, 0};
  CHECK_THROWS_AS(decode_image(jpeg_head), Error);
  // A well-formed PNG below the minimum face size.
  const auto tiny = testing::fixture_path("tiny8.png");
  std::ifstream in(tiny, std::ios::binary);
  const std::vector<std::uint8_t> png8{std::istreambuf_iterator<char>(in), {}};
  REQUIRE(png8.size() > 8);
  CHECK_THROWS_AS(decode_image(png8), Error);
}

TEST_CASE("base64") {
  const std::vector<std::uint8_t> bytes{0, 1, 2, 253, 254, 255, 'a'};
  const auto text = base64_encode(bytes);
  CHECK(text == "AAEC/f7/YQ==");
  CHECK(base64_decode(text) == bytes);
  CHECK(base64_decode("data:image/png;base64," + text) == bytes);
  CHECK(base64_decode("") == std::vector<std::uint8_t>{});
  CHECK(base64_decode("TWFu") == std::vector<std::uint8_t>{'M', 'a', 'n'});
  CHECK(base64_decode("TWE=") == std::vector<std::uint8_t>{'M', 'a'});
  CHECK_THROWS_AS(base64_decode("TWF"), Error);
  CHECK_THROWS_AS(base64_decode("T!F="), Error);
  CHECK_THROWS_AS(base64_decode("data:image/png,AAAA"), Error);
}
