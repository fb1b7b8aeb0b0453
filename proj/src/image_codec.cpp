#include "gamo/image_codec.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>
#include <openssl/evp.h>
#include <png.h>

#include "gamo/error.hpp"

namespace gamo {

namespace {

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t sig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= sizeof sig && std::memcmp(b.data(), sig, sizeof sig) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

FaceImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(Errc::invalid_image, std::string("png: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width < kMinImageSide || img.height < kMinImageSide ||
      img.width > 8192 || img.height > 8192) {
    png_image_free(&img);
    throw Error(Errc::invalid_image, "png dimensions out of range");
  }
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(Errc::invalid_image, "png: " + msg);
  }
  return FaceImage(static_cast<int>(img.width), static_cast<int>(img.height),
                   std::move(rgb));
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No objects with destructors may live across the setjmp below.
bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, unsigned char* out,
                     std::size_t capacity, int* width, int* height,
                     char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    std::strncpy(message, jerr.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  *width = static_cast<int>(cinfo.output_width);
  *height = static_cast<int>(cinfo.output_height);
  const std::size_t row = static_cast<std::size_t>(*width) * 3;
  if (out == nullptr || row * static_cast<std::size_t>(*height) > capacity) {
    std::strncpy(message, "size probe", JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW ptr = out + cinfo.output_scanline * row;
    jpeg_read_scanlines(&cinfo, &ptr, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

FaceImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  int width = 0;
  int height = 0;
  char message[JMSG_LENGTH_MAX] = {};
  // First pass only reads the header to learn the output size.
  decode_jpeg_raw(bytes, nullptr, 0, &width, &height, message);
  if (width < kMinImageSide || height < kMinImageSide || width > 8192 ||
      height > 8192) {
    throw Error(Errc::invalid_image, std::string("jpeg: ") +
                                         (width ? "dimensions out of range"
                                                : message));
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * height * 3);
  if (!decode_jpeg_raw(bytes, rgb.data(), rgb.size(), &width, &height,
                       message)) {
    throw Error(Errc::invalid_image, std::string("jpeg: ") + message);
  }
  return FaceImage(width, height, std::move(rgb));
}

}  // namespace

FaceImage decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(Errc::invalid_image, "payload is neither PNG nor JPEG");
}

std::vector<std::uint8_t> encode_png(const FaceImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(img, size, 0, image.data().data(), 0,
                                       nullptr)) {
    throw Error(Errc::io, std::string("png encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0,
                                 image.data().data(), 0, nullptr)) {
    throw Error(Errc::io, std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

void write_png(const FaceImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
}

FaceImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  // Browsers hand over canvas data URLs; accept them as-is.
  if (text.starts_with("data:")) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos || !text.substr(0, comma).ends_with(";base64")) {
      throw Error(Errc::invalid_image, "data URL must be base64-encoded");
    }
    text.remove_prefix(comma + 1);
  }
  if (text.size() % 4 != 0) {
    throw Error(Errc::invalid_image, "base64 length is not a multiple of 4");
  }
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::invalid_image, "malformed base64");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace gamo
