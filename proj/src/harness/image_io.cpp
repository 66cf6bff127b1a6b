#include "hjscc/harness/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

namespace hjscc::harness {

namespace {

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Tensor from_rgb8(const std::uint8_t* rgb, int width, int height) {
  Tensor t(Shape{3, height, width});
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = rgb[(y * width + x) * 3 + c] / 255.0;
  return t;
}

std::optional<Tensor> load_png(const std::filesystem::path& path, std::string* error) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    if (error) *error = image.message;
    return std::nullopt;
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    if (error) *error = image.message;
    png_image_free(&image);
    return std::nullopt;
  }
  return from_rgb8(buffer.data(), static_cast<int>(image.width), static_cast<int>(image.height));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

std::optional<Tensor> load_jpeg(const std::filesystem::path& path, std::string* error) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) {
    if (error) *error = "cannot open file";
    return std::nullopt;
  }
  jpeg_decompress_struct info;
  JpegErrorManager err;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  int width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    if (error) *error = err.message;
    return std::nullopt;
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file.get());
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  width = static_cast<int>(info.output_width);
  height = static_cast<int>(info.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(info.output_scanline) * width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return from_rgb8(pixels.data(), width, height);
}

}  // namespace

std::optional<Tensor> load_image(const std::filesystem::path& path, std::string* error) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return load_png(path, error);
  if (ext == ".jpg" || ext == ".jpeg") return load_jpeg(path, error);
  if (error) *error = "unsupported extension '" + ext + "'";
  return std::nullopt;
}

void save_png_rgb8(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ContractError("save_png_rgb8: buffer size mismatch");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + image.message);
  }
}

void save_png(const std::filesystem::path& path, const Tensor& image) {
  const Shape s = image.shape();
  if (s.c != 3) throw ContractError("save_png expects 3 channels");
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(s.h) * s.w * 3);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        rgb[(y * s.w + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  save_png_rgb8(path, s.w, s.h, rgb);
}

}  // namespace hjscc::harness
