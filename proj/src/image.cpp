#include "mstaog/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "mstaog/error.hpp"

namespace mstaog {

namespace {

void skip_pgm_space(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

Image load_pgm(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestError("cannot open image " + file.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError(file.string(), 1, "not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  skip_pgm_space(in);
  in >> w;
  skip_pgm_space(in);
  in >> h;
  skip_pgm_space(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw ParseError(file.string(), 1, "invalid PGM header");
  in.get();
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(std::size_t(w) * h * bytes);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (in.gcount() != std::streamsize(buf.size()))
    throw ParseError(file.string(), 1, "truncated PGM data");
  Image img(h, w);
  const Scalar norm = 255.0 / maxval;
  for (int i = 0; i < w * h; ++i) {
    const int v = bytes == 1 ? buf[i] : (buf[2 * i] << 8 | buf[2 * i + 1]);
    img.data()[i] = v * norm;
  }
  return img;
}

Image load_png(const std::filesystem::path& file) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, file.c_str()))
    throw IngestError("cannot read PNG " + file.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IngestError("cannot decode PNG " + file.string() + ": " + png.message);
  }
  Image img(png.height, png.width);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data()[i] = buf[i];
  return img;
}

}  // namespace

Image load_image(const std::filesystem::path& file) {
  if (!std::filesystem::is_regular_file(file)) throw IngestError("image not found: " + file.string());
  auto ext = file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return load_png(file);
  return load_pgm(file);
}

void save_pgm(const std::filesystem::path& file, const Image& img) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IngestError("cannot write " + file.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::vector<unsigned char> buf(img.size());
  for (Eigen::Index i = 0; i < img.size(); ++i)
    buf[i] = static_cast<unsigned char>(std::clamp(std::lround(img.data()[i]), 0L, 255L));
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

Scalar sample_bilinear(const Image& img, Scalar x, Scalar y) {
  const int w = int(img.cols()), h = int(img.rows());
  x = std::clamp<Scalar>(x, 0, w - 1);
  y = std::clamp<Scalar>(y, 0, h - 1);
  const int x0 = std::min(int(x), w - 1), y0 = std::min(int(y), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const Scalar fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) +
         fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
}

Image resize(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) throw SizeError("resize: non-positive target size");
  if (img.size() == 0) throw SizeError("resize: empty image");
  if (width == img.cols() && height == img.rows()) return img;
  Image out(height, width);
  const Scalar sx = Scalar(img.cols()) / width, sy = Scalar(img.rows()) / height;
  // Pixel centers are aligned; downsampling averages a box first to limit aliasing.
  const Image* src = &img;
  Image smooth;
  if (sx > 1.5 || sy > 1.5) {
    const int rx = int(std::floor(sx / 2)), ry = int(std::floor(sy / 2));
    smooth.resize(img.rows(), img.cols());
    for (int y = 0; y < img.rows(); ++y)
      for (int x = 0; x < img.cols(); ++x) {
        Scalar acc = 0;
        int n = 0;
        for (int dy = -ry; dy <= ry; ++dy)
          for (int dx = -rx; dx <= rx; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= img.rows() || xx >= img.cols()) continue;
            acc += img(yy, xx);
            ++n;
          }
        smooth(y, x) = acc / n;
      }
    src = &smooth;
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out(y, x) = sample_bilinear(*src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

Image rescale(const Image& img, double factor) {
  if (!(factor > 0)) throw SizeError("rescale: non-positive factor");
  const int w = std::max(1, int(std::lround(img.cols() * factor)));
  const int h = std::max(1, int(std::lround(img.rows() * factor)));
  return resize(img, w, h);
}

}  // namespace mstaog
