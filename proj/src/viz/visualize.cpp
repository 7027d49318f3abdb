// Copyright 2026 The attnreg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "attnreg/visualize.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "attnreg/error.hpp"

namespace attnreg {

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

const char* plane_name(Plane p) { return p == Plane::transversal ? "transversal" : "sagittal"; }

std::pair<int, int> plane_size(Dims d, Plane p) {
  return p == Plane::transversal ? std::pair{d.nx, d.ny} : std::pair{d.ny, d.nz};
}

namespace {

// Volume coordinates of in-plane pixel (i, j) and the two in-plane channels.
struct PlaneMap {
  Dims d;
  Plane p;
  std::array<int, 3> voxel(int i, int j) const {
    return p == Plane::transversal ? std::array{i, j, d.nz / 2} : std::array{d.nx / 2, i, j};
  }
  std::pair<int, int> channels() const { return p == Plane::transversal ? std::pair{0, 1} : std::pair{1, 2}; }
};

void check_upscale(int upscale) {
  if (upscale < 1) throw ValidationError("upscale factor must be at least 1");
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void draw_point(RgbImage& img, double x, double y) {
  const long xi = std::lround(x), yi = std::lround(y);
  if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return;
  std::fill_n(img.pixel(static_cast<int>(xi), static_cast<int>(yi)), 3, std::uint8_t{0});
}

void draw_segment(RgbImage& img, double x0, double y0, double x1, double y1) {
  const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int s = 0; s <= n; ++s) {
    const double t = static_cast<double>(s) / n;
    draw_point(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0));
  }
}

}  // namespace

ColorMap field_rgb(const VectorField& u, Plane p, int upscale) {
  check_upscale(upscale);
  const PlaneMap pm{u.dims(), p};
  const auto [w, h] = plane_size(u.dims(), p);
  std::vector<float> mags;
  mags.reserve(static_cast<std::size_t>(w) * h * 3);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const auto v = pm.voxel(i, j);
      for (int c = 0; c < 3; ++c) mags.push_back(std::abs(u.at(c, v[0], v[1], v[2])));
    }
  }
  ColorMap out;
  if (!mags.empty()) {
    const std::size_t k = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(mags.size()))) - 1;
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    out.range = mags[k];
  }
  out.image = RgbImage(w * upscale, h * upscale, 0);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const auto v = pm.voxel(i, j);
      std::uint8_t px[3];
      for (int c = 0; c < 3; ++c) {
        const double s = out.range > 0.0 ? std::clamp(u.at(c, v[0], v[1], v[2]) / out.range, -1.0, 1.0) : 0.0;
        px[c] = to_byte(127.5 * (1.0 + s));
      }
      for (int dy = 0; dy < upscale; ++dy) {
        for (int dx = 0; dx < upscale; ++dx) std::copy_n(px, 3, out.image.pixel(i * upscale + dx, j * upscale + dy));
      }
    }
  }
  return out;
}

RgbImage field_grid(const VectorField& u, Plane p, int upscale, int every) {
  check_upscale(upscale);
  if (every < 1) throw ValidationError("grid spacing must be at least 1");
  const PlaneMap pm{u.dims(), p};
  const auto [w, h] = plane_size(u.dims(), p);
  const auto [ca, cb] = pm.channels();
  RgbImage img(w * upscale, h * upscale, 255);
  // Voxel centres sit at the middle of each upscaled block.
  auto pos = [&](int i, int j) {
    const auto v = pm.voxel(i, j);
    const double x = i + u.at(ca, v[0], v[1], v[2]);
    const double y = j + u.at(cb, v[0], v[1], v[2]);
    return std::pair{(x + 0.5) * upscale - 0.5, (y + 0.5) * upscale - 0.5};
  };
  for (int j = 0; j < h; j += every) {
    for (int i = 0; i + 1 < w; ++i) {
      const auto [x0, y0] = pos(i, j);
      const auto [x1, y1] = pos(i + 1, j);
      draw_segment(img, x0, y0, x1, y1);
    }
  }
  for (int i = 0; i < w; i += every) {
    for (int j = 0; j + 1 < h; ++j) {
      const auto [x0, y0] = pos(i, j);
      const auto [x1, y1] = pos(i, j + 1);
      draw_segment(img, x0, y0, x1, y1);
    }
  }
  return img;
}

RgbImage range_legend(int width, int height) {
  if (width < 2 || height < 3) throw ValidationError("legend too small");
  RgbImage img(width, height, 0);
  // Three stacked ramps: red, green and blue channel from -range to +range.
  for (int y = 0; y < height; ++y) {
    const int c = std::min(2, y * 3 / height);
    for (int x = 0; x < width; ++x) {
      std::uint8_t* px = img.pixel(x, y);
      std::fill_n(px, 3, std::uint8_t{128});
      px[c] = to_byte(255.0 * x / (width - 1));
    }
  }
  return img;
}

RgbImage intensity_montage(const std::vector<const Volume*>& vols, Plane p, int upscale) {
  check_upscale(upscale);
  if (vols.empty()) throw ValidationError("montage needs at least one volume");
  const Dims d = vols.front()->dims();
  float lo = INFINITY, hi = -INFINITY;
  for (const Volume* v : vols) {
    require_same_grid(v->dims(), d, "montage");
    for (float x : v->data()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const PlaneMap pm{d, p};
  const auto [w, h] = plane_size(d, p);
  RgbImage img(w * upscale * static_cast<int>(vols.size()), h * upscale, 0);
  for (std::size_t k = 0; k < vols.size(); ++k) {
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        const auto v = pm.voxel(i, j);
        const double s = hi > lo ? (vols[k]->at(v[0], v[1], v[2]) - lo) / (hi - lo) : 0.0;
        const std::uint8_t g = to_byte(255.0 * s);
        for (int dy = 0; dy < upscale; ++dy) {
          for (int dx = 0; dx < upscale; ++dx) {
            std::fill_n(img.pixel((static_cast<int>(k) * w + i) * upscale + dx, j * upscale + dy), 3, g);
          }
        }
      }
    }
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed encoding " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) png_write_row(png, img.pixel(0, y));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) throw IoError("cannot read PNG " + path.string());
  image.format = PNG_FORMAT_RGB;
  RgbImage img(static_cast<int>(image.width), static_cast<int>(image.height), 0);
  if (!png_image_finish_read(&image, nullptr, img.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string());
  }
  return img;
}

}  // namespace attnreg
