// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ela/error.hpp"

namespace ela::io {

void atomic_write(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_pgm(std::size_t width, std::size_t height,
                       std::span<const std::uint8_t> pixels) {
  if (pixels.size() != width * height) throw ShapeError("encode_pgm: pixel count mismatch");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  return out;
}

std::vector<std::uint8_t> to_gray8(std::span<const double> values) {
  std::vector<std::uint8_t> px(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::clamp(values[i], 0.0, 1.0);
    px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return px;
}

}  // namespace ela::io
