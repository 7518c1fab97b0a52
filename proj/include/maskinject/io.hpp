#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"

namespace maskinject::io {

/// 8-bit grayscale raster.
struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

namespace detail {

inline void skip_ws_and_comments(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_header_int(std::istream& in, const std::string& path) {
  skip_ws_and_comments(in);
  int v = -1;
  if (!(in >> v) || v < 0) throw Error("malformed netpbm header in " + path);
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// Binary PGM (P5) with maxval <= 255.
inline Gray8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw Error("'" + path + "' is not a binary PGM (P5)");
  Gray8 img;
  img.width = detail::read_header_int(in, path);
  img.height = detail::read_header_int(in, path);
  const int maxval = detail::read_header_int(in, path);
  if (maxval < 1 || maxval > 255) throw Error("'" + path + "': only 8-bit PGM is supported");
  in.get();  // single whitespace before raster
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw Error("'" + path + "': truncated raster");
  return img;
}

inline void write_pgm(const std::string& path, const Gray8& img) {
  auto out = detail::open_out(path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

/// Pixel >= 128 is set.
inline BinaryMask mask_from_gray(const Gray8& img) {
  std::vector<std::uint8_t> bits(img.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = img.pixels[i] >= 128 ? 1 : 0;
  return BinaryMask(img.width, img.height, std::move(bits));
}

inline Gray8 gray_from_mask(const BinaryMask& m) {
  Gray8 img{m.width(), m.height(), std::vector<std::uint8_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) img.pixels[i] = m[i] ? 255 : 0;
  return img;
}

inline LabelMap labels_from_gray(const Gray8& img) {
  return LabelMap(img.width, img.height, std::vector<std::uint32_t>(img.pixels.begin(), img.pixels.end()));
}

inline Gray8 gray_from_labels(const LabelMap& lm) {
  Gray8 img{lm.width, lm.height, std::vector<std::uint8_t>(lm.labels.size())};
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    if (lm.labels[i] > 255) throw Error("label map has more than 255 labels; cannot store as PGM");
    img.pixels[i] = static_cast<std::uint8_t>(lm.labels[i]);
  }
  return img;
}

inline BinaryMask read_mask(const std::string& path) { return mask_from_gray(read_pgm(path)); }
inline LabelMap read_labels(const std::string& path) { return labels_from_gray(read_pgm(path)); }
inline void write_mask(const std::string& path, const BinaryMask& m) { write_pgm(path, gray_from_mask(m)); }
inline void write_labels(const std::string& path, const LabelMap& lm) { write_pgm(path, gray_from_labels(lm)); }

/// Binary PPM (P6), 8-bit RGB.
inline void write_ppm(const std::string& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw Error("write_ppm: buffer size mismatch");
  auto out = detail::open_out(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

inline Rgb8 read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw Error("'" + path + "' is not a binary PPM (P6)");
  Rgb8 img;
  img.width = detail::read_header_int(in, path);
  img.height = detail::read_header_int(in, path);
  if (detail::read_header_int(in, path) != 255) throw Error("'" + path + "': only maxval 255 is supported");
  in.get();
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw Error("'" + path + "': truncated raster");
  return img;
}

/// FGRID tensor: ASCII header `FGRID v1 <ndim> <d0> ... \n`, then
/// little-endian float32 values, row-major, last dimension fastest.
struct FGrid {
  std::vector<int> dims;
  std::vector<float> values;

  std::size_t count() const {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return dims.empty() ? 0 : n;
  }
};

inline void write_fgrid(const std::string& path, const FGrid& g) {
  if (g.values.size() != g.count()) throw Error("write_fgrid: value count does not match dims");
  auto out = detail::open_out(path);
  out << "FGRID v1 " << g.dims.size();
  for (int d : g.dims) out << ' ' << d;
  out << '\n';
  for (float v : g.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

inline FGrid read_fgrid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version;
  int ndim = -1;
  if (!(hs >> magic >> version >> ndim) || magic != "FGRID" || version != "v1" || ndim < 0)
    throw Error("'" + path + "' is not an FGRID v1 file");
  FGrid g;
  for (int i = 0; i < ndim; ++i) {
    int d = -1;
    if (!(hs >> d) || d < 0) throw Error("'" + path + "': malformed FGRID dimensions");
    g.dims.push_back(d);
  }
  g.values.resize(g.count());
  for (auto& v : g.values) {
    std::uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("'" + path + "': truncated FGRID payload");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    std::memcpy(&v, &bits, 4);
  }
  return g;
}

inline FGrid to_fgrid(std::vector<int> dims, const std::vector<double>& values) {
  FGrid g{std::move(dims), std::vector<float>(values.begin(), values.end())};
  if (g.values.size() != g.count()) throw Error("to_fgrid: value count does not match dims");
  return g;
}

inline std::vector<double> to_doubles(const FGrid& g) { return {g.values.begin(), g.values.end()}; }

}  // namespace maskinject::io
