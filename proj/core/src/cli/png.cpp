#include "mummi/cli/png.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace mummi::cli {

namespace {

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0xffffffffu) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc;
}

void push_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
  push_u32be(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  push_u32be(out, crc32(body.data(), body.size()) ^ 0xffffffffu);
}

// zlib stream with stored (uncompressed) deflate blocks
std::vector<std::uint8_t> zlib_stored(const std::vector<std::uint8_t>& raw) {
  std::vector<std::uint8_t> out{0x78, 0x01};
  std::size_t pos = 0;
  do {
    const std::size_t block = std::min<std::size_t>(raw.size() - pos, 65535);
    const bool final = pos + block == raw.size();
    out.push_back(final ? 1 : 0);
    out.push_back(static_cast<std::uint8_t>(block & 0xff));
    out.push_back(static_cast<std::uint8_t>(block >> 8));
    out.push_back(static_cast<std::uint8_t>(~block & 0xff));
    out.push_back(static_cast<std::uint8_t>((~block >> 8) & 0xff));
    out.insert(out.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
               raw.begin() + static_cast<std::ptrdiff_t>(pos + block));
    pos += block;
  } while (pos < raw.size());

  std::uint32_t a = 1, b = 0;
  for (std::uint8_t byte : raw) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  push_u32be(out, (b << 16) | a);
  return out;
}

}  // namespace

void write_rgb_png(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
    throw std::runtime_error("write_rgb_png: pixel buffer size mismatch");

  std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  push_u32be(ihdr, static_cast<std::uint32_t>(width));
  push_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  push_chunk(png, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve((static_cast<std::size_t>(width) * 3 + 1) * static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) {
    raw.push_back(0);  // no per-row filter
    const auto* row = pixels.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(width) * 3;
    raw.insert(raw.end(), row, row + static_cast<std::size_t>(width) * 3);
  }
  push_chunk(png, "IDAT", zlib_stored(raw));
  push_chunk(png, "IEND", {});

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
}

void write_scatter_png(const std::string& path, const std::vector<double>& xy,
                       const std::vector<std::uint8_t>& colors, int canvas) {
  const std::size_t n = xy.size() / 2;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(canvas) * static_cast<std::size_t>(canvas) * 3, 245);
  auto plot = [&](int cx, int cy, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int px = cx + dx, py = cy + dy;
        if (px < 0 || py < 0 || px >= canvas || py >= canvas) continue;
        const std::size_t o = (static_cast<std::size_t>(py) * static_cast<std::size_t>(canvas) +
                               static_cast<std::size_t>(px)) * 3;
        img[o] = r;
        img[o + 1] = g;
        img[o + 2] = b;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp(xy[i * 2], 0.0, 1.0);
    const double y = std::clamp(xy[i * 2 + 1], 0.0, 1.0);
    const int cx = static_cast<int>(x * (canvas - 1));
    const int cy = static_cast<int>((1.0 - y) * (canvas - 1));  // y up
    plot(cx, cy, colors[i * 3], colors[i * 3 + 1], colors[i * 3 + 2]);
  }
  write_rgb_png(path, canvas, canvas, img);
}

}  // namespace mummi::cli
