#include "manifold/imageio.hpp"

#include <algorithm>
#include <cmath>

#include "manifold/textio.hpp"

namespace manifold {

std::uint8_t quantize_unit(double v) {
  v = std::clamp(v, 0.0, 1.0);
  // nearbyint rounds half to even under the default FP environment
  return static_cast<std::uint8_t>(std::nearbyint(v * 255.0));
}

GrayImage quantize_image(const Vec& values, int width, int height) {
  if (values.size() != static_cast<Eigen::Index>(width) * height)
    throw Error(ErrorKind::dimension, "image buffer does not match width*height");
  GrayImage img(width, height);
  for (Eigen::Index i = 0; i < values.size(); ++i)
    img.pixels[static_cast<std::size_t>(i)] = quantize_unit(values[i]);
  return img;
}

GrayImage assemble_grid(const std::vector<GrayImage>& cells, int rows, int cols) {
  if (cells.empty() || rows < 1 || cols < 1)
    throw Error(ErrorKind::argument, "empty image grid");
  const int cw = cells.front().width;
  const int ch = cells.front().height;
  for (const auto& c : cells)
    if (c.width != cw || c.height != ch)
      throw Error(ErrorKind::argument, "grid cells must share one size");

  constexpr std::uint8_t separator = 128;
  GrayImage grid(cols * cw + (cols - 1), rows * ch + (rows - 1), separator);
  for (std::size_t i = 0; i < cells.size() && i < static_cast<std::size_t>(rows) * cols; ++i) {
    const int r = static_cast<int>(i) / cols;
    const int c = static_cast<int>(i) % cols;
    const int y0 = r * (ch + 1);
    const int x0 = c * (cw + 1);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) grid.at(y0 + y, x0 + x) = cells[i].at(y, x);
  }
  return grid;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

namespace {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
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
  crc ^= 0xffffffffu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void put_u32be(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>((v >> 24) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_u32be(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  put_u32be(out, crc32_of(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

}  // namespace

std::string encode_png(const GrayImage& img) {
  std::string out("\x89PNG\r\n\x1a\n", 8);

  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // no interlace
  put_chunk(out, "IHDR", ihdr);

  // raw scanlines, filter byte 0 per row
  std::string raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (img.width + 1));
  for (int r = 0; r < img.height; ++r) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(img.pixels.data()) +
                   static_cast<std::size_t>(r) * img.width,
               static_cast<std::size_t>(img.width));
  }

  // zlib stream made of stored deflate blocks
  std::string z;
  z.push_back(0x78);
  z.push_back(0x01);
  std::size_t pos = 0;
  while (pos < raw.size() || raw.empty()) {
    const std::size_t chunk = std::min<std::size_t>(raw.size() - pos, 65535);
    const bool final = pos + chunk >= raw.size();
    z.push_back(final ? 1 : 0);
    z.push_back(static_cast<char>(chunk & 0xff));
    z.push_back(static_cast<char>((chunk >> 8) & 0xff));
    z.push_back(static_cast<char>(~chunk & 0xff));
    z.push_back(static_cast<char>((~chunk >> 8) & 0xff));
    z.append(raw, pos, chunk);
    pos += chunk;
    if (final) break;
  }
  // adler32 of the raw data
  std::uint32_t a = 1, b = 0;
  for (unsigned char c : raw) {
    a = (a + c) % 65521;
    b = (b + a) % 65521;
  }
  put_u32be(z, (b << 16) | a);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", "");
  return out;
}

std::string render_line_svg(const std::vector<double>& x, const std::vector<SvgSeries>& series,
                            const std::string& x_label, const std::string& y_label, bool log_y) {
  if (x.empty() || series.empty())
    throw Error(ErrorKind::argument, "empty plot data");
  const int width = 640, height = 420, margin = 56;

  auto transform_y = [&](double v) {
    return log_y ? std::log10(std::max(v, 1e-300)) : v;
  };
  double xmin = x.front(), xmax = x.front();
  for (double v : x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  double ymin = transform_y(series[0].y.at(0)), ymax = ymin;
  for (const auto& s : series) {
    if (s.y.size() != x.size())
      throw Error(ErrorKind::argument, "series length does not match x grid");
    for (double v : s.y) {
      const double t = transform_y(v);
      ymin = std::min(ymin, t);
      ymax = std::max(ymax, t);
    }
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  auto px = [&](double v) {
    return margin + (v - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto py = [&](double v) {
    const double t = transform_y(v);
    return height - margin - (t - ymin) / (ymax - ymin) * (height - 2 * margin);
  };

  static const char* palette[] = {"#1f6fb2", "#d1495b", "#3d9970", "#f0a202",
                                  "#6b5b95", "#444444"};
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  svg += "<line x1=\"" + format_double(margin) + "\" y1=\"" + format_double(height - margin) +
         "\" x2=\"" + format_double(width - margin) + "\" y2=\"" +
         format_double(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + format_double(margin) + "\" y1=\"" + format_double(margin) +
         "\" x2=\"" + format_double(margin) + "\" y2=\"" + format_double(height - margin) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + format_double(width / 2.0) + "\" y=\"" + format_double(height - 12.0) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + x_label + "</text>\n";
  svg += "<text x=\"16\" y=\"" + format_double(height / 2.0) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
         format_double(height / 2.0) + ")\">" + y_label + (log_y ? " (log10)" : "") +
         "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    std::string points;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i) points += " ";
      points += format_double(px(x[i])) + "," + format_double(py(series[s].y[i]));
    }
    const char* color = palette[s % 6];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    svg += "<text x=\"" + format_double(width - margin + 4.0) + "\" y=\"" +
           format_double(margin + 16.0 * static_cast<double>(s)) +
           "\" font-size=\"11\" fill=\"" + color + "\">" + series[s].label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace manifold
