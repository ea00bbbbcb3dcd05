#include "gds/export.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gds/binary_io.hpp"

namespace gds {

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) row += ',';
    row += csv_escape(fields[i]);
  }
  return row + "\r\n";
}

std::vector<std::uint8_t> encode_pgm(const ImageGrid& image, double scale) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (double v : image.data) {
    const double s = std::isfinite(v) ? std::clamp(v * scale, 0.0, 255.0) : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(s)));
  }
  return out;
}

void write_pgm(const std::string& path, const ImageGrid& image, double scale) {
  write_file_bytes(path, encode_pgm(image, scale));
}

PgmImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto token = [&] {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
    return t;
  };
  if (token() != "P5") throw FormatError("pgm: not a binary P5 image");
  PgmImage img;
  img.width = std::stoi(token());
  img.height = std::stoi(token());
  if (token() != "255") throw FormatError("pgm: only maxval 255 is supported");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (bytes.size() - pos != n) throw TruncatedError("pgm: pixel payload has wrong length");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

}  // namespace gds
