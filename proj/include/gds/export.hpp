#pragma once

// CSV (RFC 4180, CRLF line ends) and binary PGM (P5, maxval 255) output.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gds/grid.hpp"

namespace gds {

std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

// Pixel = round(clamp(value * scale, 0, 255)).
std::vector<std::uint8_t> encode_pgm(const ImageGrid& image, double scale = 255.0);
void write_pgm(const std::string& path, const ImageGrid& image, double scale = 255.0);

struct PgmImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
PgmImage decode_pgm(const std::vector<std::uint8_t>& bytes);

}  // namespace gds
