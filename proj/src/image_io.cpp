#include "usnav/image_io.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace usnav {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) &&
         s[pos] != '#') {
    ++pos;
  }
  return s.substr(start, pos - start);
}

int parse_int(const std::string& tok, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo, std::string("PGM: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

GrayImage parse_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") {
    throw Error(ErrorCode::kIo, "PGM: only binary P5 files are supported");
  }
  GrayImage img;
  img.width = parse_int(next_token(bytes, pos), "width");
  img.height = parse_int(next_token(bytes, pos), "height");
  const int maxval = parse_int(next_token(bytes, pos), "maxval");
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::kIo, "PGM: unsupported dimensions or maxval");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (pos > bytes.size() || bytes.size() - pos < n) {
    throw Error(ErrorCode::kIo, "PGM: truncated raster");
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  const std::string bytes{std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>()};
  return parse_pgm(bytes);
}

std::string format_pgm(const GrayImage& image) {
  std::ostringstream out;
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  return out.str();
}

void write_pgm(const std::string& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << format_pgm(image);
}

ImageMask mask_from_gray(const GrayImage& image) {
  std::vector<std::uint8_t> bits(image.pixels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = image.pixels[i] >= 128;
  return ImageMask(image.width, image.height, std::move(bits));
}

GrayImage gray_from_mask(const ImageMask& mask) {
  GrayImage img{mask.width(), mask.height(), {}};
  img.pixels.reserve(mask.bits().size());
  for (std::uint8_t b : mask.bits()) img.pixels.push_back(b ? 255 : 0);
  return img;
}

}  // namespace usnav
