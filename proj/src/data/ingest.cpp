#include <png.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "hda/data.hpp"

namespace hda {

namespace {

struct RawImage {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;  // interleaved HWC
};

std::optional<RawImage> decode_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) return std::nullopt;
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB) : PNG_FORMAT_GRAY;
  RawImage raw;
  raw.height = image.height;
  raw.width = image.width;
  raw.channels = PNG_IMAGE_PIXEL_CHANNELS(image.format);
  raw.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    return std::nullopt;
  }
  if (raw.height == 0 || raw.width == 0) return std::nullopt;
  return raw;
}

// Half-pixel-centred bilinear resampling of one channel.
double bilinear(const RawImage& img, std::size_t channel, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
  auto px = [&](std::size_t yy, std::size_t xx) {
    return static_cast<double>(img.pixels[(yy * img.width + xx) * img.channels + channel]);
  };
  const double top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
  const double bottom = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

// Output channel c reads source channel: 0 for grayscale, c for c < source
// channels, otherwise cycles through the source channels.
std::vector<float> to_domain(const RawImage& img, const DomainShape& shape) {
  std::vector<float> out(shape.numel());
  const double sy = static_cast<double>(img.height) / static_cast<double>(shape.height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(shape.width);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    const std::size_t src_c = img.channels == 1 ? 0 : c % img.channels;
    for (std::size_t y = 0; y < shape.height; ++y)
      for (std::size_t x = 0; x < shape.width; ++x) {
        const double v = bilinear(img, src_c, (static_cast<double>(y) + 0.5) * sy - 0.5,
                                  (static_cast<double>(x) + 0.5) * sx - 0.5);
        out[(c * shape.height + y) * shape.width + x] = static_cast<float>(std::clamp(v / 255.0, 0.0, 1.0));
      }
  }
  return out;
}

bool is_png(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png";
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

}  // namespace

std::vector<ClassMapping> parse_class_map(const std::string& text) {
  std::vector<ClassMapping> out;
  std::istringstream entries(text);
  std::string entry;
  while (std::getline(entries, entry, ',')) {
    entry = trim(entry);
    if (entry.empty()) continue;
    const auto colon = entry.find(':');
    ClassMapping m;
    m.class_name = trim(colon == std::string::npos ? entry : entry.substr(0, colon));
    std::istringstream folders(colon == std::string::npos ? entry : entry.substr(colon + 1));
    std::string folder;
    while (std::getline(folders, folder, '+')) {
      folder = trim(folder);
      if (!folder.empty()) m.folders.push_back(folder);
    }
    if (m.class_name.empty() || m.folders.empty()) throw DataError("malformed class map entry '" + entry + "'");
    out.push_back(std::move(m));
  }
  if (out.empty()) throw DataError("class map is empty");
  return out;
}

IngestResult ingest_image_folder(const std::filesystem::path& root, const DomainShape& shape,
                                 const std::vector<ClassMapping>& class_map) {
  if (shape.height < 1 || shape.width < 1 || shape.channels < 1) {
    throw DataError("invalid ingest shape " + to_string(shape));
  }
  std::vector<std::string> names;
  for (const auto& m : class_map) names.push_back(m.class_name);
  IngestResult result{DomainDataset(shape, names), 0};

  for (std::size_t c = 0; c < class_map.size(); ++c) {
    std::size_t loaded = 0;
    for (const auto& folder : class_map[c].folders) {
      const auto dir = root / folder;
      if (!std::filesystem::is_directory(dir)) throw DataError("missing class folder '" + dir.string() + "'");
      std::vector<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_png(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& file : files) {
        const auto raw = decode_png(file);
        if (!raw) {
          ++result.skipped;
          continue;
        }
        result.dataset.add(to_domain(*raw, shape), static_cast<int>(c));
        ++loaded;
      }
    }
    if (loaded == 0) throw DataError("class '" + class_map[c].class_name + "' has no decodable images");
  }
  if (result.skipped) std::cerr << "warning: skipped " << result.skipped << " undecodable image(s)\n";
  return result;
}

}  // namespace hda
