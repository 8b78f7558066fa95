#include "mgbp/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace mgbp {

namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Tensor from_bytes(const unsigned char* bytes, Dims dims) {
  std::vector<double> data(dims.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = bytes[i] / 255.0;
  return Tensor(dims, std::move(data));
}

std::vector<unsigned char> to_bytes(const Tensor& t) {
  std::vector<unsigned char> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = quantize_u8(t.data()[i]);
  return out;
}

// ---- PNG -------------------------------------------------------------------

Tensor decode_png(const std::string& bytes, const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw std::runtime_error("malformed PNG '" + path.string() + "': " + image.message);
  }
  const png_uint_32 fmt = image.format;
  if (fmt & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw std::runtime_error("PNG '" + path.string() + "': unsupported bit_depth (only 8-bit)");
  }
  if (fmt & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw std::runtime_error("PNG '" + path.string() +
                             "': unsupported color_type (alpha channel present)");
  }
  const std::size_t channels = (fmt & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw std::runtime_error("malformed PNG '" + path.string() + "': " + image.message);
  }
  return from_bytes(buf.data(), {image.height, image.width, channels});
}

std::string encode_png(const Tensor& t, const fs::path& path) {
  if (t.channels() != 1 && t.channels() != 3) {
    throw std::invalid_argument("PNG output needs 1 or 3 channels, tensor has " +
                                std::to_string(t.channels()));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(t.width());
  image.height = static_cast<png_uint_32>(t.height());
  image.format = t.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto bytes = to_bytes(t);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("PNG encode failed for '" + path.string() + "': " + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, bytes.data(), 0, nullptr)) {
    throw std::runtime_error("PNG encode failed for '" + path.string() + "': " + image.message);
  }
  out.resize(size);
  return out;
}

// ---- PNM -------------------------------------------------------------------

class PnmHeaderReader {
 public:
  PnmHeaderReader(const std::string& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  std::size_t next_uint(const char* field) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      ++pos_;
      ++digits;
    }
    if (digits == 0) {
      throw std::runtime_error("malformed PNM '" + path_.string() + "': bad " + field);
    }
    return value;
  }

  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw std::runtime_error("malformed PNM '" + path_.string() + "': missing raster separator");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 2;
};

Tensor decode_pnm(const std::string& bytes, const fs::path& path) {
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  PnmHeaderReader reader(bytes, path);
  const std::size_t width = reader.next_uint("width");
  const std::size_t height = reader.next_uint("height");
  const std::size_t maxval = reader.next_uint("maxval");
  if (maxval != 255) {
    throw std::runtime_error("PNM '" + path.string() + "': unsupported maxval " +
                             std::to_string(maxval) + " (only 255)");
  }
  if (width == 0 || height == 0) {
    throw std::runtime_error("malformed PNM '" + path.string() + "': zero width or height");
  }
  const std::size_t start = reader.raster_start();
  const std::size_t need = width * height * channels;
  if (bytes.size() < start + need) {
    throw std::runtime_error("malformed PNM '" + path.string() + "': raster has " +
                             std::to_string(bytes.size() - std::min(bytes.size(), start)) +
                             " bytes, expected " + std::to_string(need));
  }
  return from_bytes(reinterpret_cast<const unsigned char*>(bytes.data() + start),
                    {height, width, channels});
}

std::string encode_pnm(const Tensor& t, const fs::path& path, bool color) {
  const std::size_t want = color ? 3 : 1;
  if (t.channels() != want) {
    throw std::invalid_argument("'" + path.string() + "' needs " + std::to_string(want) +
                                " channel(s), tensor has " + std::to_string(t.channels()));
  }
  std::ostringstream os;
  os << (color ? "P6" : "P5") << "\n" << t.width() << " " << t.height() << "\n255\n";
  const auto bytes = to_bytes(t);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return os.str();
}

// ---- MGT1 ------------------------------------------------------------------

template <class T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* field) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error(std::string("truncated MGT1 stream while reading ") + field);
  }
  return to_little_endian(v);
}

}  // namespace

unsigned char quantize_u8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MGT1", 4) != 0) {
    throw std::runtime_error("bad MGT1 magic");
  }
  const auto h = get<std::uint32_t>(in, "height");
  const auto w = get<std::uint32_t>(in, "width");
  const auto c = get<std::uint32_t>(in, "channels");
  Dims dims{h, w, c};
  std::vector<double> data(dims.size());
  for (double& v : data) v = get<double>(in, "samples");
  Tensor t(dims, std::move(data));
  if (!t.all_finite()) throw std::runtime_error("MGT1 samples contain non-finite values");
  return t;
}

void write_tensor(const Tensor& t, std::ostream& out) {
  out.write("MGT1", 4);
  put(out, static_cast<std::uint32_t>(t.height()));
  put(out, static_cast<std::uint32_t>(t.width()));
  put(out, static_cast<std::uint32_t>(t.channels()));
  for (double v : t.data()) put(out, v);
}

Tensor read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return read_tensor(in);
}

void write_tensor(const Tensor& t, const fs::path& path) {
  std::ostringstream os;
  write_tensor(t, os);
  write_file_atomic(path, os.str());
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

Tensor read_image(const fs::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0) {
    return decode_png(bytes, path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, path);
  }
  if (bytes.size() >= 4 && bytes.compare(0, 4, "MGT1") == 0) {
    std::istringstream in(bytes);
    return read_tensor(in);
  }
  throw std::runtime_error("'" + path.string() + "': unrecognized image format (magic)");
}

void write_image(const Tensor& t, const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_file_atomic(path, encode_png(t, path));
  } else if (ext == ".pgm") {
    write_file_atomic(path, encode_pnm(t, path, false));
  } else if (ext == ".ppm") {
    write_file_atomic(path, encode_pnm(t, path, true));
  } else if (ext == ".mgt") {
    write_tensor(t, path);
  } else {
    throw std::invalid_argument("unsupported output extension '" + ext +
                                "' (expected .png, .pgm, .ppm or .mgt)");
  }
}

}  // namespace mgbp
