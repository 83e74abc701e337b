#include "mvslam/dataset.h"

#include <png.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "mvslam/binary_io.h"
#include "mvslam/errors.h"

namespace fs = std::filesystem;

namespace mvslam {
namespace {

// libpng reports errors through longjmp; the functions that call setjmp hold
// only trivially destructible locals.
struct PngHandle {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* file = nullptr;
  bool writing = false;
  char message[256] = {};

  ~PngHandle() {
    if (writing) {
      png_destroy_write_struct(&png, info ? &info : nullptr);
    } else if (png) {
      png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
    if (file) std::fclose(file);
  }
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* h = static_cast<PngHandle*>(png_get_error_ptr(png));
  std::snprintf(h->message, sizeof(h->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct PngHeader {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

void open_for_read(PngHandle& h, const std::string& path) {
  h.file = std::fopen(path.c_str(), "rb");
  if (!h.file) throw DataError("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, h.file) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path + " is not a PNG file");
  }
  h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &h, on_png_error, on_png_warning);
  if (!h.png) throw DataError("libpng initialization failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw DataError("libpng initialization failed");
}

bool read_header(PngHandle& h, PngHeader* out) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  png_init_io(h.png, h.file);
  png_set_sig_bytes(h.png, 8);
  png_read_info(h.png, h.info);
  out->width = png_get_image_width(h.png, h.info);
  out->height = png_get_image_height(h.png, h.info);
  out->bit_depth = png_get_bit_depth(h.png, h.info);
  out->color_type = png_get_color_type(h.png, h.info);
  return true;
}

bool configure_rgb(PngHandle& h, const PngHeader& hdr) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  if (hdr.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png);
  if (hdr.color_type == PNG_COLOR_TYPE_GRAY && hdr.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(h.png);
  if (hdr.bit_depth == 16) png_set_strip_16(h.png);
  if (hdr.color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(h.png);
  if (hdr.color_type == PNG_COLOR_TYPE_GRAY || hdr.color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(h.png);
  }
  png_set_strip_alpha(h.png);
  png_read_update_info(h.png, h.info);
  return true;
}

bool configure_swap16(PngHandle& h) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  if constexpr (std::endian::native == std::endian::little) png_set_swap(h.png);
  png_read_update_info(h.png, h.info);
  return true;
}

bool read_rows(PngHandle& h, png_bytepp rows) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  png_read_image(h.png, rows);
  png_read_end(h.png, nullptr);
  return true;
}

bool write_png_rows(PngHandle& h, png_uint_32 w, png_uint_32 hgt, int bit_depth, int color_type,
                    png_bytepp rows) {
  if (setjmp(png_jmpbuf(h.png))) return false;
  png_init_io(h.png, h.file);
  png_set_IHDR(h.png, h.info, w, hgt, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png, h.info);
  if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(h.png);
  png_write_image(h.png, rows);
  png_write_end(h.png, nullptr);
  return true;
}

void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               std::vector<std::uint8_t>& buffer, std::size_t row_bytes) {
  PngHandle h;
  h.writing = true;
  h.file = std::fopen(path.c_str(), "wb");
  if (!h.file) throw DataError("cannot open " + path + " for writing");
  h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &h, on_png_error, on_png_warning);
  if (!h.png) throw DataError("libpng initialization failed");
  h.info = png_create_info_struct(h.png);
  if (!h.info) throw DataError("libpng initialization failed");
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  if (!write_png_rows(h, width, height, bit_depth, color_type, rows.data())) {
    throw DataError("writing " + path + ": " + h.message);
  }
}

DepthMap load_depth_png(const std::string& path) {
  PngHandle h;
  open_for_read(h, path);
  PngHeader hdr;
  if (!read_header(h, &hdr)) throw FormatError(path + ": " + h.message);
  if (hdr.color_type != PNG_COLOR_TYPE_GRAY || hdr.bit_depth != 16) {
    throw FormatError(path + ": depth PNG must be 16-bit single channel (got bit depth " +
                      std::to_string(hdr.bit_depth) + ", color type " + std::to_string(hdr.color_type) + ")");
  }
  if (!configure_swap16(h)) throw FormatError(path + ": " + h.message);
  const int w = static_cast<int>(hdr.width), ht = static_cast<int>(hdr.height);
  std::vector<std::uint16_t> buffer(static_cast<std::size_t>(w) * ht);
  std::vector<png_bytep> rows(ht);
  for (int y = 0; y < ht; ++y) rows[y] = reinterpret_cast<png_bytep>(buffer.data() + static_cast<std::size_t>(y) * w);
  if (!read_rows(h, rows.data())) throw FormatError(path + ": " + h.message);
  DepthMap out(w, ht);
  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t mm = buffer[static_cast<std::size_t>(y) * w + x];
      if (mm != 0) out.set(x, y, mm / 1000.0);
    }
  }
  return out;
}

std::string read_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
  }
  if (!in) return tok;
  tok.push_back(c);
  while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
  // The single whitespace byte ending the token has been consumed.
  return tok;
}

DepthMap load_depth_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const std::string magic = read_token(in);
  if (magic == "PF") throw FormatError(path + ": three-channel PFM is not a depth map");
  if (magic != "Pf") throw FormatError(path + " is not a PFM file");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(read_token(in));
    h = std::stoi(read_token(in));
    scale = std::stod(read_token(in));
  } catch (const std::exception&) {
    throw FormatError(path + ": malformed PFM header");
  }
  if (w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale)) throw FormatError(path + ": malformed PFM header");
  const bool little = scale < 0.0;
  DepthMap out(w, h);
  std::vector<char> row(static_cast<std::size_t>(w) * 4);
  // Rows are stored bottom to top.
  for (int y = h - 1; y >= 0; --y) {
    if (!in.read(row.data(), static_cast<std::streamsize>(row.size()))) throw FormatError(path + ": truncated PFM data");
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits;
      std::memcpy(&bits, row.data() + 4 * x, 4);
      const bool native_little = std::endian::native == std::endian::little;
      if (little != native_little) bits = __builtin_bswap32(bits);
      float v;
      std::memcpy(&v, &bits, 4);
      out.set(x, y, v);
    }
  }
  return out;
}

void save_depth_pfm(const DepthMap& depth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "Pf\n" << depth.width() << ' ' << depth.height() << "\n-1\n";
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) {
      write_le<float>(out, depth.valid(x, y) ? static_cast<float>(depth.depth(x, y)) : 0.0f);
    }
  }
  if (!out) throw DataError("failed writing " + path);
}

void save_depth_png(const DepthMap& depth, const std::string& path) {
  const int w = depth.width(), h = depth.height();
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(w) * h * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint16_t mm = 0;
      if (depth.valid(x, y)) {
        const double v = std::round(depth.depth(x, y) * 1000.0);
        if (v > 65535.0) throw InvalidArgument("depth exceeds the 16-bit millimeter range");
        mm = static_cast<std::uint16_t>(v);
      }
      std::memcpy(buffer.data() + 2 * (static_cast<std::size_t>(y) * w + x), &mm, 2);
    }
  }
  write_png(path, w, h, 16, PNG_COLOR_TYPE_GRAY, buffer, static_cast<std::size_t>(w) * 2);
}

}  // namespace

RgbImage load_rgb_png(const std::string& path) {
  PngHandle h;
  open_for_read(h, path);
  PngHeader hdr;
  if (!read_header(h, &hdr)) throw FormatError(path + ": " + h.message);
  if (!configure_rgb(h, hdr)) throw FormatError(path + ": " + h.message);
  const int w = static_cast<int>(hdr.width), ht = static_cast<int>(hdr.height);
  if (png_get_rowbytes(h.png, h.info) != static_cast<std::size_t>(w) * 3) {
    throw FormatError(path + ": unsupported PNG layout");
  }
  RgbImage img(w, ht, 3);
  std::vector<png_bytep> rows(ht);
  for (int y = 0; y < ht; ++y) rows[y] = &img.at(0, y, 0);
  if (!read_rows(h, rows.data())) throw FormatError(path + ": " + h.message);
  return img;
}

void save_rgb_png(const RgbImage& image, const std::string& path) {
  if (image.channels() != 3) throw InvalidArgument("save_rgb_png expects three channels");
  std::vector<std::uint8_t> buffer(image.data().begin(), image.data().end());
  write_png(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, buffer,
            static_cast<std::size_t>(image.width()) * 3);
}

DepthMap load_depth(const std::string& path, DepthFormat format) {
  return format == DepthFormat::kPfm ? load_depth_pfm(path) : load_depth_png(path);
}

DepthMap load_depth(const std::string& path) {
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".pfm") return load_depth(path, DepthFormat::kPfm);
  if (ext == ".png") return load_depth(path, DepthFormat::kPng16);
  throw FormatError("unrecognized depth file extension: " + path);
}

void save_depth(const DepthMap& depth, const std::string& path, DepthFormat format) {
  if (format == DepthFormat::kPfm) {
    save_depth_pfm(depth, path);
  } else {
    save_depth_png(depth, path);
  }
}

CameraIntrinsics load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    CameraIntrinsics k;
    if (!(ss >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height)) {
      throw ParseError(path + ": expected 'fx fy cx cy width height'", line_no);
    }
    try {
      k.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
    return k;
  }
  throw ParseError(path + ": no calibration line", line_no);
}

void save_calibration(const CameraIntrinsics& k, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width << ' '
      << k.height << '\n';
}

std::string frame_name(std::int64_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index;
  return ss.str();
}

DatasetInfo inspect_dataset(const std::string& root) {
  const fs::path dir(root);
  if (!fs::is_directory(dir)) throw ConfigError("dataset directory " + root + " does not exist");
  if (!fs::exists(dir / "calib.txt")) throw ConfigError("dataset " + root + " has no calib.txt");
  DatasetInfo info;
  info.root = root;
  try {
    info.intrinsics = load_calibration((dir / "calib.txt").string());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  while (fs::exists(dir / "rgb" / (frame_name(static_cast<std::int64_t>(info.frame_count)) + ".png"))) {
    ++info.frame_count;
  }
  if (info.frame_count == 0) throw ConfigError("dataset " + root + " contains no frames");

  if (fs::is_directory(dir / "depth")) {
    const bool pfm = fs::exists(dir / "depth" / (frame_name(0) + ".pfm"));
    info.depth_format = pfm ? DepthFormat::kPfm : DepthFormat::kPng16;
    const std::string ext = pfm ? ".pfm" : ".png";
    std::size_t n = 0;
    while (fs::exists(dir / "depth" / (frame_name(static_cast<std::int64_t>(n)) + ext))) ++n;
    if (n > 0) {
      if (n != info.frame_count) {
        throw DataError("dataset " + root + " has " + std::to_string(info.frame_count) + " frames but " +
                        std::to_string(n) + " depth maps");
      }
      info.has_depth = true;
    }
  }
  if (fs::exists(dir / "groundtruth.txt")) {
    Trajectory gt = load_trajectory((dir / "groundtruth.txt").string());
    if (gt.size() != info.frame_count) {
      throw DataError("dataset " + root + " ground truth has " + std::to_string(gt.size()) + " poses for " +
                      std::to_string(info.frame_count) + " frames");
    }
    info.groundtruth = std::move(gt);
  }
  return info;
}

RgbImage load_frame_rgb(const DatasetInfo& info, std::int64_t index) {
  return load_rgb_png((fs::path(info.root) / "rgb" / (frame_name(index) + ".png")).string());
}

DepthMap load_frame_depth(const DatasetInfo& info, std::int64_t index) {
  if (!info.has_depth) throw DataError("dataset " + info.root + " has no depth maps");
  const std::string ext = info.depth_format == DepthFormat::kPfm ? ".pfm" : ".png";
  return load_depth((fs::path(info.root) / "depth" / (frame_name(index) + ext)).string(), info.depth_format);
}

}  // namespace mvslam
