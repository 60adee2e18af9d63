#include "psdl/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "psdl/metrics.hpp"

namespace fs = std::filesystem;

namespace psdl {

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- float grid

namespace {
constexpr char kGridMagic[4] = {'F', 'G', 'R', '1'};

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_float_grid(const std::string& path, int m1, int m2,
                      const Eigen::MatrixXd& planes) {
  if (planes.rows() != static_cast<Eigen::Index>(m1) * m2) {
    throw ContractError("write_float_grid: plane rows do not match m1*m2");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_float_grid: cannot open " + path);
  os.write(kGridMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(m1));
  put_u32(os, static_cast<std::uint32_t>(m2));
  put_u32(os, static_cast<std::uint32_t>(planes.cols()));
  std::vector<float> buf(planes.rows());
  for (Eigen::Index c = 0; c < planes.cols(); ++c) {
    for (Eigen::Index i = 0; i < planes.rows(); ++i)
      buf[i] = static_cast<float>(planes(i, c));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw IoError("write_float_grid: write failed for " + path);
}

Eigen::MatrixXd read_float_grid(const std::string& path, int* m1, int* m2) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_float_grid: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kGridMagic, 4) != 0) {
    throw IoError("read_float_grid: " + path + " is not a float grid file");
  }
  const std::uint32_t r1 = get_u32(is), r2 = get_u32(is), ch = get_u32(is);
  if (!is || r1 == 0 || r2 == 0 || ch == 0 || ch > 1024) {
    throw IoError("read_float_grid: bad header in " + path);
  }
  const Eigen::Index pixels = static_cast<Eigen::Index>(r1) * r2;
  Eigen::MatrixXd planes(pixels, ch);
  std::vector<float> buf(pixels);
  for (std::uint32_t c = 0; c < ch; ++c) {
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw IoError("read_float_grid: truncated data in " + path);
    for (Eigen::Index i = 0; i < pixels; ++i) planes(i, c) = buf[i];
  }
  *m1 = static_cast<int>(r1);
  *m2 = static_cast<int>(r2);
  return planes;
}

// ----------------------------------------------------------------------- png

namespace {

struct PngReadGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadGuard() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteGuard {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteGuard() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

}  // namespace

PngImage read_png(const std::string& path) {
  PngReadGuard g;
  g.fp = std::fopen(path.c_str(), "rb");
  if (!g.fp) throw IoError("read_png: cannot open " + path);
  g.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!g.png) throw IoError("read_png: libpng init failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw IoError("read_png: libpng info init failed");

  PngImage img;
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(g.png))) {
    throw IoError("read_png: failed to decode " + path);
  }
  png_init_io(g.png, g.fp);
  png_read_info(g.png, g.info);

  png_uint_32 width = png_get_image_width(g.png, g.info);
  png_uint_32 height = png_get_image_height(g.png, g.info);
  int bit_depth = png_get_bit_depth(g.png, g.info);
  int color_type = png_get_color_type(g.png, g.info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(g.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(g.png);
  if (png_get_valid(g.png, g.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(g.png);
  png_set_strip_alpha(g.png);
  png_read_update_info(g.png, g.info);

  bit_depth = png_get_bit_depth(g.png, g.info);
  const int channels = png_get_channels(g.png, g.info);
  const std::size_t stride = png_get_rowbytes(g.png, g.info);

  raw.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + r * stride;
  png_read_image(g.png, rows.data());
  png_read_end(g.png, nullptr);

  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  img.channels = channels;
  img.bit_depth = bit_depth;
  img.samples.resize(static_cast<std::size_t>(width) * height * channels);
  if (bit_depth == 16) {
    // PNG stores 16-bit samples big-endian.
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
      img.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < img.samples.size(); ++i) img.samples[i] = raw[i];
  }
  return img;
}

void write_png(const std::string& path, const PngImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ContractError("write_png: only gray and rgb supported");
  }
  if (image.bit_depth != 8 && image.bit_depth != 16) {
    throw ContractError("write_png: bit depth must be 8 or 16");
  }
  PngWriteGuard g;
  g.fp = std::fopen(path.c_str(), "wb");
  if (!g.fp) throw IoError("write_png: cannot open " + path);
  g.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!g.png) throw IoError("write_png: libpng init failed");
  g.info = png_create_info_struct(g.png);
  if (!g.info) throw IoError("write_png: libpng info init failed");

  const std::size_t n = static_cast<std::size_t>(image.width) * image.height *
                        image.channels;
  std::vector<std::uint8_t> raw(image.bit_depth == 16 ? 2 * n : n);
  std::vector<png_bytep> rows(image.height);

  if (setjmp(png_jmpbuf(g.png))) {
    throw IoError("write_png: failed to encode " + path);
  }
  png_init_io(g.png, g.fp);
  png_set_IHDR(g.png, g.info, image.width, image.height, image.bit_depth,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(g.png, g.info);

  if (image.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      raw[2 * i] = static_cast<std::uint8_t>(image.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(image.samples[i] & 0xff);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      raw[i] = static_cast<std::uint8_t>(image.samples[i] & 0xff);
  }
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels *
                             (image.bit_depth / 8);
  for (int r = 0; r < image.height; ++r) rows[r] = raw.data() + r * stride;
  png_write_image(g.png, rows.data());
  png_write_end(g.png, nullptr);
}

Eigen::VectorXd png_to_gray(const PngImage& image) {
  const double maxval = image.bit_depth == 16 ? 65535.0 : 255.0;
  const Eigen::Index pixels = static_cast<Eigen::Index>(image.width) * image.height;
  Eigen::VectorXd out(pixels);
  if (image.channels == 1) {
    for (Eigen::Index q = 0; q < pixels; ++q) out[q] = image.samples[q] / maxval;
  } else {
    for (Eigen::Index q = 0; q < pixels; ++q) {
      const std::uint16_t* px = &image.samples[q * image.channels];
      out[q] = (kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2]) / maxval;
    }
  }
  return out;
}

// ------------------------------------------------------------------ datasets

namespace {

Eigen::VectorXd load_image_channel(const std::string& path, int* m1, int* m2) {
  if (path.ends_with(".fgrid")) {
    Eigen::MatrixXd planes = read_float_grid(path, m1, m2);
    if (planes.cols() != 1) {
      throw IoError("load_dataset: expected single-channel grid in " + path);
    }
    return planes.col(0);
  }
  const PngImage img = read_png(path);
  *m1 = img.height;
  *m2 = img.width;
  return png_to_gray(img);
}

Eigen::Matrix3Xd parse_lights_file(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream is(path);
  if (!is) throw IoError("load_dataset: cannot open lights file " + path);
  std::vector<Eigen::Vector3d> dirs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 3) {
      throw IoError("load_dataset: malformed lights line " + path + ":" +
                    std::to_string(lineno) + " ('" + line + "')");
    }
    Eigen::Vector3d v;
    try {
      v = {std::stod(toks[0]), std::stod(toks[1]), std::stod(toks[2])};
    } catch (const std::exception&) {
      throw IoError("load_dataset: malformed lights line " + path + ":" +
                    std::to_string(lineno) + " ('" + line + "')");
    }
    const double norm = v.norm();
    if (norm <= 0.0 || !std::isfinite(norm)) {
      throw IoError("load_dataset: zero-length light at " + path + ":" +
                    std::to_string(lineno));
    }
    if (std::abs(norm - 1.0) > 1e-3) {
      std::ostringstream os;
      os << "light at " << path << ":" << lineno << " has norm " << norm
         << "; renormalized to unit length";
      warnings->push_back(os.str());
      std::cerr << "[psdl] warning: " << os.str() << "\n";
    }
    dirs.push_back(v / norm);
  }
  Eigen::Matrix3Xd out(3, dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) out.col(i) = dirs[i];
  return out;
}

std::vector<double> parse_intensities_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("load_dataset: cannot open intensities file " + path);
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    try {
      if (toks.size() == 1) {
        out.push_back(std::stod(toks[0]));
      } else if (toks.size() == 3) {
        out.push_back(kLumaR * std::stod(toks[0]) + kLumaG * std::stod(toks[1]) +
                      kLumaB * std::stod(toks[2]));
      } else {
        throw std::invalid_argument("bad field count");
      }
    } catch (const std::exception&) {
      throw IoError("load_dataset: malformed intensities line " + path + ":" +
                    std::to_string(lineno));
    }
  }
  return out;
}

NormalField load_truth_normals(const std::string& path) {
  int m1 = 0, m2 = 0;
  Eigen::MatrixXd rows;
  if (path.ends_with(".fgrid")) {
    rows = read_float_grid(path, &m1, &m2);
    if (rows.cols() != 3) {
      throw IoError("load_dataset: truth grid " + path + " must have 3 channels");
    }
  } else {
    const PngImage img = read_png(path);
    if (img.channels != 3) {
      throw IoError("load_dataset: truth image " + path + " must be RGB");
    }
    const double maxval = img.bit_depth == 16 ? 65535.0 : 255.0;
    m1 = img.height;
    m2 = img.width;
    rows.resize(static_cast<Eigen::Index>(m1) * m2, 3);
    for (Eigen::Index q = 0; q < rows.rows(); ++q) {
      for (int c = 0; c < 3; ++c) {
        rows(q, c) = 2.0 * (img.samples[q * 3 + c] / maxval) - 1.0;
      }
    }
  }
  // Stored as unit rows; degenerate rows stay zero.
  return normalize_rows(NormalField(m1, m2, std::move(rows))).unit;
}

struct ManifestEntries {
  std::vector<std::string> images;
  std::string lights, mask, normals, intensities;
};

ManifestEntries parse_manifest(const std::string& path, const std::string& root) {
  std::ifstream is(path);
  if (!is) throw IoError("load_dataset: cannot open manifest " + path);
  ManifestEntries m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto toks = split_ws(line);
    if (toks.size() != 2) {
      throw IoError("load_dataset: malformed manifest line " + path + ":" +
                    std::to_string(lineno) + " (expected 'key path')");
    }
    const std::string value = (fs::path(root) / toks[1]).string();
    if (toks[0] == "image") m.images.push_back(value);
    else if (toks[0] == "lights") m.lights = value;
    else if (toks[0] == "mask") m.mask = value;
    else if (toks[0] == "normals") m.normals = value;
    else if (toks[0] == "intensities") m.intensities = value;
    else {
      throw IoError("load_dataset: unknown manifest key '" + toks[0] + "' at " + path +
                    ":" + std::to_string(lineno));
    }
  }
  return m;
}

ManifestEntries autodetect_layout(const std::string& root) {
  ManifestEntries m;
  for (const char* name : {"light_directions.txt", "lights.txt"}) {
    if (fs::exists(fs::path(root) / name)) {
      m.lights = (fs::path(root) / name).string();
      break;
    }
  }
  if (m.lights.empty()) {
    throw IoError("load_dataset: no manifest.txt and no lights file in " + root);
  }
  const fs::path filenames = fs::path(root) / "filenames.txt";
  if (fs::exists(filenames)) {
    std::ifstream is(filenames);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      m.images.push_back((fs::path(root) / line).string());
    }
  } else {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      const std::string stem = entry.path().filename().string();
      if (entry.path().extension() != ".png" && entry.path().extension() != ".fgrid")
        continue;
      if (stem == "mask.png" || stem.starts_with("normal") || stem.starts_with("Normal") ||
          stem.starts_with("truth"))
        continue;
      names.push_back(entry.path().string());
    }
    std::sort(names.begin(), names.end());
    m.images = std::move(names);
  }
  if (fs::exists(fs::path(root) / "mask.png")) {
    m.mask = (fs::path(root) / "mask.png").string();
  }
  for (const char* name :
       {"normal_gt.fgrid", "Normal_gt.fgrid", "truth.fgrid", "normal_gt.png", "Normal_gt.png"}) {
    if (fs::exists(fs::path(root) / name)) {
      m.normals = (fs::path(root) / name).string();
      break;
    }
  }
  if (fs::exists(fs::path(root) / "light_intensities.txt")) {
    m.intensities = (fs::path(root) / "light_intensities.txt").string();
  }
  return m;
}

}  // namespace

Dataset load_dataset(const std::string& root, const LoadOptions& options) {
  if (!fs::exists(root)) throw IoError("load_dataset: no such directory " + root);
  const fs::path manifest_path = fs::path(root) / "manifest.txt";
  ManifestEntries m = fs::exists(manifest_path)
                          ? parse_manifest(manifest_path.string(), root)
                          : autodetect_layout(root);
  if (m.images.empty()) throw IoError("load_dataset: no images listed for " + root);
  if (m.lights.empty()) throw IoError("load_dataset: no lights file for " + root);

  std::vector<std::string> warnings;
  const Eigen::Matrix3Xd dirs = parse_lights_file(m.lights, &warnings);
  if (static_cast<std::size_t>(dirs.cols()) != m.images.size()) {
    throw IoError("load_dataset: " + std::to_string(m.images.size()) + " images vs " +
                  std::to_string(dirs.cols()) + " light directions (" + m.lights + ")");
  }

  std::vector<double> intensities;
  if (options.apply_light_intensities) {
    if (m.intensities.empty()) {
      throw IoError("load_dataset: light intensities requested but no intensities file in " +
                    root);
    }
    intensities = parse_intensities_file(m.intensities);
    if (intensities.size() != m.images.size()) {
      throw IoError("load_dataset: intensity count mismatch in " + m.intensities);
    }
  }

  int m1 = 0, m2 = 0;
  Eigen::MatrixXd y;
  for (std::size_t k = 0; k < m.images.size(); ++k) {
    if (!fs::exists(m.images[k])) {
      throw IoError("load_dataset: missing image " + m.images[k]);
    }
    int im1, im2;
    Eigen::VectorXd gray = load_image_channel(m.images[k], &im1, &im2);
    if (k == 0) {
      m1 = im1;
      m2 = im2;
      y.resize(static_cast<Eigen::Index>(m1) * m2, m.images.size());
    } else if (im1 != m1 || im2 != m2) {
      throw IoError("load_dataset: image " + m.images[k] + " is " + std::to_string(im1) +
                    "x" + std::to_string(im2) + ", expected " + std::to_string(m1) + "x" +
                    std::to_string(m2));
    }
    if (!intensities.empty()) {
      if (intensities[k] <= 0.0) {
        throw IoError("load_dataset: nonpositive light intensity for image " + m.images[k]);
      }
      gray /= intensities[k];
    }
    y.col(k) = gray;
  }

  ImageStack stack(m1, m2, std::move(y), LightSet(dirs));
  if (stack.clamped_negative_count() > 0) {
    std::ostringstream os;
    os << stack.clamped_negative_count() << " negative intensities clamped to 0 on load";
    warnings.push_back(os.str());
    std::cerr << "[psdl] warning: " << os.str() << "\n";
  }

  Mask mask = Mask::full(m1, m2);
  if (!m.mask.empty()) {
    if (!fs::exists(m.mask)) throw IoError("load_dataset: missing mask " + m.mask);
    int mm1, mm2;
    const Eigen::VectorXd gray = load_image_channel(m.mask, &mm1, &mm2);
    if (mm1 != m1 || mm2 != m2) {
      throw IoError("load_dataset: mask " + m.mask + " dimensions do not match images");
    }
    std::vector<std::uint8_t> inside(gray.size());
    for (Eigen::Index q = 0; q < gray.size(); ++q) inside[q] = gray[q] > 0.5 ? 1 : 0;
    mask = Mask(m1, m2, std::move(inside));
  }

  std::optional<NormalField> truth;
  if (!m.normals.empty()) {
    if (!fs::exists(m.normals)) throw IoError("load_dataset: missing normals " + m.normals);
    truth = load_truth_normals(m.normals);
    if (truth->rows() != m1 || truth->cols() != m2) {
      throw IoError("load_dataset: truth normals dimensions do not match images");
    }
  }

  Dataset ds{std::move(stack), std::move(mask), std::move(truth),
             fs::path(root).filename().string(), std::move(warnings), 0};
  if (ds.name.empty()) ds.name = root;
  return ds;
}

// ------------------------------------------------------------------ renderer

Dataset generate_sphere(int resolution, const LightSet& lights, AlbedoPattern albedo,
                        double disc_radius) {
  if (resolution < 8) throw ContractError("generate_sphere: resolution must be >= 8");
  if (!(disc_radius > 0.0) || disc_radius > 1.0) {
    throw ContractError("generate_sphere: disc_radius must be in (0, 1]");
  }
  const int d = lights.count();
  const Eigen::Index pixels = static_cast<Eigen::Index>(resolution) * resolution;
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(pixels, d);
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(pixels, 3);
  std::vector<std::uint8_t> inside(pixels, 0);
  std::int64_t clamped = 0;

  for (int x = 0; x < resolution; ++x) {
    for (int yy = 0; yy < resolution; ++yy) {
      const Eigen::Index q = pixel_index(x, yy, resolution);
      const double u = (yy + 0.5) * 2.0 / resolution - 1.0;  // right
      const double v = 1.0 - (x + 0.5) * 2.0 / resolution;   // up
      const double r2 = u * u + v * v;
      if (r2 > disc_radius * disc_radius) continue;
      inside[q] = 1;
      const Eigen::Vector3d n(u, v, std::sqrt(std::max(0.0, 1.0 - r2)));
      double rho = 1.0;
      if (albedo == AlbedoPattern::kRings) {
        rho = 0.55 + 0.45 * std::cos(10.0 * M_PI * r2);
      }
      truth.row(q) = rho * n.transpose();
      for (int k = 0; k < d; ++k) {
        const double shade = lights.direction(k).dot(n);
        if (shade < 0.0) {
          ++clamped;
        } else {
          y(q, k) = rho * shade;
        }
      }
    }
  }

  Dataset ds{ImageStack(resolution, resolution, std::move(y), lights),
             Mask(resolution, resolution, std::move(inside)),
             NormalField(resolution, resolution, std::move(truth)),
             "sphere" + std::to_string(resolution),
             {},
             clamped};
  return ds;
}

LightSet well_spread_lights(int count, double max_tilt_deg, std::uint64_t seed) {
  if (count < 3) throw ContractError("well_spread_lights: need at least 3 directions");
  if (!(max_tilt_deg > 0.0) || max_tilt_deg >= 90.0) {
    throw ContractError("well_spread_lights: max tilt must be in (0, 90) degrees");
  }
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  const double phase = 2.0 * M_PI *
                       (static_cast<double>(seed % 360) / 360.0);
  Eigen::Matrix3Xd dirs(3, count);
  for (int k = 0; k < count; ++k) {
    const double tilt =
        (max_tilt_deg * M_PI / 180.0) * std::sqrt((k + 1.0) / count);
    const double az = k * golden + phase;
    dirs.col(k) = Eigen::Vector3d(std::sin(tilt) * std::cos(az),
                                  std::sin(tilt) * std::sin(az), std::cos(tilt));
  }
  return LightSet(std::move(dirs));
}

// ----------------------------------------------------------------------- csv

std::string csv_header() {
  return "method,dataset,n_images,snr_db,realization,seed,lambda,mu,atoms,patch,stride,"
         "outer_iters,inner_iters,prox_steps,tau,mae_deg,wall_ms";
}

std::string csv_line(const CsvRow& r) {
  std::ostringstream os;
  os << r.method << ',' << r.dataset << ',' << r.n_images << ',' << fmt_double(r.snr_db)
     << ',' << r.realization << ',' << r.seed << ',' << fmt_double(r.lambda) << ','
     << fmt_double(r.mu) << ',' << r.atoms << ',' << r.patch << ',' << r.stride << ','
     << r.outer_iters << ',' << r.inner_iters << ',' << r.prox_steps << ','
     << fmt_double(r.tau) << ',' << fmt_double(r.mae_deg) << ','
     << fmt_double(r.wall_ms);
  return os.str();
}

void append_csv(const std::string& path, const std::vector<CsvRow>& rows) {
  bool need_header = true;
  if (fs::exists(path) && fs::file_size(path) > 0) {
    std::ifstream is(path);
    std::string first;
    std::getline(is, first);
    if (first != csv_header()) {
      throw IoError("append_csv: " + path + " has a different header; refusing to mix schemas");
    }
    need_header = false;
  }
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("append_csv: cannot open " + path);
  if (need_header) os << csv_header() << '\n';
  for (const auto& r : rows) os << csv_line(r) << '\n';
  if (!os) throw IoError("append_csv: write failed for " + path);
}

// ------------------------------------------------------------------- results

void write_normal_map_png(const std::string& path, const NormalField& normals) {
  const RowNormalization rn = normalize_rows(normals);
  const Eigen::MatrixXd& n = rn.unit.matrix();
  PngImage img;
  img.width = normals.cols();
  img.height = normals.rows();
  img.channels = 3;
  img.bit_depth = 8;
  img.samples.resize(static_cast<std::size_t>(n.rows()) * 3);
  for (Eigen::Index q = 0; q < n.rows(); ++q) {
    for (int c = 0; c < 3; ++c) {
      const double v = (n(q, c) + 1.0) / 2.0;
      img.samples[q * 3 + c] =
          static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  write_png(path, img);
}

void write_error_map_png(const std::string& path, const Eigen::VectorXd& error_map,
                         const Mask& mask, double scale_max_deg) {
  if (error_map.size() != mask.pixel_count()) {
    throw ContractError("write_error_map_png: map size does not match mask");
  }
  PngImage img;
  img.width = mask.cols();
  img.height = mask.rows();
  img.channels = 3;
  img.bit_depth = 8;
  img.samples.assign(static_cast<std::size_t>(error_map.size()) * 3, 0);
  auto channel = [](double t) {
    return static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  };
  for (Eigen::Index q = 0; q < error_map.size(); ++q) {
    if (!mask.at(static_cast<int>(q)) || std::isnan(error_map[q])) continue;
    const double t = std::clamp(error_map[q] / scale_max_deg, 0.0, 1.0);
    // Classic jet ramp.
    img.samples[q * 3 + 0] = channel(1.5 - std::abs(4.0 * t - 3.0));
    img.samples[q * 3 + 1] = channel(1.5 - std::abs(4.0 * t - 2.0));
    img.samples[q * 3 + 2] = channel(1.5 - std::abs(4.0 * t - 1.0));
  }
  write_png(path, img);
}

void save_report_json(const std::string& path, const SolveReport& report,
                      const std::string& dataset_name, double mae_deg) {
  nlohmann::json j;
  j["method"] = report.method;
  j["dataset"] = dataset_name;
  j["objective_trace"] = report.objective_trace;
  j["final_relative_change"] = report.final_relative_change;
  j["outer_iterations_run"] = report.outer_iterations_run;
  j["tau_used"] = report.tau_used;
  j["seconds"] = {{"learn", report.learn_seconds},
                  {"update", report.update_seconds},
                  {"total", report.total_seconds}};
  j["warnings"] = report.warnings;
  j["seed"] = report.seed;
  j["config"] = report.config_echo;
  if (!std::isnan(mae_deg)) j["mae_deg"] = mae_deg;
  std::ofstream os(path);
  if (!os) throw IoError("save_report_json: cannot open " + path);
  os << j.dump(2) << '\n';
}

void save_results(const std::string& dir, const NormalField& normals,
                  const Eigen::VectorXd* error_map, const Mask* mask,
                  const SolveReport& report, const std::vector<CsvRow>& rows) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("save_results: cannot create " + dir + ": " + ec.message());

  write_normal_map_png((fs::path(dir) / "normals.png").string(), normals);
  write_float_grid((fs::path(dir) / "normals.fgrid").string(), normals.rows(),
                   normals.cols(), normals.matrix());
  double mae = std::numeric_limits<double>::quiet_NaN();
  if (error_map && mask) {
    write_error_map_png((fs::path(dir) / "error_map.png").string(), *error_map, *mask);
    write_float_grid((fs::path(dir) / "error_map.fgrid").string(), mask->rows(),
                     mask->cols(), *error_map);
    if (mask->count() > 0) mae = mean_angular_error(*error_map, *mask);
  }
  save_report_json((fs::path(dir) / "report.json").string(), report,
                   rows.empty() ? "" : rows.front().dataset, mae);
  // Learned dictionary state (stored as generic float grids: atoms are the
  // columns of dictionary.fgrid, codes the columns of codes.fgrid).
  if (report.dictionary_atoms.size() > 0) {
    write_float_grid((fs::path(dir) / "dictionary.fgrid").string(),
                     static_cast<int>(report.dictionary_atoms.rows()),
                     static_cast<int>(report.dictionary_atoms.cols()),
                     Eigen::Map<const Eigen::VectorXd>(report.dictionary_atoms.data(),
                                                       report.dictionary_atoms.size()));
  }
  if (report.sparse_codes.size() > 0) {
    write_float_grid((fs::path(dir) / "codes.fgrid").string(),
                     static_cast<int>(report.sparse_codes.rows()),
                     static_cast<int>(report.sparse_codes.cols()),
                     Eigen::Map<const Eigen::VectorXd>(report.sparse_codes.data(),
                                                       report.sparse_codes.size()));
  }
  if (!rows.empty()) {
    append_csv((fs::path(dir) / "results.csv").string(), rows);
  }
}

// ------------------------------------------------------------- dataset save

void save_dataset(const std::string& dir, const Dataset& dataset, StackEncoding encoding) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("save_dataset: cannot create " + dir + ": " + ec.message());

  const ImageStack& stack = dataset.stack;
  std::ofstream manifest((fs::path(dir) / "manifest.txt").string());
  if (!manifest) throw IoError("save_dataset: cannot write manifest in " + dir);

  const Eigen::MatrixXd& y = stack.matrix();
  for (int k = 0; k < stack.image_count(); ++k) {
    char name[32];
    if (encoding == StackEncoding::kFloat) {
      std::snprintf(name, sizeof(name), "%03d.fgrid", k);
      write_float_grid((fs::path(dir) / name).string(), stack.rows(), stack.cols(),
                       y.col(k));
    } else {
      std::snprintf(name, sizeof(name), "%03d.png", k);
      PngImage img;
      img.width = stack.cols();
      img.height = stack.rows();
      img.channels = 1;
      img.bit_depth = encoding == StackEncoding::kPng16 ? 16 : 8;
      const double maxval = encoding == StackEncoding::kPng16 ? 65535.0 : 255.0;
      img.samples.resize(y.rows());
      for (Eigen::Index q = 0; q < y.rows(); ++q) {
        img.samples[q] = static_cast<std::uint16_t>(
            std::lround(std::clamp(y(q, k), 0.0, 1.0) * maxval));
      }
      write_png((fs::path(dir) / name).string(), img);
    }
    manifest << "image " << name << '\n';
  }

  {
    std::ofstream lights((fs::path(dir) / "lights.txt").string());
    if (!lights) throw IoError("save_dataset: cannot write lights.txt in " + dir);
    const Eigen::Matrix3Xd& L = stack.lights().matrix();
    for (int k = 0; k < stack.lights().count(); ++k) {
      lights << fmt_double(L(0, k)) << ' ' << fmt_double(L(1, k)) << ' '
             << fmt_double(L(2, k)) << '\n';
    }
  }
  manifest << "lights lights.txt\n";

  {
    PngImage img;
    img.width = dataset.mask.cols();
    img.height = dataset.mask.rows();
    img.channels = 1;
    img.bit_depth = 8;
    img.samples.resize(dataset.mask.pixel_count());
    for (int q = 0; q < dataset.mask.pixel_count(); ++q) {
      img.samples[q] = dataset.mask.at(q) ? 255 : 0;
    }
    write_png((fs::path(dir) / "mask.png").string(), img);
  }
  manifest << "mask mask.png\n";

  if (dataset.truth) {
    write_float_grid((fs::path(dir) / "truth.fgrid").string(), dataset.truth->rows(),
                     dataset.truth->cols(), dataset.truth->matrix());
    manifest << "normals truth.fgrid\n";
  }
}

}  // namespace psdl
