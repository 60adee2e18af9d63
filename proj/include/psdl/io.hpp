#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "psdl/solvers.hpp"
#include "psdl/types.hpp"

namespace psdl {

struct Dataset {
  ImageStack stack;
  Mask mask;
  std::optional<NormalField> truth;  // scaled normals (unit rows for loaded data)
  std::string name;
  std::vector<std::string> warnings;
  std::int64_t clamped_shadow_count = 0;  // renderer: samples clamped at zero
};

struct LoadOptions {
  // Divide each image by its published light intensity (DiLiGenT ships one
  // per image); off by default.
  bool apply_light_intensities = false;
};

// Loads a dataset directory. Layouts, in priority order:
//  1. manifest.txt: ordered "image <path>" lines plus "lights <path>" and
//     optional "mask", "normals", "intensities" entries;
//  2. DiLiGenT-style: light_directions.txt (or lights.txt) with one "x y z"
//     per line, images from filenames.txt or sorted *.png, mask.png and
//     normal_gt.{fgrid,png} when present.
// Images may be 8/16-bit PNG (normalized to [0,1], color reduced by Rec.601
// luma) or float grids taken as-is. Light directions are renormalized with a
// warning when off unit length by more than 1e-3.
Dataset load_dataset(const std::string& root, const LoadOptions& options = {});

enum class AlbedoPattern { kUniform, kRings };

// Orthographic Lambertian sphere: pixels inside the disc of the given radius
// get n = (x, y, sqrt(1 - x^2 - y^2)) in normalized image coordinates and
// intensity albedo * max(l . n, 0); attached shadows clamp at zero and are
// counted. The mask is the disc.
Dataset generate_sphere(int resolution, const LightSet& lights,
                        AlbedoPattern albedo = AlbedoPattern::kUniform,
                        double disc_radius = 1.0);

// Deterministic spiral of unit directions tilted up to max_tilt_deg from the
// viewing axis; well spread for stable light matrices.
LightSet well_spread_lights(int count, double max_tilt_deg, std::uint64_t seed = 0);

// ---- result persistence ----

// One experiment run. wall_ms is deliberately the last column so determinism
// checks can strip it; everything else must be bit-stable under a fixed seed.
struct CsvRow {
  std::string method;
  std::string dataset;
  int n_images = 0;
  double snr_db = std::numeric_limits<double>::quiet_NaN();  // NaN = clean
  int realization = 0;
  std::uint64_t seed = 0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  int atoms = 0;
  std::string patch;   // "8x8x5"
  std::string stride;
  int outer_iters = 0;
  int inner_iters = 0;
  int prox_steps = 0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double mae_deg = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

std::string csv_header();
std::string csv_line(const CsvRow& row);

// Appends rows, writing the header first on a fresh file. Throws IoError if
// an existing file carries a different header.
void append_csv(const std::string& path, const std::vector<CsvRow>& rows);

// Writes the full result bundle into dir: normals.png ((n+1)/2 encoding of
// the unit view), normals.fgrid (raw), error_map.{png,fgrid} when a map is
// given, report.json, and appends rows to results.csv.
void save_results(const std::string& dir, const NormalField& normals,
                  const Eigen::VectorXd* error_map, const Mask* mask,
                  const SolveReport& report, const std::vector<CsvRow>& rows);

enum class StackEncoding { kPng8, kPng16, kFloat };

// Writes images + lights.txt + mask.png (+ truth.fgrid) + manifest.txt so
// the directory round-trips through load_dataset.
void save_dataset(const std::string& dir, const Dataset& dataset, StackEncoding encoding);

// ---- low-level formats ----

// Raw float grid: 16-byte header (magic "FGR1", then little-endian uint32
// m1, m2, channels) followed by float32 planes, each in canonical pixel
// order. Exact round-trip at float precision.
void write_float_grid(const std::string& path, int m1, int m2,
                      const Eigen::MatrixXd& planes);
Eigen::MatrixXd read_float_grid(const std::string& path, int* m1, int* m2);

struct PngImage {
  int width = 0, height = 0;
  int channels = 1;   // 1 gray, 3 rgb
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;  // row-major, interleaved
};

PngImage read_png(const std::string& path);
void write_png(const std::string& path, const PngImage& image);

// [0,1] luma in canonical pixel order (Rec. 601 weights for color inputs).
Eigen::VectorXd png_to_gray(const PngImage& image);

void write_normal_map_png(const std::string& path, const NormalField& normals);
void write_error_map_png(const std::string& path, const Eigen::VectorXd& error_map,
                         const Mask& mask, double scale_max_deg = 45.0);
void save_report_json(const std::string& path, const SolveReport& report,
                      const std::string& dataset_name, double mae_deg);

}  // namespace psdl
