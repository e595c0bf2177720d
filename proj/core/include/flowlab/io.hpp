#pragma once

#include "flowlab/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace flowlab {

/// One point per row, header x_0,...,x_{d-1}, 17 significant digits.
void write_points_csv(std::ostream& out, const PointSet& points);
void write_points_csv(const std::filesystem::path& path, const PointSet& points);

/// Reads what write_points_csv writes. Extra leading label columns are not supported.
PointSet read_points_csv(std::istream& in);
PointSet read_points_csv(const std::filesystem::path& path);

/// Binary 8-bit PGM; values are mapped linearly from [lo, hi] to [0, 255] and clipped.
void write_pgm(const std::filesystem::path& path, const RealVec& image, int height, int width, double lo = -1.0,
               double hi = 1.0);

/// Tiles `images` (one per column) into a grid with a one-pixel gap.
void write_pgm_grid(const std::filesystem::path& path, const PointSet& images, int height, int width,
                    int columns, double lo = -1.0, double hi = 1.0);

/// Scatter of the first two coordinates, one colour per series.
void write_svg_scatter(const std::filesystem::path& path, const std::vector<PointSet>& series, int size = 480);

}  // namespace flowlab
