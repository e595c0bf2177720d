#include "flowlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace flowlab {

void write_points_csv(std::ostream& out, const PointSet& points) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out << (i ? "," : "") << "x_" << i;
  }
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      out << (i ? "," : "") << points(i, c);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

void write_points_csv(const std::filesystem::path& path, const PointSet& points) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  write_points_csv(out, points);
}

PointSet read_points_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("read_points_csv: empty input");
  }
  const auto dim = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index count = 0;
    while (std::getline(ls, cell, ',')) {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      ++count;
    }
    if (count != dim) {
      throw ShapeError("read_points_csv: row " + std::to_string(rows + 1) + " has " + std::to_string(count) +
                       " values, expected " + std::to_string(dim));
    }
    ++rows;
  }
  return Eigen::Map<const PointSet>(values.data(), dim, rows);
}

PointSet read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  return read_points_csv(in);
}

namespace {

unsigned char to_gray(double v, double lo, double hi) {
  const double u = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(255.0 * u));
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const RealVec& image, int height, int width, double lo, double hi) {
  write_pgm_grid(path, PointSet(image), height, width, 1, lo, hi);
}

void write_pgm_grid(const std::filesystem::path& path, const PointSet& images, int height, int width, int columns,
                    double lo, double hi) {
  require_same_dim(images.rows(), static_cast<Eigen::Index>(height) * width, "write_pgm_grid");
  if (columns < 1 || images.cols() == 0) {
    throw std::invalid_argument("write_pgm_grid: need at least one image and one column");
  }
  const int count = static_cast<int>(images.cols());
  const int cols = std::min(columns, count);
  const int grid_rows = (count + cols - 1) / cols;
  const int out_w = cols * (width + 1) - 1;
  const int out_h = grid_rows * (height + 1) - 1;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(out_w) * out_h, 0);
  for (int n = 0; n < count; ++n) {
    const int oy = (n / cols) * (height + 1);
    const int ox = (n % cols) * (width + 1);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        pixels[static_cast<std::size_t>(oy + y) * out_w + ox + x] = to_gray(images(y * width + x, n), lo, hi);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "P5\n" << out_w << ' ' << out_h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_svg_scatter(const std::filesystem::path& path, const std::vector<PointSet>& series, int size) {
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : series) {
    if (s.rows() < 2) {
      throw ShapeError("write_svg_scatter: need at least two coordinates");
    }
    if (s.cols() > 0) {
      lo = std::min(lo, s.topRows(2).minCoeff());
      hi = std::max(hi, s.topRows(2).maxCoeff());
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double v) { return (v - lo) / (hi - lo) * size; };

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out.precision(5);
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << "<g fill=\"" << colours[k % 6] << "\" fill-opacity=\"0.6\">\n";
    for (Eigen::Index c = 0; c < series[k].cols(); ++c) {
      out << "<circle cx=\"" << px(series[k](0, c)) << "\" cy=\"" << size - px(series[k](1, c))
          << "\" r=\"1.5\"/>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
}

}  // namespace flowlab
