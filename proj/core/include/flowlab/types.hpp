#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace flowlab {

/// A point, noise draw or velocity. Images are flattened row-major.
using RealVec = Eigen::VectorXd;

/// A set of points stored one per column.
using PointSet = Eigen::MatrixXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a training or optimization loop produces a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

inline void require_unit_time(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument(std::string(what) + ": t must lie in [0, 1], got " + std::to_string(t));
  }
}

}  // namespace flowlab
