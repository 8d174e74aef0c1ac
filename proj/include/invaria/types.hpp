#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace invaria {

using Index = std::ptrdiff_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Label value excluded from supervision and scoring.
inline constexpr int kIgnoreLabel = -1;

/// Raised when a geometric quantity collapses, e.g. a cloud made of one repeated point.
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when every label of a loss or metric input is the ignore label.
class EmptySupervision : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed point or checkpoint file. `offset` is the byte position of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Coordinates (meters), per-point input features and optional class labels.
struct PointCloud {
  Coords coords;
  Matrix feats;
  std::vector<int> labels;  // empty when the cloud is unlabeled

  Index size() const { return coords.rows(); }
  Index feature_dim() const { return feats.cols(); }
  bool has_labels() const { return !labels.empty(); }

  /// Rows `idx` of every field, in the given order.
  PointCloud select(std::span<const int> idx) const;

  /// Throws std::invalid_argument on shape mismatch, non-finite coordinates or bad labels.
  void validate(int num_classes = -1) const;
};

/// Bottleneck tokens and the spatial location each one is attached to.
struct TokenSet {
  Matrix tokens;  // T x C
  Coords locations;

  Index size() const { return tokens.rows(); }
};

}  // namespace invaria
