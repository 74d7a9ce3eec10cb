// Shared vocabulary: class labels, vector aliases and the error hierarchy.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace semloc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using ClassId = std::uint8_t;

/// Label for pixels/points that carry no class (outside footprint, unlabeled).
inline constexpr ClassId kIgnoreLabel = 255;
inline constexpr int kDefaultNumClasses = 8;

/// The eight unified aerial classes. Ids are stable and appear in files.
enum class SemanticClass : ClassId {
  Animal = 0,
  Building = 1,
  ImperviousSurface = 2,
  PerviousSurface = 3,
  TreeVegetation = 4,
  LowVegetation = 5,
  Water = 6,
  Vehicle = 7,
};

constexpr ClassId id(SemanticClass c) { return static_cast<ClassId>(c); }

std::string_view class_name(ClassId id);
std::optional<ClassId> class_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough observations to evaluate an objective term.
class NoEvidenceError : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient or otherwise degenerate geometric configuration.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input. Carries the offending source and line when known.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what) {}
  InputError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), source_(source), line_(line) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace semloc
