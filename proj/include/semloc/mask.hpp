#pragma once

#include <span>
#include <vector>

#include "semloc/types.hpp"

namespace semloc {

/// Dense per-pixel class image. Values are class ids in [0, num_classes) or
/// kIgnoreLabel. Storage is row-major; `at(x, y)` takes column then row.
class SegmentationMask {
 public:
  SegmentationMask() = default;
  SegmentationMask(int width, int height, ClassId fill = kIgnoreLabel,
                   int num_classes = kDefaultNumClasses);
  SegmentationMask(int width, int height, std::vector<ClassId> data,
                   int num_classes = kDefaultNumClasses);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_classes() const { return num_classes_; }
  std::size_t pixel_count() const { return data_.size(); }

  ClassId at(int x, int y) const { return data_[index(x, y)]; }
  ClassId& at(int x, int y) { return data_[index(x, y)]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const ClassId> data() const { return data_; }
  std::span<ClassId> data() { return data_; }

  /// Throws InputError if any label is outside [0, K) and not ignore.
  void validate() const;

  bool operator==(const SegmentationMask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  int num_classes_ = kDefaultNumClasses;
  std::vector<ClassId> data_;
};

}  // namespace semloc
