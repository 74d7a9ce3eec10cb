#include "semloc/mask.hpp"

#include <string>

namespace semloc {

SegmentationMask::SegmentationMask(int width, int height, ClassId fill, int num_classes)
    : width_(width), height_(height), num_classes_(num_classes) {
  if (width <= 0 || height <= 0) throw InputError("mask dimensions must be positive");
  if (num_classes <= 0 || num_classes >= kIgnoreLabel) throw InputError("invalid class count");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

SegmentationMask::SegmentationMask(int width, int height, std::vector<ClassId> data, int num_classes)
    : width_(width), height_(height), num_classes_(num_classes), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw InputError("mask dimensions must be positive");
  if (num_classes <= 0 || num_classes >= kIgnoreLabel) throw InputError("invalid class count");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw InputError("mask data size does not match dimensions");
}

void SegmentationMask::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const ClassId c = data_[i];
    if (c != kIgnoreLabel && c >= num_classes_)
      throw InputError("mask pixel " + std::to_string(i) + " has invalid class id " + std::to_string(c));
  }
}

}  // namespace semloc
