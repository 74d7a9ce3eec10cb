#include "semloc/types.hpp"

#include <array>

namespace semloc {

namespace {
constexpr std::array<std::string_view, kDefaultNumClasses> kNames = {
    "Animal",         "Building",      "ImperviousSurface", "PerviousSurface",
    "TreeVegetation", "LowVegetation", "Water",             "Vehicle",
};
}  // namespace

std::string_view class_name(ClassId id) {
  if (id == kIgnoreLabel) return "Ignore";
  if (id < kNames.size()) return kNames[id];
  return "Unknown";
}

std::optional<ClassId> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<ClassId>(i);
  if (name == "Ignore") return kIgnoreLabel;
  return std::nullopt;
}

}  // namespace semloc
