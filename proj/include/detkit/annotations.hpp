#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "detkit/error.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

using ClassId = int;

struct ClassLabel {
  ClassId id = 0;
  std::string name;
};

/// Set of class labels with unique ids and unique names, kept sorted by id.
class ClassRegistry {
 public:
  ClassRegistry() = default;
  explicit ClassRegistry(std::vector<ClassLabel> labels) {
    for (auto& l : labels) add(std::move(l));
  }

  void add(ClassLabel label) {
    if (label.id < 0) throw RegistryError("negative class id " + std::to_string(label.id));
    if (label.name.empty()) throw RegistryError("empty class name for id " + std::to_string(label.id));
    for (const auto& l : labels_) {
      if (l.id == label.id) throw RegistryError("duplicate class id " + std::to_string(label.id));
      if (l.name == label.name) throw RegistryError("duplicate class name '" + label.name + "'");
    }
    auto pos = std::lower_bound(labels_.begin(), labels_.end(), label.id,
                                [](const ClassLabel& l, ClassId id) { return l.id < id; });
    labels_.insert(pos, std::move(label));
  }

  bool contains(ClassId id) const { return find(id) != nullptr; }

  const ClassLabel* find(ClassId id) const {
    auto it = std::find_if(labels_.begin(), labels_.end(),
                           [id](const ClassLabel& l) { return l.id == id; });
    return it == labels_.end() ? nullptr : &*it;
  }

  const std::string& name(ClassId id) const {
    const auto* l = find(id);
    if (!l) throw RegistryError("unknown class id " + std::to_string(id));
    return l->name;
  }

  /// Dense position of `id` in id order, used to index matrices.
  std::size_t index_of(ClassId id) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i].id == id) return i;
    throw RegistryError("unknown class id " + std::to_string(id));
  }

  const std::vector<ClassLabel>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

 private:
  std::vector<ClassLabel> labels_;
};

struct GroundTruthObject {
  ClassId label = 0;
  BoundingBox box;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct Detection {
  ClassId label = 0;
  BoundingBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct AnnotatedImage {
  std::string image_id;
  int width_px = 0;
  int height_px = 0;
  std::vector<GroundTruthObject> objects;

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

inline PixelRect to_pixels(const BoundingBox& b, double width, double height) {
  return {b.x_min() * width, b.y_min() * height, b.x_max() * width, b.y_max() * height};
}

inline BoundingBox to_normalized(const PixelRect& r, double width, double height) {
  return BoundingBox::from_corners(r.x0 / width, r.y0 / height, r.x1 / width,
                                   r.y1 / height);
}

}  // namespace detkit
