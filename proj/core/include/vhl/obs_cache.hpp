#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <vector>

#include "vhl/navgraph.hpp"
#include "vhl/render.hpp"
#include "vhl/scene.hpp"

namespace vhl {

// Pre-rendered observation features for every graph node of one scene:
// per-view patch features plus per-object coverage tables. Pixel images are
// not retained; callers that need pixels re-render the views they care about.
class PanoramaCache {
 public:
  PanoramaCache(const Scene& scene, const NavGraph& graph, int resolution);

  int resolution() const { return resolution_; }
  int node_count() const { return static_cast<int>(features_.size()); }

  // 36 patch-feature vectors (48 dims each) for a node.
  const std::array<Eigen::VectorXd, kPanoramaViews>& features(NodeId node) const {
    return features_[static_cast<size_t>(node)];
  }

  // Replaces one view's features (used to patch in re-shaded attack views).
  void set_features(NodeId node, int view, Eigen::VectorXd feats) {
    features_[static_cast<size_t>(node)][static_cast<size_t>(view)] = std::move(feats);
  }

  // Coverage of `object_id` in each of the node's 36 sub-images.
  const std::array<double, kPanoramaViews>& coverage(NodeId node, int object_id) const;
  double max_coverage(NodeId node, int object_id) const;
  std::vector<int> views_containing(NodeId node, int object_id) const;

 private:
  int resolution_;
  std::vector<std::array<Eigen::VectorXd, kPanoramaViews>> features_;
  // coverage_[node][object_id] -> 36 fractions; object ids are dense here
  std::vector<std::vector<std::array<double, kPanoramaViews>>> coverage_;
  std::map<int, size_t> object_slot_;
};

}  // namespace vhl
