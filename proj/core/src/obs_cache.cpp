#include "vhl/obs_cache.hpp"

#include <algorithm>
#include <stdexcept>

#include "vhl/agent.hpp"

namespace vhl {

PanoramaCache::PanoramaCache(const Scene& scene, const NavGraph& graph, int resolution)
    : resolution_(resolution) {
  const auto& face_obj = scene.face_object();
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    object_slot_[scene.objects[i].id] = i;
  }

  const int nodes = graph.node_count();
  features_.resize(static_cast<size_t>(nodes));
  coverage_.assign(static_cast<size_t>(nodes),
                   std::vector<std::array<double, kPanoramaViews>>(scene.objects.size()));

  const double total_pixels = static_cast<double>(resolution) * resolution;
  std::vector<int> hits(scene.objects.size());
  SubImage image;
  RasterBuffers buffers;
  for (NodeId n = 0; n < nodes; ++n) {
    auto& cov = coverage_[static_cast<size_t>(n)];
    for (auto& per_obj : cov) per_obj.fill(0.0);
    for (int v = 0; v < kPanoramaViews; ++v) {
      render_subimage(scene, panorama_camera(graph.position(n), v, resolution), image, buffers);
      features_[static_cast<size_t>(n)][static_cast<size_t>(v)] = patch_features(image);
      std::fill(hits.begin(), hits.end(), 0);
      for (int fid : buffers.face_id) {
        if (fid < 0) continue;
        const int obj = face_obj[static_cast<size_t>(fid)];
        if (obj < 0) continue;
        ++hits[object_slot_.at(obj)];
      }
      // Single exact division keeps threshold comparisons (e.g. >= 0.40 on
      // 160/400 pixels) free of accumulation error.
      for (size_t o = 0; o < hits.size(); ++o) {
        cov[o][static_cast<size_t>(v)] = hits[o] / total_pixels;
      }
    }
  }
}

const std::array<double, kPanoramaViews>& PanoramaCache::coverage(NodeId node,
                                                                  int object_id) const {
  auto it = object_slot_.find(object_id);
  if (it == object_slot_.end()) throw std::invalid_argument("PanoramaCache: unknown object id");
  return coverage_[static_cast<size_t>(node)][it->second];
}

double PanoramaCache::max_coverage(NodeId node, int object_id) const {
  const auto& cov = coverage(node, object_id);
  double best = 0.0;
  for (double c : cov) best = std::max(best, c);
  return best;
}

std::vector<int> PanoramaCache::views_containing(NodeId node, int object_id) const {
  const auto& cov = coverage(node, object_id);
  std::vector<int> out;
  for (int v = 0; v < kPanoramaViews; ++v) {
    if (cov[static_cast<size_t>(v)] > 0.0) out.push_back(v);
  }
  return out;
}

}  // namespace vhl
