#include "posefuse/sampling.hpp"

#include "posefuse/error.hpp"

#include <cstdio>

namespace posefuse {

std::vector<std::vector<int>> enumerate_subsets(int n_cameras) {
  if (n_cameras < 2) {
    throw TooFewCameras("need at least two cameras, got " + std::to_string(n_cameras));
  }
  if (n_cameras > 16) throw TooFewCameras("more than 16 cameras is not supported");
  std::vector<std::vector<int>> out;
  for (int size = 2; size <= n_cameras; ++size) {
    // Lexicographic combinations of `size` out of n_cameras.
    std::vector<int> idx(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) idx[i] = i;
    while (true) {
      out.push_back(idx);
      int i = size - 1;
      while (i >= 0 && idx[i] == n_cameras - size + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int k = i + 1; k < size; ++k) idx[k] = idx[k - 1] + 1;
    }
  }
  return out;
}

std::vector<int> samples_per_subset(int n_subsets, int n_states) {
  std::vector<int> out(static_cast<std::size_t>(n_subsets), n_states / n_subsets);
  for (int i = 0; i < n_states % n_subsets; ++i) ++out[i];
  return out;
}

JointStateSet sample_states(std::span<const JointView> views, SeededRandomSource& rng,
                            const SamplingParams& params,
                            const std::optional<Point3>& fallback) {
  JointStateSet set;
  set.subsets = enumerate_subsets(static_cast<int>(views.size()));
  std::vector<HeatmapPMF> pmfs;
  pmfs.reserve(views.size());
  for (const JointView& v : views) {
    set.cameras.push_back(v.camera->camera_id());
    pmfs.push_back(build_pmf(*v.heatmap, v.region));
  }
  if (!views.empty()) {
    set.joint_index = views.front().heatmap->joint_index;
    set.frame_index = views.front().heatmap->frame_index;
  }
  const auto counts = samples_per_subset(static_cast<int>(set.subsets.size()),
                                         params.n_states);
  set.states.reserve(static_cast<std::size_t>(params.n_states));
  std::vector<Ray> rays;
  for (std::size_t s = 0; s < set.subsets.size(); ++s) {
    const auto& subset = set.subsets[s];
    for (int k = 0; k < counts[s]; ++k) {
      std::optional<Triangulation> tri;
      for (int attempt = 0; attempt < params.max_attempts && !tri; ++attempt) {
        rays.clear();
        for (int cam : subset) {
          const PixelCoord px = sample_pixel(pmfs[cam], rng);
          rays.push_back(views[cam].camera->backproject(px));
        }
        try {
          tri = triangulate(rays);
        } catch (const DegenerateConfiguration&) {
        }
      }
      if (!tri) {
        ++set.fallback_count;
        if (fallback) {
          tri = Triangulation{*fallback, 0.0};
        } else if (!set.states.empty()) {
          tri = Triangulation{set.states.front(), set.residual_mm.front()};
        } else {
          throw DegenerateConfiguration(
              "sampling: every draw was degenerate and no fallback state exists");
        }
      }
      set.states.push_back(tri->point);
      set.residual_mm.push_back(tri->residual_mm);
      set.source_subset.push_back(static_cast<int>(s));
    }
  }
  return set;
}

std::string states_csv_header() {
  return "person_id,frame,joint,state_index,x,y,z,residual_mm\n";
}

std::string states_to_csv(const JointStateSet& set) {
  std::string out;
  char line[256];
  for (std::size_t i = 0; i < set.states.size(); ++i) {
    const Point3& p = set.states[i];
    std::snprintf(line, sizeof line, "%d,%d,%d,%zu,%.6f,%.6f,%.6f,%.6f\n", set.person_id,
                  set.frame_index, set.joint_index, i, p.x(), p.y(), p.z(),
                  set.residual_mm[i]);
    out += line;
  }
  return out;
}

}  // namespace posefuse
