#include "posefuse/association.hpp"

#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace posefuse {

int Skeleton2D::visible_count() const {
  return static_cast<int>(std::count_if(joints.begin(), joints.end(),
                                        [](const auto& j) { return j.has_value(); }));
}

BoundingBox bounding_box(const Skeleton2D& s, double padding) {
  BoundingBox box{std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  int visible = 0;
  for (const auto& j : s.joints) {
    if (!j) continue;
    ++visible;
    box.x_min = std::min(box.x_min, j->pixel.x());
    box.y_min = std::min(box.y_min, j->pixel.y());
    box.x_max = std::max(box.x_max, j->pixel.x());
    box.y_max = std::max(box.y_max, j->pixel.y());
  }
  if (visible < 2) throw DegenerateBox("bounding box needs two visible joints");
  const double diag = std::hypot(box.width(), box.height());
  if (diag <= 0.0) throw DegenerateBox("all visible joints coincide");
  const double pad = padding * diag;
  box.x_min -= pad;
  box.y_min -= pad;
  box.x_max += pad;
  box.y_max += pad;
  return box;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

TimeLink link_boxes(std::span<const std::optional<BoundingBox>> prev,
                    std::span<const std::optional<BoundingBox>> curr,
                    double iou_threshold) {
  struct Candidate {
    double score;
    std::size_t p;
    std::size_t c;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < prev.size(); ++p) {
    if (!prev[p]) continue;
    for (std::size_t c = 0; c < curr.size(); ++c) {
      if (!curr[c]) continue;
      const double score = iou(*prev[p], *curr[c]);
      if (score >= iou_threshold) candidates.push_back({score, p, c});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  TimeLink out;
  out.match.assign(curr.size(), -1);
  std::vector<bool> prev_used(prev.size(), false);
  for (const Candidate& cand : candidates) {
    if (prev_used[cand.p] || out.match[cand.c] >= 0) continue;
    prev_used[cand.p] = true;
    out.match[cand.c] = static_cast<int>(cand.p);
  }
  for (std::size_t c = 0; c < curr.size(); ++c) {
    if (out.match[c] < 0) out.new_identities.push_back(c);
  }
  return out;
}

namespace {

std::optional<BoundingBox> try_box(const Skeleton2D& s, double padding) {
  try {
    return bounding_box(s, padding);
  } catch (const DegenerateBox&) {
    return std::nullopt;
  }
}

}  // namespace

TimeLink link_time(std::span<const Skeleton2D> prev, std::span<const Skeleton2D> curr,
                   double iou_threshold, double box_padding) {
  std::vector<std::optional<BoundingBox>> pb, cb;
  for (const auto& s : prev) pb.push_back(try_box(s, box_padding));
  for (const auto& s : curr) cb.push_back(try_box(s, box_padding));
  return link_boxes(pb, cb, iou_threshold);
}

ViewLink measure_view_link(const Skeleton2D& a, const Skeleton2D& b,
                           const CameraCalibration& cam_a,
                           const CameraCalibration& cam_b,
                           const AssociationParams& params) {
  ViewLink out;
  double sum = 0.0;
  const std::size_t n = std::min(a.joints.size(), b.joints.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (!a.joints[j] || !b.joints[j]) continue;
    ++out.mutual_joints;
    sum += pairwise_ray_distance(cam_a.backproject(a.joints[j]->pixel),
                                 cam_b.backproject(b.joints[j]->pixel));
  }
  if (out.mutual_joints > 0) out.mean_distance_mm = sum / out.mutual_joints;
  out.linked = out.mutual_joints >= params.min_mutual_joints &&
               out.mean_distance_mm < params.ray_distance_mm;
  return out;
}

bool link_views(const Skeleton2D& a, const Skeleton2D& b,
                const CameraCalibration& cam_a, const CameraCalibration& cam_b,
                const AssociationParams& params) {
  return measure_view_link(a, b, cam_a, cam_b, params).linked;
}

std::vector<PersonTrack> prune_single_view(std::vector<PersonTrack> tracks, int frame) {
  for (auto& t : tracks) {
    auto it = t.frames.find(frame);
    if (it != t.frames.end() && it->second.size() < 2) t.frames.erase(it);
  }
  std::erase_if(tracks, [](const PersonTrack& t) { return t.frames.empty(); });
  return tracks;
}

Associator::Associator(std::vector<CameraCalibration> cameras, AssociationParams params)
    : cameras_(std::move(cameras)), params_(params), tracklets_(cameras_.size()) {}

void Associator::add_frame(int frame,
                           const std::map<std::string, std::vector<Skeleton2D>>& detections) {
  if (frame <= last_frame_) throw DataError("association: frames must increase");
  last_frame_ = frame;

  struct Node {
    std::size_t camera;
    const Skeleton2D* skeleton;
    BoundingBox box;
    std::size_t tracklet;
    bool continuing;
  };
  std::vector<Node> nodes;

  // Time linking, per camera.
  for (std::size_t c = 0; c < cameras_.size(); ++c) {
    auto& tracklets = tracklets_[c];
    std::erase_if(tracklets, [&](const Tracklet& t) {
      return frame - t.last_frame > params_.gap_max + 1;
    });
    const auto found = detections.find(cameras_[c].camera_id());
    if (found == detections.end()) continue;
    std::vector<const Skeleton2D*> current;
    std::vector<std::optional<BoundingBox>> curr_boxes;
    for (const auto& s : found->second) {
      auto box = try_box(s, params_.box_padding);
      if (!box) continue;
      current.push_back(&s);
      curr_boxes.push_back(box);
    }
    std::vector<std::optional<BoundingBox>> prev_boxes;
    for (const auto& t : tracklets) prev_boxes.emplace_back(t.box);
    const TimeLink link = link_boxes(prev_boxes, curr_boxes, params_.iou_threshold);
    for (std::size_t i = 0; i < current.size(); ++i) {
      Node node{c, current[i], *curr_boxes[i], 0, link.match[i] >= 0};
      if (node.continuing) {
        node.tracklet = static_cast<std::size_t>(link.match[i]);
      } else {
        tracklets.push_back(Tracklet{-1, node.box, frame});
        node.tracklet = tracklets.size() - 1;
      }
      nodes.push_back(node);
    }
  }

  // Cross-view clustering: ascending mean ray distance, one skeleton per
  // camera per cluster.
  struct Edge {
    double distance;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t k = i + 1; k < nodes.size(); ++k) {
      if (nodes[i].camera == nodes[k].camera) continue;
      const ViewLink v = measure_view_link(*nodes[i].skeleton, *nodes[k].skeleton,
                                           cameras_[nodes[i].camera],
                                           cameras_[nodes[k].camera], params_);
      if (v.linked) edges.push_back({v.mean_distance_mm, i, k});
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& x, const Edge& y) { return x.distance < y.distance; });
  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::vector<bool>> cams(nodes.size(),
                                      std::vector<bool>(cameras_.size(), false));
  for (std::size_t i = 0; i < nodes.size(); ++i) cams[i][nodes[i].camera] = true;
  auto root = [&parent](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (const Edge& e : edges) {
    std::size_t ra = root(e.a), rb = root(e.b);
    if (ra == rb) continue;
    bool overlap = false;
    for (std::size_t c = 0; c < cameras_.size(); ++c) overlap |= cams[ra][c] && cams[rb][c];
    if (overlap) continue;
    if (rb < ra) std::swap(ra, rb);
    parent[rb] = ra;
    for (std::size_t c = 0; c < cameras_.size(); ++c) cams[ra][c] = cams[ra][c] || cams[rb][c];
  }
  std::map<std::size_t, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < nodes.size(); ++i) clusters[root(i)].push_back(i);
  std::vector<std::vector<std::size_t>> ordered;
  for (auto& [r, members] : clusters) ordered.push_back(std::move(members));
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& x, const auto& y) { return x.size() > y.size(); });

  // Identity assignment.
  std::map<int, bool> claimed;
  for (const auto& members : ordered) {
    std::map<int, int> votes;
    for (std::size_t i : members) {
      const Node& n = nodes[i];
      const int person = tracklets_[n.camera][n.tracklet].person;
      if (n.continuing && person >= 0) ++votes[person];
    }
    int chosen = -1;
    int best = 0;
    for (const auto& [person, count] : votes) {
      if (claimed.count(person)) continue;
      if (count > best) {
        best = count;
        chosen = person;
      }
    }
    if (chosen < 0 && members.size() >= 2) chosen = next_person_++;
    if (chosen >= 0) claimed[chosen] = true;
    for (std::size_t i : members) {
      const Node& n = nodes[i];
      Tracklet& t = tracklets_[n.camera][n.tracklet];
      t.person = chosen;
      t.box = n.box;
      t.last_frame = frame;
      if (chosen >= 0) {
        PersonTrack& track = tracks_[chosen];
        track.person_id = chosen;
        track.frames[frame][cameras_[n.camera].camera_id()] = *n.skeleton;
      }
    }
  }
}

std::vector<PersonTrack> Associator::finish() const {
  std::vector<PersonTrack> out;
  for (const auto& [id, track] : tracks_) out.push_back(track);
  std::vector<int> frames;
  for (const auto& t : out)
    for (const auto& [f, _] : t.frames) frames.push_back(f);
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  for (int f : frames) out = prune_single_view(std::move(out), f);
  return out;
}

std::vector<Skeleton2D> parse_keypoint_file(const std::string& json_text,
                                            const CameraCalibration& camera,
                                            int frame_index, int n_joints,
                                            double margin) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("keypoints: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("keypoints: expected a JSON array");
  const double mx = margin * camera.image_width();
  const double my = margin * camera.image_height();
  std::vector<Skeleton2D> out;
  for (const auto& item : doc) {
    Skeleton2D s;
    s.camera_id = camera.camera_id();
    s.frame_index = frame_index;
    s.joints.resize(static_cast<std::size_t>(n_joints));
    const auto& joints = item.at("joints");
    if (!joints.is_array() || static_cast<int>(joints.size()) != n_joints) {
      throw DataError("keypoints: each skeleton needs " + std::to_string(n_joints) +
                      " joint entries");
    }
    for (int j = 0; j < n_joints; ++j) {
      const auto& v = joints[static_cast<std::size_t>(j)];
      if (v.is_null()) continue;
      if (!v.is_array() || v.size() != 3) {
        throw DataError("keypoints: joint entries are [x, y, conf] or null");
      }
      const double x = v[0].get<double>();
      const double y = v[1].get<double>();
      const double conf = v[2].get<double>();
      if (!std::isfinite(x) || !std::isfinite(y) || !(conf >= 0.0 && conf <= 1.0)) {
        throw DataError("keypoints: non-finite coordinate or confidence outside [0, 1]");
      }
      if (x < -mx || y < -my || x > camera.image_width() + mx ||
          y > camera.image_height() + my) {
        continue;
      }
      s.joints[static_cast<std::size_t>(j)] = Keypoint{PixelCoord(x, y), conf};
    }
    if (s.visible_count() > 0) out.push_back(std::move(s));
  }
  return out;
}

std::vector<Skeleton2D> load_keypoint_file(const std::string& path,
                                           const CameraCalibration& camera,
                                           int frame_index, int n_joints, double margin) {
  try {
    return parse_keypoint_file(read_text_file(path), camera, frame_index, n_joints, margin);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

namespace {

nlohmann::json skeleton_json(const Skeleton2D& s) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& j : s.joints) {
    if (j) {
      joints.push_back({j->pixel.x(), j->pixel.y(), j->confidence});
    } else {
      joints.push_back(nullptr);
    }
  }
  return {{"joints", joints}};
}

}  // namespace

void save_keypoint_file(const std::string& path, std::span<const Skeleton2D> skeletons) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& s : skeletons) doc.push_back(skeleton_json(s));
  write_text_file_atomic(path, doc.dump() + "\n");
}

std::string tracks_to_json(std::span<const PersonTrack> tracks) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& t : tracks) {
    nlohmann::json frames = nlohmann::json::object();
    for (const auto& [f, views] : t.frames) {
      nlohmann::json cams = nlohmann::json::object();
      for (const auto& [cam, s] : views) cams[cam] = skeleton_json(s);
      frames[std::to_string(f)] = cams;
    }
    doc.push_back({{"person_id", t.person_id}, {"frames", frames}});
  }
  return doc.dump(1) + "\n";
}

}  // namespace posefuse
