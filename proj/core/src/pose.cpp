#include "posefuse/pose.hpp"

#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace posefuse {

std::string skeletons_to_json(std::span<const Skeleton3D> skeletons) {
  std::map<int, std::map<int, const Skeleton3D*>> by_frame;
  for (const auto& s : skeletons) by_frame[s.frame_index][s.person_id] = &s;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& [frame, people] : by_frame) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [id, s] : people) {
      nlohmann::json joints = nlohmann::json::array();
      for (const auto& j : s->joints) {
        if (j) {
          joints.push_back({j->x(), j->y(), j->z()});
        } else {
          joints.push_back(nullptr);
        }
      }
      list.push_back({{"id", id}, {"joints", joints}});
    }
    frames.push_back({{"frame", frame}, {"people", list}});
  }
  nlohmann::json doc = {{"frames", frames}};
  return doc.dump() + "\n";
}

std::vector<Skeleton3D> skeletons_from_json(const std::string& text, int n_joints) {
  std::vector<Skeleton3D> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& f : doc.at("frames")) {
      const int frame = f.at("frame").get<int>();
      for (const auto& p : f.at("people")) {
        Skeleton3D s;
        s.frame_index = frame;
        s.person_id = p.at("id").get<int>();
        const auto& joints = p.at("joints");
        if (static_cast<int>(joints.size()) != n_joints) {
          throw DataError("skeletons: expected " + std::to_string(n_joints) +
                          " joints, got " + std::to_string(joints.size()));
        }
        for (const auto& j : joints) {
          if (j.is_null()) {
            s.joints.emplace_back();
            continue;
          }
          const Point3 pt(j.at(0).get<double>(), j.at(1).get<double>(),
                          j.at(2).get<double>());
          if (!pt.allFinite()) throw DataError("skeletons: non-finite joint");
          s.joints.emplace_back(pt);
        }
        out.push_back(std::move(s));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("skeletons: ") + e.what());
  }
  return out;
}

std::vector<Skeleton3D> load_skeletons(const std::string& path, int n_joints) {
  try {
    return skeletons_from_json(read_text_file(path), n_joints);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_skeletons(const std::string& path, std::span<const Skeleton3D> skeletons) {
  write_text_file_atomic(path, skeletons_to_json(skeletons));
}

}  // namespace posefuse
