#include "posefuse/evaluation.hpp"

#include "posefuse/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <tuple>

namespace posefuse {

Skeleton3D apply_head_offset(Skeleton3D s, std::span<const int> head_joints, double dz_mm) {
  for (int j : head_joints) {
    if (s.has(j)) s.joints[static_cast<std::size_t>(j)]->z() += dz_mm;
  }
  return s;
}

bool limb_correct(const Point3& est_a, const Point3& est_b, const Point3& gt_a,
                  const Point3& gt_b, double alpha) {
  const double length = (gt_a - gt_b).norm();
  if (length < 1e-6) throw ZeroLengthLimb("ground-truth limb has zero length");
  const double limit = alpha * length;
  return (est_a - gt_a).norm() < limit && (est_b - gt_b).norm() < limit;
}

namespace {

double mean_joint_distance(const Skeleton3D& a, const Skeleton3D& b) {
  double total = 0.0;
  int n = 0;
  const std::size_t count = std::min(a.joints.size(), b.joints.size());
  for (std::size_t j = 0; j < count; ++j) {
    if (a.joints[j] && b.joints[j]) {
      total += (*a.joints[j] - *b.joints[j]).norm();
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::infinity() : total / n;
}

template <class F>
void for_each_frame(std::span<const Skeleton3D> estimates,
                    std::span<const Skeleton3D> ground_truth, F&& f) {
  std::map<int, std::vector<const Skeleton3D*>> est, gt;
  for (const auto& s : estimates) est[s.frame_index].push_back(&s);
  for (const auto& s : ground_truth) gt[s.frame_index].push_back(&s);
  for (auto& [frame, actors] : gt) {
    std::sort(actors.begin(), actors.end(),
              [](auto* a, auto* b) { return a->person_id < b->person_id; });
    auto it = est.find(frame);
    std::vector<const Skeleton3D*> people;
    if (it != est.end()) people = it->second;
    std::sort(people.begin(), people.end(),
              [](auto* a, auto* b) { return a->person_id < b->person_id; });

    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t g = 0; g < actors.size(); ++g) {
      for (std::size_t e = 0; e < people.size(); ++e) {
        const double d = mean_joint_distance(*actors[g], *people[e]);
        if (std::isfinite(d)) pairs.emplace_back(d, g, e);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<const Skeleton3D*> assigned(actors.size(), nullptr);
    std::vector<bool> used(people.size(), false);
    for (const auto& [d, g, e] : pairs) {
      if (assigned[g] || used[e]) continue;
      assigned[g] = people[e];
      used[e] = true;
    }
    for (std::size_t g = 0; g < actors.size(); ++g) f(frame, *actors[g], assigned[g]);
  }
}

}  // namespace

std::vector<IdentityMatch> match_identities(std::span<const Skeleton3D> estimates,
                                            std::span<const Skeleton3D> ground_truth) {
  std::vector<IdentityMatch> out;
  for_each_frame(estimates, ground_truth,
                 [&](int frame, const Skeleton3D& gt, const Skeleton3D* est) {
                   out.push_back({frame, gt.person_id, est ? est->person_id : -1});
                 });
  return out;
}

double PCPReport::Actor::percent(std::size_t part) const {
  if (total[part] == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * correct[part] / total[part];
}

double PCPReport::Actor::percent_all() const {
  int c = 0, t = 0;
  for (std::size_t k = 0; k < total.size(); ++k) {
    c += correct[k];
    t += total[k];
  }
  return t == 0 ? std::numeric_limits<double>::quiet_NaN() : 100.0 * c / t;
}

namespace {

template <class F>
double weighted(const std::vector<PCPReport::Actor>& actors, F&& pct) {
  double sum = 0.0, weight = 0.0;
  for (const auto& a : actors) {
    const double p = pct(a);
    if (std::isnan(p)) continue;
    sum += p * a.appearances;
    weight += a.appearances;
  }
  return weight == 0.0 ? std::numeric_limits<double>::quiet_NaN() : sum / weight;
}

std::string fmt_pct(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

double PCPReport::average(std::size_t part) const {
  return weighted(actors, [part](const Actor& a) { return a.percent(part); });
}

double PCPReport::average_all() const {
  return weighted(actors, [](const Actor& a) { return a.percent_all(); });
}

std::string PCPReport::to_csv() const {
  std::string out = "actor";
  for (const auto& p : part_classes) out += "," + p;
  out += ",All\n";
  for (const auto& a : actors) {
    out += std::to_string(a.actor_id);
    for (std::size_t k = 0; k < part_classes.size(); ++k) out += "," + fmt_pct(a.percent(k));
    out += "," + fmt_pct(a.percent_all()) + "\n";
  }
  out += "Average";
  for (std::size_t k = 0; k < part_classes.size(); ++k) out += "," + fmt_pct(average(k));
  out += "," + fmt_pct(average_all()) + "\n";
  return out;
}

std::string PCPReport::to_text() const {
  char buf[64];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-10s", "Part");
  out += buf;
  for (const auto& a : actors) {
    std::snprintf(buf, sizeof buf, "%10s", ("Actor " + std::to_string(a.actor_id)).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%10s\n", "Average");
  out += buf;
  auto row = [&](const std::string& name, auto&& pct, double avg) {
    std::snprintf(buf, sizeof buf, "%-10s", name.c_str());
    out += buf;
    for (const auto& a : actors) {
      std::snprintf(buf, sizeof buf, "%10s", fmt_pct(pct(a)).c_str());
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%10s\n", fmt_pct(avg).c_str());
    out += buf;
  };
  for (std::size_t k = 0; k < part_classes.size(); ++k) {
    row(part_classes[k], [k](const Actor& a) { return a.percent(k); }, average(k));
  }
  row("All", [](const Actor& a) { return a.percent_all(); }, average_all());
  return out;
}

PCPReport score(std::span<const Skeleton3D> estimates, std::span<const Skeleton3D> ground_truth,
                const BodyModel& body, const ScoreParams& params) {
  std::vector<Skeleton3D> shifted;
  shifted.reserve(estimates.size());
  for (const auto& s : estimates) {
    shifted.push_back(apply_head_offset(s, body.head_joints, params.head_offset_mm));
  }

  const std::size_t n_parts = body.part_classes.size();
  std::map<int, PCPReport::Actor> actors;
  std::map<int, int> matched_frames;
  for_each_frame(shifted, ground_truth,
                 [&](int, const Skeleton3D& gt, const Skeleton3D* est) {
                   auto& a = actors[gt.person_id];
                   if (a.total.empty()) {
                     a.actor_id = gt.person_id;
                     a.correct.assign(n_parts, 0);
                     a.total.assign(n_parts, 0);
                   }
                   ++a.appearances;
                   if (est) ++matched_frames[gt.person_id];
                   for (std::size_t l = 0; l < body.limbs.size(); ++l) {
                     const auto [ja, jb] = body.limbs[l];
                     if (!gt.has(ja) || !gt.has(jb)) continue;
                     const int part = body.limb_part[l];
                     ++a.total[part];
                     if (est && est->has(ja) && est->has(jb) &&
                         limb_correct(*est->joints[ja], *est->joints[jb], *gt.joints[ja],
                                      *gt.joints[jb], params.alpha)) {
                       ++a.correct[part];
                     }
                   }
                 });

  PCPReport report;
  report.part_classes = body.part_classes;
  for (auto& [id, a] : actors) {
    if (matched_frames[id] == 0) {
      throw NoOverlap("actor " + std::to_string(id) + " has no frame with an estimate");
    }
    report.actors.push_back(std::move(a));
  }
  return report;
}

}  // namespace posefuse
