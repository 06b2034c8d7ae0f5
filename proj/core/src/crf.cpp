#include "posefuse/crf.hpp"

#include "posefuse/error.hpp"
#include "posefuse/io_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace posefuse {

void CRFParams::validate() const {
  if (!(sigma_temp_mm > 0.0)) throw ConfigError("crf: sigma_temp_mm must be > 0");
  if (!(theta2 > 0.0)) throw ConfigError("crf: theta2 must be > 0");
  if (!(collision_unit_mm > 0.0)) throw ConfigError("crf: collision_unit_mm must be > 0");
  if (!(epsilon_floor > 0.0) || !(epsilon_floor < 1.0)) {
    throw ConfigError("crf: epsilon_floor must be in (0, 1)");
  }
  if (!std::isfinite(theta1)) throw ConfigError("crf: theta1 must be finite");
}

double eval_data(const Point3& state, std::span<const JointView> views,
                 double epsilon_floor) {
  if (views.empty()) return epsilon_floor;
  double total = 0.0;
  for (const JointView& v : views) {
    try {
      total += v.heatmap->value_at(v.camera->project(state));
    } catch (const DegenerateProjection&) {
      total += kHeatmapFloor;
    }
  }
  return std::max(total / static_cast<double>(views.size()), epsilon_floor);
}

double eval_temporal(const Point3& s, const Point3& prev, const Point3& next,
                     double weight, double sigma_mm, TemporalKernel kernel) {
  const Point3 mu = (1.0 - weight) * prev + weight * next;
  const double d2 = (s - mu).squaredNorm();
  const double d = kernel == TemporalKernel::gaussian ? d2 : std::sqrt(d2);
  return std::exp(-d / (2.0 * sigma_mm * sigma_mm));
}

double eval_temporal(const Point3& s, const Point3& prev, const Point3& next,
                     const CRFParams& params) {
  return eval_temporal(s, prev, next, 0.5, params.sigma_temp_mm, params.temporal_kernel);
}

double eval_collision(const Point3& a, const Point3& b, const CRFParams& params) {
  const double d = (a - b).norm() / params.collision_unit_mm;
  return 1.0 / (1.0 + std::exp(params.theta1 - params.theta2 * d));
}

void score_states(JointStateSet& set, std::span<const JointView> views,
                  const CRFParams& params) {
  set.data_values.resize(set.states.size());
  for (std::size_t i = 0; i < set.states.size(); ++i) {
    set.data_values[i] = eval_data(set.states[i], views, params.epsilon_floor);
  }
}

int PersonCrf::variable_of(int joint, int frame) const {
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (variables[v].joint == joint && variables[v].frame == frame) {
      return static_cast<int>(v);
    }
  }
  return -1;
}

PersonCrf build_graph(int person_id, std::vector<JointStateSet> state_sets,
                      const BodyModel& body, const CRFParams& params,
                      const FactorToggles& toggles) {
  if (state_sets.empty()) {
    throw EmptyTrack("person " + std::to_string(person_id) + ": no joint-frames to optimize");
  }
  params.validate();
  std::sort(state_sets.begin(), state_sets.end(), [](const auto& a, const auto& b) {
    return std::tie(a.joint_index, a.frame_index) < std::tie(b.joint_index, b.frame_index);
  });

  PersonCrf crf;
  crf.person_id = person_id;
  crf.state_sets = std::move(state_sets);
  const double floor = params.epsilon_floor;

  // joint -> frame -> variable
  std::map<int, std::map<int, std::size_t>> lookup;
  for (std::size_t i = 0; i < crf.state_sets.size(); ++i) {
    const JointStateSet& set = crf.state_sets[i];
    if (set.states.empty()) continue;
    if (set.data_values.size() != set.states.size()) {
      throw std::invalid_argument("build_graph: state set was not scored");
    }
    const std::size_t v = crf.graph.add_variable(set.states.size());
    crf.variables.push_back({set.joint_index, set.frame_index, i});
    lookup[set.joint_index][set.frame_index] = v;
    crf.graph.add_factor(TableFactor::from_raw(FactorKind::data, {v}, {set.states.size()},
                                               set.data_values, floor));
  }
  if (crf.variables.empty()) {
    throw EmptyTrack("person " + std::to_string(person_id) + ": no joint-frames to optimize");
  }
  auto states_of = [&](std::size_t v) -> const std::vector<Point3>& {
    return crf.state_sets[crf.variables[v].state_set].states;
  };

  if (toggles.temporal) {
    for (const auto& [joint, frames] : lookup) {
      std::vector<std::pair<int, std::size_t>> chain(frames.begin(), frames.end());
      for (std::size_t k = 1; k + 1 < chain.size(); ++k) {
        const auto [f0, v0] = chain[k - 1];
        const auto [f1, v1] = chain[k];
        const auto [f2, v2] = chain[k + 1];
        const double weight = static_cast<double>(f1 - f0) / static_cast<double>(f2 - f0);
        const double sigma =
            params.sigma_temp_mm * std::sqrt(static_cast<double>(std::max(f1 - f0, f2 - f1)));
        auto f = std::make_unique<TemporalKernelFactor>(v0, v1, v2, states_of(v0),
                                                        states_of(v1), states_of(v2), weight,
                                                        sigma, params.temporal_kernel, floor);
        f->sweep_chain = joint;
        f->sweep_order = f1;
        crf.graph.add_factor(std::move(f));
      }
    }
  }

  if (toggles.collision) {
    std::vector<double> raw;
    for (const auto& [l, r] : body.collision_pairs) {
      auto li = lookup.find(l);
      auto ri = lookup.find(r);
      if (li == lookup.end() || ri == lookup.end()) continue;
      for (const auto& [frame, vl] : li->second) {
        auto it = ri->second.find(frame);
        if (it == ri->second.end()) continue;
        const std::size_t vr = it->second;
        const auto& sl = states_of(vl);
        const auto& sr = states_of(vr);
        raw.resize(sl.size() * sr.size());
        for (std::size_t a = 0; a < sl.size(); ++a) {
          for (std::size_t b = 0; b < sr.size(); ++b) {
            raw[a * sr.size() + b] = eval_collision(sl[a], sr[b], params);
          }
        }
        crf.graph.add_factor(TableFactor::from_raw(FactorKind::collision, {vl, vr},
                                                   {sl.size(), sr.size()}, raw, floor));
      }
    }
  }
  return crf;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("model file: " + key + " is not a number: '" + value + "'");
  }
  return out;
}

}  // namespace

ModelConfig parse_model_file(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("model file line " + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }

  ModelConfig cfg;
  BodyModel& body = cfg.body;
  auto take = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  if (auto v = take("joints")) {
    body.joints = split_list(*v);
    // A new layout invalidates the default topology unless it is restated.
    if (!take("limbs") || !take("limb_parts")) {
      throw ConfigError("model file: a custom joint list needs limbs and limb_parts");
    }
    body.collision_pairs.clear();
    body.head_joints.clear();
  }
  auto joint_of = [&](const std::string& name) {
    const int j = body.joint_index(name);
    if (j < 0) throw ConfigError("model file: unknown joint '" + name + "'");
    return j;
  };
  auto pairs_of = [&](const std::string& list) {
    std::vector<JointPair> out;
    for (const auto& item : split_list(list)) {
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        throw ConfigError("model file: pair '" + item + "' must be written a-b");
      }
      out.emplace_back(joint_of(trim(item.substr(0, dash))), joint_of(trim(item.substr(dash + 1))));
    }
    return out;
  };
  if (auto v = take("part_classes")) body.part_classes = split_list(*v);
  if (auto v = take("limbs")) body.limbs = pairs_of(*v);
  if (auto v = take("limb_parts")) {
    body.limb_part.clear();
    for (const auto& name : split_list(*v)) {
      auto it = std::find(body.part_classes.begin(), body.part_classes.end(), name);
      if (it == body.part_classes.end()) {
        throw ConfigError("model file: unknown part class '" + name + "'");
      }
      body.limb_part.push_back(static_cast<int>(it - body.part_classes.begin()));
    }
  }
  if (auto v = take("collision_pairs")) body.collision_pairs = pairs_of(*v);
  if (auto v = take("head_joints")) {
    body.head_joints.clear();
    for (const auto& name : split_list(*v)) body.head_joints.push_back(joint_of(name));
  }

  CRFParams& p = cfg.crf;
  if (auto v = take("sigma_temp_mm")) p.sigma_temp_mm = parse_number("sigma_temp_mm", *v);
  if (auto v = take("theta1")) p.theta1 = parse_number("theta1", *v);
  if (auto v = take("theta2")) p.theta2 = parse_number("theta2", *v);
  if (auto v = take("collision_unit_mm")) {
    p.collision_unit_mm = parse_number("collision_unit_mm", *v);
  }
  if (auto v = take("epsilon_floor")) p.epsilon_floor = parse_number("epsilon_floor", *v);
  if (auto v = take("temporal_kernel")) {
    if (*v == "gaussian") {
      p.temporal_kernel = TemporalKernel::gaussian;
    } else if (*v == "literal") {
      p.temporal_kernel = TemporalKernel::literal;
    } else {
      throw ConfigError("model file: temporal_kernel must be gaussian or literal");
    }
  }

  static const char* known[] = {"joints",        "limbs",         "limb_parts",
                                "part_classes",  "collision_pairs", "head_joints",
                                "sigma_temp_mm", "theta1",        "theta2",
                                "collision_unit_mm", "epsilon_floor", "temporal_kernel"};
  for (const auto& [key, value] : kv) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("model file: unknown key '" + key + "'");
    }
  }
  body.validate();
  p.validate();
  return cfg;
}

ModelConfig load_model_file(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_model_file(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace posefuse
