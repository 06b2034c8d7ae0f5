#include "posefuse/bp.hpp"

#include "posefuse/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace posefuse::bp {

namespace {

constexpr double kUnderflow = 1e-300;

void normalize(std::span<double> m, const char* what) {
  double total = 0.0;
  for (double v : m) total += v;
  if (!(total >= kUnderflow)) {
    throw NumericalUnderflow(std::string("belief propagation: ") + what +
                             " message sums to " + std::to_string(total));
  }
  const double inv = 1.0 / total;
  for (double& v : m) v *= inv;
}

// Product of the messages reaching `var` from every factor except `skip`,
// written into `out` and normalized.
void variable_product(const FactorGraph& graph, const MessageStore& store, std::size_t var,
                      std::size_t skip, std::span<double> out) {
  std::fill(out.begin(), out.end(), 1.0);
  for (const auto& e : graph.edges_of(var)) {
    if (e.factor == skip) continue;
    const Factor& f = graph.factor(e.factor);
    if (f.arity() == 1) {
      // A unary message never depends on its input; read the table itself.
      for (std::size_t s = 0; s < out.size(); ++s) {
        const std::size_t idx[1] = {s};
        out[s] *= f.value(idx);
      }
    } else {
      const auto& m = store.to_var[store.edge(e.factor, e.slot)];
      for (std::size_t s = 0; s < out.size(); ++s) out[s] *= m[s];
    }
    // Keep the running product in range on high-degree variables.
    double peak = *std::max_element(out.begin(), out.end());
    if (peak > 0.0 && peak < 1e-100) {
      for (double& v : out) v /= peak;
    }
  }
  normalize(out, "variable-to-factor");
}

class Updater {
 public:
  Updater(const FactorGraph& graph, MessageStore& store, const Options& options)
      : graph_(graph), store_(store), options_(options) {}

  double max_change() const { return max_change_; }

  void refresh_incoming(std::size_t fi) {
    const Factor& f = graph_.factor(fi);
    for (std::size_t k = 0; k < f.arity(); ++k) {
      auto& m = store_.to_factor[store_.edge(fi, k)];
      variable_product(graph_, store_, f.variables()[k], fi, m);
    }
  }

  void update_factor(std::size_t fi) {
    const Factor& f = graph_.factor(fi);
    const std::size_t arity = f.arity();
    std::span<const double> in[3];
    std::span<double> out[3];
    for (std::size_t k = 0; k < arity; ++k) {
      in[k] = store_.to_factor[store_.edge(fi, k)];
      scratch_[k].assign(f.dims()[k], 0.0);
      out[k] = scratch_[k];
    }
    f.messages(std::span(in, arity), std::span(out, arity));
    const double keep = arity == 1 ? 0.0 : options_.damping;
    for (std::size_t k = 0; k < arity; ++k) {
      normalize(out[k], "factor-to-variable");
      auto& stored = store_.to_var[store_.edge(fi, k)];
      if (keep > 0.0) {
        for (std::size_t s = 0; s < stored.size(); ++s) {
          out[k][s] = (1.0 - keep) * out[k][s] + keep * stored[s];
        }
        normalize(out[k], "factor-to-variable");
      }
      record(stored, out[k]);
      std::copy(out[k].begin(), out[k].end(), stored.begin());
    }
  }

  void update_variable_messages() {
    for (std::size_t fi = 0; fi < graph_.n_factors(); ++fi) {
      const Factor& f = graph_.factor(fi);
      for (std::size_t k = 0; k < f.arity(); ++k) {
        auto& stored = store_.to_factor[store_.edge(fi, k)];
        scratch_[0].assign(stored.size(), 0.0);
        variable_product(graph_, store_, f.variables()[k], fi, scratch_[0]);
        record(stored, scratch_[0]);
        stored = scratch_[0];
      }
    }
  }

 private:
  void record(std::span<const double> before, std::span<const double> after) {
    for (std::size_t s = 0; s < before.size(); ++s) {
      max_change_ = std::max(max_change_, std::abs(after[s] - before[s]));
    }
  }

  const FactorGraph& graph_;
  MessageStore& store_;
  const Options& options_;
  std::vector<double> scratch_[3];
  double max_change_ = 0.0;
};

}  // namespace

MessageStore init_messages(const FactorGraph& graph) {
  MessageStore store;
  store.first_edge.reserve(graph.n_factors());
  for (std::size_t fi = 0; fi < graph.n_factors(); ++fi) {
    const Factor& f = graph.factor(fi);
    store.first_edge.push_back(store.to_var.size());
    for (std::size_t k = 0; k < f.arity(); ++k) {
      const std::size_t n = f.dims()[k];
      store.to_var.emplace_back(n, 1.0 / static_cast<double>(n));
      store.to_factor.emplace_back(n, 1.0 / static_cast<double>(n));
    }
  }
  return store;
}

double sweep_iteration(const FactorGraph& graph, MessageStore& store, const Options& options) {
  Updater up(graph, store, options);
  std::map<int, std::vector<std::size_t>> chains;
  std::vector<std::size_t> collisions;
  for (std::size_t fi = 0; fi < graph.n_factors(); ++fi) {
    const Factor& f = graph.factor(fi);
    switch (f.kind()) {
      case FactorKind::data:
        up.update_factor(fi);  // (a)
        break;
      case FactorKind::temporal:
        chains[f.sweep_chain].push_back(fi);
        break;
      case FactorKind::collision:
        collisions.push_back(fi);
        break;
    }
  }
  // (b) forward then backward through each chain.
  for (auto& [chain, factors] : chains) {
    std::stable_sort(factors.begin(), factors.end(), [&](std::size_t a, std::size_t b) {
      return graph.factor(a).sweep_order < graph.factor(b).sweep_order;
    });
    for (std::size_t fi : factors) {
      up.refresh_incoming(fi);
      up.update_factor(fi);
    }
    for (auto it = factors.rbegin(); it != factors.rend(); ++it) {
      up.refresh_incoming(*it);
      up.update_factor(*it);
    }
  }
  // (c)
  for (std::size_t fi : collisions) {
    up.refresh_incoming(fi);
    up.update_factor(fi);
  }
  // (d)
  up.update_variable_messages();
  return up.max_change();
}

std::vector<std::vector<double>> beliefs(const FactorGraph& graph, const MessageStore& store) {
  std::vector<std::vector<double>> out(graph.n_variables());
  for (std::size_t v = 0; v < graph.n_variables(); ++v) {
    out[v].assign(graph.n_states(v), 0.0);
    variable_product(graph, store, v, graph.n_factors(), out[v]);
  }
  return out;
}

Result run(const FactorGraph& graph, const Options& options) {
  MessageStore store = init_messages(graph);
  Result result;
  for (int it = 0; it < options.iterations; ++it) {
    result.max_change.push_back(sweep_iteration(graph, store, options));
    if (options.tolerance > 0.0 && result.max_change.back() < options.tolerance) break;
  }
  result.beliefs = beliefs(graph, store);
  return result;
}

std::size_t argmax(const std::vector<double>& belief) {
  std::size_t best = 0;
  for (std::size_t s = 1; s < belief.size(); ++s) {
    if (belief[s] > belief[best]) best = s;
  }
  return best;
}

std::vector<Skeleton3D> select_map(const PersonCrf& crf,
                                   const std::vector<std::vector<double>>& beliefs,
                                   int n_joints) {
  std::map<int, Skeleton3D> frames;
  for (std::size_t v = 0; v < crf.variables.size(); ++v) {
    const auto& var = crf.variables[v];
    Skeleton3D& s = frames[var.frame];
    if (s.joints.empty()) {
      s.person_id = crf.person_id;
      s.frame_index = var.frame;
      s.joints.resize(static_cast<std::size_t>(n_joints));
    }
    s.joints[static_cast<std::size_t>(var.joint)] =
        crf.state_sets[var.state_set].states[argmax(beliefs[v])];
  }
  std::vector<Skeleton3D> out;
  out.reserve(frames.size());
  for (auto& [frame, s] : frames) out.push_back(std::move(s));
  return out;
}

std::string beliefs_to_json(const PersonCrf& crf,
                            const std::vector<std::vector<double>>& beliefs, int top_k) {
  nlohmann::json vars = nlohmann::json::array();
  for (std::size_t v = 0; v < crf.variables.size(); ++v) {
    const auto& var = crf.variables[v];
    const auto& states = crf.state_sets[var.state_set].states;
    std::vector<std::size_t> order(beliefs[v].size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return beliefs[v][a] > beliefs[v][b] ||
                               (beliefs[v][a] == beliefs[v][b] && a < b);
                      });
    nlohmann::json top = nlohmann::json::array();
    for (std::size_t i = 0; i < k; ++i) {
      const Point3& p = states[order[i]];
      top.push_back({{"state", order[i]},
                     {"p", beliefs[v][order[i]]},
                     {"xyz", {p.x(), p.y(), p.z()}}});
    }
    vars.push_back({{"joint", var.joint}, {"frame", var.frame}, {"top", top}});
  }
  nlohmann::json doc = {{"person_id", crf.person_id}, {"variables", vars}};
  return doc.dump(1) + "\n";
}

}  // namespace posefuse::bp
