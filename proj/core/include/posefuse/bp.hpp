#pragma once

#include "posefuse/crf.hpp"
#include "posefuse/factor_graph.hpp"
#include "posefuse/pose.hpp"

#include <string>
#include <vector>

namespace posefuse::bp {

struct Options {
  int iterations = 5;
  /// Weight kept from the previous message, in [0, 1). Unary factors are never damped.
  double damping = 0.0;
  /// Stop early once the max message change drops below this; 0 disables.
  double tolerance = 0.0;
};

/// Both directions of every factor-variable edge. Edge ids run over factors
/// in order, then over each factor's slots.
struct MessageStore {
  std::vector<std::size_t> first_edge;        // per factor
  std::vector<std::vector<double>> to_var;    // factor -> variable
  std::vector<std::vector<double>> to_factor; // variable -> factor

  std::size_t edge(std::size_t factor, std::size_t slot) const {
    return first_edge[factor] + slot;
  }
  std::size_t n_edges() const { return to_var.size(); }
};

/// Uniform messages on every edge.
MessageStore init_messages(const FactorGraph& graph);

/// One iteration: (a) data factors, (b) temporal factors chain by chain in
/// ascending then descending centre frame, (c) collision factors, (d) every
/// variable-to-factor message. Before a factor is updated in (b) and (c) its
/// incoming messages are recomputed from the current factor messages.
/// Returns the largest L-infinity change of any message updated.
/// Throws NumericalUnderflow when a message sums below 1e-300.
double sweep_iteration(const FactorGraph& graph, MessageStore& store,
                       const Options& options = {});

/// Normalized product of the incoming factor messages per variable. Unary
/// factors contribute their table directly, so a fresh store gives data-only
/// beliefs.
std::vector<std::vector<double>> beliefs(const FactorGraph& graph, const MessageStore& store);

struct Result {
  std::vector<std::vector<double>> beliefs;
  std::vector<double> max_change;  // per iteration run
};

Result run(const FactorGraph& graph, const Options& options = {});

/// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(const std::vector<double>& belief);

/// MAP state of every variable, one skeleton per frame the person has.
std::vector<Skeleton3D> select_map(const PersonCrf& crf,
                                   const std::vector<std::vector<double>>& beliefs,
                                   int n_joints);

/// Debug dump: per variable, the top_k states with their probabilities.
std::string beliefs_to_json(const PersonCrf& crf,
                            const std::vector<std::vector<double>>& beliefs, int top_k = 5);

}  // namespace posefuse::bp
