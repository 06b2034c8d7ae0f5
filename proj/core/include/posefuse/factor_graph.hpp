#pragma once

#include "posefuse/geometry.hpp"

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace posefuse {

enum class FactorKind { data, temporal, collision };

const char* to_string(FactorKind kind);

/// A factor over 1-3 discrete variables. Its table is normalized to sum to
/// one; entries are floored before normalizing so they stay positive.
class Factor {
 public:
  Factor(FactorKind kind, std::vector<std::size_t> variables,
         std::vector<std::size_t> dims);
  virtual ~Factor() = default;

  FactorKind kind() const { return kind_; }
  std::span<const std::size_t> variables() const { return variables_; }
  std::span<const std::size_t> dims() const { return dims_; }
  std::size_t arity() const { return variables_.size(); }
  std::size_t table_size() const;

  /// Normalized table entry at one state index per variable.
  virtual double value(std::span<const std::size_t> states) const = 0;

  /// Sum-product messages to every variable of the factor given the
  /// variable-to-factor messages. Outputs are proportional to the exact
  /// messages of the normalized table; callers renormalize.
  virtual void messages(std::span<const std::span<const double>> incoming,
                        std::span<const std::span<double>> outgoing) const = 0;

  /// Temporal sweep placement: factors of one chain are visited in
  /// ascending `sweep_order` forward and descending backward.
  int sweep_chain = -1;
  int sweep_order = 0;

 private:
  FactorKind kind_;
  std::vector<std::size_t> variables_;
  std::vector<std::size_t> dims_;
};

/// Dense table, row major over the variables in order (last varies fastest).
class TableFactor : public Factor {
 public:
  /// Raw values are floored at `floor` and normalized to sum 1.
  static std::unique_ptr<TableFactor> from_raw(FactorKind kind,
                                               std::vector<std::size_t> variables,
                                               std::vector<std::size_t> dims,
                                               std::span<const double> raw,
                                               double floor);

  double value(std::span<const std::size_t> states) const override;
  void messages(std::span<const std::span<const double>> incoming,
                std::span<const std::span<double>> outgoing) const override;

  std::span<const double> values() const { return values_; }

 private:
  TableFactor(FactorKind kind, std::vector<std::size_t> variables,
              std::vector<std::size_t> dims, std::vector<double> values);

  std::vector<double> values_;
};

enum class TemporalKernel { gaussian, literal };

/// Constant-velocity ternary factor over (previous, current, next) states of
/// one joint:
///   raw = exp(-|s - mu|^2 / (2 sigma^2))   (gaussian)
///   raw = exp(-|s - mu|   / (2 sigma^2))   (literal, the printed form)
/// where mu = (1 - weight) * prev + weight * next is the expected position at the
/// current frame (weight 1/2 for evenly spaced frames). Entries are
/// max(raw, floor) / Z. The 64^3 table is evaluated on demand instead of
/// being stored.
class TemporalKernelFactor : public Factor {
 public:
  TemporalKernelFactor(std::size_t prev_var, std::size_t center_var, std::size_t next_var,
                       std::span<const Point3> prev, std::span<const Point3> center,
                       std::span<const Point3> next, double weight, double sigma_mm,
                       TemporalKernel kernel, double floor);

  double value(std::span<const std::size_t> states) const override;
  void messages(std::span<const std::span<const double>> incoming,
                std::span<const std::span<double>> outgoing) const override;

  /// max(raw, floor) before normalization.
  double floored(std::size_t prev, std::size_t center, std::size_t next) const;
  double normalizer() const;
  double sigma_mm() const { return sigma_; }
  double weight() const { return weight_; }

 private:
  struct Points {
    std::vector<double> x, y, z;
    explicit Points(std::span<const Point3> pts);
  };
  double kernel(double dist_sq) const;

  Points prev_, center_, next_;
  double weight_;
  double sigma_;
  double coeff_;        // 1 / (2 sigma^2)
  double cutoff_;       // exponent beyond which the floor always wins
  TemporalKernel kernel_type_;
  double floor_;
  mutable std::once_flag normalizer_once_;
  mutable double normalizer_ = 0.0;
};

/// Bipartite variable/factor graph.
class FactorGraph {
 public:
  struct Edge {
    std::size_t factor;
    std::size_t slot;
  };

  std::size_t add_variable(std::size_t n_states);
  /// Throws std::invalid_argument if the factor's dims do not match its variables.
  std::size_t add_factor(std::unique_ptr<Factor> factor);

  std::size_t n_variables() const { return n_states_.size(); }
  std::size_t n_factors() const { return factors_.size(); }
  std::size_t n_states(std::size_t var) const { return n_states_[var]; }
  const Factor& factor(std::size_t f) const { return *factors_[f]; }
  std::span<const Edge> edges_of(std::size_t var) const { return edges_[var]; }
  std::size_t count(FactorKind kind) const;

 private:
  std::vector<std::size_t> n_states_;
  std::vector<std::unique_ptr<Factor>> factors_;
  std::vector<std::vector<Edge>> edges_;
};

/// Full normalized table of a factor, row major. For tests and small graphs.
std::vector<double> materialize(const Factor& f);

}  // namespace posefuse
