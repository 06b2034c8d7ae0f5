#include "posefuse/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace posefuse {

const char* to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::data: return "data";
    case FactorKind::temporal: return "temporal";
    case FactorKind::collision: return "collision";
  }
  return "unknown";
}

Factor::Factor(FactorKind kind, std::vector<std::size_t> variables,
               std::vector<std::size_t> dims)
    : kind_(kind), variables_(std::move(variables)), dims_(std::move(dims)) {
  if (variables_.empty() || variables_.size() > 3 || variables_.size() != dims_.size()) {
    throw std::invalid_argument("factor: arity must be 1-3 with one dim per variable");
  }
}

std::size_t Factor::table_size() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1},
                         std::multiplies<>());
}

TableFactor::TableFactor(FactorKind kind, std::vector<std::size_t> variables,
                         std::vector<std::size_t> dims, std::vector<double> values)
    : Factor(kind, std::move(variables), std::move(dims)), values_(std::move(values)) {}

std::unique_ptr<TableFactor> TableFactor::from_raw(FactorKind kind,
                                                   std::vector<std::size_t> variables,
                                                   std::vector<std::size_t> dims,
                                                   std::span<const double> raw,
                                                   double floor) {
  std::vector<double> values(raw.begin(), raw.end());
  double total = 0.0;
  for (double& v : values) {
    if (!(v >= 0.0)) throw std::invalid_argument("factor: negative or NaN entry");
    v = std::max(v, floor);
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("factor: table sums to zero");
  for (double& v : values) v /= total;
  auto f = std::unique_ptr<TableFactor>(
      new TableFactor(kind, std::move(variables), std::move(dims), std::move(values)));
  if (f->values_.size() != f->table_size()) {
    throw std::invalid_argument("factor: table size does not match dims");
  }
  return f;
}

double TableFactor::value(std::span<const std::size_t> states) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < arity(); ++k) idx = idx * dims()[k] + states[k];
  return values_[idx];
}

void TableFactor::messages(std::span<const std::span<const double>> incoming,
                           std::span<const std::span<double>> outgoing) const {
  for (auto out : outgoing) std::fill(out.begin(), out.end(), 0.0);
  const auto d = dims();
  switch (arity()) {
    case 1:
      for (std::size_t a = 0; a < d[0]; ++a) outgoing[0][a] = values_[a];
      break;
    case 2: {
      const double* t = values_.data();
      for (std::size_t a = 0; a < d[0]; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < d[1]; ++b, ++t) {
          acc += *t * incoming[1][b];
          outgoing[1][b] += *t * incoming[0][a];
        }
        outgoing[0][a] = acc;
      }
      break;
    }
    case 3: {
      const double* t = values_.data();
      for (std::size_t a = 0; a < d[0]; ++a) {
        for (std::size_t b = 0; b < d[1]; ++b) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d[2]; ++c, ++t) {
            acc += *t * incoming[2][c];
            outgoing[2][c] += *t * incoming[0][a] * incoming[1][b];
          }
          outgoing[0][a] += acc * incoming[1][b];
          outgoing[1][b] += acc * incoming[0][a];
        }
      }
      break;
    }
  }
}

TemporalKernelFactor::Points::Points(std::span<const Point3> pts) {
  x.reserve(pts.size());
  y.reserve(pts.size());
  z.reserve(pts.size());
  for (const Point3& p : pts) {
    x.push_back(p.x());
    y.push_back(p.y());
    z.push_back(p.z());
  }
}

TemporalKernelFactor::TemporalKernelFactor(std::size_t prev_var, std::size_t center_var,
                                           std::size_t next_var,
                                           std::span<const Point3> prev,
                                           std::span<const Point3> center,
                                           std::span<const Point3> next, double weight,
                                           double sigma_mm, TemporalKernel kernel,
                                           double floor)
    : Factor(FactorKind::temporal, {prev_var, center_var, next_var},
             {prev.size(), center.size(), next.size()}),
      prev_(prev),
      center_(center),
      next_(next),
      weight_(weight),
      sigma_(sigma_mm),
      coeff_(1.0 / (2.0 * sigma_mm * sigma_mm)),
      kernel_type_(kernel),
      floor_(floor) {
  if (!(sigma_mm > 0.0)) throw std::invalid_argument("temporal factor: sigma must be > 0");
  cutoff_ = floor > 0.0 ? -std::log(floor) * (1.0 + 1e-12) + 1e-12
                        : std::numeric_limits<double>::infinity();
}

double TemporalKernelFactor::kernel(double dist_sq) const {
  const double a = (kernel_type_ == TemporalKernel::gaussian ? dist_sq : std::sqrt(dist_sq)) *
                   coeff_;
  if (a > cutoff_) return floor_;
  return std::max(std::exp(-a), floor_);
}

double TemporalKernelFactor::floored(std::size_t p, std::size_t s, std::size_t n) const {
  const double mx = (1.0 - weight_) * prev_.x[p] + weight_ * next_.x[n];
  const double my = (1.0 - weight_) * prev_.y[p] + weight_ * next_.y[n];
  const double mz = (1.0 - weight_) * prev_.z[p] + weight_ * next_.z[n];
  const double dx = center_.x[s] - mx;
  const double dy = center_.y[s] - my;
  const double dz = center_.z[s] - mz;
  return kernel(dx * dx + dy * dy + dz * dz);
}

double TemporalKernelFactor::normalizer() const {
  std::call_once(normalizer_once_, [this] {
    double total = 0.0;
    const auto d = dims();
    for (std::size_t p = 0; p < d[0]; ++p)
      for (std::size_t s = 0; s < d[1]; ++s)
        for (std::size_t n = 0; n < d[2]; ++n) total += floored(p, s, n);
    normalizer_ = total;
  });
  return normalizer_;
}

double TemporalKernelFactor::value(std::span<const std::size_t> states) const {
  return floored(states[0], states[1], states[2]) / normalizer();
}

void TemporalKernelFactor::messages(std::span<const std::span<const double>> incoming,
                                    std::span<const std::span<double>> outgoing) const {
  const auto d = dims();
  const std::size_t np = d[0], ns = d[1], nn = d[2];
  const double* in_p = incoming[0].data();
  const double* in_s = incoming[1].data();
  const double* in_n = incoming[2].data();
  double* out_p = outgoing[0].data();
  double* out_s = outgoing[1].data();
  double* out_n = outgoing[2].data();
  std::fill(out_p, out_p + np, 0.0);
  std::fill(out_s, out_s + ns, 0.0);
  std::fill(out_n, out_n + nn, 0.0);
  const double* sx = center_.x.data();
  const double* sy = center_.y.data();
  const double* sz = center_.z.data();
  // One pass over the table feeds all three messages.
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t n = 0; n < nn; ++n) {
      const double mx = (1.0 - weight_) * prev_.x[p] + weight_ * next_.x[n];
      const double my = (1.0 - weight_) * prev_.y[p] + weight_ * next_.y[n];
      const double mz = (1.0 - weight_) * prev_.z[p] + weight_ * next_.z[n];
      const double w_pn = in_p[p] * in_n[n];
      double acc = 0.0;
      for (std::size_t s = 0; s < ns; ++s) {
        const double dx = sx[s] - mx;
        const double dy = sy[s] - my;
        const double dz = sz[s] - mz;
        const double g = kernel(dx * dx + dy * dy + dz * dz);
        out_s[s] += g * w_pn;
        acc += g * in_s[s];
      }
      out_p[p] += acc * in_n[n];
      out_n[n] += acc * in_p[p];
    }
  }
}

std::size_t FactorGraph::add_variable(std::size_t n_states) {
  if (n_states == 0) throw std::invalid_argument("variable needs at least one state");
  n_states_.push_back(n_states);
  edges_.emplace_back();
  return n_states_.size() - 1;
}

std::size_t FactorGraph::add_factor(std::unique_ptr<Factor> factor) {
  const auto vars = factor->variables();
  for (std::size_t k = 0; k < vars.size(); ++k) {
    if (vars[k] >= n_states_.size() || factor->dims()[k] != n_states_[vars[k]]) {
      throw std::invalid_argument("factor: variable missing or state count mismatch");
    }
  }
  const std::size_t id = factors_.size();
  for (std::size_t k = 0; k < vars.size(); ++k) edges_[vars[k]].push_back({id, k});
  factors_.push_back(std::move(factor));
  return id;
}

std::size_t FactorGraph::count(FactorKind kind) const {
  std::size_t n = 0;
  for (const auto& f : factors_) n += f->kind() == kind;
  return n;
}

std::vector<double> materialize(const Factor& f) {
  std::vector<double> out(f.table_size());
  std::vector<std::size_t> idx(f.arity(), 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = f.value(idx);
    for (std::size_t k = f.arity(); k-- > 0;) {
      if (++idx[k] < f.dims()[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace posefuse
