#pragma once

// The three aggregation models compared by the benchmark:
//
//   naive grid   f = sum_j grid(x_j - x_i)          fitted on K=1 flights
//   learnt linear f = sum_j psi(x_j - x_i)          trained on any K
//   deep set      f = Phi( sum_j phi(x_j - x_i) )   trained on any K
//
// Neighbours are always visited in canonical order, so every prediction is
// bitwise independent of the order neighbours are listed in.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "downwash/core.hpp"
#include "downwash/formations.hpp"
#include "downwash/mlp.hpp"
#include "downwash/rng.hpp"

namespace downwash {

using Features = std::array<double, 6>;
using Metadata = std::map<std::string, std::string>;

/// Fixed affine pre/post scaling around the networks. Inputs are multiplied
/// by input_scale; network outputs are multiplied by output_scale.
struct IoScaling {
  Features input_scale = {5.0, 5.0, 5.0, 2.0, 2.0, 2.0};
  std::array<double, 6> output_scale = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<double, 6> loss_weights = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

  friend bool operator==(const IoScaling&, const IoScaling&) = default;
};

struct LinearAggModel {
  Mlp psi;
  IoScaling scaling;
  Metadata metadata;

  static LinearAggModel create(std::size_t hidden, std::size_t depth, Rng& rng) {
    std::vector<std::size_t> dims = {6};
    for (std::size_t i = 0; i < depth; ++i) dims.push_back(hidden);
    dims.push_back(6);
    return {Mlp::uniform_init(dims, rng), {}, {}};
  }

  void validate() const {
    if (psi.input_dim() != 6 || psi.output_dim() != 6) {
      throw std::invalid_argument("LinearAggModel: psi must map R^6 -> R^6");
    }
  }
};

struct DeepSetModel {
  Mlp phi;
  Mlp big_phi;
  IoScaling scaling;
  Metadata metadata;

  /// phi: [6, hidden x phi_depth, embed], Phi: [embed, hidden x rho_depth, 6].
  static DeepSetModel create(std::size_t hidden, std::size_t embed, std::size_t phi_depth,
                             std::size_t rho_depth, Rng& rng) {
    std::vector<std::size_t> phi_dims = {6};
    for (std::size_t i = 0; i < phi_depth; ++i) phi_dims.push_back(hidden);
    phi_dims.push_back(embed);
    std::vector<std::size_t> rho_dims = {embed};
    for (std::size_t i = 0; i < rho_depth; ++i) rho_dims.push_back(hidden);
    rho_dims.push_back(6);
    auto phi = Mlp::uniform_init(phi_dims, rng);
    auto rho = Mlp::uniform_init(rho_dims, rng);
    return {std::move(phi), std::move(rho), {}, {}};
  }

  std::size_t embedding_dim() const { return phi.output_dim(); }

  void validate() const {
    if (phi.input_dim() != 6 || big_phi.output_dim() != 6 ||
        phi.output_dim() != big_phi.input_dim()) {
      throw std::invalid_argument("DeepSetModel: phi/Phi dimensions do not chain");
    }
  }
};

// ---------------------------------------------------------------------------
// Ragged set batches

/// One training example: canonical neighbour features and a target wrench.
struct SetSample {
  std::vector<Features> neighbours;
  std::array<double, 6> target{};
};

inline std::vector<Features> canonical_features(const FormationSnapshot& snap) {
  std::vector<Features> out;
  for (const auto& rel : canonical_relative_states(snap)) out.push_back(rel.features());
  return out;
}

inline SetSample make_sample(const FormationSnapshot& snap, const Wrench6& target) {
  return {canonical_features(snap), target.to_array()};
}

/// Neighbour features of B samples stacked column-wise; sample b owns
/// columns [offsets[b], offsets[b + 1]).
struct SetBatch {
  Eigen::MatrixXd features;
  std::vector<Eigen::Index> offsets;
  Eigen::MatrixXd targets;  // 6 x B

  Eigen::Index size() const { return static_cast<Eigen::Index>(offsets.size()) - 1; }
};

inline SetBatch make_batch(std::span<const SetSample> samples,
                           std::span<const std::size_t> indices, const IoScaling& scaling) {
  SetBatch batch;
  Eigen::Index total = 0;
  for (std::size_t i : indices) total += static_cast<Eigen::Index>(samples[i].neighbours.size());
  batch.features.resize(6, total);
  batch.targets.resize(6, static_cast<Eigen::Index>(indices.size()));
  batch.offsets.reserve(indices.size() + 1);
  Eigen::Index col = 0;
  batch.offsets.push_back(0);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = samples[indices[b]];
    for (const auto& f : s.neighbours) {
      for (Eigen::Index a = 0; a < 6; ++a) {
        batch.features(a, col) = f[static_cast<std::size_t>(a)] * scaling.input_scale[static_cast<std::size_t>(a)];
      }
      ++col;
    }
    batch.offsets.push_back(col);
    for (Eigen::Index a = 0; a < 6; ++a) {
      batch.targets(a, static_cast<Eigen::Index>(b)) = s.target[static_cast<std::size_t>(a)];
    }
  }
  return batch;
}

namespace detail {

inline Eigen::MatrixXd segment_sum(const Eigen::MatrixXd& cols, const SetBatch& batch) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cols.rows(), batch.size());
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const auto lo = batch.offsets[static_cast<std::size_t>(b)];
    const auto hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    for (Eigen::Index c = lo; c < hi; ++c) out.col(b) += cols.col(c);
  }
  return out;
}

inline Eigen::MatrixXd segment_broadcast(const Eigen::MatrixXd& per_sample,
                                         const SetBatch& batch) {
  Eigen::MatrixXd out(per_sample.rows(), batch.features.cols());
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const auto lo = batch.offsets[static_cast<std::size_t>(b)];
    const auto hi = batch.offsets[static_cast<std::size_t>(b) + 1];
    for (Eigen::Index c = lo; c < hi; ++c) out.col(c) = per_sample.col(b);
  }
  return out;
}

inline Eigen::VectorXd as_vector(const std::array<double, 6>& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), 6);
}

inline Wrench6 single_prediction(const Eigen::MatrixXd& out) { return Wrench6::from_eigen(out.col(0)); }

inline SetBatch single_batch(const FormationSnapshot& snap, const IoScaling& scaling) {
  const SetSample s{canonical_features(snap), {}};
  const std::size_t idx = 0;
  return make_batch(std::span<const SetSample>(&s, 1), std::span<const std::size_t>(&idx, 1), scaling);
}

}  // namespace detail

inline Eigen::MatrixXd predict_batch(const LinearAggModel& m, const SetBatch& batch) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(6, batch.size());
  if (batch.features.cols() > 0) out = detail::segment_sum(m.psi.forward_batch(batch.features), batch);
  return detail::as_vector(m.scaling.output_scale).asDiagonal() * out;
}

inline Eigen::MatrixXd predict_batch(const DeepSetModel& m, const SetBatch& batch) {
  Eigen::MatrixXd pooled =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.embedding_dim()), batch.size());
  if (batch.features.cols() > 0) pooled = detail::segment_sum(m.phi.forward_batch(batch.features), batch);
  return detail::as_vector(m.scaling.output_scale).asDiagonal() * m.big_phi.forward_batch(pooled);
}

/// Sum of psi over neighbours; exactly zero for K = 0.
inline Wrench6 predict_linear(const LinearAggModel& m, const FormationSnapshot& snap) {
  return detail::single_prediction(predict_batch(m, detail::single_batch(snap, m.scaling)));
}

/// Phi of the pooled phi embeddings; Phi(0) for K = 0.
inline Wrench6 predict_deepset(const DeepSetModel& m, const FormationSnapshot& snap) {
  return detail::single_prediction(predict_batch(m, detail::single_batch(snap, m.scaling)));
}

/// Sum of phi embeddings in canonical order (before Phi).
inline Eigen::VectorXd pooled_embedding(const DeepSetModel& m, const FormationSnapshot& snap) {
  const auto batch = detail::single_batch(snap, m.scaling);
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.embedding_dim()));
  if (batch.features.cols() > 0) pooled = detail::segment_sum(m.phi.forward_batch(batch.features), batch).col(0);
  return pooled;
}

// ---------------------------------------------------------------------------
// Flat parameter access and exact gradients of the weighted MSE

inline std::size_t parameter_count(const LinearAggModel& m) { return m.psi.parameter_count(); }
inline std::size_t parameter_count(const DeepSetModel& m) {
  return m.phi.parameter_count() + m.big_phi.parameter_count();
}

inline Eigen::VectorXd get_parameters(const LinearAggModel& m) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count(m)));
  m.psi.write_parameters({p.data(), static_cast<std::size_t>(p.size())});
  return p;
}
inline Eigen::VectorXd get_parameters(const DeepSetModel& m) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(parameter_count(m)));
  const auto n_phi = m.phi.parameter_count();
  m.phi.write_parameters({p.data(), n_phi});
  m.big_phi.write_parameters({p.data() + n_phi, m.big_phi.parameter_count()});
  return p;
}

inline void set_parameters(LinearAggModel& m, const Eigen::VectorXd& p) {
  m.psi.read_parameters({p.data(), static_cast<std::size_t>(p.size())});
}
inline void set_parameters(DeepSetModel& m, const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != parameter_count(m)) {
    throw std::invalid_argument("DeepSetModel: parameter vector size");
  }
  const auto n_phi = m.phi.parameter_count();
  m.phi.read_parameters({p.data(), n_phi});
  m.big_phi.read_parameters({p.data() + n_phi, m.big_phi.parameter_count()});
}

namespace detail {

// L = 1/(6B) sum_b sum_a w_a (pred_ab - t_ab)^2. Returns L and dL/dpred.
inline double weighted_mse(const Eigen::MatrixXd& pred, const SetBatch& batch,
                           const IoScaling& s, Eigen::MatrixXd& grad_pred) {
  const Eigen::MatrixXd err = pred - batch.targets;
  const double norm = 1.0 / static_cast<double>(6 * batch.size());
  const auto w = as_vector(s.loss_weights);
  grad_pred = (2.0 * norm) * (w.asDiagonal() * err);
  return norm * (w.asDiagonal() * err.cwiseAbs2()).sum();
}

}  // namespace detail

/// Loss on the batch; fills `grad` (flat, same order as get_parameters).
inline double loss_and_gradient(const LinearAggModel& m, const SetBatch& batch,
                                Eigen::VectorXd& grad) {
  const auto out_scale = detail::as_vector(m.scaling.output_scale);
  MlpTape tape;
  Eigen::MatrixXd per_neighbour = batch.features.cols() > 0
                                      ? m.psi.forward_batch(batch.features, tape)
                                      : Eigen::MatrixXd(6, 0);
  const Eigen::MatrixXd pred = out_scale.asDiagonal() * detail::segment_sum(per_neighbour, batch);
  Eigen::MatrixXd grad_pred;
  const double loss = detail::weighted_mse(pred, batch, m.scaling, grad_pred);

  Mlp g(m.psi.dims());
  if (batch.features.cols() > 0) {
    const Eigen::MatrixXd grad_sum = out_scale.asDiagonal() * grad_pred;
    m.psi.backward(tape, detail::segment_broadcast(grad_sum, batch), g);
  }
  grad.resize(static_cast<Eigen::Index>(parameter_count(m)));
  g.write_parameters({grad.data(), static_cast<std::size_t>(grad.size())});
  return loss;
}

inline double loss_and_gradient(const DeepSetModel& m, const SetBatch& batch,
                                Eigen::VectorXd& grad) {
  const auto out_scale = detail::as_vector(m.scaling.output_scale);
  MlpTape phi_tape, rho_tape;
  Eigen::MatrixXd pooled =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.embedding_dim()), batch.size());
  if (batch.features.cols() > 0) {
    pooled = detail::segment_sum(m.phi.forward_batch(batch.features, phi_tape), batch);
  }
  const Eigen::MatrixXd pred = out_scale.asDiagonal() * m.big_phi.forward_batch(pooled, rho_tape);
  Eigen::MatrixXd grad_pred;
  const double loss = detail::weighted_mse(pred, batch, m.scaling, grad_pred);

  Mlp g_phi(m.phi.dims());
  Mlp g_rho(m.big_phi.dims());
  const Eigen::MatrixXd grad_pooled =
      m.big_phi.backward(rho_tape, out_scale.asDiagonal() * grad_pred, g_rho);
  if (batch.features.cols() > 0) {
    m.phi.backward(phi_tape, detail::segment_broadcast(grad_pooled, batch), g_phi);
  }
  grad.resize(static_cast<Eigen::Index>(parameter_count(m)));
  const auto n_phi = m.phi.parameter_count();
  g_phi.write_parameters({grad.data(), n_phi});
  g_rho.write_parameters({grad.data() + n_phi, m.big_phi.parameter_count()});
  return loss;
}

inline double batch_loss(const LinearAggModel& m, const SetBatch& batch) {
  Eigen::MatrixXd unused;
  return detail::weighted_mse(predict_batch(m, batch), batch, m.scaling, unused);
}
inline double batch_loss(const DeepSetModel& m, const SetBatch& batch) {
  Eigen::MatrixXd unused;
  return detail::weighted_mse(predict_batch(m, batch), batch, m.scaling, unused);
}

// ---------------------------------------------------------------------------
// Training

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::kCosine;

  void validate() const {
    if (!(learning_rate >= 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) ||
        !(epsilon > 0) || batch_size == 0) {
      throw std::invalid_argument("TrainConfig: out of range");
    }
  }
};

/// Thrown when a parameter becomes non-finite during training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Output scale = per-axis standard deviation of the targets and loss weight
/// = 1 / variance, so newton and newton-metre axes contribute comparably.
/// Axes with zero variance keep unit scale and weight.
inline IoScaling calibrate_scaling(IoScaling s, std::span<const SetSample> samples) {
  if (samples.empty()) return s;
  for (std::size_t a = 0; a < 6; ++a) {
    double mean = 0.0;
    for (const auto& x : samples) mean += x.target[a];
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& x : samples) var += (x.target[a] - mean) * (x.target[a] - mean);
    var /= static_cast<double>(samples.size());
    if (var > 0.0 && std::isfinite(var)) {
      s.output_scale[a] = std::sqrt(var);
      s.loss_weights[a] = 1.0 / var;
    } else {
      s.output_scale[a] = 1.0;
      s.loss_weights[a] = 1.0;
    }
  }
  return s;
}

template <typename Model>
struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

/// Adam on the weighted MSE between predictions and targets. Per-axis
/// scaling is calibrated from `samples` first. Deterministic in cfg.seed:
/// each epoch draws its own shuffle stream.
template <typename Model>
TrainResult<Model> train(Model model, std::span<const SetSample> samples, const TrainConfig& cfg,
                         const std::function<void(std::size_t, double)>& on_epoch = {}) {
  cfg.validate();
  model.validate();
  if (samples.empty()) throw std::invalid_argument("train: empty dataset");
  model.scaling = calibrate_scaling(model.scaling, samples);

  const std::size_t n = samples.size();
  const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps = static_cast<double>(cfg.epochs * batches_per_epoch);

  Eigen::VectorXd params = get_parameters(model);
  Adam adam(static_cast<std::size_t>(params.size()), cfg.beta1, cfg.beta2, cfg.epsilon);
  Eigen::VectorXd grad;
  std::vector<std::size_t> order(n);
  TrainResult<Model> result{std::move(model), {}};
  result.loss_history.reserve(cfg.epochs);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed, epoch);
    shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const auto batch = make_batch(samples, std::span<const std::size_t>(order.data() + start, count),
                                    result.model.scaling);
      const double loss = loss_and_gradient(result.model, batch, grad);
      if (!std::isfinite(loss)) throw DivergenceError(epoch, "non-finite loss");
      epoch_loss += loss * static_cast<double>(count);

      double lr = cfg.learning_rate;
      if (cfg.schedule == LrSchedule::kCosine && total_steps > 0) {
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      }
      adam.step(params, grad, lr);
      ++step;
      if (!params.allFinite()) throw DivergenceError(epoch, "non-finite parameter");
      set_parameters(result.model, params);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch, result.loss_history.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Naive grid lookup

/// Node lattice over relative position (N, E, D). Node i on an axis sits at
/// lo + i * (hi - lo) / (nodes - 1); an axis with one node has lo == hi.
struct GridSpec {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  std::array<std::size_t, 3> nodes{1, 1, 1};

  std::size_t cell_count() const { return nodes[0] * nodes[1] * nodes[2]; }
  double step(std::size_t axis) const {
    return nodes[axis] > 1 ? (hi[axis] - lo[axis]) / static_cast<double>(nodes[axis] - 1) : 0.0;
  }
  double coordinate(std::size_t axis, std::size_t i) const {
    return nodes[axis] > 1 ? lo[axis] + static_cast<double>(i) * step(axis) : lo[axis];
  }
  std::size_t index(std::size_t i, std::size_t j, std::size_t l) const {
    return (i * nodes[1] + j) * nodes[2] + l;
  }

  void validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
      if (nodes[a] == 0 || !(hi[a] >= lo[a]) || (nodes[a] > 1 && !(hi[a] > lo[a]))) {
        throw std::invalid_argument("GridSpec: bad bounds on axis " + std::to_string(a));
      }
    }
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Lattice aligned with a single-vehicle sweep: N nodes on the legs, E nodes
/// every `e_step` metres, D nodes on the flown altitude planes.
inline GridSpec grid_spec_for_sweep(const SweepConfig& sweep, double e_step) {
  sweep.validate();
  if (!(e_step > 0)) throw std::invalid_argument("grid_spec_for_sweep: e_step must be > 0");
  GridSpec g;
  const double half = sweep.lateral_extent / 2.0;
  g.lo[kN] = sweep.legs > 1 ? -half : 0.0;
  g.hi[kN] = sweep.legs > 1 ? half : 0.0;
  g.nodes[kN] = sweep.legs;
  g.lo[kE] = -half;
  g.hi[kE] = half;
  g.nodes[kE] = static_cast<std::size_t>(std::llround(sweep.lateral_extent / e_step)) + 1;

  auto alts = sweep.altitudes;
  std::sort(alts.begin(), alts.end());
  alts.erase(std::unique(alts.begin(), alts.end()), alts.end());
  g.lo[kD] = -alts.back();
  g.hi[kD] = -alts.front();
  if (alts.size() == 1) {
    g.nodes[kD] = 1;
  } else {
    double min_gap = alts.back() - alts.front();
    for (std::size_t i = 1; i < alts.size(); ++i) min_gap = std::min(min_gap, alts[i] - alts[i - 1]);
    g.nodes[kD] = static_cast<std::size_t>(std::llround((alts.back() - alts.front()) / min_gap)) + 1;
  }
  return g;
}

struct GridLookupModel {
  GridSpec spec;
  std::vector<Wrench6> cells;  // spec.index order
  Metadata metadata;

  /// Trilinear interpolation; zero outside the lattice bounds.
  Wrench6 query(const Vec3& dpos) const {
    std::array<std::size_t, 3> base{};
    std::array<double, 3> frac{};
    for (std::size_t a = 0; a < 3; ++a) {
      constexpr double kTol = 1e-9;
      const double x = dpos[static_cast<Eigen::Index>(a)];
      if (spec.nodes[a] == 1) {
        if (std::abs(x - spec.lo[a]) > kTol) return Wrench6::zero();
        base[a] = 0;
        frac[a] = 0.0;
        continue;
      }
      double t = (x - spec.lo[a]) / spec.step(a);
      const double last = static_cast<double>(spec.nodes[a] - 1);
      if (t < -kTol || t > last + kTol) return Wrench6::zero();
      if (std::abs(t - std::round(t)) < kTol) t = std::round(t);
      t = std::clamp(t, 0.0, last);
      const auto i0 = std::min(static_cast<std::size_t>(std::floor(t)), spec.nodes[a] - 2);
      base[a] = i0;
      frac[a] = t - static_cast<double>(i0);
    }
    Wrench6 out;
    for (std::size_t corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      std::array<std::size_t, 3> idx{};
      bool skip = false;
      for (std::size_t a = 0; a < 3; ++a) {
        const bool upper = (corner >> a) & 1U;
        if (upper && spec.nodes[a] == 1) {
          skip = true;
          break;
        }
        idx[a] = base[a] + (upper ? 1 : 0);
        w *= upper ? frac[a] : 1.0 - frac[a];
      }
      if (skip || w == 0.0) continue;
      out += wrench_scale(cells[spec.index(idx[0], idx[1], idx[2])], w);
    }
    return out;
  }
};

/// Bins the noisy measurements of a K=1 dataset onto the nearest lattice
/// node and stores per-node means. Nodes with no samples copy the nearest
/// populated node (breadth-first over the 6-neighbourhood).
inline GridLookupModel fit_grid(const Dataset& data, const GridSpec& spec) {
  spec.validate();
  if (data.records.empty()) throw std::invalid_argument("fit_grid: empty dataset");
  const std::size_t n_cells = spec.cell_count();
  std::vector<std::array<double, 6>> sums(n_cells, std::array<double, 6>{});
  std::vector<std::size_t> counts(n_cells, 0);

  for (std::size_t r = 0; r < data.records.size(); ++r) {
    const auto& rec = data.records[r];
    if (rec.snapshot.k() != 1) {
      throw std::invalid_argument("fit_grid: record " + std::to_string(r) + " has K=" +
                                  std::to_string(rec.snapshot.k()) + ", expected K=1");
    }
    const auto rel = relative_state(rec.snapshot.neighbours[0], rec.snapshot.sufferer);
    std::array<std::size_t, 3> idx{};
    bool inside = true;
    for (std::size_t a = 0; a < 3 && inside; ++a) {
      const double x = rel.dpos[static_cast<Eigen::Index>(a)];
      if (spec.nodes[a] == 1) {
        const double tol = 1e-9;
        inside = std::abs(x - spec.lo[a]) <= tol;
        idx[a] = 0;
        continue;
      }
      const double t = std::round((x - spec.lo[a]) / spec.step(a));
      inside = t >= 0.0 && t <= static_cast<double>(spec.nodes[a] - 1);
      idx[a] = inside ? static_cast<std::size_t>(t) : 0;
    }
    if (!inside) continue;
    const auto cell = spec.index(idx[0], idx[1], idx[2]);
    const auto m = rec.measured.to_array();
    for (std::size_t a = 0; a < 6; ++a) sums[cell][a] += m[a];
    ++counts[cell];
  }

  GridLookupModel model{spec, std::vector<Wrench6>(n_cells), {}};
  std::vector<std::size_t> source(n_cells, n_cells);
  std::deque<std::size_t> frontier;
  for (std::size_t c = 0; c < n_cells; ++c) {
    if (counts[c] == 0) continue;
    std::array<double, 6> mean = sums[c];
    for (auto& v : mean) v /= static_cast<double>(counts[c]);
    model.cells[c] = Wrench6::from_array(mean);
    source[c] = c;
    frontier.push_back(c);
  }
  if (frontier.empty()) throw std::invalid_argument("fit_grid: no samples fall inside the grid");

  while (!frontier.empty()) {
    const std::size_t c = frontier.front();
    frontier.pop_front();
    const std::size_t l = c % spec.nodes[2];
    const std::size_t j = (c / spec.nodes[2]) % spec.nodes[1];
    const std::size_t i = c / (spec.nodes[2] * spec.nodes[1]);
    const std::array<std::array<long, 3>, 6> steps = {{{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                                        {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
    for (const auto& s : steps) {
      const long ni = static_cast<long>(i) + s[0];
      const long nj = static_cast<long>(j) + s[1];
      const long nl = static_cast<long>(l) + s[2];
      if (ni < 0 || nj < 0 || nl < 0 || ni >= static_cast<long>(spec.nodes[0]) ||
          nj >= static_cast<long>(spec.nodes[1]) || nl >= static_cast<long>(spec.nodes[2])) {
        continue;
      }
      const auto nc = spec.index(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj),
                                 static_cast<std::size_t>(nl));
      if (source[nc] != n_cells) continue;
      source[nc] = source[c];
      model.cells[nc] = model.cells[source[c]];
      frontier.push_back(nc);
    }
  }
  model.metadata["fitted_records"] = std::to_string(data.records.size());
  model.metadata["formation"] = std::string(to_string(data.meta.formation));
  model.metadata["oracle"] = std::string(to_string(data.meta.oracle));
  return model;
}

/// Sum of grid lookups at each neighbour's relative position.
inline Wrench6 predict_naive(const GridLookupModel& m, const FormationSnapshot& snap) {
  Wrench6 total;
  for (const auto& rel : canonical_relative_states(snap)) total += m.query(rel.dpos);
  return total;
}

}  // namespace downwash
