#include "ggap/traj.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>

namespace ggap::traj {

namespace {

// Gathered views so training on a subset never copies the dataset.
struct SampleView {
  const data::Dataset* ds;
  const std::vector<std::size_t>* idx;
  std::size_t size() const { return idx->size(); }
  const std::vector<double>& x(std::size_t i) const { return ds->inputs[(*idx)[i]]; }
  const std::vector<double>& y(std::size_t i) const { return ds->targets[(*idx)[i]]; }
};

double view_mean_loss(const net::MLPSpec& spec, const net::WeightVector& w, const SampleView& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto f = net::forward(spec, w, v.x(i));
    s += net::loss_and_residual(spec, f, v.y(i)).loss;
  }
  return s / static_cast<double>(v.size());
}

void view_mean_gradient(const net::MLPSpec& spec, const net::WeightVector& w, const SampleView& v,
                        net::WeightVector& out) {
  out.assign(w.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    net::WeightVector g = net::per_sample_gradient(spec, w, v.x(i), v.y(i));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += g[k];
  }
  const double inv = 1.0 / static_cast<double>(v.size());
  for (double& g : out) g *= inv;
}

TrajectoryRecord train_on_indices(const net::MLPSpec& spec, const net::WeightVector& w0,
                                  const data::Dataset& ds, const std::vector<std::size_t>& indices,
                                  const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  ds.validate();
  if (indices.empty()) throw std::invalid_argument("train: empty training index set");
  if (w0.size() != spec.param_count())
    throw std::invalid_argument("train: initial weights have " + std::to_string(w0.size()) +
                                " entries, spec wants " + std::to_string(spec.param_count()));
  if (ds.target_dim() != spec.output_dim())
    throw std::invalid_argument("train: dataset target dim " + std::to_string(ds.target_dim()) +
                                " != network output dim " + std::to_string(spec.output_dim()));

  SampleView view{&ds, &indices};
  TrajectoryRecord rec;
  rec.eta = cfg.eta;
  rec.steps = cfg.steps;
  rec.stride = cfg.record_stride;
  rec.train_indices = indices;
  const std::size_t n_points = cfg.steps / cfg.record_stride + 1;
  rec.grid.reserve(n_points);
  rec.weights.reserve(n_points);
  rec.train_loss.reserve(n_points);
  if (cfg.record_residuals) rec.residuals.reserve(n_points);

  net::WeightVector w = w0;
  net::WeightVector grad;
  double initial_loss = -1.0;

  auto record = [&](std::size_t step) {
    rec.grid.push_back(static_cast<double>(step) * cfg.eta);
    rec.weights.push_back(w);
    const double loss = view_mean_loss(spec, w, view);
    rec.train_loss.push_back(loss);
    if (cfg.record_residuals) rec.residuals.push_back(stacked_residual(spec, w, ds));
    return loss;
  };

  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    if (step % cfg.record_stride == 0) {
      const double loss = record(step);
      if (initial_loss < 0.0) initial_loss = loss;
      if (!std::isfinite(loss))
        throw DivergenceError(step, "training diverged (non-finite loss) at step " +
                                        std::to_string(step));
      // The guard is scale-relative; a zero-loss start cannot diverge by ratio
      // so it falls back to an absolute cap on the same scale.
      const double cap = cfg.divergence_factor * std::max(initial_loss, 1e-12);
      if (step > 0 && loss > cap)
        throw DivergenceError(step, "training diverged at step " + std::to_string(step) +
                                        ": loss " + std::to_string(loss) + " exceeds " +
                                        std::to_string(cfg.divergence_factor) + "x initial");
    }
    if (step == cfg.steps) break;
    view_mean_gradient(spec, w, view, grad);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.eta * grad[k];
  }
  return rec;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("TrainConfig: eta must be positive");
  if (steps == 0) throw std::invalid_argument("TrainConfig: zero steps");
  if (record_stride == 0 || steps % record_stride != 0)
    throw std::invalid_argument("TrainConfig: record stride " + std::to_string(record_stride) +
                                " must divide steps " + std::to_string(steps));
  if (!(divergence_factor > 1.0))
    throw std::invalid_argument("TrainConfig: divergence factor must exceed 1");
}

std::vector<double> stacked_residual(const net::MLPSpec& spec, const net::WeightVector& w,
                                     const data::Dataset& ds) {
  const std::size_t n = ds.size(), C = spec.output_dim();
  std::vector<double> r(n * C);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto f = net::forward(spec, w, ds.inputs[i]);
    auto lr = net::loss_and_residual(spec, f, ds.targets[i]);
    for (std::size_t c = 0; c < C; ++c) r[i * C + c] = lr.residual[c] * inv_sqrt_n;
  }
  return r;
}

RecordView derive_record(const net::MLPSpec& spec, const net::WeightVector& w,
                         const data::Dataset& ds, const std::vector<std::size_t>& indices) {
  RecordView out;
  out.residual_stacked = stacked_residual(spec, w, ds);
  const std::size_t n = ds.size(), W = spec.param_count();
  out.per_sample_gradients_flat.resize(n * W);
  for (std::size_t i = 0; i < n; ++i) {
    net::WeightVector g = net::per_sample_gradient(spec, w, ds.inputs[i], ds.targets[i]);
    std::copy(g.begin(), g.end(), out.per_sample_gradients_flat.begin() + i * W);
  }
  SampleView view{&ds, &indices};
  out.train_loss = view_mean_loss(spec, w, view);
  return out;
}

TrajectoryRecord train_full(const net::MLPSpec& spec, const net::WeightVector& w0,
                            const data::Dataset& ds, const TrainConfig& cfg) {
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return train_on_indices(spec, w0, ds, all, cfg);
}

std::vector<TrajectoryRecord> train_leave_out(const net::MLPSpec& spec,
                                              const net::WeightVector& w0,
                                              const data::Dataset& ds,
                                              const data::LeaveOutPlan& plan,
                                              const TrainConfig& cfg, std::size_t jobs) {
  if (plan.n != ds.size())
    throw std::invalid_argument("train_leave_out: plan covers n=" + std::to_string(plan.n) +
                                ", dataset has " + std::to_string(ds.size()));
  const std::size_t B = plan.batches.size();
  std::vector<TrajectoryRecord> out(B);
  if (jobs <= 1) {
    for (std::size_t b = 0; b < B; ++b)
      out[b] = train_on_indices(spec, w0, ds, plan.complement(b), cfg);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= B) return;
      try {
        out[b] = train_on_indices(spec, w0, ds, plan.complement(b), cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < std::min(jobs, B); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

void require_same_grid(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  if (a.grid.size() != b.grid.size())
    throw std::invalid_argument("record grids differ in length: " + std::to_string(a.grid.size()) +
                                " vs " + std::to_string(b.grid.size()));
  for (std::size_t k = 0; k < a.grid.size(); ++k)
    if (a.grid[k] != b.grid[k])
      throw std::invalid_argument("record grids differ at index " + std::to_string(k));
}

std::vector<double> measure_loss_difference(const net::MLPSpec& spec, const data::Dataset& ds,
                                            const TrajectoryRecord& full,
                                            const std::vector<TrajectoryRecord>& leave_outs,
                                            const data::LeaveOutPlan& plan) {
  if (leave_outs.size() != plan.batches.size())
    throw std::invalid_argument("measure_loss_difference: " + std::to_string(leave_outs.size()) +
                                " runs vs " + std::to_string(plan.batches.size()) + " batches");
  if (plan.m >= plan.n)
    throw std::invalid_argument("measure_loss_difference: leave-out batch swallows the dataset");
  for (const auto& lo : leave_outs) require_same_grid(full, lo);

  std::vector<double> delta(full.points(), 0.0);
  for (std::size_t b = 0; b < leave_outs.size(); ++b) {
    SampleView batch{&ds, &plan.batches[b]};
    for (std::size_t k = 0; k < full.points(); ++k) {
      const double lo_loss = view_mean_loss(spec, leave_outs[b].weights[k], batch);
      const double full_loss = view_mean_loss(spec, full.weights[k], batch);
      delta[k] += lo_loss - full_loss;
    }
  }
  const double inv = 1.0 / static_cast<double>(leave_outs.size());
  for (double& d : delta) d *= inv;
  return delta;
}

std::vector<double> measure_generalization_gap(const net::MLPSpec& spec,
                                               const TrajectoryRecord& full,
                                               const data::Dataset& train,
                                               const data::Dataset& test) {
  if (test.inputs.empty())
    throw std::invalid_argument("measure_generalization_gap: empty test set");
  if (test.input_dim() != train.input_dim() || test.target_dim() != train.target_dim())
    throw std::invalid_argument("measure_generalization_gap: test set shape mismatch");
  std::vector<std::size_t> train_all(train.size()), test_all(test.size());
  for (std::size_t i = 0; i < train.size(); ++i) train_all[i] = i;
  for (std::size_t i = 0; i < test.size(); ++i) test_all[i] = i;
  SampleView train_view{&train, &train_all}, test_view{&test, &test_all};
  std::vector<double> gap(full.points());
  for (std::size_t k = 0; k < full.points(); ++k) {
    gap[k] = view_mean_loss(spec, full.weights[k], test_view) -
             view_mean_loss(spec, full.weights[k], train_view);
  }
  return gap;
}

}  // namespace ggap::traj
