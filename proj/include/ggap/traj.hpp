#pragma once

// Full-batch gradient descent trajectories with periodic recording, plus the
// leave-out ensemble and the measured quantities derived from it (averaged
// loss difference, generalization gap).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ggap/data.hpp"
#include "ggap/net.hpp"

namespace ggap::traj {

struct TrainConfig {
  double eta = 1e-2;
  std::size_t steps = 0;
  std::size_t record_stride = 1;  // must divide steps
  bool record_residuals = true;   // per-record stacked residual (full runs want this)
  double divergence_factor = 1e3; // abort when train loss exceeds this multiple of initial

  void validate() const;
};

struct DivergenceError : std::runtime_error {
  std::size_t step;
  explicit DivergenceError(std::size_t step_, const std::string& what)
      : std::runtime_error(what), step(step_) {}
};

struct TrajectoryRecord {
  // grid[k] = step index * eta for recorded steps 0, stride, ..., steps
  std::vector<double> grid;
  std::vector<net::WeightVector> weights;       // per record point
  std::vector<double> train_loss;               // mean loss on the run's own training set
  std::vector<std::vector<double>> residuals;   // stacked (1/sqrt(n)) residual, empty if not recorded
  std::vector<std::size_t> train_indices;       // rows of the dataset this run trained on
  double eta = 0.0;
  std::size_t steps = 0;
  std::size_t stride = 1;

  std::size_t points() const { return grid.size(); }
};

// Derived per-record quantities recomputed from stored weights; gradients are
// deliberately not materialized at record time (n * |W| doubles per point).
struct RecordView {
  net::WeightVector per_sample_gradients_flat;  // n * |W|, row i = gradient of sample i
  std::vector<double> residual_stacked;         // n * C with 1/sqrt(n) scaling
  double train_loss = 0.0;
};
RecordView derive_record(const net::MLPSpec& spec, const net::WeightVector& w,
                         const data::Dataset& ds, const std::vector<std::size_t>& indices);

// Stacked residual (1/sqrt(n)) [r_1; ...; r_n] at given weights over the full dataset.
std::vector<double> stacked_residual(const net::MLPSpec& spec, const net::WeightVector& w,
                                     const data::Dataset& ds);

// Train on all samples from the given initial weights.
TrajectoryRecord train_full(const net::MLPSpec& spec, const net::WeightVector& w0,
                            const data::Dataset& ds, const TrainConfig& cfg);

// One run per plan batch, trained on the batch's complement, all from the
// same initial weights. jobs > 1 runs batches on a thread pool; results are
// ordered by batch and bit-identical regardless of scheduling.
std::vector<TrajectoryRecord> train_leave_out(const net::MLPSpec& spec,
                                              const net::WeightVector& w0,
                                              const data::Dataset& ds,
                                              const data::LeaveOutPlan& plan,
                                              const TrainConfig& cfg, std::size_t jobs = 1);

// Averaged loss difference per record point:
// mean over batches of [ mean loss of the leave-out run on its omitted batch
// minus mean loss of the full run on that batch ]. All runs must share the
// record grid exactly.
std::vector<double> measure_loss_difference(const net::MLPSpec& spec, const data::Dataset& ds,
                                            const TrajectoryRecord& full,
                                            const std::vector<TrajectoryRecord>& leave_outs,
                                            const data::LeaveOutPlan& plan);

// Test-minus-train mean loss per record point. Test set may coincide with the
// training set (gap is then identically zero); it must not be empty.
std::vector<double> measure_generalization_gap(const net::MLPSpec& spec,
                                               const TrajectoryRecord& full,
                                               const data::Dataset& train,
                                               const data::Dataset& test);

// Shared-grid check used by every consumer that combines runs.
void require_same_grid(const TrajectoryRecord& a, const TrajectoryRecord& b);

}  // namespace ggap::traj
