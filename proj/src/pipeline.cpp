#include "ggap/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace ggap::pipeline {

std::string method_name(gram::PropagatorMethod m) {
  switch (m) {
    case gram::PropagatorMethod::kProduct: return "product";
    case gram::PropagatorMethod::kMagnus1: return "magnus1";
    case gram::PropagatorMethod::kMagnus2: return "magnus2";
  }
  return "product";
}

gram::PropagatorMethod parse_method(const std::string& name) {
  if (name == "product") return gram::PropagatorMethod::kProduct;
  if (name == "magnus1") return gram::PropagatorMethod::kMagnus1;
  if (name == "magnus2") return gram::PropagatorMethod::kMagnus2;
  throw std::invalid_argument("unknown propagator method '" + name + "'");
}

AnalysisResult analyze(const net::MLPSpec& spec, const data::Dataset& ds,
                       const traj::TrajectoryRecord& full,
                       const std::vector<traj::TrajectoryRecord>& leave_outs,
                       const data::LeaveOutPlan& plan, const AnalysisOptions& opts) {
  if (opts.from_index + 1 >= full.points())
    throw std::invalid_argument("analyze: start index " + std::to_string(opts.from_index) +
                                " leaves no record span");

  AnalysisResult res;
  res.loss_scale = full.train_loss.front();

  // Measured loss difference over the whole grid; the increment analysis
  // re-bases it at the start index (zero there by construction).
  std::vector<double> delta_all = traj::measure_loss_difference(spec, ds, full, leave_outs, plan);
  const double baseline = opts.from_index == 0 ? 0.0 : delta_all[opts.from_index];

  const std::size_t k0 = opts.from_index;
  const std::size_t span = full.points() - k0;
  res.grid.assign(full.grid.begin() + k0, full.grid.end());
  res.delta.resize(span);
  for (std::size_t k = 0; k < span; ++k) res.delta[k] = delta_all[k0 + k] - baseline;

  // Sliced views of the runs so every downstream series shares one indexing.
  auto slice = [&](const traj::TrajectoryRecord& rec) {
    traj::TrajectoryRecord s;
    s.eta = rec.eta;
    s.steps = rec.steps;
    s.stride = rec.stride;
    s.train_indices = rec.train_indices;
    s.grid.assign(rec.grid.begin() + k0, rec.grid.end());
    s.weights.assign(rec.weights.begin() + k0, rec.weights.end());
    s.train_loss.assign(rec.train_loss.begin() + k0, rec.train_loss.end());
    if (!rec.residuals.empty())
      s.residuals.assign(rec.residuals.begin() + k0, rec.residuals.end());
    return s;
  };
  const traj::TrajectoryRecord full_s = k0 == 0 ? full : slice(full);
  std::vector<traj::TrajectoryRecord> lo_s;
  if (k0 != 0)
    for (const auto& lo : leave_outs) lo_s.push_back(slice(lo));
  const std::vector<traj::TrajectoryRecord>& lo_ref = k0 == 0 ? leave_outs : lo_s;

  res.cbar = factors::contraction_exact(spec, ds, full_s, lo_ref, plan, res.delta, res.loss_scale);
  if (opts.compute_approx_contraction)
    res.cbar_approx = factors::contraction_approx(spec, ds, full_s, lo_ref);
  res.eps = factors::perturbation_series(spec, ds, full_s);

  res.r0 = full_s.residuals.empty() ? traj::stacked_residual(spec, full_s.weights.front(), ds)
                                    : full_s.residuals.front();
  res.r0_norm2 = numkit::dot(res.r0, res.r0);

  gram::BlockFn blocks = gram::trajectory_blocks(spec, ds, full_s, opts.max_dim);
  gram::GramComputation gc =
      gram::effective_gram(blocks, res.cbar, res.grid, ds.size(), &res.r0, opts.method);
  res.gram = std::move(gc.gram);
  res.eps_hat = std::move(gc.eps_hat);
  res.propagated_residual = std::move(gc.propagated_residual);

  res.delta_from_eps = gram::reconstruct_delta(res.cbar, res.eps, res.grid);
  res.delta_from_eps_hat = gram::reconstruct_delta(res.cbar, res.eps_hat, res.grid);

  res.spectrum = spectral::analyze(res.gram.K, res.r0);
  if (opts.compute_diagnostics)
    res.diagnostics = gram::convergence_diagnostics(blocks, res.grid, ds.size(), res.cbar,
                                                    opts.diagnostic_points);

  res.delta_measured_final = res.delta.back();
  res.delta_pred_eps_final = res.delta_from_eps.back();
  res.delta_pred_eps_hat_final = res.delta_from_eps_hat.back();
  res.quadratic_form_value = gram::quadratic_form(res.gram.K, res.r0);
  res.train_loss_final = full.train_loss.back();
  res.interpolation_reached = res.train_loss_final <= opts.interpolation_threshold;
  return res;
}

}  // namespace ggap::pipeline
