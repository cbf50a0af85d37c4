#pragma once

// End-to-end analysis of a recorded run: factor series, effective kernel,
// scalar reconstructions, spectrum and diagnostics. The command-line tool and
// the validation suites drive everything through this entry point so they
// exercise the same code.

#include <optional>
#include <string>

#include "ggap/data.hpp"
#include "ggap/factors.hpp"
#include "ggap/gram.hpp"
#include "ggap/spectral.hpp"
#include "ggap/traj.hpp"

namespace ggap::pipeline {

struct AnalysisOptions {
  gram::PropagatorMethod method = gram::PropagatorMethod::kProduct;
  std::size_t from_index = 0;          // record index the increment analysis starts at
  double interpolation_threshold = 0.05;
  std::size_t max_dim = 4096;
  std::size_t diagnostic_points = 65;
  bool compute_approx_contraction = true;
  bool compute_diagnostics = true;
};

struct AnalysisResult {
  std::vector<double> grid;            // from from_index onwards
  std::vector<double> delta;           // measured averaged loss difference (baseline-shifted)
  factors::MaskedSeries cbar;
  factors::MaskedSeries cbar_approx;   // empty when disabled
  std::vector<double> eps;             // measured perturbation factor
  std::vector<double> eps_hat;         // kernel-route perturbation
  std::vector<double> delta_from_eps;      // reconstruction with measured eps
  std::vector<double> delta_from_eps_hat;  // reconstruction with kernel eps
  std::vector<std::vector<double>> propagated_residual;
  std::vector<double> r0;              // stacked residual at the analysis start
  gram::EffectiveGram gram;
  spectral::SpectralReport spectrum;
  gram::ConvergenceDiagnostics diagnostics;

  double delta_measured_final = 0.0;
  double delta_pred_eps_final = 0.0;
  double delta_pred_eps_hat_final = 0.0;
  double quadratic_form_value = 0.0;
  double r0_norm2 = 0.0;
  double train_loss_final = 0.0;
  bool interpolation_reached = false;  // final train loss under the threshold
  double loss_scale = 0.0;             // initial train loss, sets the delta floor
};

AnalysisResult analyze(const net::MLPSpec& spec, const data::Dataset& ds,
                       const traj::TrajectoryRecord& full,
                       const std::vector<traj::TrajectoryRecord>& leave_outs,
                       const data::LeaveOutPlan& plan, const AnalysisOptions& opts = {});

std::string method_name(gram::PropagatorMethod m);
gram::PropagatorMethod parse_method(const std::string& name);

}  // namespace ggap::pipeline
