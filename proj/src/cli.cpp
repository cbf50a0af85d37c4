#include "ggap/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ggap/data.hpp"
#include "ggap/factors.hpp"
#include "ggap/gram.hpp"
#include "ggap/net.hpp"
#include "ggap/numkit.hpp"
#include "ggap/oracle.hpp"
#include "ggap/pipeline.hpp"
#include "ggap/runio.hpp"
#include "ggap/spectral.hpp"
#include "ggap/traj.hpp"

namespace ggap::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDivergenceError = 3;
constexpr int kIntegrityError = 4;

constexpr int kConfigSchemaVersion = 1;

// JSON parse failures on user-supplied config files are config errors; the
// same failures on files a previous command wrote are integrity errors. The
// two helpers below pin that distinction.
json parse_config_json(const std::string& path) {
  try {
    return json::parse(runio::read_file(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  } catch (const std::runtime_error& e) {
    // An unreadable config is a usage problem, not artifact corruption.
    throw std::invalid_argument(e.what());
  }
}

json parse_artifact_json(const std::string& path) {
  try {
    return json::parse(runio::read_file(path));
  } catch (const json::exception& e) {
    throw runio::IntegrityError(path + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw runio::IntegrityError(e.what());
  }
}

// A config error should name the offending key, not echo a bare type error.
template <typename T>
T config_get(const json& j, const std::string& section, const std::string& key) {
  if (!j.contains(key))
    throw std::invalid_argument("config: missing " + section + "." + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for " + section + "." + key);
  }
}

template <typename T>
T config_get_or(const json& j, const std::string& section, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return config_get<T>(j, section, key);
}

struct RunConfig {
  json dataset;  // handed to build_dataset
  net::MLPSpec model;
  traj::TrainConfig training;
  std::size_t plan_m = 1;
  std::size_t plan_batches = 1;
  std::uint64_t plan_seed = 0;
  pipeline::AnalysisOptions analysis;
  std::size_t analysis_from_step = 0;  // optimizer steps; record index depends on stride
};

net::MLPSpec teacher_from_json(json j, std::uint64_t fallback_seed, std::size_t input_dim) {
  if (j.is_null()) {
    j = json::object();
    j["widths"] = std::vector<std::size_t>{input_dim, 16, 2};
    j["activation"] = "tanh";
  }
  if (!j.contains("loss")) j["loss"] = "squared";  // forward only, loss unused
  if (!j.contains("init_seed")) j["init_seed"] = fallback_seed;
  return runio::parse_mlp_spec(j.dump());
}

struct BuiltDataset {
  data::Dataset all;
  std::size_t n_train = 0;
};

BuiltDataset build_dataset(const json& jd) {
  const std::string kind = config_get<std::string>(jd, "dataset", "kind");
  const std::uint64_t seed = config_get_or<std::uint64_t>(jd, "dataset", "seed", 0);
  BuiltDataset out;

  if (kind == "two-point") {
    const auto n = config_get<std::size_t>(jd, "dataset", "n");
    out.all = data::gen_two_point(n, config_get_or<double>(jd, "dataset", "y1", 1.0),
                                  config_get_or<double>(jd, "dataset", "y2", 1.0),
                                  config_get_or<std::size_t>(jd, "dataset", "d", 2));
    out.n_train = n;
  } else if (kind == "gaussian-alpha") {
    data::GaussianAlphaParams p;
    p.n = config_get<std::size_t>(jd, "dataset", "n");
    p.n_test = config_get_or<std::size_t>(jd, "dataset", "n_test", 0);
    p.d = config_get_or<std::size_t>(jd, "dataset", "d", 20);
    p.alpha = config_get_or<double>(jd, "dataset", "alpha", 1.0);
    p.project_top = config_get_or<std::size_t>(jd, "dataset", "project_top", 10);
    p.seed = seed;
    p.teacher = teacher_from_json(jd.value("teacher", json()), seed + 1000, p.project_top);
    out.all = data::gen_gaussian_alpha(p);
    out.n_train = p.n;
  } else if (kind == "csv") {
    data::CsvSchema schema;
    schema.feature_columns =
        config_get<std::vector<std::string>>(jd, "dataset", "feature_columns");
    schema.label_column = config_get<std::string>(jd, "dataset", "label_column");
    schema.one_hot_classes = config_get_or<std::size_t>(jd, "dataset", "one_hot_classes", 0);
    out.all = data::load_csv(config_get<std::string>(jd, "dataset", "path"), schema);
    out.n_train = config_get_or<std::size_t>(jd, "dataset", "n_train", out.all.size());
  } else if (kind == "idx") {
    out.all = data::load_idx(config_get<std::string>(jd, "dataset", "images"),
                             config_get<std::string>(jd, "dataset", "labels"),
                             config_get_or<std::vector<int>>(jd, "dataset", "keep_classes", {}),
                             config_get_or<std::size_t>(jd, "dataset", "max_count", 0));
    out.n_train = config_get_or<std::size_t>(jd, "dataset", "n_train", out.all.size());
  } else {
    throw std::invalid_argument("config: unknown dataset.kind '" + kind + "'");
  }

  if (jd.contains("projected")) {
    const json& jp = jd.at("projected");
    data::SynProjectedParams p;
    p.a = config_get_or<std::size_t>(jp, "dataset.projected", "a", 1);
    p.b = config_get_or<std::size_t>(jp, "dataset.projected", "b", 10);
    p.n_moment = config_get<std::size_t>(jp, "dataset.projected", "n_moment");
    p.seed = config_get_or<std::uint64_t>(jp, "dataset.projected", "seed", seed + 2000);
    p.teacher = teacher_from_json(jp.value("teacher", json()), p.seed + 1, p.b - p.a + 1);
    out.all = data::synthesize_projected(out.all, p);
    out.n_train = config_get_or<std::size_t>(jd, "dataset", "n_train", out.all.size());
  }

  if (config_get_or<bool>(jd, "dataset", "random_labels", false)) {
    const auto classes =
        config_get_or<std::size_t>(jd, "dataset", "num_classes", out.all.target_dim());
    const auto label_seed = config_get_or<std::uint64_t>(jd, "dataset", "label_seed", seed + 1);
    out.all = data::randomize_labels(out.all, classes, label_seed);
  }

  if (out.n_train < 2 || out.n_train > out.all.size())
    throw std::invalid_argument("config: dataset.n_train = " + std::to_string(out.n_train) +
                                " out of range for " + std::to_string(out.all.size()) +
                                " samples");
  return out;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  json j = parse_config_json(path);
  if (config_get_or<int>(j, "", "schema_version", kConfigSchemaVersion) != kConfigSchemaVersion)
    throw std::invalid_argument(path + ": unsupported schema_version");

  RunConfig cfg;
  if (!j.contains("dataset")) throw std::invalid_argument("config: missing dataset section");
  cfg.dataset = j.at("dataset");

  if (!j.contains("model")) throw std::invalid_argument("config: missing model section");
  try {
    cfg.model = runio::parse_mlp_spec(j.at("model").dump());
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad model section: ") + e.what());
  }

  const json& jt = j.value("training", json::object());
  cfg.training.eta = config_get<double>(jt, "training", "eta");
  cfg.training.steps = config_get<std::size_t>(jt, "training", "steps");
  cfg.training.record_stride = config_get_or<std::size_t>(jt, "training", "record_stride", 1);
  cfg.training.divergence_factor =
      config_get_or<double>(jt, "training", "divergence_factor", 1e3);
  cfg.training.record_residuals = config_get_or<bool>(jt, "training", "record_residuals", true);
  cfg.training.validate();

  const json& jp = j.value("plan", json::object());
  cfg.plan_m = config_get_or<std::size_t>(jp, "plan", "m", 1);
  cfg.plan_batches = config_get_or<std::size_t>(jp, "plan", "num_batches", 1);
  cfg.plan_seed = config_get_or<std::uint64_t>(jp, "plan", "seed", 0);

  const json& ja = j.value("analysis", json::object());
  cfg.analysis.method =
      pipeline::parse_method(config_get_or<std::string>(ja, "analysis", "method", "product"));
  cfg.analysis.interpolation_threshold =
      config_get_or<double>(ja, "analysis", "interpolation_threshold", 0.05);
  cfg.analysis.max_dim = config_get_or<std::size_t>(ja, "analysis", "max_dim", 4096);
  cfg.analysis.diagnostic_points =
      config_get_or<std::size_t>(ja, "analysis", "diagnostic_points", 65);
  cfg.analysis_from_step = config_get_or<std::size_t>(ja, "analysis", "from_step", 0);

  if (seed_override) {
    // One flag re-rolls every stochastic component, each on its own stream.
    cfg.dataset["seed"] = *seed_override;
    cfg.model.init_seed = *seed_override + 1;
    cfg.plan_seed = *seed_override + 2;
  }
  return cfg;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

int cmd_dataset(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override) {
  RunConfig cfg = load_config(config_path, seed_override);
  BuiltDataset built = build_dataset(cfg.dataset);
  fs::create_directories(out_dir);
  runio::save_dataset(out_dir, built.all, built.n_train);
  std::cout << "dataset: kind=" << built.all.kind << " n=" << built.all.size()
            << " (train " << built.n_train << ", test " << built.all.size() - built.n_train
            << ") d=" << built.all.input_dim() << " c=" << built.all.target_dim()
            << " digest=" << built.all.digest() << "\n"
            << "wrote " << out_dir << "/dataset.json, dataset.bin\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, std::size_t jobs,
              std::optional<std::uint64_t> seed_override) {
  RunConfig cfg = load_config(config_path, seed_override);
  BuiltDataset built = build_dataset(cfg.dataset);
  fs::create_directories(out_dir);
  runio::save_dataset(out_dir, built.all, built.n_train);

  // Reload through the verified path so the run trains on exactly the bytes
  // that live in the run directory.
  runio::LoadedDataset loaded = runio::load_dataset(out_dir);
  data::Dataset train_ds = loaded.train();

  if (cfg.model.input_dim() != train_ds.input_dim() ||
      cfg.model.output_dim() != train_ds.target_dim())
    throw std::invalid_argument(
        "config: model is " + std::to_string(cfg.model.input_dim()) + "->" +
        std::to_string(cfg.model.output_dim()) + " but dataset is " +
        std::to_string(train_ds.input_dim()) + "->" + std::to_string(train_ds.target_dim()));

  data::LeaveOutPlan plan =
      data::leave_out_plan(train_ds.size(), cfg.plan_m, cfg.plan_batches, cfg.plan_seed);
  net::WeightVector w0 = net::init_weights(cfg.model);

  std::cout << "train: n=" << train_ds.size() << " params=" << cfg.model.param_count()
            << " steps=" << cfg.training.steps << " eta=" << cfg.training.eta << " leave-outs="
            << plan.batches.size() << " (m=" << plan.m << ", jobs=" << jobs << ")\n";

  runio::RunBundle bundle;
  bundle.spec = cfg.model;
  bundle.config = cfg.training;
  bundle.plan = plan;
  bundle.dataset_digest = loaded.all.digest();
  bundle.full = traj::train_full(cfg.model, w0, train_ds, cfg.training);

  // Leave-out runs never need recorded residuals; the analysis only reads
  // their weights. Dropping them keeps the dump n/m times smaller.
  traj::TrainConfig lo_cfg = cfg.training;
  lo_cfg.record_residuals = false;
  bundle.leave_outs = traj::train_leave_out(cfg.model, w0, train_ds, plan, lo_cfg, jobs);

  runio::save_run(out_dir, bundle);
  std::cout << "train: final loss " << fmt(bundle.full.train_loss.back()) << " over "
            << bundle.full.points() << " record points\nwrote " << out_dir
            << "/manifest.json, full.bin, leave_*.bin\n";
  return kOk;
}

int cmd_analyze(const std::string& run_dir, const std::string& method_str,
                std::optional<std::size_t> from_step,
                const std::string& config_path) {
  runio::LoadedDataset loaded = runio::load_dataset(run_dir);
  runio::RunBundle bundle = runio::load_run(run_dir);
  if (bundle.dataset_digest != loaded.all.digest())
    throw runio::IntegrityError(run_dir + ": manifest digest does not match dataset files");
  data::Dataset train_ds = loaded.train();
  data::Dataset test_ds = loaded.test();

  pipeline::AnalysisOptions opts;
  std::size_t start_step = 0;
  if (!config_path.empty()) {
    RunConfig cfg = load_config(config_path, std::nullopt);
    opts = cfg.analysis;
    start_step = cfg.analysis_from_step;
  }
  if (!method_str.empty()) opts.method = pipeline::parse_method(method_str);
  if (from_step) start_step = *from_step;
  if (start_step % bundle.full.stride != 0)
    throw std::invalid_argument("analyze: --from-step " + std::to_string(start_step) +
                                " is not a multiple of the record stride " +
                                std::to_string(bundle.full.stride));
  opts.from_index = start_step / bundle.full.stride;

  pipeline::AnalysisResult res = pipeline::analyze(bundle.spec, train_ds, bundle.full,
                                                   bundle.leave_outs, bundle.plan, opts);

  // factors.csv: every series the reconstruction consumes, on the shared grid.
  {
    std::vector<std::vector<double>> rows;
    const bool have_approx = !res.cbar_approx.value.empty();
    for (std::size_t k = 0; k < res.grid.size(); ++k) {
      rows.push_back({res.grid[k], res.delta[k], res.cbar.value[k],
                      res.cbar.masked[k] ? 1.0 : 0.0,
                      have_approx ? res.cbar_approx.value[k] : 0.0,
                      have_approx && res.cbar_approx.masked[k] ? 1.0 : 0.0, res.eps[k],
                      res.eps_hat[k], res.delta_from_eps[k], res.delta_from_eps_hat[k]});
    }
    runio::write_csv(run_dir + "/factors.csv",
                     {"t", "delta_bar", "c_bar", "c_bar_masked", "c_bar_approx",
                      "c_bar_approx_masked", "eps_bar", "eps_hat", "delta_from_eps",
                      "delta_from_eps_hat"},
                     rows);
  }

  runio::KernelMeta meta;
  meta.t0 = res.gram.t0;
  meta.horizon = res.gram.horizon;
  meta.n_samples = res.gram.n_samples;
  meta.method = pipeline::method_name(opts.method);
  meta.cumulative_damping = res.gram.cumulative_damping;
  meta.cbar_masked_fraction = res.gram.cbar_masked_fraction;
  runio::save_kernel(run_dir + "/K.bin", run_dir + "/K.json", res.gram.K, meta);
  runio::save_vector(run_dir + "/r0.bin", res.r0);

  {
    std::vector<std::vector<double>> rows;
    const auto& sp = res.spectrum;
    for (std::size_t k = 0; k < sp.sigma.size(); ++k)
      rows.push_back({sp.relative_index[k], sp.sigma[k], sp.projection[k],
                      sp.explained_residual[k], sp.explained_kernel[k]});
    runio::write_csv(run_dir + "/spectrum.csv",
                     {"relative_index", "sigma", "proj", "explained_residual",
                      "explained_kernel"},
                     rows);
  }

  // Final-point generalization gap, when the dump carries a test split.
  double gap = std::numeric_limits<double>::quiet_NaN();
  if (test_ds.size() > 0)
    gap = traj::measure_generalization_gap(bundle.spec, bundle.full, train_ds, test_ds).back();

  json ja;
  ja["schema_version"] = 1;
  ja["method"] = meta.method;
  ja["from_step"] = start_step;
  ja["t0"] = res.gram.t0;
  ja["horizon"] = res.gram.horizon;
  ja["n_train"] = train_ds.size();
  ja["n_test"] = test_ds.size();
  ja["param_count"] = bundle.spec.param_count();
  ja["delta_measured_final"] = res.delta_measured_final;
  ja["delta_pred_eps_final"] = res.delta_pred_eps_final;
  ja["delta_pred_eps_hat_final"] = res.delta_pred_eps_hat_final;
  ja["quadratic_form"] = res.quadratic_form_value;
  ja["gap_test_train_final"] = std::isnan(gap) ? json() : json(gap);
  ja["train_loss_final"] = res.train_loss_final;
  ja["interpolation_reached"] = res.interpolation_reached;
  ja["sigma_mean"] = res.spectrum.sigma_mean;
  ja["r0_norm2"] = res.r0_norm2;
  ja["cbar_masked_fraction"] = res.gram.cbar_masked_fraction;
  ja["cumulative_damping"] = res.gram.cumulative_damping;
  ja["delta_floor"] = factors::delta_floor(res.loss_scale);
  if (!res.diagnostics.indices.empty()) {
    json jd;
    jd["sup_omega_m"] = res.diagnostics.sup_omega_m;
    jd["omega_m_bounded_trend"] = res.diagnostics.omega_m_bounded_trend;
    jd["cbar_negative_fraction"] = res.diagnostics.cbar_negative_fraction;
    jd["last_negative_cbar_time"] = res.diagnostics.last_negative_cbar_time;
    ja["diagnostics"] = jd;
  }
  runio::atomic_write(run_dir + "/analysis.json", ja.dump(2) + "\n");

  std::cout << "analyze: method=" << meta.method << " horizon=" << fmt(res.gram.horizon)
            << " masked=" << fmt(res.gram.cbar_masked_fraction) << "\n"
            << "  delta measured " << fmt(res.delta_measured_final) << ", from eps "
            << fmt(res.delta_pred_eps_final) << ", from eps_hat "
            << fmt(res.delta_pred_eps_hat_final) << "\n"
            << "  quadratic form " << fmt(res.quadratic_form_value) << ", train loss "
            << fmt(res.train_loss_final)
            << (res.interpolation_reached ? " (interpolating)" : " (not interpolating)") << "\n"
            << "wrote " << run_dir << "/factors.csv, K.bin, K.json, r0.bin, spectrum.csv, "
            << "analysis.json\n";
  return kOk;
}

int cmd_spectrum(const std::string& k_path, const std::string& r0_path, std::string out_csv) {
  numkit::DenseMatrix K = runio::load_kernel(k_path);
  std::vector<double> r0 = runio::load_vector(r0_path);
  spectral::SpectralReport rep = spectral::analyze(K, r0);
  if (out_csv.empty())
    out_csv = (fs::path(k_path).parent_path() / "spectrum.csv").string();
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < rep.sigma.size(); ++k)
    rows.push_back({rep.relative_index[k], rep.sigma[k], rep.projection[k],
                    rep.explained_residual[k], rep.explained_kernel[k]});
  runio::write_csv(out_csv,
                   {"relative_index", "sigma", "proj", "explained_residual", "explained_kernel"},
                   rows);
  std::cout << "spectrum: " << rep.sigma.size() << " eigenvalues, mean " << fmt(rep.sigma_mean)
            << ", largest " << fmt(rep.sigma.back()) << "\nwrote " << out_csv << "\n";
  return kOk;
}

// Closed-form two-point task against the measuring pipeline, end to end.
int cmd_oracle(std::size_t n, double y1, double y2, double horizon, double eta, double eps0,
               std::size_t jobs, const std::string& out_dir) {
  oracle::TwoPointParams p;
  p.n = n;
  p.y1 = y1;
  p.y2 = y2;
  p.eps0 = eps0;
  p.validate();
  if (n % 2 != 0) throw std::invalid_argument("oracle: n must be even to build the dataset");
  if (horizon <= 0 || eta <= 0 || eta > 0.1)
    throw std::invalid_argument("oracle: need horizon > 0 and 0 < eta <= 0.1");

  // Snap the horizon to a whole number of steps and the stride to a divisor.
  std::size_t steps = static_cast<std::size_t>(std::llround(horizon / eta));
  if (steps < 10) throw std::invalid_argument("oracle: horizon under 10 steps");
  std::size_t stride = std::max<std::size_t>(1, steps / 200);
  steps = ((steps + stride - 1) / stride) * stride;
  const double t_end = static_cast<double>(steps) * eta;

  data::Dataset ds = data::gen_two_point(n, y1, y2);
  net::MLPSpec spec;
  spec.widths = {2, 1};
  spec.activation = net::Activation::kIdentity;
  spec.loss = net::LossKind::kSquared;
  spec.init = net::InitScheme::kZeroOutput;  // single layer, so the start is exactly zero
  net::WeightVector w0 = net::init_weights(spec);

  traj::TrainConfig tc;
  tc.eta = eta;
  tc.steps = steps;
  tc.record_stride = stride;
  data::LeaveOutPlan plan = data::leave_out_plan(n, 1, n, 1);
  traj::TrajectoryRecord full = traj::train_full(spec, w0, ds, tc);
  traj::TrainConfig lo_cfg = tc;
  lo_cfg.record_residuals = false;
  std::vector<traj::TrajectoryRecord> lo = traj::train_leave_out(spec, w0, ds, plan, lo_cfg, jobs);

  std::vector<double> delta = traj::measure_loss_difference(spec, ds, full, lo, plan);
  factors::MaskedSeries cbar = factors::contraction_exact(spec, ds, full, lo, plan, delta,
                                                          full.train_loss.front());
  std::vector<double> eps = factors::perturbation_series(spec, ds, full);

  double cbar_dev = 0.0, delta_err = 0.0, eps_err = 0.0;
  const double delta_scale = oracle::closed_form_delta(p, 2.0);  // near-peak reference scale
  for (std::size_t k = 0; k < full.grid.size(); ++k) {
    const double t = full.grid[k];
    if (!cbar.masked[k]) cbar_dev = std::max(cbar_dev, std::abs(cbar.value[k] - p.contraction()));
    delta_err = std::max(delta_err, std::abs(delta[k] - oracle::closed_form_delta(p, t)) /
                                        std::max(delta_scale, 1e-300));
    const double ec = oracle::closed_form_eps(p, t);
    eps_err = std::max(eps_err, std::abs(eps[k] - ec) / std::max(std::abs(ec), 1e-300));
  }

  // Effective kernel driven by the perturbed closed-form blocks.
  oracle::PerturbedBlocks pb = oracle::two_point_perturbed_blocks(p, full.grid);
  gram::BlockFn blocks = [&pb](std::size_t k, numkit::DenseMatrix& P, numkit::DenseMatrix& A) {
    P = pb.P[k];
    A = pb.A[k];
  };
  factors::MaskedSeries cbar_exact;
  cbar_exact.value.assign(full.grid.size(), p.contraction());
  cbar_exact.masked.assign(full.grid.size(), false);
  std::vector<double> r0 = traj::stacked_residual(spec, w0, ds);
  gram::GramComputation gc = gram::effective_gram(blocks, cbar_exact, full.grid, n, &r0);

  numkit::SymEigen eig = numkit::sym_eig(gc.gram.K);
  std::vector<std::vector<double>> span = oracle::two_point_span(n);
  std::vector<double> span_vals, comp_vals;
  for (std::size_t k = 0; k < n; ++k) {
    double overlap = 0.0;
    for (const auto& u : span) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += u[i] * eig.vectors(i, k);
      overlap += d * d;
    }
    (overlap > 0.5 ? span_vals : comp_vals).push_back(eig.values[k]);
  }
  oracle::GramEigen ge = oracle::closed_form_gram_eigen(p, t_end);
  double span_err = 0.0;
  for (double v : span_vals) span_err = std::max(span_err, std::abs(v - ge.span) / ge.span);
  double comp_min = comp_vals.empty() ? 0.0 : comp_vals.front();
  double comp_max = comp_vals.empty() ? 0.0 : comp_vals.front();
  for (double v : comp_vals) {
    comp_min = std::min(comp_min, v);
    comp_max = std::max(comp_max, v);
  }
  const double slack = 1e-9 * std::max(1.0, std::abs(ge.complement_hi));
  const bool comp_inside =
      comp_vals.empty() ||
      (comp_min >= ge.complement_lo - slack && comp_max <= ge.complement_hi + slack);

  const double prediction = gram::quadratic_form(gc.gram.K, r0);
  oracle::ComparisonBounds bounds = oracle::comparison_bounds(p);

  std::cout << "oracle: two-point task, n=" << n << " y=(" << y1 << "," << y2 << "), horizon "
            << fmt(t_end) << " (" << steps << " steps of " << eta << ")\n"
            << "  contraction factor: closed form " << fmt(p.contraction())
            << ", measured max deviation " << fmt(cbar_dev) << "\n"
            << "  loss difference: max error " << fmt(delta_err)
            << " relative to the curve peak\n"
            << "  perturbation factor: max relative error " << fmt(eps_err) << "\n"
            << "  kernel span eigenvalues: closed form " << fmt(ge.span)
            << ", measured within " << fmt(span_err) << "\n"
            << "  kernel complement eigenvalues: [" << fmt(comp_min) << ", " << fmt(comp_max)
            << "] " << (comp_inside ? "inside" : "OUTSIDE") << " bracket [" << fmt(ge.complement_lo)
            << ", " << fmt(ge.complement_hi) << "]\n"
            << "  weight-norm comparison bound: " << fmt(bounds.weight_norm) << "\n"
            << "  accumulated-perturbation comparison bound: "
            << fmt(bounds.accumulated_perturbation) << "\n"
            << "  kernel prediction at horizon: " << fmt(prediction) << " (closed-form delta "
            << fmt(oracle::closed_form_delta(p, t_end)) << ")\n";

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json jo;
    jo["n"] = n;
    jo["y1"] = y1;
    jo["y2"] = y2;
    jo["eps0"] = eps0;
    jo["eta"] = eta;
    jo["steps"] = steps;
    jo["horizon"] = t_end;
    jo["contraction_closed"] = p.contraction();
    jo["contraction_max_deviation"] = cbar_dev;
    jo["delta_max_relative_error"] = delta_err;
    jo["eps_max_relative_error"] = eps_err;
    jo["span_eigenvalue_closed"] = ge.span;
    jo["span_eigenvalue_max_error"] = span_err;
    jo["complement_bracket"] = {ge.complement_lo, ge.complement_hi};
    jo["complement_measured"] = {comp_min, comp_max};
    jo["complement_inside"] = comp_inside;
    jo["weight_norm_bound"] = bounds.weight_norm;
    jo["accumulated_perturbation_bound"] = bounds.accumulated_perturbation;
    jo["prediction_at_horizon"] = prediction;
    runio::atomic_write(out_dir + "/oracle.json", jo.dump(2) + "\n");

    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < full.grid.size(); ++k) {
      const double t = full.grid[k];
      rows.push_back({t, delta[k], oracle::closed_form_delta(p, t), eps[k],
                      oracle::closed_form_eps(p, t), cbar.value[k], cbar.masked[k] ? 1.0 : 0.0});
    }
    runio::write_csv(out_dir + "/oracle.csv",
                     {"t", "delta_measured", "delta_closed", "eps_measured", "eps_closed",
                      "c_bar", "c_bar_masked"},
                     rows);
    std::cout << "wrote " << out_dir << "/oracle.json, oracle.csv\n";
  }
  return kOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
  const std::vector<std::string> header = {"run",           "delta_pred_eps_hat",
                                           "delta_pred_eps", "delta_measured",
                                           "gap_test_train", "train_loss",
                                           "sigma_mean",     "r0_norm2"};
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";

  std::cout << "report:\n";
  for (const auto& dir : run_dirs) {
    const std::string path = dir + "/analysis.json";
    if (!fs::exists(path))
      throw runio::IntegrityError(dir + ": no analysis.json (run the analyze command first)");
    json ja = parse_artifact_json(path);
    const double gap = ja.at("gap_test_train_final").is_null()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : ja.at("gap_test_train_final").get<double>();
    os << dir << "," << ja.at("delta_pred_eps_hat_final").get<double>() << ","
       << ja.at("delta_pred_eps_final").get<double>() << ","
       << ja.at("delta_measured_final").get<double>() << "," << gap << ","
       << ja.at("train_loss_final").get<double>() << "," << ja.at("sigma_mean").get<double>()
       << "," << ja.at("r0_norm2").get<double>() << "\n";
    std::cout << "  " << dir << ": pred(eps_hat) "
              << fmt(ja.at("delta_pred_eps_hat_final").get<double>()) << ", pred(eps) "
              << fmt(ja.at("delta_pred_eps_final").get<double>()) << ", measured "
              << fmt(ja.at("delta_measured_final").get<double>()) << ", gap " << fmt(gap) << "\n";
  }
  runio::atomic_write(out_csv, os.str());
  std::cout << "wrote " << out_csv << "\n";
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"gradient-flow generalization gap estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, method_str;
  std::size_t jobs = 0;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::size_t> from_step;

  auto* ds = app.add_subcommand("dataset", "generate or import a dataset");
  ds->add_option("--config", config_path, "run config JSON")->required();
  ds->add_option("--out", out_dir, "output directory")->required();
  std::uint64_t seed_val = 0;
  auto* ds_seed = ds->add_option("--seed", seed_val, "override every config seed");

  auto* tr = app.add_subcommand("train", "train the full and leave-out trajectories");
  tr->add_option("--config", config_path, "run config JSON")->required();
  tr->add_option("--out", out_dir, "run directory to create")->required();
  tr->add_option("--jobs", jobs, "parallel leave-out trainings (0 = all cores)");
  auto* tr_seed = tr->add_option("--seed", seed_val, "override every config seed");

  auto* an = app.add_subcommand("analyze", "factor series, effective kernel, spectrum");
  std::string run_dir;
  an->add_option("run_dir", run_dir, "run directory produced by the train command")->required();
  an->add_option("--method", method_str, "propagator: product, magnus1, magnus2");
  std::size_t from_step_val = 0;
  auto* an_from = an->add_option("--from-step", from_step_val,
                                 "start the increment analysis at this optimizer step");
  an->add_option("--config", config_path, "optional config whose analysis section applies");

  auto* sp = app.add_subcommand("spectrum", "spectral report for a stored kernel");
  std::string k_path, r0_path, out_csv;
  sp->add_option("kernel", k_path, "K.bin path")->required();
  sp->add_option("residual", r0_path, "r0.bin path")->required();
  sp->add_option("--out", out_csv, "output CSV (default: spectrum.csv next to the kernel)");

  auto* orc = app.add_subcommand("oracle", "closed-form two-point task vs the pipeline");
  std::size_t orc_n = 8;
  double orc_y1 = 1.0, orc_y2 = 1.0, orc_horizon = 20.0, orc_eta = 1e-3, orc_eps0 = 1e-3;
  orc->add_option("--n", orc_n, "sample count (even)");
  orc->add_option("--y1", orc_y1, "first support target");
  orc->add_option("--y2", orc_y2, "second support target");
  orc->add_option("--horizon", orc_horizon, "flow time to integrate to");
  orc->add_option("--eta", orc_eta, "step size");
  orc->add_option("--eps0", orc_eps0, "perturbed-kernel complement scale");
  orc->add_option("--jobs", jobs, "parallel leave-out trainings (0 = all cores)");
  orc->add_option("--out", out_dir, "directory for oracle.json and oracle.csv");

  auto* rp = app.add_subcommand("report", "summary table over analyzed runs");
  std::vector<std::string> report_dirs;
  rp->add_option("run_dirs", report_dirs, "analyzed run directories")->required();
  rp->add_option("--out", out_csv, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*ds_seed || *tr_seed) seed_override = seed_val;
    if (*an_from) from_step = from_step_val;
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());

    if (*ds) return cmd_dataset(config_path, out_dir, seed_override);
    if (*tr) return cmd_train(config_path, out_dir, jobs, seed_override);
    if (*an) return cmd_analyze(run_dir, method_str, from_step, config_path);
    if (*sp) return cmd_spectrum(k_path, r0_path, out_csv);
    if (*orc) return cmd_oracle(orc_n, orc_y1, orc_y2, orc_horizon, orc_eta, orc_eps0, jobs,
                                out_dir);
    if (*rp) return cmd_report(report_dirs, out_csv);
    return kConfigError;
  } catch (const traj::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergenceError;
  } catch (const runio::IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIntegrityError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIntegrityError;
  }
}

}  // namespace ggap::cli
