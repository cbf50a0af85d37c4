#pragma once

// On-disk formats and atomic write helpers. A "run directory" is
// self-contained: dataset copy, manifest, one binary block file per
// trajectory. All binaries are native little-endian doubles; the JSON
// sidecars carry shapes and digests so loads can verify integrity.

#include <cstdint>
#include <string>
#include <vector>

#include "ggap/data.hpp"
#include "ggap/net.hpp"
#include "ggap/numkit.hpp"
#include "ggap/traj.hpp"

namespace ggap::runio {

struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Write-to-temp-then-rename so partial writes never land under the real name.
void atomic_write(const std::string& path, const std::string& bytes);
void atomic_write(const std::string& path, const std::vector<double>& values);

std::string read_file(const std::string& path);

// Dataset dump: <dir>/dataset.json + <dir>/dataset.bin. n_train marks the
// split; rows past it are the held-out test portion.
void save_dataset(const std::string& dir, const data::Dataset& ds, std::size_t n_train);
struct LoadedDataset {
  data::Dataset all;
  std::size_t n_train = 0;
  data::Dataset train() const;
  data::Dataset test() const;  // empty-inputs dataset when no test rows
};
LoadedDataset load_dataset(const std::string& dir);

// Run dump: manifest.json + full.bin + leave_###.bin (+ dataset copy made by
// the caller). Residual blocks are present only where recorded.
struct RunBundle {
  net::MLPSpec spec;
  traj::TrainConfig config;
  data::LeaveOutPlan plan;
  traj::TrajectoryRecord full;
  std::vector<traj::TrajectoryRecord> leave_outs;
  std::uint64_t dataset_digest = 0;
};
void save_run(const std::string& dir, const RunBundle& bundle);
RunBundle load_run(const std::string& dir);

// Effective kernel: K.bin (u64 rows, u64 cols, row-major doubles) + sidecar.
struct KernelMeta {
  double t0 = 0.0;
  double horizon = 0.0;
  std::size_t n_samples = 0;
  std::string method;
  double cumulative_damping = 0.0;
  double cbar_masked_fraction = 0.0;
};
void save_kernel(const std::string& bin_path, const std::string& json_path,
                 const numkit::DenseMatrix& K, const KernelMeta& meta);
numkit::DenseMatrix load_kernel(const std::string& bin_path);
KernelMeta load_kernel_meta(const std::string& json_path);

void save_vector(const std::string& path, const std::vector<double>& v);
std::vector<double> load_vector(const std::string& path);

// CSV writing: header + rows, comma separated, full double precision.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string json_mlp_spec(const net::MLPSpec& spec);
net::MLPSpec parse_mlp_spec(const std::string& json_text);

}  // namespace ggap::runio
