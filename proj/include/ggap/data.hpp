#pragma once

// Dataset generators and loaders. Generators are pure functions of their
// parameters and seed. Targets are always dense vectors of length C
// (one-hot for classification tasks).

#include <cstdint>
#include <string>
#include <vector>

#include "ggap/net.hpp"

namespace ggap::data {

struct Dataset {
  std::vector<std::vector<double>> inputs;   // n x d
  std::vector<std::vector<double>> targets;  // n x C
  std::string kind;                          // provenance tag, e.g. "two-point"
  std::uint64_t seed = 0;

  std::size_t size() const { return inputs.size(); }
  std::size_t input_dim() const { return inputs.empty() ? 0 : inputs[0].size(); }
  std::size_t target_dim() const { return targets.empty() ? 0 : targets[0].size(); }
  void validate() const;  // ragged rows, size mismatch, n < 2 -> invalid_argument
  std::uint64_t digest() const;  // FNV-1a over dims and raw values
};

// Two supports on orthogonal axes: first n/2 samples are e1 with target y1,
// the rest e2 with target y2 (scalar targets, squared loss intended).
// n must be even and >= 2; d >= 2.
Dataset gen_two_point(std::size_t n, double y1, double y2, std::size_t d = 2);

// Gaussian inputs with covariance spectrum exp(-alpha * i), i = 1..d, in a
// seeded random orthogonal frame. Labels: project onto the top ten
// eigenvectors, standardize each coordinate empirically, feed a freshly
// initialized teacher network, take argmax as a one-hot label. Generates
// n_train + n_test samples in one stream; callers split by index.
struct GaussianAlphaParams {
  std::size_t n = 0;        // training samples
  std::size_t n_test = 0;   // extra samples appended after the first n
  std::size_t d = 20;
  double alpha = 1.0;
  std::size_t project_top = 10;
  net::MLPSpec teacher;     // input width must equal project_top
  std::uint64_t seed = 0;
};
Dataset gen_gaussian_alpha(const GaussianAlphaParams& p);

// Relabel a corpus through the spectrum of its own empirical second-moment
// matrix: estimate the moment matrix on held-out rows, project the remaining
// rows onto eigenvectors a..b (1-based, eigenvalues descending), standardize,
// teacher-label. Inputs keep their original coordinates; only labels change.
struct SynProjectedParams {
  std::size_t a = 1;
  std::size_t b = 10;
  std::size_t n_moment = 0;  // rows consumed for the moment estimate
  net::MLPSpec teacher;      // input width must equal b - a + 1
  std::uint64_t seed = 0;
};
Dataset synthesize_projected(const Dataset& corpus, const SynProjectedParams& p);

// Replace targets with uniformly random one-hot labels; inputs are shared
// with the base dataset unchanged.
Dataset randomize_labels(const Dataset& base, std::size_t num_classes, std::uint64_t seed);

// CSV loader. Header row required; feature columns and the label column are
// named. If one_hot_classes > 0 the label column holds a class index in
// [0, C) and is expanded; otherwise the label is taken as a real scalar.
struct CsvSchema {
  std::vector<std::string> feature_columns;
  std::string label_column;
  std::size_t one_hot_classes = 0;
};
Dataset load_csv(const std::string& path, const CsvSchema& schema);

// IDX image/label pair (big-endian magics 0x00000803 / 0x00000801). Pixel
// values scale to [0,1]; labels expand to one-hot. Optional class filter
// keeps only the listed labels (in order of appearance), remapping them to
// 0..k-1; max_count truncates after filtering (0 = keep all).
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::vector<int>& keep_classes = {}, std::size_t max_count = 0);

// Leave-m-out plan: disjoint batches of size m drawn uniformly without
// replacement from [0, n). Requires m >= 1 and m * num_batches <= n.
struct LeaveOutPlan {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> batches;  // each sorted ascending
  std::uint64_t seed = 0;

  // indices of S \ batch[b], sorted ascending
  std::vector<std::size_t> complement(std::size_t b) const;
};
LeaveOutPlan leave_out_plan(std::size_t n, std::size_t m, std::size_t num_batches,
                            std::uint64_t seed);

}  // namespace ggap::data
