#include "ggap/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ggap::data {

namespace {

void append_u64(std::uint64_t& h, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) {
    h ^= (v >> (8 * b)) & 0xff;
    h *= 1099511628211ull;
  }
}

std::vector<double> one_hot(std::size_t idx, std::size_t classes) {
  std::vector<double> y(classes, 0.0);
  y[idx] = 1.0;
  return y;
}

// Column-orthonormal frame from a seeded Gaussian draw, modified Gram-Schmidt.
std::vector<std::vector<double>> random_orthogonal(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> q(d, std::vector<double>(d));
  for (auto& col : q)
    for (double& v : col) v = normal(rng);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q[k][i] * q[j][i];
      for (std::size_t i = 0; i < d; ++i) q[k][i] -= proj * q[j][i];
    }
    double nrm = 0.0;
    for (double v : q[k]) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) throw std::runtime_error("random_orthogonal: degenerate draw");
    for (double& v : q[k]) v /= nrm;
  }
  return q;  // q[k] is the k-th column
}

// Standardize each coordinate of a projected table in place (empirical mean
// and standard deviation over the table itself).
void standardize_columns(std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return;
  const std::size_t k = rows[0].size();
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r[j];
    mean /= n;
    double var = 0.0;
    for (const auto& r : rows) var += (r[j] - mean) * (r[j] - mean);
    var /= n;
    const double sd = std::sqrt(var);
    const double inv = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (auto& r : rows) r[j] = (r[j] - mean) * inv;
  }
}

std::vector<std::vector<double>> teacher_one_hot(const net::MLPSpec& teacher,
                                                 const std::vector<std::vector<double>>& feats) {
  teacher.validate();
  net::WeightVector tw = net::init_weights(teacher);
  std::vector<std::vector<double>> labels;
  labels.reserve(feats.size());
  for (const auto& f : feats) {
    std::vector<double> logits = net::forward(teacher, tw, f);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;  // first max wins ties
    labels.push_back(one_hot(best, logits.size()));
  }
  return labels;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error(path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

void Dataset::validate() const {
  if (inputs.size() != targets.size())
    throw std::invalid_argument("Dataset: " + std::to_string(inputs.size()) + " inputs vs " +
                                std::to_string(targets.size()) + " targets");
  if (inputs.size() < 2) throw std::invalid_argument("Dataset: need at least 2 samples");
  const std::size_t d = inputs[0].size(), c = targets[0].size();
  if (d == 0 || c == 0) throw std::invalid_argument("Dataset: empty feature or target row");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != d)
      throw std::invalid_argument("Dataset: ragged input row " + std::to_string(i));
    if (targets[i].size() != c)
      throw std::invalid_argument("Dataset: ragged target row " + std::to_string(i));
  }
}

std::uint64_t Dataset::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  append_u64(h, inputs.size());
  append_u64(h, input_dim());
  append_u64(h, target_dim());
  auto mix = [&](const std::vector<std::vector<double>>& rows) {
    for (const auto& r : rows)
      for (double v : r) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        append_u64(h, bits);
      }
  };
  mix(inputs);
  mix(targets);
  return h;
}

Dataset gen_two_point(std::size_t n, double y1, double y2, std::size_t d) {
  if (n < 2 || n % 2 != 0)
    throw std::invalid_argument("gen_two_point: n must be even and >= 2, got " + std::to_string(n));
  if (d < 2) throw std::invalid_argument("gen_two_point: need d >= 2");
  Dataset ds;
  ds.kind = "two-point";
  ds.inputs.reserve(n);
  ds.targets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d, 0.0);
    const bool first_half = i < n / 2;
    x[first_half ? 0 : 1] = 1.0;
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back({first_half ? y1 : y2});
  }
  return ds;
}

Dataset gen_gaussian_alpha(const GaussianAlphaParams& p) {
  if (p.n < 2) throw std::invalid_argument("gen_gaussian_alpha: need n >= 2");
  if (p.d < p.project_top)
    throw std::invalid_argument("gen_gaussian_alpha: d must be >= projection width");
  if (p.teacher.input_dim() != p.project_top)
    throw std::invalid_argument("gen_gaussian_alpha: teacher input width " +
                                std::to_string(p.teacher.input_dim()) + " != projection width " +
                                std::to_string(p.project_top));
  std::mt19937_64 rng(p.seed);
  auto q = random_orthogonal(p.d, rng);  // q[k] = k-th eigenvector, eigenvalue exp(-alpha*(k+1))

  std::vector<double> sdev(p.d);
  for (std::size_t k = 0; k < p.d; ++k) sdev[k] = std::exp(-0.5 * p.alpha * double(k + 1));

  const std::size_t total = p.n + p.n_test;
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.kind = "gaussian-alpha";
  ds.seed = p.seed;
  ds.inputs.assign(total, std::vector<double>(p.d, 0.0));
  std::vector<std::vector<double>> proj(total, std::vector<double>(p.project_top));
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t k = 0; k < p.d; ++k) {
      const double c = sdev[k] * normal(rng);  // coordinate along eigenvector k
      if (k < p.project_top) proj[s][k] = c;
      for (std::size_t i = 0; i < p.d; ++i) ds.inputs[s][i] += c * q[k][i];
    }
  }
  standardize_columns(proj);
  ds.targets = teacher_one_hot(p.teacher, proj);
  return ds;
}

Dataset synthesize_projected(const Dataset& corpus, const SynProjectedParams& p) {
  corpus.validate();
  const std::size_t d = corpus.input_dim();
  if (p.a < 1 || p.b < p.a || p.b > d)
    throw std::invalid_argument("synthesize_projected: eigenvector range [" + std::to_string(p.a) +
                                "," + std::to_string(p.b) + "] out of bounds for d=" +
                                std::to_string(d));
  if (p.n_moment < 2 || p.n_moment + 2 > corpus.size())
    throw std::invalid_argument("synthesize_projected: moment split leaves too few samples");
  const std::size_t width = p.b - p.a + 1;
  if (p.teacher.input_dim() != width)
    throw std::invalid_argument("synthesize_projected: teacher input width must be " +
                                std::to_string(width));

  numkit::DenseMatrix moment(d, d);
  for (std::size_t s = 0; s < p.n_moment; ++s) {
    const auto& x = corpus.inputs[s];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) moment(i, j) += x[i] * x[j];
  }
  const double inv = 1.0 / static_cast<double>(p.n_moment);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) moment(i, j) *= inv;

  numkit::SymEigen eig = numkit::sym_eig(moment);  // ascending

  Dataset ds;
  ds.kind = "syn-projected";
  ds.seed = p.seed;
  std::vector<std::vector<double>> proj;
  for (std::size_t s = p.n_moment; s < corpus.size(); ++s) {
    ds.inputs.push_back(corpus.inputs[s]);
    std::vector<double> row(width);
    for (std::size_t k = 0; k < width; ++k) {
      // rank r in descending order -> ascending column d-r
      const std::size_t col = d - (p.a + k);
      double s2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) s2 += corpus.inputs[s][i] * eig.vectors(i, col);
      row[k] = s2;
    }
    proj.push_back(std::move(row));
  }
  standardize_columns(proj);
  ds.targets = teacher_one_hot(p.teacher, proj);
  return ds;
}

Dataset randomize_labels(const Dataset& base, std::size_t num_classes, std::uint64_t seed) {
  base.validate();
  if (num_classes < 2) throw std::invalid_argument("randomize_labels: need at least 2 classes");
  Dataset ds;
  ds.kind = base.kind + "+random-labels";
  ds.seed = seed;
  ds.inputs = base.inputs;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dist(0, num_classes - 1);
  ds.targets.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) ds.targets.push_back(one_hot(dist(rng), num_classes));
  return ds;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  if (schema.feature_columns.empty()) throw std::invalid_argument("load_csv: no feature columns");
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error(path + ": column '" + name + "' not in header");
  };
  std::vector<std::size_t> feat_idx;
  for (const auto& c : schema.feature_columns) feat_idx.push_back(col_index(c));
  const std::size_t label_idx = col_index(schema.label_column);

  Dataset ds;
  ds.kind = "csv";
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(header.size()));
    auto parse = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing junk");
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": row " + std::to_string(row) + ": cannot parse '" + s +
                                 "'");
      }
    };
    std::vector<double> x;
    for (std::size_t i : feat_idx) x.push_back(parse(cells[i]));
    const double label = parse(cells[label_idx]);
    ds.inputs.push_back(std::move(x));
    if (schema.one_hot_classes > 0) {
      const double rounded = std::nearbyint(label);
      if (std::abs(label - rounded) > 1e-9 || rounded < 0 ||
          rounded >= double(schema.one_hot_classes))
        throw std::runtime_error(path + ": row " + std::to_string(row) + ": label " +
                                 cells[label_idx] + " not a class index in [0," +
                                 std::to_string(schema.one_hot_classes) + ")");
      ds.targets.push_back(one_hot(static_cast<std::size_t>(rounded), schema.one_hot_classes));
    } else {
      ds.targets.push_back({label});
    }
  }
  ds.validate();
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::vector<int>& keep_classes, std::size_t max_count) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error(images_path + ": cannot open");
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error(labels_path + ": cannot open");

  const std::uint32_t img_magic = read_be32(imgs, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error(images_path + ": bad magic " + std::to_string(img_magic));
  const std::uint32_t n_img = read_be32(imgs, images_path);
  const std::uint32_t rows = read_be32(imgs, images_path);
  const std::uint32_t cols = read_be32(imgs, images_path);

  const std::uint32_t lab_magic = read_be32(labs, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error(labels_path + ": bad magic " + std::to_string(lab_magic));
  const std::uint32_t n_lab = read_be32(labs, labels_path);
  if (n_img != n_lab)
    throw std::runtime_error("idx pair: " + std::to_string(n_img) + " images vs " +
                             std::to_string(n_lab) + " labels");

  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> buf(pixels);

  std::vector<int> remap(256, -1);
  if (keep_classes.empty()) {
    for (int c = 0; c < 256; ++c) remap[c] = c;
  } else {
    for (std::size_t k = 0; k < keep_classes.size(); ++k) {
      if (keep_classes[k] < 0 || keep_classes[k] > 255)
        throw std::invalid_argument("load_idx: class filter out of byte range");
      remap[keep_classes[k]] = static_cast<int>(k);
    }
  }

  Dataset ds;
  ds.kind = "idx";
  int max_label = -1;
  for (std::uint32_t s = 0; s < n_img; ++s) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!imgs) throw std::runtime_error(images_path + ": truncated at image " + std::to_string(s));
    char lab_byte;
    labs.read(&lab_byte, 1);
    if (!labs) throw std::runtime_error(labels_path + ": truncated at label " + std::to_string(s));
    const int label = static_cast<unsigned char>(lab_byte);
    const int mapped = remap[label];
    if (mapped < 0) continue;
    if (max_count > 0 && ds.inputs.size() >= max_count) continue;
    std::vector<double> x(pixels);
    for (std::size_t i = 0; i < pixels; ++i) x[i] = buf[i] / 255.0;
    ds.inputs.push_back(std::move(x));
    ds.targets.push_back({});  // filled below once the class count is known
    ds.targets.back().push_back(mapped);
    max_label = std::max(max_label, mapped);
  }
  const std::size_t classes =
      keep_classes.empty() ? static_cast<std::size_t>(max_label + 1) : keep_classes.size();
  for (auto& t : ds.targets) {
    const std::size_t idx = static_cast<std::size_t>(t[0]);
    t = one_hot(idx, classes);
  }
  ds.validate();
  return ds;
}

std::vector<std::size_t> LeaveOutPlan::complement(std::size_t b) const {
  if (b >= batches.size()) throw std::invalid_argument("LeaveOutPlan: batch index out of range");
  std::vector<bool> omit(n, false);
  for (std::size_t i : batches[b]) omit[i] = true;
  std::vector<std::size_t> out;
  out.reserve(n - m);
  for (std::size_t i = 0; i < n; ++i)
    if (!omit[i]) out.push_back(i);
  return out;
}

LeaveOutPlan leave_out_plan(std::size_t n, std::size_t m, std::size_t num_batches,
                            std::uint64_t seed) {
  if (m == 0 || num_batches == 0) throw std::invalid_argument("leave_out_plan: empty plan");
  if (m * num_batches > n)
    throw std::invalid_argument("leave_out_plan: " + std::to_string(num_batches) + " batches of " +
                                std::to_string(m) + " exceed n=" + std::to_string(n));
  if (m >= n)
    throw std::invalid_argument("leave_out_plan: m=" + std::to_string(m) +
                                " leaves no training samples");
  LeaveOutPlan plan;
  plan.n = n;
  plan.m = m;
  plan.seed = seed;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t b = 0; b < num_batches; ++b) {
    std::vector<std::size_t> batch(perm.begin() + b * m, perm.begin() + (b + 1) * m);
    std::sort(batch.begin(), batch.end());
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

}  // namespace ggap::data
