#include "ggap/runio.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ggap::runio {

namespace {

constexpr int kSchemaVersion = 1;

void atomic_write_raw(const std::string& path, const char* data, std::size_t size) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error(tmp + ": short write");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw std::runtime_error(path + ": rename failed: " + ec.message());
}

json activation_json(net::Activation a) {
  switch (a) {
    case net::Activation::kIdentity: return "identity";
    case net::Activation::kRelu: return "relu";
    case net::Activation::kTanh: return "tanh";
  }
  return "tanh";
}

net::Activation parse_activation(const std::string& s) {
  if (s == "identity") return net::Activation::kIdentity;
  if (s == "relu") return net::Activation::kRelu;
  if (s == "tanh") return net::Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

json loss_json(net::LossKind l) {
  return l == net::LossKind::kSquared ? "squared" : "cross-entropy";
}

net::LossKind parse_loss(const std::string& s) {
  if (s == "squared") return net::LossKind::kSquared;
  if (s == "cross-entropy") return net::LossKind::kCrossEntropy;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

json init_json(net::InitScheme i) {
  return i == net::InitScheme::kFanInUniform ? "fan-in-uniform" : "zero-output";
}

net::InitScheme parse_init(const std::string& s) {
  if (s == "fan-in-uniform") return net::InitScheme::kFanInUniform;
  if (s == "zero-output") return net::InitScheme::kZeroOutput;
  throw std::invalid_argument("unknown init scheme '" + s + "'");
}

json spec_to_json(const net::MLPSpec& spec) {
  json j;
  j["widths"] = spec.widths;
  j["activation"] = activation_json(spec.activation);
  j["loss"] = loss_json(spec.loss);
  j["init"] = init_json(spec.init);
  j["init_seed"] = spec.init_seed;
  return j;
}

net::MLPSpec spec_from_json(const json& j) {
  net::MLPSpec spec;
  spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  spec.activation = parse_activation(j.at("activation").get<std::string>());
  spec.loss = parse_loss(j.at("loss").get<std::string>());
  spec.init = parse_init(j.value("init", std::string("fan-in-uniform")));
  spec.init_seed = j.value("init_seed", std::uint64_t{0});
  spec.validate();
  return spec;
}

std::vector<double> read_doubles(const std::string& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError(path + ": cannot open");
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes != expected * sizeof(double))
    throw IntegrityError(path + ": " + std::to_string(bytes) + " bytes, expected " +
                         std::to_string(expected * sizeof(double)));
  std::vector<double> out(expected);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IntegrityError(path + ": short read");
  return out;
}

// One trajectory's block file: per record point, weights then loss then
// (optionally) the stacked residual.
void save_record(const std::string& path, const traj::TrajectoryRecord& rec, bool with_residuals) {
  std::vector<double> flat;
  const std::size_t W = rec.weights.empty() ? 0 : rec.weights[0].size();
  const std::size_t R = with_residuals && !rec.residuals.empty() ? rec.residuals[0].size() : 0;
  flat.reserve(rec.points() * (W + 1 + R));
  for (std::size_t k = 0; k < rec.points(); ++k) {
    flat.insert(flat.end(), rec.weights[k].begin(), rec.weights[k].end());
    flat.push_back(rec.train_loss[k]);
    if (R > 0) flat.insert(flat.end(), rec.residuals[k].begin(), rec.residuals[k].end());
  }
  atomic_write(path, flat);
}

traj::TrajectoryRecord load_record(const std::string& path, double eta, std::size_t steps,
                                   std::size_t stride, std::size_t W, std::size_t R,
                                   const std::vector<std::size_t>& train_indices) {
  traj::TrajectoryRecord rec;
  rec.eta = eta;
  rec.steps = steps;
  rec.stride = stride;
  rec.train_indices = train_indices;
  const std::size_t points = steps / stride + 1;
  std::vector<double> flat = read_doubles(path, points * (W + 1 + R));
  std::size_t off = 0;
  for (std::size_t k = 0; k < points; ++k) {
    rec.grid.push_back(static_cast<double>(k * stride) * eta);
    rec.weights.emplace_back(flat.begin() + off, flat.begin() + off + W);
    off += W;
    rec.train_loss.push_back(flat[off++]);
    if (R > 0) {
      rec.residuals.emplace_back(flat.begin() + off, flat.begin() + off + R);
      off += R;
    }
  }
  return rec;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& bytes) {
  atomic_write_raw(path, bytes.data(), bytes.size());
}

void atomic_write(const std::string& path, const std::vector<double>& values) {
  atomic_write_raw(path, reinterpret_cast<const char*>(values.data()),
                   values.size() * sizeof(double));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_dataset(const std::string& dir, const data::Dataset& ds, std::size_t n_train) {
  ds.validate();
  if (n_train == 0 || n_train > ds.size())
    throw std::invalid_argument("save_dataset: bad train split " + std::to_string(n_train));
  fs::create_directories(dir);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = ds.kind;
  j["seed"] = ds.seed;
  j["n"] = ds.size();
  j["n_train"] = n_train;
  j["d"] = ds.input_dim();
  j["c"] = ds.target_dim();
  j["digest"] = ds.digest();
  atomic_write(dir + "/dataset.json", j.dump(2) + "\n");

  std::vector<double> flat;
  flat.reserve(ds.size() * (ds.input_dim() + ds.target_dim()));
  for (const auto& r : ds.inputs) flat.insert(flat.end(), r.begin(), r.end());
  for (const auto& r : ds.targets) flat.insert(flat.end(), r.begin(), r.end());
  atomic_write(dir + "/dataset.bin", flat);
}

data::Dataset LoadedDataset::train() const {
  data::Dataset t;
  t.kind = all.kind;
  t.seed = all.seed;
  t.inputs.assign(all.inputs.begin(), all.inputs.begin() + n_train);
  t.targets.assign(all.targets.begin(), all.targets.begin() + n_train);
  return t;
}

data::Dataset LoadedDataset::test() const {
  data::Dataset t;
  t.kind = all.kind;
  t.seed = all.seed;
  t.inputs.assign(all.inputs.begin() + n_train, all.inputs.end());
  t.targets.assign(all.targets.begin() + n_train, all.targets.end());
  return t;
}

LoadedDataset load_dataset(const std::string& dir) {
  json j = json::parse(read_file(dir + "/dataset.json"));
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw IntegrityError(dir + "/dataset.json: unsupported schema version");
  const std::size_t n = j.at("n").get<std::size_t>();
  const std::size_t d = j.at("d").get<std::size_t>();
  const std::size_t c = j.at("c").get<std::size_t>();
  LoadedDataset out;
  out.n_train = j.at("n_train").get<std::size_t>();
  out.all.kind = j.at("kind").get<std::string>();
  out.all.seed = j.at("seed").get<std::uint64_t>();
  std::vector<double> flat = read_doubles(dir + "/dataset.bin", n * (d + c));
  std::size_t off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.all.inputs.emplace_back(flat.begin() + off, flat.begin() + off + d);
    off += d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.all.targets.emplace_back(flat.begin() + off, flat.begin() + off + c);
    off += c;
  }
  const std::uint64_t digest = j.at("digest").get<std::uint64_t>();
  if (out.all.digest() != digest)
    throw IntegrityError(dir + "/dataset.bin: digest mismatch (file corrupted or edited)");
  return out;
}

void save_run(const std::string& dir, const RunBundle& bundle) {
  fs::create_directories(dir);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = spec_to_json(bundle.spec);
  j["training"] = {{"eta", bundle.config.eta},
                   {"steps", bundle.config.steps},
                   {"record_stride", bundle.config.record_stride},
                   {"divergence_factor", bundle.config.divergence_factor}};
  j["plan"] = {{"n", bundle.plan.n},
               {"m", bundle.plan.m},
               {"seed", bundle.plan.seed},
               {"batches", bundle.plan.batches}};
  j["dataset_digest"] = bundle.dataset_digest;
  j["param_count"] = bundle.spec.param_count();
  j["full_residual_dim"] = bundle.full.residuals.empty() ? 0 : bundle.full.residuals[0].size();
  j["leave_out_residual_dim"] =
      (!bundle.leave_outs.empty() && !bundle.leave_outs[0].residuals.empty())
          ? bundle.leave_outs[0].residuals[0].size()
          : 0;
  j["num_leave_outs"] = bundle.leave_outs.size();
  atomic_write(dir + "/manifest.json", j.dump(2) + "\n");

  save_record(dir + "/full.bin", bundle.full, !bundle.full.residuals.empty());
  for (std::size_t b = 0; b < bundle.leave_outs.size(); ++b) {
    char name[32];
    std::snprintf(name, sizeof(name), "leave_%03zu.bin", b);
    save_record(dir + "/" + name, bundle.leave_outs[b],
                !bundle.leave_outs[b].residuals.empty());
  }
}

RunBundle load_run(const std::string& dir) {
  json j = json::parse(read_file(dir + "/manifest.json"));
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw IntegrityError(dir + "/manifest.json: unsupported schema version");
  RunBundle b;
  b.spec = spec_from_json(j.at("model"));
  b.config.eta = j.at("training").at("eta").get<double>();
  b.config.steps = j.at("training").at("steps").get<std::size_t>();
  b.config.record_stride = j.at("training").at("record_stride").get<std::size_t>();
  b.config.divergence_factor = j.at("training").at("divergence_factor").get<double>();
  b.plan.n = j.at("plan").at("n").get<std::size_t>();
  b.plan.m = j.at("plan").at("m").get<std::size_t>();
  b.plan.seed = j.at("plan").at("seed").get<std::uint64_t>();
  b.plan.batches = j.at("plan").at("batches").get<std::vector<std::vector<std::size_t>>>();
  b.dataset_digest = j.at("dataset_digest").get<std::uint64_t>();

  const std::size_t W = j.at("param_count").get<std::size_t>();
  const std::size_t R_full = j.at("full_residual_dim").get<std::size_t>();
  const std::size_t R_lo = j.at("leave_out_residual_dim").get<std::size_t>();
  const std::size_t n_lo = j.at("num_leave_outs").get<std::size_t>();
  if (n_lo != b.plan.batches.size())
    throw IntegrityError(dir + ": manifest lists " + std::to_string(n_lo) +
                         " leave-out runs but plan has " + std::to_string(b.plan.batches.size()) +
                         " batches");

  std::vector<std::size_t> all(b.plan.n);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  b.full = load_record(dir + "/full.bin", b.config.eta, b.config.steps, b.config.record_stride, W,
                       R_full, all);
  for (std::size_t lo = 0; lo < n_lo; ++lo) {
    char name[32];
    std::snprintf(name, sizeof(name), "leave_%03zu.bin", lo);
    b.leave_outs.push_back(load_record(dir + "/" + name, b.config.eta, b.config.steps,
                                       b.config.record_stride, W, R_lo, b.plan.complement(lo)));
  }
  return b;
}

void save_kernel(const std::string& bin_path, const std::string& json_path,
                 const numkit::DenseMatrix& K, const KernelMeta& meta) {
  std::string bytes;
  const std::uint64_t rows = K.rows(), cols = K.cols();
  bytes.append(reinterpret_cast<const char*>(&rows), 8);
  bytes.append(reinterpret_cast<const char*>(&cols), 8);
  bytes.append(reinterpret_cast<const char*>(K.data()), rows * cols * sizeof(double));
  atomic_write(bin_path, bytes);

  json j;
  j["schema_version"] = kSchemaVersion;
  j["rows"] = rows;
  j["cols"] = cols;
  j["t0"] = meta.t0;
  j["horizon"] = meta.horizon;
  j["n_samples"] = meta.n_samples;
  j["method"] = meta.method;
  j["cumulative_damping"] = meta.cumulative_damping;
  j["cbar_masked_fraction"] = meta.cbar_masked_fraction;
  atomic_write(json_path, j.dump(2) + "\n");
}

numkit::DenseMatrix load_kernel(const std::string& bin_path) {
  std::string bytes = read_file(bin_path);
  if (bytes.size() < 16) throw IntegrityError(bin_path + ": too short for header");
  std::uint64_t rows, cols;
  std::memcpy(&rows, bytes.data(), 8);
  std::memcpy(&cols, bytes.data() + 8, 8);
  if (bytes.size() != 16 + rows * cols * sizeof(double))
    throw IntegrityError(bin_path + ": size does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  numkit::DenseMatrix K(rows, cols);
  std::memcpy(K.data(), bytes.data() + 16, rows * cols * sizeof(double));
  return K;
}

KernelMeta load_kernel_meta(const std::string& json_path) {
  json j = json::parse(read_file(json_path));
  KernelMeta m;
  m.t0 = j.at("t0").get<double>();
  m.horizon = j.at("horizon").get<double>();
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.method = j.at("method").get<std::string>();
  m.cumulative_damping = j.value("cumulative_damping", 0.0);
  m.cbar_masked_fraction = j.value("cbar_masked_fraction", 0.0);
  return m;
}

void save_vector(const std::string& path, const std::vector<double>& v) {
  std::string bytes;
  const std::uint64_t len = v.size();
  bytes.append(reinterpret_cast<const char*>(&len), 8);
  bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  atomic_write(path, bytes);
}

std::vector<double> load_vector(const std::string& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < 8) throw IntegrityError(path + ": too short for header");
  std::uint64_t len;
  std::memcpy(&len, bytes.data(), 8);
  if (bytes.size() != 8 + len * sizeof(double))
    throw IntegrityError(path + ": size does not match length " + std::to_string(len));
  std::vector<double> v(len);
  std::memcpy(v.data(), bytes.data() + 8, len * sizeof(double));
  return v;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream ss;
  ss.precision(17);
  for (std::size_t i = 0; i < header.size(); ++i) ss << (i ? "," : "") << header[i];
  ss << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: row width " + std::to_string(row.size()) +
                                  " vs header " + std::to_string(header.size()));
    for (std::size_t i = 0; i < row.size(); ++i) ss << (i ? "," : "") << row[i];
    ss << "\n";
  }
  atomic_write(path, ss.str());
}

std::string json_mlp_spec(const net::MLPSpec& spec) { return spec_to_json(spec).dump(2); }

net::MLPSpec parse_mlp_spec(const std::string& json_text) {
  return spec_from_json(json::parse(json_text));
}

}  // namespace ggap::runio
