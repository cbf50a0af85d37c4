#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ggap/data.hpp"

using namespace ggap;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "ggap_data_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

void be32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>((v >> 24) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>(v & 0xff));
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("two-point layout") {
    data::Dataset ds = data::gen_two_point(8, 1.0, -2.0, 3);
    REQUIRE(ds.size() == 8);
    CHECK(ds.input_dim() == 3);
    CHECK(ds.target_dim() == 1);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(ds.inputs[i] == std::vector<double>{1.0, 0.0, 0.0});
      CHECK(ds.targets[i][0] == 1.0);
    }
    for (std::size_t i = 4; i < 8; ++i) {
      CHECK(ds.inputs[i] == std::vector<double>{0.0, 1.0, 0.0});
      CHECK(ds.targets[i][0] == -2.0);
    }
    CHECK_THROWS_AS(data::gen_two_point(7, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(data::gen_two_point(4, 1.0, 1.0, 1), std::invalid_argument);
  }

  TEST_CASE("dataset validate and digest") {
    data::Dataset ds = data::gen_two_point(4, 1.0, 1.0);
    CHECK_NOTHROW(ds.validate());
    std::uint64_t d0 = ds.digest();
    data::Dataset same = data::gen_two_point(4, 1.0, 1.0);
    CHECK(same.digest() == d0);
    same.targets[3][0] = 1.0 + 1e-12;
    CHECK(same.digest() != d0);

    data::Dataset ragged = ds;
    ragged.inputs[1].push_back(0.0);
    CHECK_THROWS_AS(ragged.validate(), std::invalid_argument);
    data::Dataset short_targets = ds;
    short_targets.targets.pop_back();
    CHECK_THROWS_AS(short_targets.validate(), std::invalid_argument);
  }

  TEST_CASE("gaussian-alpha generator properties") {
    data::GaussianAlphaParams p;
    p.n = 60;
    p.n_test = 20;
    p.d = 12;
    p.alpha = 0.8;
    p.project_top = 6;
    p.teacher.widths = {6, 8, 2};
    p.teacher.activation = net::Activation::kTanh;
    p.teacher.init_seed = 3;
    p.seed = 9;
    data::Dataset ds = data::gen_gaussian_alpha(p);
    REQUIRE(ds.size() == 80);
    CHECK(ds.input_dim() == 12);
    CHECK(ds.target_dim() == 2);
    for (const auto& t : ds.targets) {
      CHECK(t.size() == 2);
      CHECK(t[0] + t[1] == 1.0);  // one hot
      CHECK((t[0] == 0.0 || t[0] == 1.0));
    }
    // Both classes should appear in a healthy draw.
    std::size_t ones = 0;
    for (const auto& t : ds.targets) ones += static_cast<std::size_t>(t[0]);
    CHECK(ones > 0);
    CHECK(ones < ds.size());
    // Deterministic in the seed.
    CHECK(data::gen_gaussian_alpha(p).digest() == ds.digest());
    p.seed = 10;
    CHECK(data::gen_gaussian_alpha(p).digest() != ds.digest());

    // Spectrum decay: empirical variance along later principal directions
    // must fall off. Cheap proxy: total variance close to sum exp(-alpha i).
    double total = 0.0;
    for (const auto& x : ds.inputs)
      for (double v : x) total += v * v;
    total /= static_cast<double>(ds.size());
    double expected = 0.0;
    for (std::size_t i = 1; i <= p.d; ++i) expected += std::exp(-p.alpha * static_cast<double>(i));
    CHECK(total == doctest::Approx(expected).epsilon(0.35));
  }

  TEST_CASE("gaussian-alpha parameter validation") {
    data::GaussianAlphaParams p;
    p.n = 10;
    p.d = 4;
    p.project_top = 6;  // more than d
    p.teacher.widths = {6, 4, 2};
    CHECK_THROWS_AS(data::gen_gaussian_alpha(p), std::invalid_argument);
    p.project_top = 3;
    // teacher input width disagrees with project_top
    CHECK_THROWS_AS(data::gen_gaussian_alpha(p), std::invalid_argument);
  }

  TEST_CASE("randomize_labels keeps inputs and draws one-hot targets") {
    data::Dataset base = data::gen_two_point(10, 1.0, 2.0);
    data::Dataset rl = data::randomize_labels(base, 3, 5);
    REQUIRE(rl.size() == base.size());
    CHECK(rl.inputs == base.inputs);
    CHECK(rl.target_dim() == 3);
    std::set<std::size_t> seen;
    for (const auto& t : rl.targets) {
      double sum = 0.0;
      std::size_t hot = 99;
      for (std::size_t c = 0; c < t.size(); ++c) {
        sum += t[c];
        if (t[c] == 1.0) hot = c;
      }
      CHECK(sum == 1.0);
      REQUIRE(hot < 3);
      seen.insert(hot);
    }
    CHECK(seen.size() > 1);  // ten draws over three classes
    CHECK(data::randomize_labels(base, 3, 5).targets == rl.targets);
    CHECK(data::randomize_labels(base, 3, 6).targets != rl.targets);
  }

  TEST_CASE("synthesize_projected relabels without touching inputs") {
    data::GaussianAlphaParams p;
    p.n = 50;
    p.n_test = 0;
    p.d = 8;
    p.alpha = 0.5;
    p.project_top = 4;
    p.teacher.widths = {4, 6, 2};
    p.teacher.init_seed = 21;
    p.seed = 22;
    data::Dataset base = data::gen_gaussian_alpha(p);

    data::SynProjectedParams sp;
    sp.a = 1;
    sp.b = 3;
    sp.n_moment = 20;
    sp.teacher.widths = {3, 4, 2};
    sp.teacher.init_seed = 23;
    sp.seed = 24;
    data::Dataset out = data::synthesize_projected(base, sp);
    REQUIRE(out.size() == base.size() - sp.n_moment);
    CHECK(out.input_dim() == base.input_dim());
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out.inputs[i] == base.inputs[i + sp.n_moment]);
    CHECK(out.target_dim() == 2);

    sp.b = 20;  // wider than the input dimension
    CHECK_THROWS_AS(data::synthesize_projected(base, sp), std::invalid_argument);
  }

  TEST_CASE("csv round trip with one-hot labels") {
    fs::path p = temp_file("mini.csv");
    write_file(p,
               "f0,f1,label,ignored\n"
               "0.5,-1.0,1,junk\n"
               "1.5,2.5,0,junk\n"
               "-0.25,0.0,1,junk\n");
    data::CsvSchema schema;
    schema.feature_columns = {"f0", "f1"};
    schema.label_column = "label";
    schema.one_hot_classes = 2;
    data::Dataset ds = data::load_csv(p.string(), schema);
    REQUIRE(ds.size() == 3);
    CHECK(ds.inputs[0] == std::vector<double>{0.5, -1.0});
    CHECK(ds.targets[0] == std::vector<double>{0.0, 1.0});
    CHECK(ds.targets[1] == std::vector<double>{1.0, 0.0});

    // Scalar label mode.
    data::CsvSchema scalar = schema;
    scalar.one_hot_classes = 0;
    data::Dataset ds2 = data::load_csv(p.string(), scalar);
    CHECK(ds2.targets[0] == std::vector<double>{1.0});
    CHECK(ds2.target_dim() == 1);
  }

  TEST_CASE("csv loader error paths") {
    data::CsvSchema schema;
    schema.feature_columns = {"f0"};
    schema.label_column = "label";
    CHECK_THROWS(data::load_csv("/nonexistent/file.csv", schema));

    // File-content problems surface as runtime errors naming the file.
    fs::path missing_col = temp_file("missing_col.csv");
    write_file(missing_col, "a,label\n1.0,0\n2.0,1\n");
    CHECK_THROWS_AS(data::load_csv(missing_col.string(), schema), std::runtime_error);

    fs::path bad_value = temp_file("bad_value.csv");
    write_file(bad_value, "f0,label\nnot_a_number,0\n1.0,1\n");
    CHECK_THROWS_AS(data::load_csv(bad_value.string(), schema), std::runtime_error);

    fs::path bad_class = temp_file("bad_class.csv");
    write_file(bad_class, "f0,label\n1.0,7\n2.0,0\n");
    data::CsvSchema one_hot = schema;
    one_hot.one_hot_classes = 2;
    CHECK_THROWS_AS(data::load_csv(bad_class.string(), one_hot), std::runtime_error);
  }

  TEST_CASE("idx pair loads, scales and filters") {
    // Two 2x2 images with labels 7 and 2, built byte by byte.
    std::string images;
    be32(images, 0x00000803);
    be32(images, 2);  // count
    be32(images, 2);  // rows
    be32(images, 2);  // cols
    const unsigned char px[] = {0, 128, 255, 64, 10, 20, 30, 40};
    for (unsigned char c : px) images.push_back(static_cast<char>(c));
    std::string labels;
    be32(labels, 0x00000801);
    be32(labels, 2);
    labels.push_back(7);
    labels.push_back(2);
    fs::path ip = temp_file("imgs.idx"), lp = temp_file("labs.idx");
    write_file(ip, images);
    write_file(lp, labels);

    data::Dataset ds = data::load_idx(ip.string(), lp.string());
    REQUIRE(ds.size() == 2);
    CHECK(ds.input_dim() == 4);
    CHECK(ds.inputs[0][1] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(ds.inputs[0][2] == 1.0);
    // Without a filter the raw byte is the class index, so dim = max+1.
    CHECK(ds.target_dim() == 8);
    CHECK(ds.targets[0][7] == 1.0);
    CHECK(ds.targets[1][2] == 1.0);
    CHECK(ds.targets[0][0] == 0.0);

    // A class filter remaps labels to filter order: 2 -> 0, 7 -> 1.
    data::Dataset filtered = data::load_idx(ip.string(), lp.string(), {2, 7});
    REQUIRE(filtered.size() == 2);
    CHECK(filtered.target_dim() == 2);
    CHECK(filtered.targets[0] == std::vector<double>{0.0, 1.0});
    CHECK(filtered.targets[1] == std::vector<double>{1.0, 0.0});
    CHECK(filtered.inputs[1][0] == doctest::Approx(10.0 / 255.0).epsilon(1e-12));

    // Corrupt magic must be rejected.
    std::string bad = images;
    bad[3] = 0x42;
    fs::path bp = temp_file("bad.idx");
    write_file(bp, bad);
    CHECK_THROWS(data::load_idx(bp.string(), lp.string()));

    // Count mismatch between the two files.
    std::string labels3;
    be32(labels3, 0x00000801);
    be32(labels3, 3);
    labels3.push_back(1);
    labels3.push_back(0);
    labels3.push_back(1);
    fs::path lp3 = temp_file("labs3.idx");
    write_file(lp3, labels3);
    CHECK_THROWS(data::load_idx(ip.string(), lp3.string()));
  }

  TEST_CASE("leave_out_plan draws disjoint sorted batches") {
    data::LeaveOutPlan plan = data::leave_out_plan(20, 3, 5, 77);
    CHECK(plan.n == 20);
    CHECK(plan.m == 3);
    REQUIRE(plan.batches.size() == 5);
    std::set<std::size_t> used;
    for (const auto& b : plan.batches) {
      REQUIRE(b.size() == 3);
      for (std::size_t k = 0; k + 1 < b.size(); ++k) CHECK(b[k] < b[k + 1]);
      for (std::size_t idx : b) {
        CHECK(idx < 20);
        CHECK(used.insert(idx).second);  // no index reused across batches
      }
    }
    // complement() partitions [0, n) against its batch.
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      std::vector<std::size_t> comp = plan.complement(b);
      CHECK(comp.size() == 17);
      std::set<std::size_t> all(comp.begin(), comp.end());
      for (std::size_t idx : plan.batches[b]) CHECK(all.insert(idx).second);
      CHECK(all.size() == 20);
    }
    // Determinism and seed sensitivity.
    CHECK(data::leave_out_plan(20, 3, 5, 77).batches == plan.batches);
    CHECK(data::leave_out_plan(20, 3, 5, 78).batches != plan.batches);
    // Full coverage case: every index used exactly once.
    data::LeaveOutPlan full = data::leave_out_plan(12, 3, 4, 1);
    std::set<std::size_t> seen;
    for (const auto& b : full.batches) seen.insert(b.begin(), b.end());
    CHECK(seen.size() == 12);
    CHECK_THROWS_AS(data::leave_out_plan(10, 3, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(data::leave_out_plan(10, 0, 1, 1), std::invalid_argument);
  }
}
