#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "supcon/data.hpp"
#include "supcon/errors.hpp"
#include "supcon/rng.hpp"

using namespace supcon;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name)
      : path("/tmp/supcon_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE("data") {

TEST_CASE("blobs have the requested shape and grouped labels") {
  const Dataset ds = make_blobs(3, 10, 5, 2.0, 0.1, 42);
  CHECK(ds.size() == 30);
  CHECK(ds.dim() == 5);
  CHECK(ds.num_classes() == 3);
  for (std::size_t i = 0; i < 30; ++i) CHECK(ds.y[i] == static_cast<int>(i / 10));
}

TEST_CASE("blobs are deterministic in the seed") {
  const Dataset a = make_blobs(2, 5, 4, 3.0, 0.2, 9);
  const Dataset b = make_blobs(2, 5, 4, 3.0, 0.2, 9);
  const Dataset c = make_blobs(2, 5, 4, 3.0, 0.2, 10);
  CHECK(a.x.data == b.x.data);
  CHECK(a.x.data != c.x.data);
}

TEST_CASE("blob centers sit on the separation sphere") {
  // spread 0 collapses every sample onto its center
  const Dataset ds = make_blobs(4, 3, 6, 2.5, 0.0, 7);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(norm(ds.x.row(i)) == doctest::Approx(2.5).epsilon(1e-12));
  // samples within a class coincide
  CHECK(testutil::max_abs_diff(ds.x, ds.x) == 0.0);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(ds.x.at(0, j) == ds.x.at(1, j));
    CHECK(ds.x.at(0, j) == ds.x.at(2, j));
  }
}

TEST_CASE("stratified split takes four fifths per class in row order") {
  const Dataset ds = make_blobs(3, 10, 4, 3.0, 0.3, 1);
  CHECK(ds.train_idx.size() == 24);
  CHECK(ds.heldout_idx.size() == 6);
  // disjoint and exhaustive
  std::set<std::size_t> all(ds.train_idx.begin(), ds.train_idx.end());
  for (std::size_t i : ds.heldout_idx) CHECK(all.insert(i).second);
  CHECK(all.size() == 30);
  // per class: first 8 rows train, last 2 held out
  for (int c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 8; ++k)
      CHECK(std::count(ds.train_idx.begin(), ds.train_idx.end(), 10 * c + k) == 1);
    for (std::size_t k = 8; k < 10; ++k)
      CHECK(std::count(ds.heldout_idx.begin(), ds.heldout_idx.end(),
                       10 * c + k) == 1);
  }
}

TEST_CASE("tiny classes keep at least two training samples") {
  const Dataset ds = make_blobs(2, 3, 3, 2.0, 0.1, 5);
  // 4*3/5 = 2 (integer), max(2, .) = 2 -> 2 train + 1 held out per class
  CHECK(ds.train_idx.size() == 4);
  CHECK(ds.heldout_idx.size() == 2);
}

TEST_CASE("augment is deterministic under the stream and varies across draws") {
  const std::vector<double> x{1.0, -2.0, 3.0, 0.5};
  AugmentSpec spec;
  spec.scale_jitter = 0.1;
  spec.noise_sigma = 0.2;
  spec.mask_prob = 0.25;
  Rng a(77), b(77);
  const auto v1 = augment(x, spec, a);
  const auto v2 = augment(x, spec, b);
  CHECK(v1 == v2);
  const auto v3 = augment(x, spec, a);
  CHECK(v1 != v3);
}

TEST_CASE("augment consumes a fixed draw count regardless of parameters") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  AugmentSpec zero;  // all transforms off
  AugmentSpec full;
  full.scale_jitter = 0.2;
  full.noise_sigma = 0.1;
  full.mask_prob = 0.5;
  Rng a(5), b(5);
  (void)augment(x, zero, a);
  (void)augment(x, full, b);
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("identity augment returns the input") {
  const std::vector<double> x{0.3, -1.2, 4.0};
  AugmentSpec spec;
  Rng rng(3);
  CHECK(augment(x, spec, rng) == x);
}

TEST_CASE("masking zeroes coordinates and jitter scales the row") {
  const std::vector<double> x{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  AugmentSpec spec;
  spec.mask_prob = 1.0;
  Rng rng(8);
  const auto masked = augment(x, spec, rng);
  for (double v : masked) CHECK(v == 0.0);
  AugmentSpec jitter;
  jitter.scale_jitter = 0.5;
  Rng rng2(9);
  const auto scaled = augment(x, jitter, rng2);
  const double factor = scaled[0];
  CHECK(factor >= 0.5);
  CHECK(factor < 1.5);
  for (double v : scaled) CHECK(v == doctest::Approx(factor).epsilon(1e-15));
}

TEST_CASE("multiview assembly pairs two views per source") {
  const Dataset ds = make_blobs(2, 6, 4, 3.0, 0.2, 11);
  const std::vector<std::size_t> idx{0, 3, 7, 10};
  AugmentSpec spec;
  spec.noise_sigma = 0.05;
  Rng rng(21);
  const BatchInputs b =
      assemble_multiview_batch(ds, idx, spec, rng, LabelMode::kWithLabels);
  REQUIRE(b.x.rows == 8);
  CHECK(b.x.cols == 4);
  CHECK_NOTHROW(b.structure.validate());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    CHECK(b.structure.labels[2 * k] == ds.y[idx[k]]);
    CHECK(b.structure.view_pair[2 * k] == 2 * k + 1);
    // both views stay near the source sample
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::fabs(b.x.at(2 * k, j) - ds.x.at(idx[k], j)) < 1.0);
      CHECK(std::fabs(b.x.at(2 * k + 1, j) - ds.x.at(idx[k], j)) < 1.0);
    }
  }
  // labeled mode marks cross-source same-label rows positive
  CHECK(b.structure.positive_mask.at(0, 2));
}

TEST_CASE("unlabeled assembly allows a single source") {
  const Dataset ds = make_blobs(2, 3, 3, 2.0, 0.1, 2);
  AugmentSpec spec;
  Rng rng(4);
  const std::vector<std::size_t> one{2};
  const BatchInputs b =
      assemble_multiview_batch(ds, one, spec, rng, LabelMode::kWithoutLabels);
  CHECK(b.x.rows == 2);
  CHECK(b.structure.positives(0) == std::vector<std::size_t>{1});
  const std::vector<std::size_t> labeled_needs_two{2};
  CHECK_THROWS_AS(assemble_multiview_batch(ds, labeled_needs_two, spec, rng,
                                           LabelMode::kWithLabels),
                  Error);
}

TEST_CASE("corruption severity zero is the identity") {
  const std::vector<double> x{1.0, -0.5, 2.0};
  Rng rng(6);
  CHECK(corrupt(x, 0, 0.25, rng) == x);
}

TEST_CASE("corruption noise scales with severity") {
  const std::vector<double> x(2000, 0.0);
  for (int severity : {1, 3, 5}) {
    Rng rng(100 + severity);
    const auto noisy = corrupt(x, severity, 0.2, rng);
    double sumsq = 0.0;
    for (double v : noisy) sumsq += v * v;
    const double sd = std::sqrt(sumsq / static_cast<double>(noisy.size()));
    CHECK(sd == doctest::Approx(0.2 * severity).epsilon(0.1));
  }
  Rng rng(1);
  CHECK_THROWS_AS(corrupt(x, 6, 0.2, rng), ConfigError);
  CHECK_THROWS_AS(corrupt(x, -1, 0.2, rng), ConfigError);
}

TEST_CASE("csv round-trip preserves samples, labels, and split") {
  TempFile tmp("roundtrip.csv");
  const Dataset ds = make_blobs(3, 7, 4, 2.0, 0.4, 33);
  save_csv(ds, tmp.path);
  const Dataset back = load_csv(tmp.path);
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  CHECK(back.y == ds.y);
  CHECK(back.train_idx == ds.train_idx);
  CHECK(back.heldout_idx == ds.heldout_idx);
  for (std::size_t k = 0; k < ds.x.data.size(); ++k)
    CHECK(back.x.data[k] == ds.x.data[k]);
}

TEST_CASE("csv loader rejects malformed input") {
  SUBCASE("ragged row") {
    TempFile tmp("ragged.csv");
    std::ofstream(tmp.path) << "1.0,2.0,0\n1.0,1\n";
    CHECK_THROWS_AS(load_csv(tmp.path), CsvParseError);
  }
  SUBCASE("non-numeric field") {
    TempFile tmp("alpha.csv");
    std::ofstream(tmp.path) << "1.0,abc,0\n";
    CHECK_THROWS_AS(load_csv(tmp.path), CsvParseError);
  }
  SUBCASE("non-integer label") {
    TempFile tmp("lbl.csv");
    std::ofstream(tmp.path) << "1.0,2.0,0.5\n";
    CHECK_THROWS_AS(load_csv(tmp.path), CsvParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_csv("/tmp/supcon_test_nonexistent_file.csv"), Error);
  }
  SUBCASE("single column") {
    TempFile tmp("one.csv");
    std::ofstream(tmp.path) << "1\n";
    CHECK_THROWS_AS(load_csv(tmp.path), CsvParseError);
  }
}

TEST_CASE("csv label ids count classes by their maximum") {
  TempFile tmp("gap.csv");
  std::ofstream(tmp.path) << "1.0,0\n2.0,0\n3.0,2\n4.0,2\n";
  const Dataset ds = load_csv(tmp.path);
  CHECK(ds.num_classes() == 3);
  CHECK(ds.size() == 4);
}

}  // TEST_SUITE
