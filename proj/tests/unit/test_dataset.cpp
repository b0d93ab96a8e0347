#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "support.hpp"

using namespace zslb;
using zslb::test::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

bool has_invariant(const std::vector<Violation>& v, const std::string& name, const std::string& detail_part = "") {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) {
    return x.invariant == name && x.detail.find(detail_part) != std::string::npos;
  });
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("validate accepts a consistent dataset") {
  CHECK(validate(test::tiny_dataset()).empty());
}

TEST_CASE("validate names the class shared by seen and unseen") {
  Dataset ds = test::tiny_dataset();
  ds.split.unseen = {2, 3};
  ds.split.test_rows = {2};
  const auto v = validate(ds);
  CHECK(has_invariant(v, "seen/unseen disjoint", "class 2"));
}

TEST_CASE("validate reports a missing prototype for a test label") {
  Dataset ds = test::tiny_dataset();
  ds.prototypes.ids = {1, 2, 3};
  ds.prototypes.values.resize(6);
  const auto v = validate(ds);
  CHECK(has_invariant(v, "prototype coverage", "4"));
}

TEST_CASE("validate catches overlapping rows, NaNs and out-of-range indices") {
  Dataset ds = test::tiny_dataset();
  ds.split.test_rows = {1, 2, 3, 9};
  ds.embeddings.values[4] = std::numeric_limits<float>::quiet_NaN();
  const auto v = validate(ds);
  CHECK(has_invariant(v, "train/test rows disjoint", "row 1"));
  CHECK(has_invariant(v, "embeddings finite"));
  CHECK(has_invariant(v, "test rows in range", "row 9"));
}

TEST_CASE("bundle round-trip is bit exact") {
  TempDir dir("bundle");
  Dataset ds = test::tiny_dataset();
  save_bundle(ds, dir.path());
  const Dataset back = load_bundle(dir.path());
  CHECK(back.num_instances() == 4);
  CHECK(back.feature_dim() == 3);
  CHECK(back.semantic_dim() == 2);
  CHECK(back.split.seen.size() == 2);
  CHECK(back.split.unseen.size() == 2);
  CHECK(back.embeddings.values == ds.embeddings.values);
  CHECK(back.prototypes.values == ds.prototypes.values);
  CHECK(back.labels == ds.labels);
  CHECK(back.split.train_rows == ds.split.train_rows);
  CHECK(back.split.test_rows == ds.split.test_rows);
  CHECK_FALSE(back.attributes.has_value());

  TempDir again("bundle2");
  save_bundle(back, again.path());
  for (const char* part : {"header.txt", "embeddings.f32", "prototypes.f32", "labels.txt", "train_rows.txt",
                           "test_rows.txt"}) {
    CHECK(slurp(dir / part) == slurp(again / part));
  }
}

TEST_CASE("synthetic bundle with attributes round-trips bit exactly") {
  TempDir dir("synth");
  const Dataset ds = synthesize({3, 2, 4, 6, 5, 0.1, 11});
  REQUIRE(ds.attributes.has_value());
  save_bundle(ds, dir.path());
  const Dataset back = load_bundle(dir.path());
  REQUIRE(back.attributes.has_value());
  CHECK(back.attributes->names == ds.attributes->names);
  CHECK(back.attributes->values == ds.attributes->values);
  CHECK(back.embeddings.values == ds.embeddings.values);
  CHECK(back.name == ds.name);
}

TEST_CASE("load errors: missing part, short payload, seen label on a test row") {
  TempDir dir("broken");
  save_bundle(test::tiny_dataset(), dir.path());

  SUBCASE("missing part") {
    std::filesystem::remove(dir / "labels.txt");
    CHECK(code_of([&] { load_bundle(dir.path()); }) == ErrorCode::kMalformedBundle);
  }
  SUBCASE("header declares D=3, payload has 2 columns") {
    std::string bytes = slurp(dir / "embeddings.f32");
    spit(dir / "embeddings.f32", bytes.substr(0, 4 * 2 * 4));
    CHECK(code_of([&] { load_bundle(dir.path()); }) == ErrorCode::kCorruptPayload);
  }
  SUBCASE("test row labeled with a seen class") {
    spit(dir / "labels.txt", "1\n2\n1\n4\n");
    try {
      load_bundle(dir.path());
      FAIL("expected invalid dataset");
    } catch (const InvalidDatasetError& e) {
      CHECK(e.code() == ErrorCode::kInvalidDataset);
      CHECK_FALSE(e.violations().empty());
    }
  }
  SUBCASE("header is not structured text") {
    spit(dir / "header.txt", "{ not json");
    CHECK(code_of([&] { load_bundle(dir.path()); }) == ErrorCode::kMalformedBundle);
  }
}

TEST_CASE("save to an unwritable location is an I/O error") {
  TempDir dir("unwritable");
  spit(dir / "file", "x");
  CHECK(code_of([&] { save_bundle(test::tiny_dataset(), dir / "file" / "sub"); }) == ErrorCode::kIo);
}

TEST_CASE("loader remaps arbitrary ids onto 1..C and records the map") {
  TempDir dir("remap");
  Dataset ds = test::tiny_dataset();
  ds.labels = {10, 20, 7, 40};
  ds.prototypes.ids = {10, 20, 7, 40};
  ds.split.seen = {20, 10};
  ds.split.unseen = {40, 7};
  save_bundle(ds, dir.path());
  const Dataset back = load_bundle(dir.path());
  CHECK(back.labels == std::vector<ClassId>{1, 2, 3, 4});
  CHECK(back.class_map == std::vector<std::int64_t>{10, 20, 7, 40});
  CHECK(validate(back).empty());
  // Prototype vectors follow their classes.
  CHECK(back.prototypes.vector(3)[0] == doctest::Approx(0.6));
}

TEST_CASE("synthesize: counts, zero-noise collapse, determinism") {
  const Dataset ds = synthesize({2, 2, 5, 8, 4, 0.0, 7});
  CHECK(ds.num_instances() == 20);
  CHECK(validate(ds).empty());
  for (std::size_t r = 1; r < 5; ++r) {
    const auto a = ds.embeddings.row(0), b = ds.embeddings.row(r);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  const auto a = ds.embeddings.row(0), c = ds.embeddings.row(5);
  CHECK_FALSE(std::equal(a.begin(), a.end(), c.begin()));

  const Dataset again = synthesize({2, 2, 5, 8, 4, 0.0, 7});
  CHECK(again.embeddings.values == ds.embeddings.values);
  CHECK(again.prototypes.values == ds.prototypes.values);
  const Dataset other = synthesize({2, 2, 5, 8, 4, 0.0, 8});
  CHECK(other.embeddings.values != ds.embeddings.values);
}

TEST_CASE("synthesize: prototypes lie on the unit sphere") {
  const Dataset ds = synthesize({4, 3, 2, 5, 6, 0.2, 3});
  for (ClassId id : ds.prototypes.ids) {
    double n2 = 0.0;
    for (float v : ds.prototypes.vector(id)) n2 += double(v) * double(v);
    CHECK(n2 == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("carve_meta_split arithmetic and disjointness") {
  const Dataset ds = synthesize({10, 4, 3, 4, 3, 0.1, 5});
  const MetaSplit ms = carve_meta_split(ds, 0.3, 99);
  CHECK(ms.inner.split.seen.size() == 7);
  CHECK(ms.inner.split.unseen.size() == 3);
  const std::set<ClassId> seen(ds.split.seen.begin(), ds.split.seen.end());
  const std::set<ClassId> kept(ms.inner.split.seen.begin(), ms.inner.split.seen.end());
  for (ClassId id : ms.inner.split.unseen) {
    CHECK(seen.count(id) == 1);
    CHECK(kept.count(id) == 0);
  }
  for (std::size_t r : ms.inner.split.test_rows) CHECK(seen.count(ds.labels[r]) == 1);
  CHECK(ms.inner.split.train_rows.size() + ms.inner.split.test_rows.size() == ds.split.train_rows.size());
  CHECK(validate(ms.inner).empty());
  CHECK(ms.fusion.labels == ds.labels);
  CHECK(ms.fusion.split.test_rows == ds.split.test_rows);

  const MetaSplit again = carve_meta_split(ds, 0.3, 99);
  CHECK(again.inner.split.unseen == ms.inner.split.unseen);
}

TEST_CASE("carve_meta_split small and degenerate cases") {
  const Dataset two = synthesize({2, 1, 3, 4, 3, 0.1, 5});
  const MetaSplit ms = carve_meta_split(two, 0.5, 1);
  CHECK(ms.inner.split.seen.size() == 1);
  CHECK(ms.inner.split.unseen.size() == 1);

  const Dataset one = synthesize({1, 1, 3, 4, 3, 0.1, 5});
  CHECK(code_of([&] { carve_meta_split(one, 0.5, 1); }) == ErrorCode::kDegenerateMetaSplit);
  CHECK(code_of([&] { carve_meta_split(two, 0.1, 1); }) == ErrorCode::kDegenerateMetaSplit);
  CHECK(code_of([&] { carve_meta_split(two, 0.9, 1); }) == ErrorCode::kDegenerateMetaSplit);
}
