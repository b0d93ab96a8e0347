#include <doctest.h>

#include <cmath>
#include <fstream>

#include "core/analysis.hpp"
#include "core/error.hpp"
#include "support.hpp"

using namespace zslb;

namespace {

CorrectnessMatrix random_matrix01(Rng& rng, std::size_t rows, std::size_t cols) {
  CorrectnessMatrix m{rows, cols, std::vector<std::uint8_t>(rows * cols)};
  for (auto& v : m.values) v = static_cast<std::uint8_t>(rng.index(2));
  return m;
}

MetricTable table(const std::string& measure, std::vector<std::string> comps, std::vector<std::string> datasets,
                  std::vector<std::vector<double>> values, Direction dir = Direction::kHigherBetter) {
  MetricTable t;
  t.measure = measure;
  t.competitors = std::move(comps);
  t.datasets = std::move(datasets);
  t.direction = dir;
  for (const auto& row : values) {
    std::vector<std::optional<double>> r;
    for (double v : row) r.emplace_back(v);
    t.values.push_back(std::move(r));
  }
  return t;
}

MetricTable random_table(Rng& rng, const std::string& measure, std::size_t p, std::size_t d) {
  std::vector<std::string> comps, ds;
  for (std::size_t c = 0; c < p; ++c) comps.push_back("c" + std::to_string(c));
  for (std::size_t j = 0; j < d; ++j) ds.push_back("d" + std::to_string(j));
  std::vector<std::vector<double>> v(p, std::vector<double>(d));
  for (auto& row : v)
    for (auto& x : row) x = double(rng.index(4));  // few distinct values, many ties
  return table(measure, comps, ds, v);
}

}  // namespace

TEST_CASE("correctness matrix from predictions") {
  const std::vector<ClassId> labels{1, 2, 3};
  const auto all = correctness_from_predictions({labels, labels}, labels);
  CHECK(std::all_of(all.values.begin(), all.values.end(), [](auto v) { return v == 1; }));
  const auto none = correctness_from_predictions({{2, 3, 1}}, labels);
  CHECK(std::all_of(none.values.begin(), none.values.end(), [](auto v) { return v == 0; }));
  CHECK_THROWS_AS(correctness_from_predictions({{1, 2}}, labels), Error);

  Rng rng(1);
  std::vector<std::vector<ClassId>> preds(4, std::vector<ClassId>(50));
  std::vector<ClassId> truth(50);
  for (auto& t : truth) t = ClassId(rng.index(3));
  for (auto& p : preds)
    for (auto& v : p) v = ClassId(rng.index(3));
  const auto m = correctness_from_predictions(preds, truth);
  CHECK(m.rows == 50);
  CHECK(m.cols == 4);
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(m.at(r, c) == (preds[c][r] == truth[r] ? 1 : 0));
}

TEST_CASE("difficulty levels: all-ones, random histogram oracle, invariances") {
  const CorrectnessMatrix ones{3, 5, std::vector<std::uint8_t>(15, 1)};
  const auto l = difficulty_levels(ones);
  REQUIRE(l.size() == 6);
  CHECK(l[5] == 100.0);
  for (int k = 0; k < 5; ++k) CHECK(l[std::size_t(k)] == 0.0);
  CHECK_THROWS_AS(difficulty_levels(CorrectnessMatrix{}), Error);

  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_matrix01(rng, 137, 5);
    std::vector<double> hist(6, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
      int s = 0;
      for (std::size_t c = 0; c < 5; ++c) s += m.at(r, c);
      hist[std::size_t(s)] += 1;
    }
    const auto got = difficulty_levels(m);
    double sum = 0.0;
    for (int k = 0; k < 6; ++k) {
      CHECK(got[std::size_t(k)] == doctest::Approx(100.0 * hist[std::size_t(k)] / 137.0).epsilon(1e-12));
      sum += got[std::size_t(k)];
    }
    CHECK(std::abs(sum - 100.0) < 1e-9);

    // Permute rows and columns.
    CorrectnessMatrix p = m;
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < 5; ++c) p.values[r * 5 + c] = m.at(m.rows - 1 - r, (c + 2) % 5);
    const auto pl = difficulty_levels(p);
    for (int k = 0; k < 6; ++k) CHECK(pl[std::size_t(k)] == got[std::size_t(k)]);

    const auto any = correct_any(m);
    double covered = 0.0;
    for (auto v : any) covered += v;
    CHECK(100.0 * covered / 137.0 == doctest::Approx(100.0 - got[0]));
  }
}

TEST_CASE("attribute scores: hand examples") {
  SUBCASE("attribute present everywhere is easiest and hardest") {
    const std::vector<std::uint8_t> present{1, 0, 1, 1, 1, 0, 1, 0};
    const auto s = attribute_scores(present, {"eye black", "other"}, std::vector<std::uint8_t>{1, 0, 1, 0});
    CHECK(s.easiest_name() == "eye black");
    CHECK(s.hardest_name() == "eye black");
  }
  SUBCASE("single correct instance") {
    const auto s = attribute_scores(std::vector<std::uint8_t>{1}, {"a"}, std::vector<std::uint8_t>{1});
    CHECK(s.easiest_name() == "a");
    CHECK(s.hardest_name() == "undefined");
  }
  SUBCASE("four instances, three attributes, brute-force tally") {
    // rows: instances; cols: attributes x, y, z
    const std::vector<std::uint8_t> present{1, 1, 0,  //
                                            0, 1, 1,  //
                                            1, 0, 1,  //
                                            0, 0, 1};
    const std::vector<std::uint8_t> correct{1, 1, 0, 0};
    const auto s = attribute_scores(present, {"x", "y", "z"}, correct);
    std::vector<long> pos(3, 0), neg(3, 0);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t a = 0; a < 3; ++a)
        if (present[r * 3 + a]) (correct[r] ? pos[a] += 1 : neg[a] -= 1);
    CHECK(s.correct_tally == pos);
    CHECK(s.incorrect_tally == neg);
    CHECK(s.easiest_name() == "y");   // +2, first among maxima
    CHECK(s.hardest_name() == "z");   // -2
  }
  SUBCASE("no incorrect instances") {
    const auto s = attribute_scores(std::vector<std::uint8_t>{1, 1}, {"a", "b"}, std::vector<std::uint8_t>{1});
    CHECK(s.easiest_name() == "a");
    CHECK_FALSE(s.hardest.has_value());
  }
}

TEST_CASE("instance attributes binarize class strengths at the threshold") {
  Dataset ds = test::tiny_dataset();
  ds.attributes = AttributeTable{{"p", "q"}, {0.5f, 0.4f, 0.1f, 0.9f, 1, 1, 0, 0}};
  const std::vector<std::size_t> rows{0, 1, 3};
  CHECK(instance_attributes(ds, rows) == std::vector<std::uint8_t>{1, 0, 0, 1, 0, 0});
  CHECK(instance_attributes(ds, rows, 0.05) == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0});
}

TEST_CASE("combined points: dense ranking by hand") {
  const auto t1 = table("top1", {"a", "b", "c", "d"}, {"X"}, {{10}, {30}, {30}, {20}});
  const auto ll = table("logloss", {"a", "b", "c", "d"}, {"X"}, {{1.0}, {2.0}, {0.5}, {2.0}}, Direction::kLowerBetter);
  const std::vector<MetricTable> ts{t1, ll};
  const PointsTable p = combined_points(ts);
  // top1 ranks: b=c 1, d 2, a 3 -> 4,4,3,2; logloss: c 1, a 2, b=d 3 -> 4,3,2,2
  CHECK(p.measure_points[0][0] == std::vector<int>{2, 4, 4, 3});
  CHECK(p.measure_points[1][0] == std::vector<int>{3, 2, 4, 2});
  CHECK(p.totals == std::vector<int>{5, 6, 8, 5});
  CHECK(points_csv(p) == "classifier,X,Total\na,5,5\nb,6,6\nc,8,8\nd,5,5\n");
}

TEST_CASE("combined points: missing cell names the cell") {
  auto t = table("top1", {"a", "b"}, {"X", "Y"}, {{1, 2}, {3, 4}});
  t.values[1][0].reset();
  const std::vector<MetricTable> ts{t};
  try {
    combined_points(ts);
    FAIL("expected incomplete table");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIncompleteTable);
    CHECK(std::string(e.what()).find("top1/X/b") != std::string::npos);
  }
}

TEST_CASE("combined points properties") {
  Rng rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t p = 2 + rng.index(6), d = 1 + rng.index(4);
    std::vector<MetricTable> ts{random_table(rng, "m0", p, d), random_table(rng, "m1", p, d)};
    ts[1].direction = Direction::kLowerBetter;
    const PointsTable base = combined_points(ts);
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t j = 0; j < d; ++j) {
        const auto& pts = base.measure_points[m][j];
        CHECK(*std::max_element(pts.begin(), pts.end()) == int(p));
        CHECK(*std::min_element(pts.begin(), pts.end()) >= 1);
        for (std::size_t a = 0; a < p; ++a) {
          for (std::size_t b = 0; b < p; ++b) {
            const double va = *ts[m].values[a][j], vb = *ts[m].values[b][j];
            const bool a_better = m == 0 ? va > vb : va < vb;
            if (va == vb) CHECK(pts[a] == pts[b]);
            if (a_better) CHECK(pts[a] > pts[b]);
          }
        }
      }
    }
    int sum = 0;
    for (std::size_t c = 0; c < p; ++c) {
      int row = 0;
      for (std::size_t j = 0; j < d; ++j) row += base.points[c][j];
      CHECK(row == base.totals[c]);
      sum += row;
    }
    CHECK(sum > 0);

    // Adding a constant changes no points.
    auto shifted = ts;
    for (auto& t : shifted)
      for (auto& row : t.values)
        for (auto& v : row) *v += 17.25;
    CHECK(combined_points(shifted).totals == base.totals);

    // A duplicated competitor row gets identical points.
    auto dup = ts;
    for (auto& t : dup) {
      t.competitors.push_back("copy");
      t.values.push_back(t.values[0]);
    }
    const PointsTable dp = combined_points(dup);
    for (std::size_t j = 0; j < d; ++j) CHECK(dp.points[p][j] == dp.points[0][j]);
  }
}

TEST_CASE("metric table CSV parse and print") {
  const MetricTable t = parse_metric_table("classifier,CUB,SUN\nALE,56.34,\nSAE,39.13,52.71\n", "top1",
                                           Direction::kHigherBetter);
  CHECK(t.competitors == std::vector<std::string>{"ALE", "SAE"});
  CHECK(t.datasets == std::vector<std::string>{"CUB", "SUN"});
  CHECK(*t.values[0][0] == 56.34);
  CHECK_FALSE(t.values[0][1].has_value());
  CHECK(metric_table_csv(t) == "classifier,CUB,SUN\nALE,56.34,\nSAE,39.13,52.71\n");
  CHECK_THROWS_AS(parse_metric_table("h,A\nx,abc\n", "m", Direction::kHigherBetter), Error);
}
