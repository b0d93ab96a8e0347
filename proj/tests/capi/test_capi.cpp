// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <zslb/zslb.h>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& tag)
      : path(fs::temp_directory_path() / ("zslb_capi_" + tag + "_" + std::to_string(getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

zslb_dataset* synth(std::uint64_t seed, double sigma = 0.05) {
  zslb_synth_spec spec;
  zslb_synth_spec_default(&spec);
  spec.n_seen = 6;
  spec.n_unseen = 4;
  spec.per_class = 20;
  spec.feature_dim = 24;
  spec.semantic_dim = 8;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  zslb_dataset* ds = nullptr;
  REQUIRE(zslb_dataset_synthesize(&spec, &ds) == ZSLB_OK);
  return ds;
}

zslb_model* train(const zslb_dataset* ds, const char* method, std::uint64_t seed = 1) {
  zslb_train_config cfg;
  REQUIRE(zslb_default_config(method, &cfg) == ZSLB_OK);
  cfg.seed = seed;
  if (cfg.epochs > 10) cfg.epochs = 10;
  zslb_model* m = nullptr;
  REQUIRE(zslb_train(ds, method, &cfg, &m) == ZSLB_OK);
  return m;
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::string(zslb_version()) == "0.1.0");
  CHECK(std::string(zslb_status_string(ZSLB_OK)) == "ok");
  CHECK(std::string(zslb_status_string(ZSLB_SINGULAR_SYSTEM)) == "singular system");
  CHECK(std::string(zslb_status_string(ZSLB_INCOMPLETE_TABLE)) == "incomplete table");
}

TEST_CASE("synthesize, info, save and load") {
  zslb_dataset* ds = synth(3);
  zslb_dataset_info info;
  REQUIRE(zslb_dataset_info_get(ds, &info) == ZSLB_OK);
  CHECK(info.instances == 200);
  CHECK(info.feature_dim == 24);
  CHECK(info.semantic_dim == 8);
  CHECK(info.seen_classes == 6);
  CHECK(info.unseen_classes == 4);
  CHECK(info.train_rows == 120);
  CHECK(info.test_rows == 80);

  zslb_violations* v = nullptr;
  REQUIRE(zslb_dataset_validate(ds, &v) == ZSLB_OK);
  CHECK(zslb_violations_count(v) == 0);
  zslb_violations_free(v);

  Scratch dir("bundle");
  REQUIRE(zslb_dataset_save(ds, (dir / "b").c_str()) == ZSLB_OK);
  zslb_dataset* back = nullptr;
  REQUIRE(zslb_dataset_load((dir / "b").c_str(), &back) == ZSLB_OK);
  zslb_dataset_info info2;
  REQUIRE(zslb_dataset_info_get(back, &info2) == ZSLB_OK);
  CHECK(info2.instances == info.instances);
  CHECK(info2.feature_dim == info.feature_dim);
  CHECK(info2.semantic_dim == info.semantic_dim);
  CHECK(info2.train_rows == info.train_rows);
  CHECK(info2.test_rows == info.test_rows);
  CHECK(info2.has_attributes == info.has_attributes);
  zslb_dataset_free(back);
  zslb_dataset_free(ds);
}

TEST_CASE("error codes and last_error") {
  zslb_dataset* ds = nullptr;
  CHECK(zslb_dataset_load("/nonexistent/zslb/bundle", &ds) != ZSLB_OK);
  CHECK(ds == nullptr);
  CHECK(std::strlen(zslb_last_error()) > 0);

  CHECK(zslb_dataset_synthesize(nullptr, &ds) == ZSLB_INVALID_ARGUMENT);
  zslb_train_config cfg;
  CHECK(zslb_default_config("LATEM", &cfg) == ZSLB_INVALID_ARGUMENT);
  CHECK(std::string(zslb_last_error()).find("LATEM") != std::string::npos);

  // A seen label in the test partition is reported as a violation.
  zslb_dataset* good = synth(4);
  Scratch dir("bad");
  REQUIRE(zslb_dataset_save(good, (dir / "b").c_str()) == ZSLB_OK);
  zslb_dataset_free(good);
  {
    std::vector<std::string> lines;
    std::ifstream in(dir / "b/labels.txt");
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    in.close();
    lines.back() = "1";
    std::ofstream out(dir / "b/labels.txt");
    for (const auto& l : lines) out << l << "\n";
  }
  CHECK(zslb_dataset_load((dir / "b").c_str(), &ds) == ZSLB_INVALID_DATASET);
  CHECK(std::string(zslb_last_error()).find("seen") != std::string::npos);

  // Degenerate ESZSL system.
  zslb_dataset* thin = nullptr;
  zslb_synth_spec spec;
  zslb_synth_spec_default(&spec);
  spec.n_seen = 3;
  spec.n_unseen = 2;
  spec.per_class = 2;
  spec.feature_dim = 16;
  spec.semantic_dim = 2;
  spec.seed = 2;
  REQUIRE(zslb_dataset_synthesize(&spec, &thin) == ZSLB_OK);
  REQUIRE(zslb_default_config("ESZSL", &cfg) == ZSLB_OK);
  cfg.gamma = 0;
  cfg.lambda = 0;
  zslb_model* m = nullptr;
  CHECK(zslb_train(thin, "ESZSL", &cfg, &m) == ZSLB_SINGULAR_SYSTEM);
  CHECK(m == nullptr);
  zslb_dataset_free(thin);
}

TEST_CASE("train, evaluate, predict, model round-trip") {
  zslb_dataset* ds = synth(5);
  zslb_model* m = train(ds, "eszsl");
  CHECK(std::string(zslb_model_method(m)) == "ESZSL");
  zslb_metrics met;
  REQUIRE(zslb_evaluate(m, ds, &met) == ZSLB_OK);
  CHECK(met.top1 >= 0.0);
  CHECK(met.top1 <= met.top5);
  CHECK(met.top5 <= 100.0);
  CHECK(met.logloss >= 0.0);
  CHECK(met.f1 >= 0.0);
  CHECK(met.f1 <= 1.0);

  zslb_dataset_info info;
  REQUIRE(zslb_dataset_info_get(ds, &info) == ZSLB_OK);
  std::vector<std::int32_t> labels(info.test_rows);
  REQUIRE(zslb_predict_test(m, ds, labels.data(), labels.size()) == ZSLB_OK);
  for (auto l : labels) CHECK((l >= 7 && l <= 10));
  CHECK(zslb_predict_test(m, ds, labels.data(), 3) == ZSLB_INVALID_ARGUMENT);

  Scratch dir("model");
  REQUIRE(zslb_model_save(m, (dir / "m.model").c_str()) == ZSLB_OK);
  zslb_model* back = nullptr;
  REQUIRE(zslb_model_load((dir / "m.model").c_str(), &back) == ZSLB_OK);
  zslb_metrics met2;
  REQUIRE(zslb_evaluate(back, ds, &met2) == ZSLB_OK);
  CHECK(met2.top1 == met.top1);
  CHECK(met2.logloss == met.logloss);
  zslb_train_config c1, c2;
  REQUIRE(zslb_model_config(m, &c1) == ZSLB_OK);
  REQUIRE(zslb_model_config(back, &c2) == ZSLB_OK);
  CHECK(c1.gamma == c2.gamma);
  CHECK(c1.lambda == c2.lambda);
  zslb_model_free(back);
  zslb_model_free(m);
  zslb_dataset_free(ds);
}

TEST_CASE("fusion and analysis over five classifiers") {
  zslb_dataset* ds = synth(6);
  std::vector<zslb_model*> models;
  for (const char* method : {"DeViSE", "ALE", "SJE", "ESZSL", "SAE"}) models.push_back(train(ds, method));
  zslb_analysis* a = nullptr;
  REQUIRE(zslb_analyze(ds, models.data(), models.size(), &a) == ZSLB_OK);
  REQUIRE(zslb_analysis_level_count(a) == 6);
  double sum = 0.0;
  for (std::size_t l = 0; l < 6; ++l) sum += zslb_analysis_level(a, l);
  CHECK(std::abs(sum - 100.0) < 1e-9);
  const double ceiling = zslb_analysis_ceiling(a);
  CHECK(std::abs(ceiling - (100.0 - zslb_analysis_level(a, 0))) < 1e-9);
  CHECK(zslb_analysis_easiest(a) != nullptr);
  zslb_analysis_free(a);

  zslb_fusion_config fc;
  zslb_fusion_config_default(&fc);
  fc.seed = 7;
  fc.dnn_epochs = 5;
  for (const char* scheme : {"MV", "MDT", "DNN", "GT", "Con", "Auc"}) {
    INFO(scheme);
    zslb_fusion_result r;
    REQUIRE(zslb_fuse(ds, models.data(), models.size(), scheme, &fc, nullptr, &r) == ZSLB_OK);
    CHECK(r.ceiling == doctest::Approx(ceiling));
    if (std::string(scheme) == "MV" || std::string(scheme) == "MDT" || std::string(scheme) == "DNN") {
      CHECK(r.top1 <= r.ceiling + 1e-9);
    }
  }
  zslb_fusion_result r;
  CHECK(zslb_fuse(ds, models.data(), models.size(), "Stack", &fc, nullptr, &r) == ZSLB_INVALID_ARGUMENT);
  for (auto* m : models) zslb_model_free(m);
  zslb_dataset_free(ds);
}

TEST_CASE("combined points through the flat interface") {
  // One measure, one dataset, four competitors: 10, 30, 30, 20.
  const double values[] = {10, 30, 30, 20};
  const int lower[] = {0};
  int points[4], totals[4];
  REQUIRE(zslb_combined_points(values, 1, 1, 4, lower, points, totals) == ZSLB_OK);
  CHECK(totals[0] == 2);
  CHECK(totals[1] == 4);
  CHECK(totals[2] == 4);
  CHECK(totals[3] == 3);

  const double holes[] = {10, NAN};
  CHECK(zslb_combined_points(holes, 1, 1, 2, lower, points, totals) == ZSLB_INCOMPLETE_TABLE);

  Scratch dir("points");
  {
    std::ofstream(dir / "top1.csv") << "classifier,X\na,1\nb,2\n";
    std::ofstream(dir / "logloss.csv") << "classifier,X\na,1\nb,2\n";
  }
  const std::string p1 = dir / "top1.csv", p2 = dir / "logloss.csv";
  const char* paths[] = {p1.c_str(), p2.c_str()};
  const char* lb[] = {"logloss"};
  char* csv = nullptr;
  REQUIRE(zslb_points_from_csv(paths, 2, lb, 1, &csv) == ZSLB_OK);
  CHECK(std::string(csv) == "classifier,X,Total\na,3,3\nb,3,3\n");
  zslb_string_free(csv);
}

TEST_CASE("experiment run and report") {
  Scratch dir("run");
  {
    std::ofstream(dir / "grid.cfg") << "seed = 1\nclassifiers = ESZSL SAE\nfusion = MV Auc\n"
                                       "[dataset tiny]\nn_seen = 5\nn_unseen = 3\nper_class = 10\n"
                                       "feature_dim = 12\nsemantic_dim = 6\nnoise_sigma = 0.05\nseed = 3\n";
  }
  std::size_t n = 0, failed = 0;
  REQUIRE(zslb_run_experiment((dir / "grid.cfg").c_str(), (dir / "out").c_str(), &n, &failed) == ZSLB_OK);
  CHECK(n == 4);
  CHECK(failed == 0);
  CHECK(fs::exists(dir / "out/records.ndtxt"));
  std::size_t warnings = 99;
  REQUIRE(zslb_emit_report((dir / "out").c_str(), "top1", (dir / "rep").c_str(), &warnings) == ZSLB_OK);
  CHECK(fs::exists(dir / "rep/table_top1.csv"));
  CHECK(zslb_emit_report((dir / "out").c_str(), "pie", (dir / "rep").c_str(), &warnings) == ZSLB_INVALID_ARGUMENT);
  CHECK(zslb_run_experiment((dir / "missing.cfg").c_str(), nullptr, &n, &failed) != ZSLB_OK);
}
