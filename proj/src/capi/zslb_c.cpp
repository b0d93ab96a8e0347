#include "zslb/zslb.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/classifiers.hpp"
#include "core/dataset.hpp"
#include "core/ensemble.hpp"
#include "core/error.hpp"
#include "core/harness.hpp"
#include "core/metrics.hpp"

struct zslb_dataset {
  zslb::Dataset ds;
};

struct zslb_model {
  zslb::CompatibilityModel model;
};

struct zslb_violations {
  std::vector<std::string> items;
};

struct zslb_analysis {
  std::vector<double> levels;
  double ceiling = 0.0;
  bool has_attributes = false;
  std::string easiest;
  std::string hardest;
};

namespace {

thread_local std::string g_last_error;

zslb_status to_status(zslb::ErrorCode code) {
  using zslb::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return ZSLB_INVALID_ARGUMENT;
    case ErrorCode::kDimensionMismatch: return ZSLB_DIMENSION_MISMATCH;
    case ErrorCode::kMalformedBundle: return ZSLB_MALFORMED_BUNDLE;
    case ErrorCode::kCorruptPayload: return ZSLB_CORRUPT_PAYLOAD;
    case ErrorCode::kInvalidDataset: return ZSLB_INVALID_DATASET;
    case ErrorCode::kIo: return ZSLB_IO_ERROR;
    case ErrorCode::kDiverged: return ZSLB_DIVERGED;
    case ErrorCode::kSingularSystem: return ZSLB_SINGULAR_SYSTEM;
    case ErrorCode::kSpectralConflict: return ZSLB_SPECTRAL_CONFLICT;
    case ErrorCode::kDegenerateMetaSplit: return ZSLB_DEGENERATE_META_SPLIT;
    case ErrorCode::kNoConsensus: return ZSLB_NO_CONSENSUS;
    case ErrorCode::kIncompleteTable: return ZSLB_INCOMPLETE_TABLE;
  }
  return ZSLB_INTERNAL_ERROR;
}

zslb_status fail(zslb_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

// An already formatted failure from a lower layer.
struct Reported {
  zslb_status status;
  std::string message;
};

template <typename F>
zslb_status guarded(F&& body) {
  try {
    body();
    return ZSLB_OK;
  } catch (const Reported& r) {
    return fail(r.status, r.message);
  } catch (const zslb::InvalidDatasetError& e) {
    std::string msg = e.what();
    for (const auto& v : e.violations()) msg += "\n" + v;
    return fail(ZSLB_INVALID_DATASET, msg);
  } catch (const zslb::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ZSLB_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(ZSLB_INTERNAL_ERROR, e.what());
  }
}

void require(bool cond, const char* what) {
  if (!cond) throw zslb::Error(zslb::ErrorCode::kInvalidArgument, what);
}

zslb::Method method_of(const char* name) {
  require(name != nullptr, "method name is NULL");
  const auto m = zslb::parse_method(name);
  if (!m) throw zslb::Error(zslb::ErrorCode::kInvalidArgument, std::string("unknown method '") + name + "'");
  return *m;
}

zslb::TrainConfig from_c(const zslb_train_config& c) {
  zslb::TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.margin = c.margin;
  t.epochs = c.epochs;
  t.patience = c.patience;
  t.gamma = c.gamma;
  t.lambda = c.lambda;
  t.normalize_inputs = c.normalize_inputs != 0;
  t.seed = c.seed;
  t.label_coding = c.label_coding == ZSLB_CODING_PLUS_MINUS_ONE ? zslb::LabelCoding::kPlusMinusOne
                                                                : zslb::LabelCoding::kZeroOne;
  t.sae_feature_space = c.sae_feature_space != 0;
  return t;
}

zslb_train_config to_c(const zslb::TrainConfig& t) {
  zslb_train_config c{};
  c.learning_rate = t.learning_rate;
  c.margin = t.margin;
  c.epochs = t.epochs;
  c.patience = t.patience;
  c.gamma = t.gamma;
  c.lambda = t.lambda;
  c.normalize_inputs = t.normalize_inputs ? 1 : 0;
  c.seed = t.seed;
  c.label_coding = t.label_coding == zslb::LabelCoding::kPlusMinusOne ? ZSLB_CODING_PLUS_MINUS_ONE
                                                                      : ZSLB_CODING_ZERO_ONE;
  c.sae_feature_space = t.sae_feature_space ? 1 : 0;
  return c;
}

zslb::FusionConfig from_c(const zslb_fusion_config& c) {
  zslb::FusionConfig f;
  f.mdt.max_depth = c.mdt_max_depth;
  f.mdt.min_leaf = c.mdt_min_leaf;
  f.dnn.hidden1 = c.dnn_hidden1;
  f.dnn.hidden2 = c.dnn_hidden2;
  f.dnn.learning_rate = c.dnn_learning_rate;
  f.dnn.epochs = c.dnn_epochs;
  f.dnn.seed = c.seed;
  f.gt.rounds = c.gt_rounds;
  f.gt.eta = c.gt_eta;
  f.con.tolerance = c.con_tolerance;
  f.con.max_iters = c.con_max_iters;
  return f;
}

std::vector<zslb::ClassId> test_labels(const zslb::Dataset& ds) {
  std::vector<zslb::ClassId> out;
  for (std::size_t r : ds.split.test_rows) out.push_back(ds.labels[r]);
  return out;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* zslb_version(void) { return "0.1.0"; }

const char* zslb_last_error(void) { return g_last_error.c_str(); }

const char* zslb_status_string(zslb_status s) {
  switch (s) {
    case ZSLB_OK: return "ok";
    case ZSLB_INVALID_ARGUMENT: return "invalid argument";
    case ZSLB_DIMENSION_MISMATCH: return "dimension mismatch";
    case ZSLB_MALFORMED_BUNDLE: return "malformed bundle";
    case ZSLB_CORRUPT_PAYLOAD: return "corrupt payload";
    case ZSLB_INVALID_DATASET: return "invalid dataset";
    case ZSLB_IO_ERROR: return "I/O error";
    case ZSLB_DIVERGED: return "diverged";
    case ZSLB_SINGULAR_SYSTEM: return "singular system";
    case ZSLB_SPECTRAL_CONFLICT: return "spectral conflict";
    case ZSLB_DEGENERATE_META_SPLIT: return "degenerate meta split";
    case ZSLB_NO_CONSENSUS: return "no consensus";
    case ZSLB_INCOMPLETE_TABLE: return "incomplete table";
    case ZSLB_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

void zslb_string_free(char* s) { std::free(s); }

// ---- datasets

void zslb_synth_spec_default(zslb_synth_spec* spec) {
  if (!spec) return;
  const zslb::SynthesisSpec d;
  *spec = {d.n_seen, d.n_unseen, d.per_class, d.feature_dim, d.semantic_dim, d.noise_sigma, d.seed};
}

zslb_status zslb_dataset_synthesize(const zslb_synth_spec* spec, zslb_dataset** out) {
  return guarded([&] {
    require(spec && out, "NULL argument");
    zslb::SynthesisSpec s{spec->n_seen,       spec->n_unseen,    spec->per_class, spec->feature_dim,
                          spec->semantic_dim, spec->noise_sigma, spec->seed};
    *out = new zslb_dataset{zslb::synthesize(s)};
  });
}

zslb_status zslb_dataset_load(const char* dir, zslb_dataset** out) {
  return guarded([&] {
    require(dir && out, "NULL argument");
    *out = new zslb_dataset{zslb::load_bundle(dir)};
  });
}

zslb_status zslb_dataset_save(const zslb_dataset* ds, const char* dir) {
  return guarded([&] {
    require(ds && dir, "NULL argument");
    zslb::save_bundle(ds->ds, dir);
  });
}

zslb_status zslb_dataset_info_get(const zslb_dataset* ds, zslb_dataset_info* out) {
  return guarded([&] {
    require(ds && out, "NULL argument");
    const auto& d = ds->ds;
    *out = {d.num_instances(),        d.feature_dim(),          d.semantic_dim(),
            d.split.seen.size(),      d.split.unseen.size(),    d.split.train_rows.size(),
            d.split.test_rows.size(), d.attributes.has_value() ? 1 : 0};
  });
}

const char* zslb_dataset_name(const zslb_dataset* ds) { return ds ? ds->ds.name.c_str() : nullptr; }

void zslb_dataset_free(zslb_dataset* ds) { delete ds; }

zslb_status zslb_dataset_validate(const zslb_dataset* ds, zslb_violations** out) {
  return guarded([&] {
    require(ds && out, "NULL argument");
    auto* v = new zslb_violations;
    for (const auto& viol : zslb::validate(ds->ds)) v->items.push_back(viol.to_string());
    *out = v;
  });
}

size_t zslb_violations_count(const zslb_violations* v) { return v ? v->items.size() : 0; }

const char* zslb_violations_get(const zslb_violations* v, size_t i) {
  return v && i < v->items.size() ? v->items[i].c_str() : nullptr;
}

void zslb_violations_free(zslb_violations* v) { delete v; }

// ---- classifiers

zslb_status zslb_default_config(const char* method, zslb_train_config* out) {
  return guarded([&] {
    require(out != nullptr, "NULL argument");
    *out = to_c(zslb::default_config(method_of(method)));
  });
}

zslb_status zslb_train(const zslb_dataset* train, const char* method, const zslb_train_config* cfg,
                       zslb_model** out) {
  return guarded([&] {
    require(train && out, "NULL argument");
    const zslb::Method m = method_of(method);
    const zslb::TrainConfig c = cfg ? from_c(*cfg) : zslb::default_config(m);
    *out = new zslb_model{zslb::train(m, train->ds, c)};
  });
}

zslb_status zslb_model_save(const zslb_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "NULL argument");
    zslb::save_model(model->model, path);
  });
}

zslb_status zslb_model_load(const char* path, zslb_model** out) {
  return guarded([&] {
    require(path && out, "NULL argument");
    *out = new zslb_model{zslb::load_model(path)};
  });
}

const char* zslb_model_method(const zslb_model* model) {
  return model ? zslb::method_name(model->model.method) : nullptr;
}

zslb_status zslb_model_info_get(const zslb_model* model, zslb_model_info* out) {
  return guarded([&] {
    require(model && out, "NULL argument");
    const auto& m = model->model;
    *out = {m.feature_dim(), m.semantic_dim(), m.meta.epochs_run, m.meta.stopped_early ? 1 : 0, m.meta.seed};
  });
}

zslb_status zslb_model_config(const zslb_model* model, zslb_train_config* out) {
  return guarded([&] {
    require(model && out, "NULL argument");
    *out = to_c(model->model.meta.config);
  });
}

void zslb_model_free(zslb_model* model) { delete model; }

zslb_status zslb_evaluate(const zslb_model* model, const zslb_dataset* ds, zslb_metrics* out) {
  return guarded([&] {
    require(model && ds && out, "NULL argument");
    const zslb::MetricReport r = zslb::evaluate(zslb::score_test(model->model, ds->ds), test_labels(ds->ds));
    *out = {r.top1, r.top5, r.logloss, r.f1, r.f1_absent_classes};
  });
}

zslb_status zslb_predict_test(const zslb_model* model, const zslb_dataset* ds, int32_t* labels, size_t capacity) {
  return guarded([&] {
    require(model && ds && labels, "NULL argument");
    const auto preds = zslb::predictions_from_scores(zslb::score_test(model->model, ds->ds));
    require(capacity >= preds.size(), "label buffer too small");
    for (std::size_t i = 0; i < preds.size(); ++i) labels[i] = preds[i];
  });
}

// ---- fusion and analysis

void zslb_fusion_config_default(zslb_fusion_config* cfg) {
  if (!cfg) return;
  const zslb::FusionConfig f;
  *cfg = {0.3,           f.mdt.max_depth, f.mdt.min_leaf, f.dnn.hidden1,     f.dnn.hidden2,  f.dnn.learning_rate,
          f.dnn.epochs,  f.gt.rounds,     f.gt.eta,       f.con.tolerance,   f.con.max_iters, 0};
}

zslb_status zslb_fuse(const zslb_dataset* ds, const zslb_model* const* models, size_t k, const char* scheme,
                      const zslb_fusion_config* cfg, const char* save_path, zslb_fusion_result* out) {
  return guarded([&] {
    require(ds && models && k > 0 && scheme && out, "NULL or empty argument");
    const auto s = zslb::parse_scheme(scheme);
    if (!s) throw zslb::Error(zslb::ErrorCode::kInvalidArgument, std::string("unknown scheme '") + scheme + "'");
    zslb_fusion_config c;
    zslb_fusion_config_default(&c);
    if (cfg) c = *cfg;

    std::vector<zslb::Method> methods;
    std::vector<zslb::TrainConfig> configs;
    std::vector<zslb::ScoreMatrix> scores;
    std::vector<std::vector<zslb::ClassId>> preds;
    for (size_t i = 0; i < k; ++i) {
      require(models[i] != nullptr, "NULL model");
      methods.push_back(models[i]->model.method);
      configs.push_back(models[i]->model.meta.config);
      scores.push_back(zslb::score_test(models[i]->model, ds->ds));
      preds.push_back(zslb::predictions_from_scores(scores.back()));
    }
    const zslb::Scheme schemes[] = {*s};
    auto outcome = zslb::run_fusion(ds->ds, methods, configs, scores, schemes, c.fusion_class_fraction, from_c(c),
                                    c.seed);
    zslb::FusionOutcome& o = outcome.front();
    if (!o.ok) throw Reported{to_status(o.error_code), o.error};
    const auto levels = zslb::difficulty_levels(zslb::correctness_from_predictions(preds, test_labels(ds->ds)));
    *out = {o.top1, o.f1, zslb::ceiling(levels)};
    if (save_path) zslb::save_fusion(o.model, save_path);
  });
}

zslb_status zslb_analyze(const zslb_dataset* ds, const zslb_model* const* models, size_t k, zslb_analysis** out) {
  return guarded([&] {
    require(ds && models && k > 0 && out, "NULL or empty argument");
    std::vector<std::vector<zslb::ClassId>> preds;
    for (size_t i = 0; i < k; ++i) {
      require(models[i] != nullptr, "NULL model");
      preds.push_back(zslb::predictions_from_scores(zslb::score_test(models[i]->model, ds->ds)));
    }
    const auto cm = zslb::correctness_from_predictions(preds, test_labels(ds->ds));
    auto* a = new zslb_analysis;
    a->levels = zslb::difficulty_levels(cm);
    a->ceiling = zslb::ceiling(a->levels);
    if (ds->ds.attributes) {
      const auto present = zslb::instance_attributes(ds->ds, ds->ds.split.test_rows);
      const auto scores = zslb::attribute_scores(present, ds->ds.attributes->names, zslb::correct_any(cm));
      a->has_attributes = true;
      a->easiest = scores.easiest_name();
      a->hardest = scores.hardest_name();
    }
    *out = a;
  });
}

size_t zslb_analysis_level_count(const zslb_analysis* a) { return a ? a->levels.size() : 0; }

double zslb_analysis_level(const zslb_analysis* a, size_t level) {
  return a && level < a->levels.size() ? a->levels[level] : std::nan("");
}

double zslb_analysis_ceiling(const zslb_analysis* a) { return a ? a->ceiling : std::nan(""); }

const char* zslb_analysis_easiest(const zslb_analysis* a) {
  return a && a->has_attributes ? a->easiest.c_str() : nullptr;
}

const char* zslb_analysis_hardest(const zslb_analysis* a) {
  return a && a->has_attributes ? a->hardest.c_str() : nullptr;
}

void zslb_analysis_free(zslb_analysis* a) { delete a; }

zslb_status zslb_combined_points(const double* values, size_t n_measures, size_t n_datasets, size_t n_competitors,
                                 const int* lower_better, int* points, int* totals) {
  return guarded([&] {
    require(values && lower_better && points && totals, "NULL argument");
    require(n_measures > 0 && n_datasets > 0 && n_competitors > 0, "empty points input");
    std::vector<zslb::MetricTable> tables(n_measures);
    for (size_t m = 0; m < n_measures; ++m) {
      auto& t = tables[m];
      t.measure = "m" + std::to_string(m);
      t.direction = lower_better[m] ? zslb::Direction::kLowerBetter : zslb::Direction::kHigherBetter;
      for (size_t d = 0; d < n_datasets; ++d) t.datasets.push_back("d" + std::to_string(d));
      for (size_t c = 0; c < n_competitors; ++c) {
        t.competitors.push_back("c" + std::to_string(c));
        std::vector<std::optional<double>> row(n_datasets);
        for (size_t d = 0; d < n_datasets; ++d) {
          const double v = values[(m * n_datasets + d) * n_competitors + c];
          if (!std::isnan(v)) row[d] = v;
        }
        t.values.push_back(std::move(row));
      }
    }
    const zslb::PointsTable p = zslb::combined_points(tables);
    for (size_t c = 0; c < n_competitors; ++c) {
      for (size_t d = 0; d < n_datasets; ++d) points[c * n_datasets + d] = p.points[c][d];
      totals[c] = p.totals[c];
    }
  });
}

zslb_status zslb_points_from_csv(const char* const* paths, size_t n_paths, const char* const* lower_better,
                                 size_t n_lower, char** csv_out) {
  return guarded([&] {
    require(paths && n_paths > 0 && csv_out, "NULL or empty argument");
    std::vector<zslb::MetricTable> tables;
    for (size_t i = 0; i < n_paths; ++i) {
      const std::filesystem::path p(paths[i]);
      bool lower = false;
      for (size_t j = 0; j < n_lower; ++j) lower = lower || p.stem().string() == lower_better[j];
      tables.push_back(zslb::read_metric_table(p, lower ? zslb::Direction::kLowerBetter : zslb::Direction::kHigherBetter));
    }
    *csv_out = dup_string(zslb::points_csv(zslb::combined_points(tables)));
  });
}

// ---- harness

zslb_status zslb_run_experiment(const char* config_path, const char* out_dir, size_t* n_records, size_t* n_failed) {
  return guarded([&] {
    require(config_path != nullptr, "NULL config path");
    const zslb::ExperimentConfig cfg = zslb::load_experiment_config(config_path);
    const std::filesystem::path out = out_dir ? std::filesystem::path(out_dir) : cfg.out;
    require(!out.empty(), "no output directory (set `out` or pass one)");
    const auto records = zslb::run_experiment_to(cfg, out);
    if (n_records) *n_records = records.size();
    if (n_failed) {
      *n_failed = 0;
      for (const auto& r : records) *n_failed += r.ok ? 0 : 1;
    }
  });
}

zslb_status zslb_emit_report(const char* records_dir, const char* kind, const char* out_dir, size_t* warnings) {
  return guarded([&] {
    require(records_dir && kind, "NULL argument");
    const auto records = zslb::read_records(std::filesystem::path(records_dir) / "records.ndtxt");
    const auto rep = zslb::emit_report(records, kind, out_dir ? out_dir : records_dir);
    if (warnings) *warnings = rep.warnings;
    if (!rep.messages.empty()) {
      g_last_error.clear();
      for (const auto& m : rep.messages) g_last_error += m + "\n";
    }
  });
}

}  // extern "C"
