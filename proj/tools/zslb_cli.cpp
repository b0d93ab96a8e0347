// zslb command-line front end. Talks to the library only through zslb.h.
//
// Exit status: 0 success, 1 validation failure, 2 runtime or usage error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zslb/zslb.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitError = 2;

struct Failure {
  int code;
};

void check(zslb_status s) {
  if (s == ZSLB_OK) return;
  std::cerr << "zslb: " << zslb_last_error() << "\n";
  throw Failure{s == ZSLB_INVALID_DATASET ? kExitInvalid : kExitError};
}

struct Dataset {
  zslb_dataset* h = nullptr;
  explicit Dataset(const std::string& dir) { check(zslb_dataset_load(dir.c_str(), &h)); }
  explicit Dataset(zslb_dataset* raw) : h(raw) {}
  ~Dataset() { zslb_dataset_free(h); }
  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;
};

struct Models {
  std::vector<zslb_model*> h;
  explicit Models(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
      zslb_model* m = nullptr;
      check(zslb_model_load(p.c_str(), &m));
      h.push_back(m);
    }
  }
  ~Models() {
    for (auto* m : h) zslb_model_free(m);
  }
  Models(const Models&) = delete;
  Models& operator=(const Models&) = delete;
};

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct SynthArgs {
  std::string out;
  zslb_synth_spec spec{};
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  std::string data, method, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> learning_rate, margin, gamma, lambda;
  std::optional<std::size_t> epochs, patience;
  bool no_normalize = false;
  bool sae_feature_space = false;
  std::string label_coding;
};

struct FuseArgs {
  std::string data, save;
  std::vector<std::string> models, schemes;
  std::optional<std::uint64_t> seed;
  zslb_fusion_config cfg{};
};

int cmd_synth(SynthArgs& a) {
  a.spec.seed = *a.seed;
  zslb_dataset* raw = nullptr;
  check(zslb_dataset_synthesize(&a.spec, &raw));
  Dataset ds(raw);
  check(zslb_dataset_save(ds.h, a.out.c_str()));
  zslb_dataset_info info{};
  check(zslb_dataset_info_get(ds.h, &info));
  std::cout << "wrote " << a.out << ": " << info.instances << " instances, D=" << info.feature_dim
            << ", M=" << info.semantic_dim << ", " << info.seen_classes << " seen / " << info.unseen_classes
            << " unseen classes\n";
  return kExitOk;
}

int cmd_validate(const std::string& dir) {
  zslb_dataset* raw = nullptr;
  const zslb_status s = zslb_dataset_load(dir.c_str(), &raw);
  if (s == ZSLB_INVALID_DATASET) {
    std::cout << zslb_last_error() << "\n";
    return kExitInvalid;
  }
  check(s);
  Dataset ds(raw);
  zslb_dataset_info info{};
  check(zslb_dataset_info_get(ds.h, &info));
  std::cout << dir << ": valid (" << info.instances << " instances, " << info.train_rows << " train / "
            << info.test_rows << " test rows)\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  Dataset ds(a.data);
  zslb_train_config cfg{};
  check(zslb_default_config(a.method.c_str(), &cfg));
  cfg.seed = *a.seed;
  if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
  if (a.margin) cfg.margin = *a.margin;
  if (a.gamma) cfg.gamma = *a.gamma;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.patience) cfg.patience = *a.patience;
  if (a.no_normalize) cfg.normalize_inputs = 0;
  if (a.sae_feature_space) cfg.sae_feature_space = 1;
  if (a.label_coding == "plus_minus_one") cfg.label_coding = ZSLB_CODING_PLUS_MINUS_ONE;
  if (a.label_coding == "zero_one") cfg.label_coding = ZSLB_CODING_ZERO_ONE;
  zslb_model* model = nullptr;
  check(zslb_train(ds.h, a.method.c_str(), &cfg, &model));
  const zslb_status s = zslb_model_save(model, a.out.c_str());
  zslb_model_info info{};
  zslb_model_info_get(model, &info);
  zslb_model_free(model);
  check(s);
  std::cout << "trained " << a.method << " (epochs run " << info.epochs_run << (info.stopped_early ? ", stopped early" : "")
            << ") -> " << a.out << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& data, const std::vector<std::string>& paths) {
  Dataset ds(data);
  Models models(paths);
  std::cout << "classifier,dataset,top1,top5,logloss,f1\n";
  for (zslb_model* m : models.h) {
    zslb_metrics r{};
    check(zslb_evaluate(m, ds.h, &r));
    std::cout << zslb_model_method(m) << "," << zslb_dataset_name(ds.h) << "," << g6(r.top1) << "," << g6(r.top5)
              << "," << g6(r.logloss) << "," << g6(r.f1) << "\n";
    if (r.f1_absent_classes) {
      std::cerr << "note: " << r.f1_absent_classes << " candidate class(es) absent from labels and predictions\n";
    }
  }
  return kExitOk;
}

int cmd_fuse(FuseArgs& a) {
  if (!a.save.empty() && a.schemes.size() != 1) {
    std::cerr << "zslb: --save needs exactly one scheme\n";
    return kExitError;
  }
  Dataset ds(a.data);
  Models models(a.models);
  a.cfg.seed = *a.seed;
  std::cout << "scheme,dataset,top1,f1,ceiling\n";
  for (const auto& s : a.schemes) {
    zslb_fusion_result r{};
    check(zslb_fuse(ds.h, models.h.data(), models.h.size(), s.c_str(), &a.cfg, a.save.empty() ? nullptr : a.save.c_str(),
                    &r));
    std::cout << s << "," << zslb_dataset_name(ds.h) << "," << g6(r.top1) << "," << g6(r.f1) << "," << g6(r.ceiling)
              << "\n";
  }
  return kExitOk;
}

int cmd_analyze(const std::string& data, const std::vector<std::string>& paths) {
  Dataset ds(data);
  Models models(paths);
  zslb_analysis* a = nullptr;
  check(zslb_analyze(ds.h, models.h.data(), models.h.size(), &a));
  std::cout << "level,percent\n";
  for (std::size_t l = 0; l < zslb_analysis_level_count(a); ++l) {
    std::cout << "lvl" << l << "," << g6(zslb_analysis_level(a, l)) << "\n";
  }
  std::cout << "ceiling," << g6(zslb_analysis_ceiling(a)) << "\n";
  if (const char* e = zslb_analysis_easiest(a)) std::cout << "easiest," << e << "\n";
  if (const char* h = zslb_analysis_hardest(a)) std::cout << "hardest," << h << "\n";
  zslb_analysis_free(a);
  return kExitOk;
}

int cmd_score(const std::vector<std::string>& tables, const std::vector<std::string>& lower, const std::string& out) {
  std::vector<const char*> paths, low;
  for (const auto& t : tables) paths.push_back(t.c_str());
  for (const auto& l : lower) low.push_back(l.c_str());
  char* csv = nullptr;
  check(zslb_points_from_csv(paths.data(), paths.size(), low.data(), low.size(), &csv));
  std::string text(csv);
  zslb_string_free(csv);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::FILE* f = std::fopen(out.c_str(), "wb");
    if (!f || std::fwrite(text.data(), 1, text.size(), f) != text.size()) {
      if (f) std::fclose(f);
      std::cerr << "zslb: cannot write " << out << "\n";
      return kExitError;
    }
    std::fclose(f);
  }
  return kExitOk;
}

int cmd_run(const std::string& config, const std::string& out) {
  std::size_t n = 0, failed = 0;
  check(zslb_run_experiment(config.c_str(), out.empty() ? nullptr : out.c_str(), &n, &failed));
  std::cout << n << " records (" << failed << " failed cells)\n";
  return kExitOk;
}

int cmd_report(const std::string& records, const std::string& kind, const std::string& out) {
  std::size_t warnings = 0;
  check(zslb_emit_report(records.c_str(), kind.c_str(), out.empty() ? nullptr : out.c_str(), &warnings));
  if (warnings) std::cerr << "warning: " << warnings << " incomplete cell(s)\n" << zslb_last_error();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zslb: zero-shot learning benchmark toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", zslb_version());

  SynthArgs synth;
  zslb_synth_spec_default(&synth.spec);
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  c_synth->add_option("--out", synth.out, "Bundle directory")->required();
  c_synth->add_option("--seed", synth.seed, "RNG seed")->required();
  c_synth->add_option("--n-seen", synth.spec.n_seen, "Seen classes")->capture_default_str();
  c_synth->add_option("--n-unseen", synth.spec.n_unseen, "Unseen classes")->capture_default_str();
  c_synth->add_option("--per-class", synth.spec.per_class, "Instances per class")->capture_default_str();
  c_synth->add_option("--feature-dim", synth.spec.feature_dim, "Embedding dimension D")->capture_default_str();
  c_synth->add_option("--semantic-dim", synth.spec.semantic_dim, "Prototype dimension M")->capture_default_str();
  c_synth->add_option("--sigma", synth.spec.noise_sigma, "Noise scale")->capture_default_str();

  std::string validate_dir;
  auto* c_validate = app.add_subcommand("validate", "Check a bundle against the data-model invariants");
  c_validate->add_option("bundle", validate_dir, "Bundle directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train one classifier on a bundle's seen classes");
  c_train->add_option("--data", tr.data, "Bundle directory")->required();
  c_train->add_option("--method", tr.method, "DeViSE, ALE, SJE, ESZSL or SAE")->required();
  c_train->add_option("--seed", tr.seed, "RNG seed")->required();
  c_train->add_option("--out", tr.out, "Model file")->required();
  c_train->add_option("--learning-rate", tr.learning_rate);
  c_train->add_option("--margin", tr.margin);
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--patience", tr.patience);
  c_train->add_option("--gamma", tr.gamma);
  c_train->add_option("--lambda", tr.lambda);
  c_train->add_option("--label-coding", tr.label_coding)->check(CLI::IsMember({"zero_one", "plus_minus_one"}));
  c_train->add_flag("--no-normalize", tr.no_normalize, "Do not L2-normalize inputs");
  c_train->add_flag("--sae-feature-space", tr.sae_feature_space, "SAE: score in feature space");

  std::string ev_data;
  std::vector<std::string> ev_models;
  auto* c_eval = app.add_subcommand("evaluate", "Metrics of trained models on the unseen-class test rows");
  c_eval->add_option("--data", ev_data, "Bundle directory")->required();
  c_eval->add_option("--model", ev_models, "Model file(s)")->required();

  FuseArgs fu;
  zslb_fusion_config_default(&fu.cfg);
  auto* c_fuse = app.add_subcommand("fuse", "Combine trained models with meta-classifiers");
  c_fuse->add_option("--data", fu.data, "Bundle directory")->required();
  c_fuse->add_option("--models", fu.models, "Model files")->required();
  c_fuse->add_option("--scheme", fu.schemes, "MV, MDT, DNN, GT, Con, Auc")->required();
  c_fuse->add_option("--seed", fu.seed, "RNG seed")->required();
  c_fuse->add_option("--fraction", fu.cfg.fusion_class_fraction, "Pseudo-unseen share of seen classes")
      ->capture_default_str();
  c_fuse->add_option("--save", fu.save, "Write the fitted fusion model");

  std::string an_data;
  std::vector<std::string> an_models;
  auto* c_analyze = app.add_subcommand("analyze", "Instance difficulty, ceiling and attribute analysis");
  c_analyze->add_option("--data", an_data, "Bundle directory")->required();
  c_analyze->add_option("--models", an_models, "Model files")->required();

  std::vector<std::string> sc_tables, sc_lower;
  std::string sc_out;
  auto* c_score = app.add_subcommand("score", "Dense-rank combined points from metric tables");
  c_score->add_option("--tables", sc_tables, "Metric table CSVs (measure = file stem)")->required();
  c_score->add_option("--lower-better", sc_lower, "Stems of lower-is-better measures");
  c_score->add_option("--out", sc_out, "Points CSV (default stdout)");

  std::string run_config, run_out;
  auto* c_run = app.add_subcommand("run", "Run an experiment grid");
  c_run->add_option("--config", run_config, "Experiment config")->required();
  c_run->add_option("--out", run_out, "Results directory");

  std::string rep_records, rep_kind = "all", rep_out;
  auto* c_report = app.add_subcommand("report", "Rebuild tables from a results directory");
  c_report->add_option("--records", rep_records, "Results directory holding records.ndtxt")->required();
  c_report->add_option("--kind", rep_kind, "top1, top5, logloss, f1, combined_points, difficulty, ceiling, all")
      ->capture_default_str();
  c_report->add_option("--out", rep_out, "Output directory (default: the records directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "zslb: " << e.what() << "\n\n" << app.help();
    return kExitError;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_validate) return cmd_validate(validate_dir);
    if (*c_train) return cmd_train(tr);
    if (*c_eval) return cmd_evaluate(ev_data, ev_models);
    if (*c_fuse) return cmd_fuse(fu);
    if (*c_analyze) return cmd_analyze(an_data, an_models);
    if (*c_score) return cmd_score(sc_tables, sc_lower, sc_out);
    if (*c_run) return cmd_run(run_config, run_out);
    if (*c_report) return cmd_report(rep_records, rep_kind, rep_out);
  } catch (const Failure& f) {
    return f.code;
  }
  return kExitError;
}
