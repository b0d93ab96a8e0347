#include "core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "core/binary_io.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace zslb {

using nlohmann::json;
namespace pt = boost::property_tree;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------- config

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, "config: " + msg); }

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) config_error("bad value for " + key + ": '" + text + "'");
  return v;
}

bool parse_flag(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  config_error("bad flag for " + key + ": '" + text + "'");
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

void apply_train_key(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "learning_rate") c.learning_rate = parse_value<double>(key, v);
  else if (key == "margin") c.margin = parse_value<double>(key, v);
  else if (key == "epochs") c.epochs = parse_value<std::size_t>(key, v);
  else if (key == "patience") c.patience = parse_value<std::size_t>(key, v);
  else if (key == "gamma") c.gamma = parse_value<double>(key, v);
  else if (key == "lambda") c.lambda = parse_value<double>(key, v);
  else if (key == "normalize_inputs") c.normalize_inputs = parse_flag(key, v);
  else if (key == "seed") c.seed = parse_value<std::uint64_t>(key, v);
  else if (key == "label_coding") {
    if (v == "zero_one") c.label_coding = LabelCoding::kZeroOne;
    else if (v == "plus_minus_one") c.label_coding = LabelCoding::kPlusMinusOne;
    else config_error("label_coding must be zero_one or plus_minus_one");
  } else if (key == "sae_feature_space") c.sae_feature_space = parse_flag(key, v);
  else config_error("unknown classifier key '" + key + "'");
}

void apply_fusion_key(FusionConfig& f, Scheme s, const std::string& key, const std::string& v) {
  switch (s) {
    case Scheme::kMDT:
      if (key == "max_depth") return void(f.mdt.max_depth = parse_value<std::size_t>(key, v));
      if (key == "min_leaf") return void(f.mdt.min_leaf = parse_value<std::size_t>(key, v));
      break;
    case Scheme::kDNN:
      if (key == "hidden1") return void(f.dnn.hidden1 = parse_value<std::size_t>(key, v));
      if (key == "hidden2") return void(f.dnn.hidden2 = parse_value<std::size_t>(key, v));
      if (key == "learning_rate") return void(f.dnn.learning_rate = parse_value<double>(key, v));
      if (key == "epochs") return void(f.dnn.epochs = parse_value<std::size_t>(key, v));
      break;
    case Scheme::kGT:
      if (key == "rounds") return void(f.gt.rounds = parse_value<std::size_t>(key, v));
      if (key == "eta") return void(f.gt.eta = parse_value<double>(key, v));
      break;
    case Scheme::kCon:
      if (key == "tolerance") return void(f.con.tolerance = parse_value<double>(key, v));
      if (key == "max_iters") return void(f.con.max_iters = parse_value<std::size_t>(key, v));
      break;
    default: break;
  }
  config_error("unknown key '" + key + "' for fusion scheme " + scheme_name(s));
}

void apply_dataset_key(DatasetSource& d, const std::string& key, const std::string& v,
                       const std::filesystem::path& base) {
  if (key == "source") {
    if (v == "synth") {
      if (!d.synth) d.synth = SynthesisSpec{};
    } else if (v == "bundle") {
      d.synth.reset();
    } else {
      config_error("dataset " + d.name + ": source must be synth or bundle");
    }
    return;
  }
  if (key == "path") {
    d.bundle = std::filesystem::path(v).is_absolute() ? std::filesystem::path(v) : base / v;
    return;
  }
  if (!d.synth) config_error("dataset " + d.name + ": key '" + key + "' needs source = synth first");
  SynthesisSpec& s = *d.synth;
  if (key == "n_seen") s.n_seen = parse_value<std::size_t>(key, v);
  else if (key == "n_unseen") s.n_unseen = parse_value<std::size_t>(key, v);
  else if (key == "per_class") s.per_class = parse_value<std::size_t>(key, v);
  else if (key == "feature_dim") s.feature_dim = parse_value<std::size_t>(key, v);
  else if (key == "semantic_dim") s.semantic_dim = parse_value<std::size_t>(key, v);
  else if (key == "noise_sigma") s.noise_sigma = parse_value<double>(key, v);
  else if (key == "seed") s.seed = parse_value<std::uint64_t>(key, v);
  else config_error("unknown dataset key '" + key + "'");
}

std::pair<std::string, std::string> section_kind(const std::string& header) {
  const auto sp = header.find(' ');
  if (sp == std::string::npos) config_error("section [" + header + "] needs a name");
  std::string name = header.substr(sp + 1);
  name.erase(0, name.find_first_not_of(' '));
  return {header.substr(0, sp), name};
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    config_error(e.what());
  }
  ExperimentConfig cfg;
  bool have_seed = false;
  std::vector<std::string> roster, schemes;
  std::map<Method, std::vector<std::pair<std::string, std::string>>> classifier_keys;
  std::map<Scheme, std::vector<std::pair<std::string, std::string>>> fusion_keys;
  std::vector<std::pair<std::string, const pt::ptree*>> dataset_sections;

  for (const auto& [key, node] : tree) {
    if (!node.empty()) {
      const auto [kind, name] = section_kind(key);
      if (kind == "dataset") {
        dataset_sections.emplace_back(name, &node);
      } else if (kind == "classifier") {
        const auto m = parse_method(name);
        if (!m) config_error("unknown classifier '" + name + "'");
        for (const auto& [k, v] : node) classifier_keys[*m].emplace_back(k, v.data());
      } else if (kind == "fusion") {
        const auto s = parse_scheme(name);
        if (!s) config_error("unknown fusion scheme '" + name + "'");
        for (const auto& [k, v] : node) fusion_keys[*s].emplace_back(k, v.data());
      } else {
        config_error("unknown section kind '" + kind + "'");
      }
      continue;
    }
    const std::string& v = node.data();
    if (key == "seed") {
      cfg.seed = parse_value<std::uint64_t>(key, v);
      have_seed = true;
    } else if (key == "out") {
      cfg.out = std::filesystem::path(v).is_absolute() ? std::filesystem::path(v) : base_dir / v;
    } else if (key == "workers") {
      cfg.workers = std::max<std::size_t>(1, parse_value<std::size_t>(key, v));
    } else if (key == "classifiers") {
      roster = words(v);
    } else if (key == "fusion") {
      schemes = words(v);
    } else if (key == "fusion_class_fraction") {
      cfg.fusion_class_fraction = parse_value<double>(key, v);
    } else {
      config_error("unknown top-level key '" + key + "'");
    }
  }
  if (!have_seed) config_error("`seed` is required");
  if (roster.empty()) config_error("`classifiers` roster is empty");
  if (schemes.empty()) config_error("`fusion` roster is empty");
  if (dataset_sections.empty()) config_error("no [dataset NAME] section");
  if (!(cfg.fusion_class_fraction > 0.0 && cfg.fusion_class_fraction < 1.0)) {
    config_error("fusion_class_fraction must lie in (0, 1)");
  }

  for (const auto& [name, node] : dataset_sections) {
    DatasetSource d;
    d.name = name;
    d.synth = SynthesisSpec{};
    d.synth->seed = cfg.seed;
    for (const auto& [k, v] : *node) apply_dataset_key(d, k, v.data(), base_dir);
    if (!d.synth && d.bundle.empty()) config_error("dataset " + name + ": bundle source needs `path`");
    cfg.datasets.push_back(std::move(d));
  }
  for (const std::string& r : roster) {
    const auto m = parse_method(r);
    if (!m) config_error("unknown classifier '" + r + "' in roster");
    ClassifierEntry e;
    e.method = *m;
    e.config = default_config(*m);
    e.config.seed = cfg.seed;
    for (const auto& [k, v] : classifier_keys[*m]) {
      if (k.rfind("grid_", 0) == 0) {
        std::vector<double> values;
        for (const auto& w : words(v)) values.push_back(parse_value<double>(k, w));
        if (values.empty()) config_error(k + " has no values");
        TrainConfig probe = e.config;
        apply_train_key(probe, k.substr(5), "0");  // rejects unknown names early
        e.grid[k.substr(5)] = std::move(values);
      } else {
        apply_train_key(e.config, k, v);
      }
    }
    e.config.check();
    cfg.classifiers.push_back(std::move(e));
  }
  for (const std::string& s : schemes) {
    const auto sc = parse_scheme(s);
    if (!sc) config_error("unknown fusion scheme '" + s + "' in roster");
    cfg.schemes.push_back(*sc);
  }
  for (const auto& [s, keys] : fusion_keys) {
    for (const auto& [k, v] : keys) apply_fusion_key(cfg.fusion, s, k, v);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(io::read_file(path, ErrorCode::kIo), path.parent_path());
}

std::string ExperimentConfig::canonical() const {
  json j;
  j["seed"] = seed;
  j["fusion_class_fraction"] = fusion_class_fraction;
  for (const auto& d : datasets) {
    json dj{{"name", d.name}};
    if (d.synth) {
      dj["synth"] = {d.synth->n_seen,       d.synth->n_unseen,    d.synth->per_class, d.synth->feature_dim,
                     d.synth->semantic_dim, d.synth->noise_sigma, d.synth->seed};
    } else {
      dj["bundle"] = d.bundle.string();
    }
    j["datasets"].push_back(dj);
  }
  for (const auto& c : classifiers) {
    j["classifiers"].push_back(
        {{"method", method_name(c.method)}, {"config", json::parse(config_to_json(c.config))}, {"grid", c.grid}});
  }
  for (Scheme s : schemes) j["fusion"].push_back(scheme_name(s));
  j["fusion_config"] = {{"mdt", {fusion.mdt.max_depth, fusion.mdt.min_leaf}},
                        {"dnn", {fusion.dnn.hidden1, fusion.dnn.hidden2, fusion.dnn.learning_rate, fusion.dnn.epochs}},
                        {"gt", {fusion.gt.rounds, fusion.gt.eta}},
                        {"con", {fusion.con.tolerance, fusion.con.max_iters}}};
  return j.dump();
}

std::string ExperimentConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

// ---------------------------------------------------------------- records

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.at(key).get<double>();
}

}  // namespace

std::string RunRecord::to_json() const {
  json j{{"id", id},
         {"dataset", dataset},
         {"dataset_index", dataset_index},
         {"kind", kind},
         {"name", name},
         {"index", index},
         {"ok", ok},
         {"top1", number_or_null(metrics.top1)},
         {"top5", number_or_null(metrics.top5)},
         {"logloss", number_or_null(metrics.logloss)},
         {"f1", number_or_null(metrics.f1)},
         {"f1_absent_classes", metrics.f1_absent_classes},
         {"levels", levels},
         {"ceiling", number_or_null(ceiling)},
         {"elapsed_ms", elapsed_ms},
         {"seed", seed},
         {"config_hash", config_hash}};
  if (!error.empty()) j["error"] = error;
  if (!easiest_attribute.empty()) j["easiest_attribute"] = easiest_attribute;
  if (!hardest_attribute.empty()) j["hardest_attribute"] = hardest_attribute;
  if (!chosen_config.empty()) j["config"] = json::parse(chosen_config);
  return j.dump();
}

RunRecord RunRecord::from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    RunRecord r;
    r.id = j.at("id");
    r.dataset = j.at("dataset");
    r.dataset_index = j.at("dataset_index");
    r.kind = j.at("kind");
    r.name = j.at("name");
    r.index = j.at("index");
    r.ok = j.at("ok");
    r.error = j.value("error", "");
    r.metrics.top1 = number_from(j, "top1");
    r.metrics.top5 = number_from(j, "top5");
    r.metrics.logloss = number_from(j, "logloss");
    r.metrics.f1 = number_from(j, "f1");
    r.metrics.f1_absent_classes = j.value("f1_absent_classes", std::size_t{0});
    for (const auto& v : j.at("levels")) r.levels.push_back(v.is_null() ? std::nan("") : v.get<double>());
    r.ceiling = number_from(j, "ceiling");
    r.easiest_attribute = j.value("easiest_attribute", "");
    r.hardest_attribute = j.value("hardest_attribute", "");
    r.elapsed_ms = j.value("elapsed_ms", 0.0);
    r.seed = j.value("seed", std::uint64_t{0});
    r.config_hash = j.value("config_hash", "");
    if (j.contains("config")) r.chosen_config = j.at("config").dump();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("record: ") + e.what());
  }
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path, ErrorCode::kIo));
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(RunRecord::from_json(line));
  }
  return out;
}

// ---------------------------------------------------------------- pipeline

Dataset materialize(const DatasetSource& source) {
  Dataset ds = source.synth ? synthesize(*source.synth) : load_bundle(source.bundle);
  ds.name = source.name;
  return ds;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double top1_of(const ScoreMatrix& scores, const Dataset& ds, std::span<const std::size_t> rows) {
  std::vector<ClassId> labels;
  for (std::size_t r : rows) labels.push_back(ds.labels[r]);
  return top_k_accuracy(scores, labels, 1);
}

void set_param(TrainConfig& c, const std::string& name, double v) {
  if (name == "learning_rate") c.learning_rate = v;
  else if (name == "margin") c.margin = v;
  else if (name == "epochs") c.epochs = static_cast<std::size_t>(v);
  else if (name == "patience") c.patience = static_cast<std::size_t>(v);
  else if (name == "gamma") c.gamma = v;
  else if (name == "lambda") c.lambda = v;
  else throw Error(ErrorCode::kInvalidArgument, "grid over '" + name + "' is not supported");
}

// Cartesian product of the grid (keys in name order); the first best wins.
TrainConfig select_by_grid(const ClassifierEntry& entry, const Dataset& ds, double fraction, std::uint64_t seed) {
  if (entry.grid.empty()) return entry.config;
  const MetaSplit split = carve_meta_split(ds, fraction, seed);
  std::vector<std::pair<std::string, std::vector<double>>> axes(entry.grid.begin(), entry.grid.end());
  std::vector<std::size_t> pos(axes.size(), 0);
  TrainConfig best = entry.config;
  double best_top1 = -1.0;
  while (true) {
    TrainConfig c = entry.config;
    for (std::size_t a = 0; a < axes.size(); ++a) set_param(c, axes[a].first, axes[a].second[pos[a]]);
    try {
      const CompatibilityModel m = train(entry.method, split.inner, c);
      const double acc = top1_of(score_test(m, split.inner), split.inner, split.inner.split.test_rows);
      if (acc > best_top1) {
        best_top1 = acc;
        best = c;
      }
    } catch (const Error&) {
      // A failing grid point is skipped; the others still compete.
    }
    std::size_t a = 0;
    while (a < axes.size() && ++pos[a] == axes[a].second.size()) pos[a++] = 0;
    if (a == axes.size()) break;
  }
  return best;
}

}  // namespace

std::vector<FusionOutcome> run_fusion(const Dataset& ds, std::span<const Method> methods,
                                      std::span<const TrainConfig> configs, std::span<const ScoreMatrix> test_scores,
                                      std::span<const Scheme> schemes, double fraction, const FusionConfig& fusion,
                                      std::uint64_t seed) {
  std::vector<std::string> names;
  for (Method m : methods) names.emplace_back(method_name(m));
  const BasePredictionSet test = build_prediction_set(names, test_scores);
  std::vector<ClassId> test_labels;
  for (std::size_t r : ds.split.test_rows) test_labels.push_back(ds.labels[r]);

  // Pseudo-unseen fit set, built only when some scheme needs it.
  std::optional<BasePredictionSet> fit;
  std::vector<ClassId> fit_labels;
  std::string fit_error;
  if (std::any_of(schemes.begin(), schemes.end(), is_parametric)) {
    try {
      const MetaSplit split = carve_meta_split(ds, fraction, seed);
      std::vector<ScoreMatrix> inner_scores;
      for (std::size_t k = 0; k < methods.size(); ++k) {
        inner_scores.push_back(score_test(train(methods[k], split.inner, configs[k]), split.inner));
      }
      fit = build_prediction_set(names, inner_scores);
      for (std::size_t r : split.inner.split.test_rows) fit_labels.push_back(split.inner.labels[r]);
    } catch (const Error& e) {
      fit_error = e.what();
    }
  }

  std::vector<FusionOutcome> out;
  const std::uint64_t fusion_seed = Rng::derive(seed, 0x46555345).next_u64();
  for (Scheme s : schemes) {
    FusionOutcome o;
    o.scheme = s;
    try {
      if (is_parametric(s) && !fit) throw Error(ErrorCode::kDegenerateMetaSplit, "no fit set: " + fit_error);
      // MV, Con and Auc have nothing to fit; their model only records K and the config.
      o.model = is_parametric(s) ? fit_fusion(s, *fit, fit_labels, fusion, fusion_seed)
                                 : fit_fusion(s, test, {}, fusion, fusion_seed);
      o.predictions = apply_fusion(o.model, test);
      o.top1 = top1_from_predictions(o.predictions, test_labels);
      o.f1 = f1_macro(o.predictions, test_labels, test.candidates).value;
      o.ok = true;
    } catch (const Error& e) {
      o.error = e.what();
      o.error_code = e.code();
    }
    out.push_back(std::move(o));
  }
  return out;
}

namespace {

std::vector<RunRecord> run_dataset(const ExperimentConfig& cfg, std::size_t di, const std::string& hash,
                                   const RecordSink& emit) {
  const DatasetSource& src = cfg.datasets[di];
  std::vector<RunRecord> records;
  auto base_record = [&](const std::string& kind, const std::string& name, std::size_t index) {
    RunRecord r;
    r.dataset = src.name;
    r.dataset_index = di;
    r.kind = kind;
    r.name = name;
    r.index = index;
    r.id = src.name + "/" + kind + "/" + name;
    r.seed = cfg.seed;
    r.config_hash = hash;
    r.metrics.top1 = r.metrics.top5 = r.metrics.logloss = r.metrics.f1 = std::nan("");
    r.ceiling = std::nan("");
    return r;
  };

  Dataset ds;
  try {
    ds = materialize(src);
  } catch (const Error& e) {
    for (std::size_t k = 0; k < cfg.classifiers.size(); ++k) {
      RunRecord r = base_record("base", method_name(cfg.classifiers[k].method), k);
      r.error = e.what();
      records.push_back(r);
    }
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
      RunRecord r = base_record("fusion", scheme_name(cfg.schemes[s]), s);
      r.error = e.what();
      records.push_back(r);
    }
    for (const auto& r : records) emit(r);
    return records;
  }
  std::vector<ClassId> test_labels;
  for (std::size_t r : ds.split.test_rows) test_labels.push_back(ds.labels[r]);

  std::vector<Method> ok_methods;
  std::vector<TrainConfig> ok_configs;
  std::vector<ScoreMatrix> ok_scores;
  std::vector<std::vector<ClassId>> ok_preds;
  for (std::size_t k = 0; k < cfg.classifiers.size(); ++k) {
    const ClassifierEntry& entry = cfg.classifiers[k];
    RunRecord r = base_record("base", method_name(entry.method), k);
    const auto t0 = Clock::now();
    try {
      const TrainConfig chosen = select_by_grid(entry, ds, cfg.fusion_class_fraction, cfg.seed);
      r.chosen_config = config_to_json(chosen);
      const CompatibilityModel model = train(entry.method, ds, chosen);
      ScoreMatrix scores = score_test(model, ds);
      r.metrics = evaluate(scores, test_labels);
      r.ok = true;
      ok_methods.push_back(entry.method);
      ok_configs.push_back(chosen);
      ok_preds.push_back(predictions_from_scores(scores));
      ok_scores.push_back(std::move(scores));
    } catch (const Error& e) {
      r.error = e.what();
    }
    r.elapsed_ms = ms_since(t0);
    records.push_back(std::move(r));
  }

  // Dataset-level analysis over the classifiers that trained.
  std::vector<double> levels;
  double ceil = std::nan("");
  std::string easiest, hardest;
  if (!ok_preds.empty()) {
    const CorrectnessMatrix cm = correctness_from_predictions(ok_preds, test_labels);
    levels = difficulty_levels(cm);
    ceil = ceiling(levels);
    if (ds.attributes) {
      const auto present = instance_attributes(ds, ds.split.test_rows);
      const AttributeScores as = attribute_scores(present, ds.attributes->names, correct_any(cm));
      easiest = as.easiest_name();
      hardest = as.hardest_name();
    }
  }
  for (auto& r : records) {
    r.levels = levels;
    r.ceiling = ceil;
    r.easiest_attribute = easiest;
    r.hardest_attribute = hardest;
    emit(r);
  }

  if (cfg.schemes.empty()) return records;
  const auto t0 = Clock::now();
  std::vector<FusionOutcome> outcomes;
  std::string fusion_error;
  if (ok_methods.empty()) {
    fusion_error = "invalid argument: no base classifier trained";
  } else {
    outcomes = run_fusion(ds, ok_methods, ok_configs, ok_scores, cfg.schemes, cfg.fusion_class_fraction, cfg.fusion,
                          cfg.seed);
  }
  const double elapsed = ms_since(t0) / static_cast<double>(cfg.schemes.size());
  for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
    RunRecord r = base_record("fusion", scheme_name(cfg.schemes[s]), s);
    r.levels = levels;
    r.ceiling = ceil;
    r.easiest_attribute = easiest;
    r.hardest_attribute = hardest;
    r.elapsed_ms = elapsed;
    if (outcomes.empty()) {
      r.error = fusion_error;
    } else if (outcomes[s].ok) {
      r.ok = true;
      r.metrics.top1 = outcomes[s].top1;
      r.metrics.f1 = outcomes[s].f1;
    } else {
      r.error = outcomes[s].error;
    }
    emit(r);
    records.push_back(std::move(r));
  }
  return records;
}

std::size_t worker_count(const ExperimentConfig& cfg) {
  std::size_t n = cfg.workers;
  if (const char* env = std::getenv("ZSLB_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && v > 0) n = v;
  }
  return std::max<std::size_t>(1, std::min(n, cfg.datasets.size()));
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RecordSink& sink) {
  const std::string hash = cfg.hash();
  std::mutex sink_mutex;
  const RecordSink emit = [&](const RunRecord& r) {
    if (!sink) return;
    std::lock_guard<std::mutex> lock(sink_mutex);
    sink(r);
  };
  std::vector<std::vector<RunRecord>> per_dataset(cfg.datasets.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t d = next++; d < cfg.datasets.size(); d = next++) per_dataset[d] = run_dataset(cfg, d, hash, emit);
  };
  const std::size_t workers = worker_count(cfg);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  std::vector<RunRecord> out;
  for (auto& v : per_dataset) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunRecord> run_experiment_to(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  const auto log_path = out / "records.ndtxt";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw Error(ErrorCode::kIo, "cannot write " + log_path.string());
  auto records = run_experiment(cfg, [&](const RunRecord& r) { log << r.to_json() << "\n" << std::flush; });
  log.close();
  const ReportOutput rep = emit_report(records, "all", out);
  for (const auto& m : rep.messages) std::cerr << "warning: " << m << "\n";
  return records;
}

// ---------------------------------------------------------------- reports

namespace {

std::vector<const RunRecord*> sorted(std::span<const RunRecord> records) {
  std::vector<const RunRecord*> v;
  for (const auto& r : records) v.push_back(&r);
  std::stable_sort(v.begin(), v.end(), [](const RunRecord* a, const RunRecord* b) {
    if (a->dataset_index != b->dataset_index) return a->dataset_index < b->dataset_index;
    if (a->kind != b->kind) return a->kind == "base";
    return a->index < b->index;
  });
  return v;
}

std::vector<std::string> dataset_order(std::span<const RunRecord> records) {
  std::vector<std::string> out;
  for (const RunRecord* r : sorted(records)) {
    if (std::find(out.begin(), out.end(), r->dataset) == out.end()) out.push_back(r->dataset);
  }
  return out;
}

double measure_of(const RunRecord& r, const std::string& measure) {
  if (measure == "top1") return r.metrics.top1;
  if (measure == "top5") return r.metrics.top5;
  if (measure == "logloss") return r.metrics.logloss;
  if (measure == "f1") return r.metrics.f1;
  throw Error(ErrorCode::kInvalidArgument, "unknown measure " + measure);
}

std::size_t count_missing(const MetricTable& t) {
  std::size_t n = 0;
  for (const auto& row : t.values) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), std::nullopt));
  return n;
}

void write_text(ReportOutput& out, const std::filesystem::path& path, const std::string& text) {
  io::write_file(path, text);
  out.files.push_back(path);
}

void emit_table(ReportOutput& out, std::span<const RunRecord> records, const std::string& kind,
                const std::string& measure, const std::filesystem::path& path) {
  const MetricTable t = records_table(records, kind, measure);
  if (t.competitors.empty()) return;
  if (const std::size_t missing = count_missing(t)) {
    out.warnings += missing;
    out.messages.push_back(path.filename().string() + ": " + std::to_string(missing) + " empty cell(s)");
  }
  write_text(out, path, metric_table_csv(t));
}

// Points over the dataset columns every table fills completely; other
// columns (and the total, if any column is dropped) are left empty.
void emit_points(ReportOutput& out, std::vector<MetricTable> tables, const std::filesystem::path& path) {
  if (tables.empty() || tables.front().competitors.empty()) return;
  const std::vector<std::string> all = tables.front().datasets;
  std::vector<std::string> complete;
  for (std::size_t d = 0; d < all.size(); ++d) {
    bool ok = true;
    for (const auto& t : tables) {
      if (t.competitors != tables.front().competitors) ok = false;
      for (const auto& row : t.values) ok = ok && row[d].has_value();
    }
    if (ok) complete.push_back(all[d]);
  }
  if (complete.size() != all.size()) {
    ++out.warnings;
    out.messages.push_back(path.filename().string() + ": " + std::to_string(all.size() - complete.size()) +
                           " dataset column(s) incomplete, left empty");
  }
  std::string csv = "classifier";
  for (const auto& d : all) csv += "," + d;
  csv += ",Total\n";
  std::optional<PointsTable> pts;
  if (!complete.empty()) {
    for (auto& t : tables) {
      MetricTable sub = t;
      sub.datasets = complete;
      for (std::size_t c = 0; c < t.competitors.size(); ++c) {
        sub.values[c].clear();
        for (const auto& d : complete) {
          sub.values[c].push_back(t.values[c][static_cast<std::size_t>(std::find(all.begin(), all.end(), d) - all.begin())]);
        }
      }
      t = std::move(sub);
    }
    pts = combined_points(tables);
  }
  for (std::size_t c = 0; c < tables.front().competitors.size(); ++c) {
    csv += tables.front().competitors[c];
    for (const auto& d : all) {
      const auto it = std::find(complete.begin(), complete.end(), d);
      csv += ",";
      if (pts && it != complete.end()) {
        csv += std::to_string(pts->points[c][static_cast<std::size_t>(it - complete.begin())]);
      }
    }
    csv += ",";
    if (pts && complete.size() == all.size()) csv += std::to_string(pts->totals[c]);
    csv += "\n";
  }
  write_text(out, path, csv);
}

MetricTable joint_table(std::span<const RunRecord> records, const std::string& measure) {
  MetricTable base = records_table(records, "base", measure);
  const MetricTable meta = records_table(records, "fusion", measure);
  for (std::size_t c = 0; c < meta.competitors.size(); ++c) {
    base.competitors.push_back(meta.competitors[c]);
    std::vector<std::optional<double>> row(base.datasets.size());
    for (std::size_t d = 0; d < meta.datasets.size(); ++d) {
      const auto it = std::find(base.datasets.begin(), base.datasets.end(), meta.datasets[d]);
      if (it != base.datasets.end()) row[static_cast<std::size_t>(it - base.datasets.begin())] = meta.values[c][d];
    }
    base.values.push_back(std::move(row));
  }
  return base;
}

struct DatasetSummary {
  std::vector<double> levels;
  double ceiling = std::nan("");
  std::string easiest, hardest;
};

std::vector<std::pair<std::string, DatasetSummary>> summaries(std::span<const RunRecord> records) {
  std::vector<std::pair<std::string, DatasetSummary>> out;
  for (const std::string& d : dataset_order(records)) out.push_back({d, {}});
  for (const RunRecord* r : sorted(records)) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r->dataset; });
    if (it->second.levels.empty() && !r->levels.empty()) {
      it->second.levels = r->levels;
      it->second.ceiling = r->ceiling;
      it->second.easiest = r->easiest_attribute;
      it->second.hardest = r->hardest_attribute;
    }
  }
  return out;
}

}  // namespace

MetricTable records_table(std::span<const RunRecord> records, const std::string& kind, const std::string& measure) {
  MetricTable t;
  t.measure = measure;
  t.direction = measure == "logloss" ? Direction::kLowerBetter : Direction::kHigherBetter;
  t.datasets = dataset_order(records);
  for (const RunRecord* r : sorted(records)) {
    if (r->kind != kind) continue;
    if (std::find(t.competitors.begin(), t.competitors.end(), r->name) == t.competitors.end()) {
      t.competitors.push_back(r->name);
      t.values.emplace_back(t.datasets.size());
    }
  }
  for (const RunRecord* r : sorted(records)) {
    if (r->kind != kind || !r->ok) continue;
    const double v = measure_of(*r, measure);
    if (!std::isfinite(v)) continue;
    const auto c = static_cast<std::size_t>(std::find(t.competitors.begin(), t.competitors.end(), r->name) -
                                            t.competitors.begin());
    const auto d = static_cast<std::size_t>(std::find(t.datasets.begin(), t.datasets.end(), r->dataset) -
                                            t.datasets.begin());
    t.values[c][d] = v;
  }
  return t;
}

ReportOutput emit_report(std::span<const RunRecord> records, const std::string& kind,
                         const std::filesystem::path& dir) {
  static const std::vector<std::string> kinds = {"top1", "top5", "logloss", "f1", "combined_points", "difficulty",
                                                 "ceiling"};
  if (kind != "all" && std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown report kind '" + kind + "'");
  }
  std::filesystem::create_directories(dir);
  ReportOutput out;
  auto want = [&](const char* k) { return kind == "all" || kind == k; };
  for (const char* m : {"top1", "top5", "logloss", "f1"}) {
    if (!want(m)) continue;
    emit_table(out, records, "base", m, dir / ("table_" + std::string(m) + ".csv"));
    if (std::string(m) == "top1" || std::string(m) == "f1") {
      emit_table(out, records, "fusion", m, dir / ("table_meta_" + std::string(m) + ".csv"));
    }
  }
  if (want("combined_points")) {
    std::vector<MetricTable> base;
    for (const char* m : {"top1", "top5", "logloss", "f1"}) base.push_back(records_table(records, "base", m));
    emit_points(out, base, dir / "points.csv");
    emit_points(out, {records_table(records, "fusion", "top1"), records_table(records, "fusion", "f1")},
                dir / "points_meta.csv");
    if (!records_table(records, "fusion", "top1").competitors.empty()) {
      emit_points(out, {joint_table(records, "top1"), joint_table(records, "f1")}, dir / "points_joint.csv");
    }
  }
  const auto sums = summaries(records);
  if (want("difficulty")) {
    std::size_t width = 0;
    for (const auto& [d, s] : sums) width = std::max(width, s.levels.size());
    std::string csv = "dataset";
    for (std::size_t l = 0; l < width; ++l) csv += ",lvl" + std::to_string(l);
    csv += "\n";
    for (const auto& [d, s] : sums) {
      csv += d;
      for (std::size_t l = 0; l < width; ++l) csv += "," + (l < s.levels.size() ? format_g6(s.levels[l]) : "");
      if (s.levels.empty()) {
        ++out.warnings;
        out.messages.push_back("difficulty.csv: no levels for " + d);
      }
      csv += "\n";
    }
    write_text(out, dir / "difficulty.csv", csv);
    bool any_attr = false;
    for (const auto& [d, s] : sums) any_attr = any_attr || !s.easiest.empty();
    if (any_attr) {
      std::string a = "dataset,easiest,hardest\n";
      for (const auto& [d, s] : sums) a += d + "," + s.easiest + "," + s.hardest + "\n";
      write_text(out, dir / "attributes.csv", a);
    }
  }
  if (want("ceiling")) {
    std::string csv = "dataset,ceiling\n";
    for (const auto& [d, s] : sums) csv += d + "," + (std::isfinite(s.ceiling) ? format_g6(s.ceiling) : "") + "\n";
    write_text(out, dir / "ceiling.csv", csv);
  }
  return out;
}

}  // namespace zslb
