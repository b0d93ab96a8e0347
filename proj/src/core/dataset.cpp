#include "core/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "core/binary_io.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

namespace zslb {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<std::size_t> PrototypeTable::find(ClassId id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::span<const float> PrototypeTable::vector(ClassId id) const {
  auto idx = find(id);
  if (!idx) throw Error(ErrorCode::kInvalidArgument, "no prototype for class " + std::to_string(id));
  return {values.data() + *idx * dim, dim};
}

// ---------------------------------------------------------------- validate

namespace {

void check_unique(const std::vector<ClassId>& ids, const char* what,
                  std::vector<Violation>& out) {
  std::set<ClassId> seen;
  for (ClassId id : ids) {
    if (!seen.insert(id).second) {
      out.push_back({std::string(what) + " unique", "class " + std::to_string(id) + " listed twice"});
    }
  }
}

bool all_finite(const std::vector<float>& v, std::size_t* first_bad) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      *first_bad = i;
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Violation> validate(const Dataset& ds) {
  std::vector<Violation> out;
  const auto& emb = ds.embeddings;
  const auto& proto = ds.prototypes;
  const auto& split = ds.split;

  if (emb.rows < 1) out.push_back({"embeddings nonempty", "N = 0"});
  if (emb.dim < 1) out.push_back({"embeddings nonempty", "D = 0"});
  if (emb.values.size() != emb.rows * emb.dim) {
    out.push_back({"embeddings shape", "expected " + std::to_string(emb.rows * emb.dim) +
                                           " values, found " + std::to_string(emb.values.size())});
  }
  std::size_t bad = 0;
  if (!all_finite(emb.values, &bad) && emb.dim > 0) {
    out.push_back({"embeddings finite", "row " + std::to_string(bad / emb.dim) + " column " +
                                            std::to_string(bad % emb.dim)});
  }
  if (ds.labels.size() != emb.rows) {
    out.push_back({"labels per row", std::to_string(ds.labels.size()) + " labels for " +
                                         std::to_string(emb.rows) + " rows"});
  }

  if (proto.dim < 1) out.push_back({"prototypes nonempty", "M = 0"});
  if (proto.values.size() != proto.ids.size() * proto.dim) {
    out.push_back({"prototypes shape", "expected " + std::to_string(proto.ids.size() * proto.dim) +
                                           " values, found " + std::to_string(proto.values.size())});
  }
  if (!all_finite(proto.values, &bad) && proto.dim > 0) {
    out.push_back({"prototypes finite", "class " + std::to_string(proto.ids[bad / proto.dim])});
  }
  check_unique(proto.ids, "prototype ids", out);
  for (ClassId id : proto.ids) {
    if (id < 1) out.push_back({"prototype ids positive", "class " + std::to_string(id)});
  }
  const std::set<ClassId> covered(proto.ids.begin(), proto.ids.end());

  std::set<ClassId> label_ids(ds.labels.begin(), ds.labels.end());
  for (ClassId id : label_ids) {
    if (!covered.count(id)) {
      out.push_back({"prototype coverage", "label class " + std::to_string(id) + " has no prototype"});
    }
  }

  if (split.seen.empty()) out.push_back({"seen classes nonempty", "N0 = 0"});
  if (split.unseen.empty()) out.push_back({"unseen classes nonempty", "N1 = 0"});
  check_unique(split.seen, "seen classes", out);
  check_unique(split.unseen, "unseen classes", out);
  const std::set<ClassId> seen(split.seen.begin(), split.seen.end());
  const std::set<ClassId> unseen(split.unseen.begin(), split.unseen.end());
  for (ClassId id : split.seen) {
    if (unseen.count(id)) {
      out.push_back({"seen/unseen disjoint", "class " + std::to_string(id) + " is both seen and unseen"});
    }
  }
  for (ClassId id : split.seen) {
    if (!covered.count(id)) out.push_back({"prototype coverage", "seen class " + std::to_string(id) + " has no prototype"});
  }
  for (ClassId id : split.unseen) {
    if (!covered.count(id)) out.push_back({"prototype coverage", "unseen class " + std::to_string(id) + " has no prototype"});
  }

  auto check_rows = [&](const std::vector<std::size_t>& rows, const char* which,
                        const std::set<ClassId>& allowed, const char* allowed_name) {
    std::unordered_set<std::size_t> uniq;
    for (std::size_t r : rows) {
      if (r >= emb.rows) {
        out.push_back({std::string(which) + " rows in range", "row " + std::to_string(r)});
        continue;
      }
      if (!uniq.insert(r).second) {
        out.push_back({std::string(which) + " rows unique", "row " + std::to_string(r)});
      }
      if (r < ds.labels.size() && !allowed.count(ds.labels[r])) {
        out.push_back({std::string(which) + " labels in " + allowed_name,
                       "row " + std::to_string(r) + " has class " + std::to_string(ds.labels[r])});
      }
    }
    return uniq;
  };
  auto train = check_rows(split.train_rows, "train", seen, "seen classes");
  auto test = check_rows(split.test_rows, "test", unseen, "unseen classes");
  for (std::size_t r : split.test_rows) {
    if (train.count(r)) out.push_back({"train/test rows disjoint", "row " + std::to_string(r)});
  }

  if (ds.attributes) {
    const auto& a = *ds.attributes;
    if (a.names.empty()) out.push_back({"attributes shape", "attribute table without names"});
    if (a.values.size() != proto.ids.size() * a.names.size()) {
      out.push_back({"attributes shape", "expected " + std::to_string(proto.ids.size() * a.names.size()) +
                                             " values, found " + std::to_string(a.values.size())});
    }
    if (!all_finite(a.values, &bad)) out.push_back({"attributes finite", "value " + std::to_string(bad)});
  }
  if (!ds.class_map.empty() && ds.class_map.size() != proto.ids.size()) {
    out.push_back({"class map shape", "class_map has " + std::to_string(ds.class_map.size()) +
                                          " entries for " + std::to_string(proto.ids.size()) + " classes"});
  }
  return out;
}

void require_valid(const Dataset& dataset) {
  auto v = validate(dataset);
  if (v.empty()) return;
  std::vector<std::string> msgs;
  for (const auto& x : v) msgs.push_back(x.to_string());
  throw InvalidDatasetError(std::move(msgs));
}

// ---------------------------------------------------------------- bundle io

namespace {

constexpr const char* kFormat = "zslb-bundle/1";

std::string int_lines(std::span<const std::int64_t> v) {
  std::string s;
  for (auto x : v) {
    s += std::to_string(x);
    s += '\n';
  }
  return s;
}

template <typename Int>
std::vector<Int> parse_int_lines(const std::string& text, const fs::path& path) {
  std::vector<Int> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Int v{};
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || p != line.data() + line.size()) {
      throw Error(ErrorCode::kCorruptPayload,
                  path.string() + ":" + std::to_string(lineno) + ": not an integer: '" + line + "'");
    }
    out.push_back(v);
  }
  return out;
}

template <typename T>
T header_get(const json& h, const char* key) {
  if (!h.contains(key)) throw Error(ErrorCode::kMalformedBundle, std::string("header lacks key '") + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedBundle, std::string("header key '") + key + "': " + e.what());
  }
}

fs::path require_part(const fs::path& dir, const std::string& name) {
  fs::path p = dir / name;
  if (!fs::is_regular_file(p)) throw Error(ErrorCode::kMalformedBundle, "missing bundle part " + p.string());
  return p;
}

bool is_contiguous(const std::vector<ClassId>& seen, const std::vector<ClassId>& unseen) {
  std::vector<ClassId> s = seen, u = unseen;
  std::sort(s.begin(), s.end());
  std::sort(u.begin(), u.end());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != static_cast<ClassId>(i + 1)) return false;
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] != static_cast<ClassId>(s.size() + i + 1)) return false;
  }
  return true;
}

// Re-map arbitrary ids to 1..N0 (seen, ascending) then N0+1..N0+N1 (unseen,
// ascending); prototype entries outside both sets follow in ascending order.
void remap_to_contiguous(Dataset& ds) {
  std::vector<ClassId> s = ds.split.seen, u = ds.split.unseen;
  std::sort(s.begin(), s.end());
  std::sort(u.begin(), u.end());
  std::map<ClassId, ClassId> fwd;
  ClassId next = 1;
  for (ClassId id : s) fwd.emplace(id, next++);
  for (ClassId id : u) {
    if (!fwd.count(id)) fwd.emplace(id, next++);
  }
  std::vector<ClassId> extra;
  for (ClassId id : ds.prototypes.ids) {
    if (!fwd.count(id)) extra.push_back(id);
  }
  std::sort(extra.begin(), extra.end());
  for (ClassId id : extra) fwd.emplace(id, next++);

  std::vector<std::string> stray;
  for (std::size_t r = 0; r < ds.labels.size(); ++r) {
    auto it = fwd.find(ds.labels[r]);
    if (it == fwd.end()) {
      stray.push_back("prototype coverage: label class " + std::to_string(ds.labels[r]) + " at row " +
                      std::to_string(r) + " is in no class list");
      if (stray.size() > 20) break;
    }
  }
  if (!stray.empty()) throw InvalidDatasetError(std::move(stray));

  std::vector<std::int64_t> original(fwd.size());
  for (auto [orig, mapped] : fwd) original[mapped - 1] = orig;
  for (auto& l : ds.labels) l = fwd.at(l);
  for (auto& id : ds.split.seen) id = fwd.at(id);
  for (auto& id : ds.split.unseen) id = fwd.at(id);
  for (auto& id : ds.prototypes.ids) id = fwd.at(id);
  // class_map is indexed by contiguous id; entries not present in the
  // prototype table still get their slot.
  ds.class_map = std::move(original);
}

}  // namespace

Dataset load_bundle(const fs::path& dir) {
  const fs::path header_path = require_part(dir, "header.txt");
  json h;
  try {
    h = json::parse(io::read_file(header_path, ErrorCode::kMalformedBundle));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedBundle, "header.txt: " + std::string(e.what()));
  }
  if (h.contains("format") && h["format"] != kFormat) {
    throw Error(ErrorCode::kMalformedBundle, "unsupported bundle format " + h["format"].dump());
  }

  Dataset ds;
  ds.name = h.value("name", dir.filename().string());
  const auto n = header_get<std::size_t>(h, "n");
  const auto d = header_get<std::size_t>(h, "d");
  const auto m = header_get<std::size_t>(h, "m");
  ds.split.seen = header_get<std::vector<ClassId>>(h, "seen");
  ds.split.unseen = header_get<std::vector<ClassId>>(h, "unseen");
  const auto train_file = header_get<std::string>(h, "train_rows_file");
  const auto test_file = header_get<std::string>(h, "test_rows_file");
  const auto names = h.value("attribute_names", std::vector<std::string>{});
  if (h.contains("prototype_ids")) {
    ds.prototypes.ids = header_get<std::vector<ClassId>>(h, "prototype_ids");
  } else {
    ds.prototypes.ids = ds.split.seen;
    ds.prototypes.ids.insert(ds.prototypes.ids.end(), ds.split.unseen.begin(), ds.split.unseen.end());
  }
  if (h.contains("class_map")) ds.class_map = header_get<std::vector<std::int64_t>>(h, "class_map");

  const auto emb_path = require_part(dir, "embeddings.f32");
  const auto proto_path = require_part(dir, "prototypes.f32");
  const auto labels_path = require_part(dir, "labels.txt");
  const auto train_path = require_part(dir, train_file);
  const auto test_path = require_part(dir, test_file);

  const std::string emb_bytes = io::read_file(emb_path, ErrorCode::kMalformedBundle);
  if (emb_bytes.size() != n * d * 4) {
    throw Error(ErrorCode::kCorruptPayload, "embeddings.f32 holds " + std::to_string(emb_bytes.size()) +
                                                " bytes; header declares " + std::to_string(n) + "x" +
                                                std::to_string(d) + " float32");
  }
  ds.embeddings = {n, d, io::decode_f32(emb_bytes)};

  const std::string proto_bytes = io::read_file(proto_path, ErrorCode::kMalformedBundle);
  if (proto_bytes.size() != ds.prototypes.ids.size() * m * 4) {
    throw Error(ErrorCode::kCorruptPayload, "prototypes.f32 holds " + std::to_string(proto_bytes.size()) +
                                                " bytes; header declares " +
                                                std::to_string(ds.prototypes.ids.size()) + "x" +
                                                std::to_string(m) + " float32");
  }
  ds.prototypes.dim = m;
  ds.prototypes.values = io::decode_f32(proto_bytes);

  if (!names.empty()) {
    const auto attr_path = require_part(dir, "attributes.f32");
    const std::string attr_bytes = io::read_file(attr_path, ErrorCode::kMalformedBundle);
    if (attr_bytes.size() != ds.prototypes.ids.size() * names.size() * 4) {
      throw Error(ErrorCode::kCorruptPayload, "attributes.f32 size does not match header");
    }
    ds.attributes = AttributeTable{names, io::decode_f32(attr_bytes)};
  }

  ds.labels = parse_int_lines<ClassId>(io::read_file(labels_path, ErrorCode::kMalformedBundle), labels_path);
  if (ds.labels.size() != n) {
    throw Error(ErrorCode::kCorruptPayload, "labels.txt has " + std::to_string(ds.labels.size()) +
                                                " entries; header declares n = " + std::to_string(n));
  }
  ds.split.train_rows = parse_int_lines<std::size_t>(io::read_file(train_path, ErrorCode::kMalformedBundle), train_path);
  ds.split.test_rows = parse_int_lines<std::size_t>(io::read_file(test_path, ErrorCode::kMalformedBundle), test_path);

  if (!is_contiguous(ds.split.seen, ds.split.unseen)) remap_to_contiguous(ds);
  require_valid(ds);
  return ds;
}

void save_bundle(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());

  json h;
  h["format"] = kFormat;
  h["name"] = ds.name;
  h["n"] = ds.embeddings.rows;
  h["d"] = ds.embeddings.dim;
  h["m"] = ds.prototypes.dim;
  h["seen"] = ds.split.seen;
  h["unseen"] = ds.split.unseen;
  h["prototype_ids"] = ds.prototypes.ids;
  h["train_rows_file"] = "train_rows.txt";
  h["test_rows_file"] = "test_rows.txt";
  h["attribute_names"] = ds.attributes ? ds.attributes->names : std::vector<std::string>{};
  if (!ds.class_map.empty()) h["class_map"] = ds.class_map;

  io::write_file(dir / "header.txt", h.dump(2) + "\n");
  io::write_file(dir / "embeddings.f32", io::encode_f32(ds.embeddings.values));
  io::write_file(dir / "prototypes.f32", io::encode_f32(ds.prototypes.values));
  if (ds.attributes) {
    io::write_file(dir / "attributes.f32", io::encode_f32(ds.attributes->values));
  } else {
    fs::remove(dir / "attributes.f32", ec);
  }
  std::vector<std::int64_t> tmp(ds.labels.begin(), ds.labels.end());
  io::write_file(dir / "labels.txt", int_lines(tmp));
  tmp.assign(ds.split.train_rows.begin(), ds.split.train_rows.end());
  io::write_file(dir / "train_rows.txt", int_lines(tmp));
  tmp.assign(ds.split.test_rows.begin(), ds.split.test_rows.end());
  io::write_file(dir / "test_rows.txt", int_lines(tmp));
}

// ---------------------------------------------------------------- synthesis

SynthesisResult synthesize_with_map(const SynthesisSpec& spec) {
  if (spec.n_seen < 1 || spec.n_unseen < 1 || spec.per_class < 1 || spec.feature_dim < 1 ||
      spec.semantic_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "synthesize: all counts must be >= 1");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw Error(ErrorCode::kInvalidArgument, "synthesize: noise_sigma must be finite and >= 0");
  }
  const std::size_t n_classes = spec.n_seen + spec.n_unseen;
  const std::size_t d = spec.feature_dim, m = spec.semantic_dim;

  Rng proto_rng = Rng::derive(spec.seed, 1);
  Rng map_rng = Rng::derive(spec.seed, 2);
  Rng noise_rng = Rng::derive(spec.seed, 3);

  // Uniform on the unit sphere: normalized isotropic Gaussian.
  std::vector<double> protos(n_classes * m);
  for (std::size_t c = 0; c < n_classes; ++c) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        protos[c * m + k] = proto_rng.normal();
        norm += protos[c * m + k] * protos[c * m + k];
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < m; ++k) protos[c * m + k] /= norm;
  }

  std::vector<double> g(d * m);
  for (auto& v : g) v = map_rng.normal();

  SynthesisResult result;
  Dataset& ds = result.dataset;
  ds.name = "synth-s" + std::to_string(spec.seed);
  ds.prototypes.dim = m;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ds.prototypes.ids.push_back(static_cast<ClassId>(c + 1));
    for (std::size_t k = 0; k < m; ++k) ds.prototypes.values.push_back(static_cast<float>(protos[c * m + k]));
  }
  AttributeTable attrs;
  for (std::size_t k = 0; k < m; ++k) attrs.names.push_back("dim" + std::to_string(k) + "+");
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t k = 0; k < m; ++k) {
      attrs.values.push_back(static_cast<float>(0.5 * (protos[c * m + k] + 1.0)));
    }
  }
  ds.attributes = std::move(attrs);

  const std::size_t n = n_classes * spec.per_class;
  ds.embeddings.rows = n;
  ds.embeddings.dim = d;
  ds.embeddings.values.reserve(n * d);
  std::vector<double> clean(d);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += g[i * m + k] * protos[c * m + k];
      clean[i] = acc;
    }
    for (std::size_t r = 0; r < spec.per_class; ++r) {
      const std::size_t row = ds.labels.size();
      for (std::size_t i = 0; i < d; ++i) {
        ds.embeddings.values.push_back(static_cast<float>(clean[i] + spec.noise_sigma * noise_rng.normal()));
      }
      ds.labels.push_back(static_cast<ClassId>(c + 1));
      (c < spec.n_seen ? ds.split.train_rows : ds.split.test_rows).push_back(row);
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    (c < spec.n_seen ? ds.split.seen : ds.split.unseen).push_back(static_cast<ClassId>(c + 1));
  }
  result.generator_map = std::move(g);
  return result;
}

Dataset synthesize(const SynthesisSpec& spec) { return synthesize_with_map(spec).dataset; }

// ---------------------------------------------------------------- meta split

std::size_t meta_split_size(std::size_t n_seen, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fusion_class_fraction must lie in (0, 1)");
  }
  const long k = std::lround(fraction * static_cast<double>(n_seen));
  if (k < 1 || static_cast<std::size_t>(k) >= n_seen) {
    throw Error(ErrorCode::kDegenerateMetaSplit,
                "fraction " + std::to_string(fraction) + " of " + std::to_string(n_seen) +
                    " seen classes yields " + std::to_string(k) + " pseudo-unseen classes");
  }
  return static_cast<std::size_t>(k);
}

MetaSplit carve_meta_split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (ds.split.seen.size() < 2) {
    throw Error(ErrorCode::kDegenerateMetaSplit, "need at least 2 seen classes, have " +
                                                     std::to_string(ds.split.seen.size()));
  }
  const std::size_t k = meta_split_size(ds.split.seen.size(), fraction);

  std::vector<ClassId> order = ds.split.seen;
  std::sort(order.begin(), order.end());
  Rng rng = Rng::derive(seed, 0x6D657461);
  rng.shuffle(std::span<ClassId>(order));
  std::vector<ClassId> pseudo(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<ClassId> kept(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(pseudo.begin(), pseudo.end());
  std::sort(kept.begin(), kept.end());
  const std::unordered_set<ClassId> pseudo_set(pseudo.begin(), pseudo.end());

  MetaSplit out{ds, ds};
  Dataset& inner = out.inner;
  inner.name = ds.name + "/inner";
  inner.split.seen = kept;
  inner.split.unseen = pseudo;
  inner.split.train_rows.clear();
  inner.split.test_rows.clear();
  for (std::size_t r : ds.split.train_rows) {
    (pseudo_set.count(ds.labels[r]) ? inner.split.test_rows : inner.split.train_rows).push_back(r);
  }
  return out;
}

}  // namespace zslb
