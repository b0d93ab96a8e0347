#include "core/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "core/binary_io.hpp"
#include "core/error.hpp"
#include "core/metrics.hpp"

namespace zslb {

CorrectnessMatrix correctness_from_predictions(const std::vector<std::vector<ClassId>>& per_classifier,
                                               std::span<const ClassId> labels) {
  CorrectnessMatrix m;
  m.rows = labels.size();
  m.cols = per_classifier.size();
  m.values.assign(m.rows * m.cols, 0);
  for (std::size_t c = 0; c < m.cols; ++c) {
    if (per_classifier[c].size() != labels.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "classifier " + std::to_string(c) + " has " +
                                                     std::to_string(per_classifier[c].size()) + " predictions for " +
                                                     std::to_string(labels.size()) + " labels");
    }
    for (std::size_t r = 0; r < m.rows; ++r) m.values[r * m.cols + c] = per_classifier[c][r] == labels[r];
  }
  return m;
}

std::vector<double> difficulty_levels(const CorrectnessMatrix& m) {
  if (m.rows == 0 || m.cols == 0) throw Error(ErrorCode::kInvalidArgument, "difficulty levels of an empty matrix");
  std::vector<std::size_t> hist(m.cols + 1, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::size_t sum = 0;
    for (std::size_t c = 0; c < m.cols; ++c) sum += m.at(r, c) ? 1 : 0;
    ++hist[sum];
  }
  std::vector<double> out(hist.size());
  for (std::size_t l = 0; l < hist.size(); ++l) {
    out[l] = 100.0 * static_cast<double>(hist[l]) / static_cast<double>(m.rows);
  }
  return out;
}

std::vector<std::uint8_t> correct_any(const CorrectnessMatrix& m) {
  std::vector<std::uint8_t> out(m.rows, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols && !out[r]; ++c) out[r] = m.at(r, c);
  }
  return out;
}

AttributeScores attribute_scores(std::span<const std::uint8_t> present, const std::vector<std::string>& names,
                                 std::span<const std::uint8_t> correct) {
  const std::size_t a = names.size();
  if (present.size() != correct.size() * a) {
    throw Error(ErrorCode::kDimensionMismatch, "attribute matrix does not align with the correctness vector");
  }
  AttributeScores s;
  s.names = names;
  s.correct_tally.assign(a, 0);
  s.incorrect_tally.assign(a, 0);
  for (std::size_t r = 0; r < correct.size(); ++r) {
    for (std::size_t j = 0; j < a; ++j) {
      if (!present[r * a + j]) continue;
      if (correct[r]) {
        ++s.correct_tally[j];
      } else {
        --s.incorrect_tally[j];
      }
    }
  }
  for (std::size_t j = 0; j < a; ++j) {
    if (s.correct_tally[j] > 0 && (!s.easiest || s.correct_tally[j] > s.correct_tally[*s.easiest])) s.easiest = j;
    if (s.incorrect_tally[j] < 0 && (!s.hardest || s.incorrect_tally[j] < s.incorrect_tally[*s.hardest])) s.hardest = j;
  }
  return s;
}

std::vector<std::uint8_t> instance_attributes(const Dataset& ds, std::span<const std::size_t> rows, double threshold) {
  if (!ds.attributes) throw Error(ErrorCode::kInvalidArgument, "dataset " + ds.name + " has no attributes");
  const std::size_t a = ds.attributes->names.size();
  std::vector<std::uint8_t> out(rows.size() * a);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto idx = ds.prototypes.find(ds.labels[rows[i]]);
    if (!idx) throw Error(ErrorCode::kInvalidDataset, "row " + std::to_string(rows[i]) + " has no attribute vector");
    for (std::size_t j = 0; j < a; ++j) out[i * a + j] = ds.attributes->values[*idx * a + j] >= threshold;
  }
  return out;
}

PointsTable combined_points(std::span<const MetricTable> tables) {
  if (tables.empty()) throw Error(ErrorCode::kInvalidArgument, "combined points: no tables");
  PointsTable out;
  out.competitors = tables.front().competitors;
  out.datasets = tables.front().datasets;
  const std::size_t p = out.competitors.size(), nd = out.datasets.size();
  out.points.assign(p, std::vector<int>(nd, 0));
  out.totals.assign(p, 0);

  for (const MetricTable& t : tables) {
    out.measures.push_back(t.measure);
    std::vector<std::vector<int>> mp(nd, std::vector<int>(p, 0));
    for (std::size_t d = 0; d < nd; ++d) {
      const auto dcol = std::find(t.datasets.begin(), t.datasets.end(), out.datasets[d]);
      std::vector<double> vals(p);
      for (std::size_t c = 0; c < p; ++c) {
        const auto crow = std::find(t.competitors.begin(), t.competitors.end(), out.competitors[c]);
        const std::string cell = t.measure + "/" + out.datasets[d] + "/" + out.competitors[c];
        if (dcol == t.datasets.end() || crow == t.competitors.end()) {
          throw Error(ErrorCode::kIncompleteTable, "missing cell " + cell);
        }
        const auto& v = t.values[static_cast<std::size_t>(crow - t.competitors.begin())]
                                [static_cast<std::size_t>(dcol - t.datasets.begin())];
        if (!v) throw Error(ErrorCode::kIncompleteTable, "missing cell " + cell);
        vals[c] = *v;
      }
      std::vector<double> distinct = vals;
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      if (t.direction == Direction::kHigherBetter) std::reverse(distinct.begin(), distinct.end());
      for (std::size_t c = 0; c < p; ++c) {
        const auto rank = static_cast<int>(std::find(distinct.begin(), distinct.end(), vals[c]) - distinct.begin()) + 1;
        mp[d][c] = static_cast<int>(p) + 1 - rank;
        out.points[c][d] += mp[d][c];
      }
    }
    out.measure_points.push_back(std::move(mp));
  }
  for (std::size_t c = 0; c < p; ++c) {
    for (std::size_t d = 0; d < nd; ++d) out.totals[c] += out.points[c][d];
  }
  return out;
}

std::string points_csv(const PointsTable& t) {
  std::string s = "classifier";
  for (const auto& d : t.datasets) s += "," + d;
  s += ",Total\n";
  for (std::size_t c = 0; c < t.competitors.size(); ++c) {
    s += t.competitors[c];
    for (int v : t.points[c]) s += "," + std::to_string(v);
    s += "," + std::to_string(t.totals[c]) + "\n";
  }
  return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
  }
  return out;
}

}  // namespace

MetricTable parse_metric_table(const std::string& text, const std::string& measure, Direction direction) {
  MetricTable t;
  t.measure = measure;
  t.direction = direction;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (header) {
      t.datasets.assign(fields.begin() + 1, fields.end());
      header = false;
      continue;
    }
    if (fields.size() > t.datasets.size() + 1) {
      throw Error(ErrorCode::kInvalidArgument, measure + " line " + std::to_string(line_no) + ": too many fields");
    }
    t.competitors.push_back(fields[0]);
    std::vector<std::optional<double>> row(t.datasets.size());
    for (std::size_t d = 0; d + 1 < fields.size(); ++d) {
      const std::string& f = fields[d + 1];
      if (f.empty()) continue;
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw Error(ErrorCode::kInvalidArgument, measure + " line " + std::to_string(line_no) + ": bad number '" + f + "'");
      }
      row[d] = v;
    }
    t.values.push_back(std::move(row));
  }
  if (header) throw Error(ErrorCode::kInvalidArgument, measure + ": empty table");
  return t;
}

MetricTable read_metric_table(const std::filesystem::path& path, Direction direction) {
  return parse_metric_table(io::read_file(path, ErrorCode::kIo), path.stem().string(), direction);
}

std::string metric_table_csv(const MetricTable& t) {
  std::string s = "classifier";
  for (const auto& d : t.datasets) s += "," + d;
  s += "\n";
  for (std::size_t c = 0; c < t.competitors.size(); ++c) {
    s += t.competitors[c];
    for (const auto& v : t.values[c]) s += "," + (v ? format_g6(*v) : std::string());
    s += "\n";
  }
  return s;
}

}  // namespace zslb
