#include "zsl/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace zsl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Splits text into lines, dropping a single trailing empty line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::string where(const std::string& file, std::size_t line) {
  return file + ":" + std::to_string(line) + ": ";
}

double parse_real(std::string_view field, const std::string& file, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw DataError(where(file, line) + "malformed number '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw DataError(where(file, line) + "non-finite value");
  return value;
}

Matrix read_real_table(const fs::path& path) {
  const std::string file = path.filename().string();
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) throw DataError(where(file, line_no) + "empty row");
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      row.push_back(parse_real(line.substr(start, comma == std::string_view::npos ? line.size() - start
                                                                                : comma - start),
                               file, line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(where(file, line_no) + "ragged row: expected " + std::to_string(rows.front().size()) +
                      " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(file + ": no rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

std::vector<ClassId> read_labels(const fs::path& path) {
  const std::string file = path.filename().string();
  const std::string text = read_file(path);
  std::vector<ClassId> labels;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    line = trim(line);
    ClassId id = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), id);
    if (ec != std::errc() || ptr != line.data() + line.size() || line.empty()) {
      throw DataError(where(file, line_no) + "malformed class id '" + std::string(line) + "'");
    }
    labels.push_back(id);
  }
  return labels;
}

template <class T>
std::vector<T> json_array(const json& obj, const char* key) {
  if (!obj.contains(key)) throw DataError(std::string("splits.json: missing field '") + key + "'");
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw DataError(std::string("splits.json: field '") + key + "' is not an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number_integer() || arr[i].get<long long>() < 0) {
      throw DataError(std::string("splits.json: ") + key + "[" + std::to_string(i) +
                      "] is not a nonnegative integer");
    }
    out.push_back(arr[i].get<T>());
  }
  return out;
}

SplitSpec read_split(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("splits.json: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw DataError("splits.json: top level is not an object");
  SplitSpec split;
  split.train_classes = json_array<ClassId>(doc, "train_classes");
  split.val_classes = json_array<ClassId>(doc, "val_classes");
  split.test_unseen_classes = json_array<ClassId>(doc, "test_unseen_classes");
  split.test_seen_image_indices = json_array<std::size_t>(doc, "test_seen_image_indices");
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw DataError("splits.json: field 'name' is not a string");
    split.name = doc["name"].get<std::string>();
  }
  return split;
}

void check_ids(const ClassIds& ids, Index num_classes, const char* field, std::set<ClassId>& seen_so_far) {
  std::set<ClassId> local;
  for (ClassId id : ids) {
    if (id < 0 || id >= num_classes) {
      throw DataError(std::string("splits.json: ") + field + " references unknown class id " + std::to_string(id));
    }
    if (!local.insert(id).second) {
      throw DataError(std::string("splits.json: ") + field + " lists class id " + std::to_string(id) + " twice");
    }
    if (seen_so_far.count(id)) {
      throw DataError(std::string("splits.json: class id ") + std::to_string(id) + " in " + field +
                      " also appears in another class set");
    }
  }
  seen_so_far.insert(local.begin(), local.end());
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

void append_row(std::string& out, const Matrix& m, Index row) {
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) out += ',';
    out += format_real(m(row, j));
  }
  out += '\n';
}

}  // namespace

ClassIds SplitSpec::seen_classes() const {
  ClassIds ids = train_classes;
  ids.insert(ids.end(), val_classes.begin(), val_classes.end());
  return sorted_unique(std::move(ids));
}

ClassIds SplitSpec::all_classes() const {
  ClassIds ids = seen_classes();
  ids.insert(ids.end(), test_unseen_classes.begin(), test_unseen_classes.end());
  return sorted_unique(std::move(ids));
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool operator==(const DatasetBundle& a, const DatasetBundle& b) {
  return same_matrix(a.features, b.features) && a.labels == b.labels &&
         same_matrix(a.class_embeddings, b.class_embeddings) && a.split == b.split &&
         a.class_names == b.class_names;
}

ClassIds sorted_unique(ClassIds ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void validate_split(const SplitSpec& split, const std::vector<ClassId>& labels, Index num_classes) {
  std::set<ClassId> used;
  check_ids(split.train_classes, num_classes, "train_classes", used);
  check_ids(split.val_classes, num_classes, "val_classes", used);
  check_ids(split.test_unseen_classes, num_classes, "test_unseen_classes", used);

  const ClassIds seen = split.seen_classes();
  std::set<std::size_t> unique_indices;
  for (std::size_t idx : split.test_seen_image_indices) {
    if (idx >= labels.size()) {
      throw DataError("splits.json: test_seen_image_indices references image " + std::to_string(idx) +
                      " but only " + std::to_string(labels.size()) + " images exist");
    }
    if (!std::binary_search(seen.begin(), seen.end(), labels[idx])) {
      throw DataError("splits.json: test_seen_image_indices references image " + std::to_string(idx) +
                      " whose class " + std::to_string(labels[idx]) + " is not a train or val class");
    }
    if (!unique_indices.insert(idx).second) {
      throw DataError("splits.json: test_seen_image_indices lists image " + std::to_string(idx) + " twice");
    }
  }
}

void validate(const DatasetBundle& b) {
  if (b.num_images() < 1 || b.feature_dim() < 1) throw DataError("features.csv: empty feature matrix");
  if (b.num_classes() < 1 || b.embedding_dim() < 1) throw DataError("class_embeddings.csv: empty table");
  if (!b.features.allFinite()) throw DataError("features.csv: non-finite value");
  if (!b.class_embeddings.allFinite()) throw DataError("class_embeddings.csv: non-finite value");
  if (static_cast<Index>(b.labels.size()) != b.num_images()) {
    throw DataError("labels.csv: " + std::to_string(b.labels.size()) + " labels for " +
                    std::to_string(b.num_images()) + " feature rows");
  }
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    if (b.labels[i] < 0 || b.labels[i] >= b.num_classes()) {
      throw DataError(where("labels.csv", i + 1) + "label id out of range (" + std::to_string(b.labels[i]) +
                      " with " + std::to_string(b.num_classes()) + " classes)");
    }
  }
  if (!b.class_names.empty() && static_cast<Index>(b.class_names.size()) != b.num_classes()) {
    throw DataError("class_names.txt: " + std::to_string(b.class_names.size()) + " names for " +
                    std::to_string(b.num_classes()) + " classes");
  }
  validate_split(b.split, b.labels, b.num_classes());

  // Identical embeddings inside the split's candidate set make argmax ambiguous.
  std::map<std::vector<double>, ClassId> rows;
  for (ClassId id : b.split.all_classes()) {
    const Vector r = b.class_embeddings.row(id).transpose();
    auto [it, inserted] = rows.emplace(std::vector<double>(r.data(), r.data() + r.size()), id);
    if (!inserted) {
      throw DataError("class_embeddings.csv: classes " + std::to_string(it->second) + " and " +
                      std::to_string(id) + " have identical embeddings");
    }
  }
}

SplitSpec load_split(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing file: " + path.string());
  return read_split(path);
}

DatasetBundle load_dataset(const fs::path& dir) {
  DatasetBundle b;
  b.features = read_real_table(dir / "features.csv");
  b.labels = read_labels(dir / "labels.csv");
  b.class_embeddings = read_real_table(dir / "class_embeddings.csv");
  b.split = read_split(dir / "splits.json");
  const fs::path names = dir / "class_names.txt";
  if (fs::exists(names)) {
    const std::string text = read_file(names);
    for (auto line : split_lines(text)) {
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      b.class_names.emplace_back(line);
    }
  }
  validate(b);
  return b;
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_real: conversion failed");
  return std::string(buf, ptr);
}

void save_dataset(const DatasetBundle& b, const fs::path& dir) {
  validate(b);
  fs::create_directories(dir);
  std::string text;
  for (Index i = 0; i < b.features.rows(); ++i) append_row(text, b.features, i);
  write_file(dir / "features.csv", text);

  text.clear();
  for (ClassId id : b.labels) text += std::to_string(id) + '\n';
  write_file(dir / "labels.csv", text);

  text.clear();
  for (Index i = 0; i < b.class_embeddings.rows(); ++i) append_row(text, b.class_embeddings, i);
  write_file(dir / "class_embeddings.csv", text);

  json split = {{"name", b.split.name},
                {"train_classes", b.split.train_classes},
                {"val_classes", b.split.val_classes},
                {"test_unseen_classes", b.split.test_unseen_classes},
                {"test_seen_image_indices", b.split.test_seen_image_indices}};
  write_file(dir / "splits.json", split.dump(2) + "\n");

  if (!b.class_names.empty()) {
    text.clear();
    for (const auto& n : b.class_names) text += n + '\n';
    write_file(dir / "class_names.txt", text);
  }
}

Normalization parse_normalization(const std::string& text) {
  if (text == "none") return Normalization::none;
  if (text == "l2_rows") return Normalization::l2_rows;
  throw ConfigError("unknown normalization '" + text + "' (expected none or l2_rows)");
}

Matrix normalize_features(const Matrix& features, Normalization mode) {
  if (mode == Normalization::none) return features;
  Matrix out = features;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

CandidateView::CandidateView(ClassIds ids, Matrix embeddings) {
  if (static_cast<Index>(ids.size()) != embeddings.rows()) {
    throw DataError("candidate view: " + std::to_string(ids.size()) + " ids for " +
                    std::to_string(embeddings.rows()) + " rows");
  }
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  ids_.resize(ids.size());
  embeddings_.resize(embeddings.rows(), embeddings.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ids_[i] = ids[order[i]];
    embeddings_.row(static_cast<Index>(i)) = embeddings.row(static_cast<Index>(order[i]));
    if (i > 0 && ids_[i] == ids_[i - 1]) {
      throw DataError("candidate view: duplicate class id " + std::to_string(ids_[i]));
    }
  }
}

std::optional<Index> CandidateView::position_of(ClassId id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<Index>(it - ids_.begin());
}

CandidateView CandidateView::restrict(const ClassIds& class_set) const {
  const ClassIds ids = sorted_unique(class_set);
  Matrix rows(static_cast<Index>(ids.size()), embeddings_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto pos = position_of(ids[i]);
    if (!pos) throw DataError("unknown class id " + std::to_string(ids[i]) + " in candidate set");
    rows.row(static_cast<Index>(i)) = embeddings_.row(*pos);
  }
  return CandidateView(ids, std::move(rows));
}

bool operator==(const CandidateView& a, const CandidateView& b) {
  return a.ids_ == b.ids_ && same_matrix(a.embeddings_, b.embeddings_);
}

CandidateView restrict_candidates(const DatasetBundle& bundle, const ClassIds& class_set) {
  if (class_set.empty()) throw DataError("empty candidate set");
  const ClassIds ids = sorted_unique(class_set);
  Matrix rows(static_cast<Index>(ids.size()), bundle.embedding_dim());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= bundle.num_classes()) {
      throw DataError("unknown class id " + std::to_string(ids[i]) + " in candidate set");
    }
    rows.row(static_cast<Index>(i)) = bundle.class_embeddings.row(ids[i]);
  }
  return CandidateView(ids, std::move(rows));
}

std::vector<std::size_t> TrainingSet::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(classes.size()), 0);
  for (Index t : targets) ++counts[static_cast<std::size_t>(t)];
  return counts;
}

std::vector<std::size_t> training_images(const DatasetBundle& bundle, const ClassIds& classes) {
  const ClassIds wanted = sorted_unique(classes);
  std::vector<bool> held_out(bundle.labels.size(), false);
  for (std::size_t idx : bundle.split.test_seen_image_indices) held_out[idx] = true;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < bundle.labels.size(); ++i) {
    if (!held_out[i] && std::binary_search(wanted.begin(), wanted.end(), bundle.labels[i])) rows.push_back(i);
  }
  return rows;
}

Matrix gather_rows(const Matrix& features, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = features.row(static_cast<Index>(rows[i]));
  return out;
}

TrainingSet make_training_set(const DatasetBundle& bundle, const ClassIds& classes) {
  TrainingSet ts;
  ts.classes = restrict_candidates(bundle, classes);
  const auto rows = training_images(bundle, ts.classes.ids());
  ts.features = gather_rows(bundle.features, rows);
  ts.targets.reserve(rows.size());
  for (std::size_t r : rows) ts.targets.push_back(*ts.classes.position_of(bundle.labels[r]));
  return ts;
}

}  // namespace zsl
