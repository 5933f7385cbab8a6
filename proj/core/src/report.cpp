#include "zsl/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace zsl {

using nlohmann::ordered_json;

namespace {

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

template <class T>
void add_unique(std::vector<T>& list, const T& value) {
  if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> table_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string body = trim(line);
  if (body.size() < 2 || body.front() != '|' || body.back() != '|') return cells;
  body = body.substr(1, body.size() - 2);
  std::stringstream ss(body);
  std::string cell;
  while (std::getline(ss, cell, '|')) cells.push_back(trim(cell));
  return cells;
}

}  // namespace

std::string records_to_json(const std::vector<ResultsRecord>& records) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : records) {
    ordered_json hp = ordered_json::object();
    for (const auto& [k, v] : r.hyperparameters) hp[k] = v;
    ordered_json o;
    o["method"] = r.method;
    o["dataset"] = r.dataset;
    o["fold"] = r.fold;
    o["mode"] = r.mode;
    o["hyperparameters"] = std::move(hp);
    o["acc_unseen"] = r.acc_unseen;
    o["acc_seen"] = optional_number(r.acc_seen);
    o["harmonic_mean"] = optional_number(r.harmonic_mean);
    o["seconds"] = r.seconds;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::vector<ResultsRecord> records_from_json(const std::string& text) {
  std::vector<ResultsRecord> out;
  try {
    const auto arr = ordered_json::parse(text);
    if (!arr.is_array()) throw DataError("results: top level must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& o = arr[i];
      ResultsRecord r;
      r.method = o.at("method").get<std::string>();
      r.dataset = o.at("dataset").get<std::string>();
      r.fold = o.at("fold").get<int>();
      r.mode = o.at("mode").get<std::string>();
      for (const auto& [k, v] : o.at("hyperparameters").items()) r.hyperparameters[k] = v.get<double>();
      r.acc_unseen = o.at("acc_unseen").get<double>();
      if (!o.at("acc_seen").is_null()) r.acc_seen = o.at("acc_seen").get<double>();
      if (!o.at("harmonic_mean").is_null()) r.harmonic_mean = o.at("harmonic_mean").get<double>();
      r.seconds = o.at("seconds").get<double>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("results: ") + e.what());
  }
  return out;
}

ReportFormat parse_report_format(const std::string& text) {
  if (text == "table") return ReportFormat::table;
  if (text == "ranks") return ReportFormat::ranks;
  if (text == "raw") return ReportFormat::raw;
  throw ConfigError("unknown report format '" + text + "' (expected table, ranks or raw)");
}

std::string render_table(const std::vector<ResultsRecord>& records) {
  std::ostringstream out;
  for (const std::string mode : {"zsl", "gzsl"}) {
    std::vector<std::string> methods, datasets;
    struct Sum {
      double ts = 0, tr = 0, h = 0;
      int n = 0;
    };
    std::map<std::pair<std::string, std::string>, Sum> sums;
    for (const auto& r : records) {
      if (r.mode != mode) continue;
      add_unique(methods, r.method);
      add_unique(datasets, r.dataset);
      Sum& s = sums[{r.method, r.dataset}];
      s.ts += r.acc_unseen;
      s.tr += r.acc_seen.value_or(0.0);
      s.h += r.harmonic_mean.value_or(0.0);
      ++s.n;
    }
    if (methods.empty()) continue;
    const bool gzsl = mode == "gzsl";
    out << "## " << mode << "\n| method |";
    for (const auto& d : datasets) {
      if (gzsl) {
        out << ' ' << d << " ts | " << d << " tr | " << d << " H |";
      } else {
        out << ' ' << d << " |";
      }
    }
    out << "\n|---|";
    for (std::size_t i = 0; i < datasets.size() * (gzsl ? 3 : 1); ++i) out << "---|";
    out << '\n';
    for (const auto& m : methods) {
      out << "| " << m << " |";
      for (const auto& d : datasets) {
        const auto it = sums.find({m, d});
        const int cols = gzsl ? 3 : 1;
        if (it == sums.end()) {
          for (int c = 0; c < cols; ++c) out << " - |";
          continue;
        }
        const Sum& s = it->second;
        out << ' ' << percent(s.ts / s.n) << " |";
        if (gzsl) out << ' ' << percent(s.tr / s.n) << " | " << percent(s.h / s.n) << " |";
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

TableCells parse_table(const std::string& text) {
  TableCells cells;
  std::istringstream in(text);
  std::string line, section;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind("## ", 0) == 0) {
      section = trim(line.substr(3));
      header.clear();
      continue;
    }
    const auto row = table_row(line);
    if (row.empty()) continue;
    if (header.empty()) {
      header = row;
      continue;
    }
    if (row[0].find_first_not_of('-') == std::string::npos) continue;
    if (row.size() != header.size()) throw DataError("table: row width does not match header");
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] == "-") continue;
      cells[{section, row[0], header[c]}] = std::stod(row[c]);
    }
  }
  return cells;
}

std::map<std::string, ObservationGrid> observation_grids(const std::vector<ResultsRecord>& records) {
  std::map<std::string, ObservationGrid> grids;
  for (const std::string mode : {"zsl", "gzsl"}) {
    std::vector<std::string> methods, observations;
    for (const auto& r : records) {
      if (r.mode != mode) continue;
      add_unique(methods, r.method);
      add_unique(observations, r.dataset + "/" + std::to_string(r.fold));
    }
    if (methods.empty()) continue;
    ObservationGrid grid(methods, observations);
    for (const auto& r : records) {
      if (r.mode != mode) continue;
      const double score = mode == "gzsl" ? r.harmonic_mean.value_or(0.0) : r.acc_unseen;
      grid.set(r.method, r.dataset + "/" + std::to_string(r.fold), score);
    }
    grids.emplace(mode, std::move(grid));
  }
  return grids;
}

std::string render_ranks(const std::vector<ResultsRecord>& records) {
  ordered_json out = ordered_json::object();
  for (const auto& [mode, grid] : observation_grids(records)) {
    const RankMatrix rm = rank_matrix(grid);
    ordered_json counts = ordered_json::array();
    ordered_json mean = ordered_json::array();
    for (Index i = 0; i < rm.counts.rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (Index j = 0; j < rm.counts.cols(); ++j) row.push_back(rm.counts(i, j));
      counts.push_back(std::move(row));
      mean.push_back(rm.mean_rank[i]);
    }
    out[mode] = {{"methods", rm.methods},
                 {"observations", grid.observations},
                 {"counts", std::move(counts)},
                 {"mean_rank", std::move(mean)}};
  }
  return out.dump(2) + "\n";
}

std::string emit_report(const std::vector<ResultsRecord>& records, ReportFormat format) {
  if (records.empty()) throw DataError("report: no records");
  switch (format) {
    case ReportFormat::table:
      return render_table(records);
    case ReportFormat::ranks:
      return render_ranks(records);
    case ReportFormat::raw:
      return records_to_json(records);
  }
  throw ConfigError("report: unknown format");
}

}  // namespace zsl
