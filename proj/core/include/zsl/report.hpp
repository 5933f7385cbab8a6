#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "zsl/ranking.hpp"

namespace zsl {

/// One (method, dataset, fold, mode) evaluation.
struct ResultsRecord {
  std::string method;
  std::string dataset;
  int fold = 0;
  std::string mode;  // "zsl" or "gzsl"
  std::map<std::string, double> hyperparameters;
  double acc_unseen = 0.0;
  std::optional<double> acc_seen;
  std::optional<double> harmonic_mean;
  double seconds = 0.0;

  friend bool operator==(const ResultsRecord&, const ResultsRecord&) = default;
};

/// results.json rendering: a JSON array, two-space indent, trailing newline.
std::string records_to_json(const std::vector<ResultsRecord>& records);
/// Throws DataError on malformed input.
std::vector<ResultsRecord> records_from_json(const std::string& text);

enum class ReportFormat { table, ranks, raw };
ReportFormat parse_report_format(const std::string& text);

/// Methods x datasets grids in percent with one decimal, averaged over
/// folds. ZSL cells hold ts; GZSL cells hold ts, tr and H.
std::string render_table(const std::vector<ResultsRecord>& records);

/// Cell values of a rendered table keyed by (section, method, column).
using TableCells = std::map<std::tuple<std::string, std::string, std::string>, double>;
TableCells parse_table(const std::string& text);

/// Observation grid per mode: methods x "dataset/fold", scored by ts for ZSL
/// and H for GZSL.
std::map<std::string, ObservationGrid> observation_grids(const std::vector<ResultsRecord>& records);

/// Rank matrices and mean ranks per mode, as JSON.
std::string render_ranks(const std::vector<ResultsRecord>& records);

/// Throws DataError on an empty record list.
std::string emit_report(const std::vector<ResultsRecord>& records, ReportFormat format);

}  // namespace zsl
