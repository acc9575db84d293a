#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fscil/sessions.hpp"

namespace fscil {

// Results of a run as written to disk. Percentages are rounded half-up to
// two decimals at the serialization boundary; loading re-checks that the
// stored aggregates still match the stored sessions within the rounding
// slack (0.0051 for accuracy vs confusion, 0.011 for the average, 0.0151
// for the drop).
struct EvalReport {
  int schema_version = 1;
  std::uint64_t seed = 0;
  PipelineConfig config;

  struct Track {
    std::string name;
    std::vector<SessionResult> sessions;
    double average_accuracy = 0.0;
    double performance_drop = 0.0;

    friend bool operator==(const Track&, const Track&) = default;
  };
  std::vector<Track> tracks;

  std::vector<std::string> warnings;
  std::vector<double> stage1_epoch_loss;
  SeparationStats separation;
  std::size_t pseudo_fallbacks = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// aggregates a finished (or partially finished) run; values stay unrounded
EvalReport make_report(const PipelineState& state);

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);  // throws ParseError

void save_report(const std::string& path, const EvalReport& report);
EvalReport load_report(const std::string& path);

// long-format summary: track,metric,session,class,value
std::string metrics_csv(const EvalReport& report);

// per track and session: raw counts and row-normalized confusion matrices
void write_confusion_csvs(const EvalReport& report, const std::string& dir);

}  // namespace fscil
