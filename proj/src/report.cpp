#include "fscil/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fscil/error.hpp"
#include "fscil/metrics.hpp"

namespace fscil {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kAccuracySlack = 0.0051;  // rounded accuracy vs exact confusion
constexpr double kAverageSlack = 0.011;    // mean of rounded vs rounded mean
constexpr double kDropSlack = 0.0151;      // difference of two rounded values

// config values echo as canonical strings; give JSON the native type back
ordered_json typed(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  {
    std::int64_t i = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
    if (ec == std::errc() && p == v.data() + v.size()) return i;
  }
  {
    std::uint64_t u = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
    if (ec == std::errc() && p == v.data() + v.size()) return u;
  }
  {
    double d = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec == std::errc() && p == v.data() + v.size()) return d;
  }
  return v;
}

std::string untyped(const json& v, const std::string& where) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  throw ParseError(where + ": expected a scalar");
}

const json& field(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing '" + key + "'");
  return *it;
}

}  // namespace

EvalReport make_report(const PipelineState& state) {
  EvalReport report;
  report.seed = state.cfg.seed;
  report.config = state.cfg;
  for (const TrackResults& src : state.tracks) {
    EvalReport::Track track;
    track.name = src.name;
    track.sessions = src.sessions;
    std::vector<double> accs;
    for (const SessionResult& r : src.sessions) accs.push_back(r.accuracy);
    if (!accs.empty()) {
      track.average_accuracy = average_accuracy(accs);
      track.performance_drop = performance_drop(accs);
    }
    report.tracks.push_back(std::move(track));
  }
  report.warnings = state.warnings;
  report.stage1_epoch_loss = state.stage1_epoch_loss;
  report.separation = state.separation;
  report.pseudo_fallbacks = state.pseudo_fallbacks;
  return report;
}

ordered_json report_to_json(const EvalReport& report) {
  ordered_json j;
  j["schema_version"] = report.schema_version;
  j["seed"] = report.seed;
  ordered_json cfg;
  const Config echoed = report.config.echo();
  for (const auto& [section, kvs] : echoed.sections()) {
    ordered_json sec;
    for (const auto& [key, value] : kvs) sec[key] = typed(value);
    cfg[section] = std::move(sec);
  }
  j["config"] = std::move(cfg);

  ordered_json tracks = ordered_json::array();
  for (const EvalReport::Track& track : report.tracks) {
    ordered_json t;
    t["name"] = track.name;
    ordered_json sessions = ordered_json::array();
    for (const SessionResult& r : track.sessions) {
      ordered_json s;
      s["id"] = r.session;
      s["accuracy"] = round2(r.accuracy);
      ordered_json per_class;
      for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        per_class[std::to_string(c)] = round2(r.per_class[c]);
      }
      s["per_class"] = std::move(per_class);
      s["confusion"] = r.confusion.counts;
      sessions.push_back(std::move(s));
    }
    t["sessions"] = std::move(sessions);
    t["average_accuracy"] = round2(track.average_accuracy);
    t["performance_drop"] = round2(track.performance_drop);
    tracks.push_back(std::move(t));
  }
  j["tracks"] = std::move(tracks);
  j["warnings"] = report.warnings;

  ordered_json diag;
  diag["stage1_epoch_loss"] = report.stage1_epoch_loss;
  diag["separation"] = {{"intra", report.separation.intra},
                        {"inter", report.separation.inter},
                        {"ratio", report.separation.ratio()}};
  diag["pseudo_fallbacks"] = report.pseudo_fallbacks;
  j["diagnostics"] = std::move(diag);
  return j;
}

namespace {

EvalReport parse_report(const json& j) {
  if (!j.is_object()) throw ParseError("report: expected an object");
  EvalReport report;
  report.schema_version = field(j, "schema_version", "report").get<int>();
  if (report.schema_version != 1) {
    throw ParseError("report: unsupported schema version " +
                     std::to_string(report.schema_version));
  }
  report.seed = field(j, "seed", "report").get<std::uint64_t>();

  const json& cfg = field(j, "config", "report");
  Config raw;
  for (const auto& [section, kvs] : cfg.items()) {
    if (!kvs.is_object()) throw ParseError("report config [" + section + "]: expected an object");
    for (const auto& [key, value] : kvs.items()) {
      raw.set(section, key, untyped(value, "report config [" + section + "] " + key));
    }
  }
  report.config = PipelineConfig::from(raw);
  if (report.config.seed != report.seed) {
    throw ParseError("report: seed disagrees with the config");
  }

  for (const json& t : field(j, "tracks", "report")) {
    EvalReport::Track track;
    track.name = field(t, "name", "track").get<std::string>();
    const std::string where = "track " + track.name;
    std::vector<double> accs;
    for (const json& s : field(t, "sessions", where)) {
      SessionResult r;
      r.session = field(s, "id", where).get<std::size_t>();
      if (r.session != track.sessions.size()) {
        throw ParseError(where + ": session ids must ascend from zero");
      }
      r.accuracy = field(s, "accuracy", where).get<double>();
      const json& per_class = field(s, "per_class", where);
      r.per_class.resize(per_class.size());
      for (const auto& [key, value] : per_class.items()) {
        std::size_t c = 0;
        const auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), c);
        if (ec != std::errc() || p != key.data() + key.size() || c >= r.per_class.size()) {
          throw ParseError(where + ": bad per-class key '" + key + "'");
        }
        r.per_class[c] = value.get<double>();
      }
      const json& confusion = field(s, "confusion", where);
      for (const json& row : confusion) {
        r.confusion.counts.push_back(row.get<std::vector<std::int64_t>>());
        if (r.confusion.counts.back().size() != confusion.size()) {
          throw ParseError(where + ": confusion matrix must be square");
        }
      }
      if (r.confusion.classes() != r.per_class.size()) {
        throw ParseError(where + ": confusion size disagrees with per-class list");
      }
      if (std::fabs(r.accuracy - r.confusion.overall_accuracy()) > kAccuracySlack) {
        throw ParseError(where + ": accuracy disagrees with the confusion matrix");
      }
      accs.push_back(r.accuracy);
      track.sessions.push_back(std::move(r));
    }
    if (track.sessions.empty()) throw ParseError(where + ": no sessions");
    track.average_accuracy = field(t, "average_accuracy", where).get<double>();
    track.performance_drop = field(t, "performance_drop", where).get<double>();
    if (std::fabs(track.average_accuracy - average_accuracy(accs)) > kAverageSlack) {
      throw ParseError(where + ": average accuracy disagrees with the sessions");
    }
    if (std::fabs(track.performance_drop - performance_drop(accs)) > kDropSlack) {
      throw ParseError(where + ": performance drop disagrees with the sessions");
    }
    report.tracks.push_back(std::move(track));
  }

  for (const json& w : field(j, "warnings", "report")) {
    report.warnings.push_back(w.get<std::string>());
  }
  const json& diag = field(j, "diagnostics", "report");
  report.stage1_epoch_loss =
      field(diag, "stage1_epoch_loss", "diagnostics").get<std::vector<double>>();
  const json& sep = field(diag, "separation", "diagnostics");
  report.separation.intra = field(sep, "intra", "separation").get<double>();
  report.separation.inter = field(sep, "inter", "separation").get<double>();
  report.pseudo_fallbacks =
      field(diag, "pseudo_fallbacks", "diagnostics").get<std::size_t>();
  return report;
}

}  // namespace

EvalReport report_from_json(const json& j) {
  try {
    return parse_report(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

void save_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return report_from_json(j);
}

std::string metrics_csv(const EvalReport& report) {
  std::ostringstream out;
  const auto row2 = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    return std::string(buf);
  };
  out << "track,metric,session,class,value\n";
  for (const EvalReport::Track& track : report.tracks) {
    for (const SessionResult& r : track.sessions) {
      out << track.name << ",accuracy," << r.session << ",," << row2(r.accuracy) << '\n';
    }
    for (const SessionResult& r : track.sessions) {
      for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        out << track.name << ",per_class_accuracy," << r.session << ',' << c << ','
            << row2(r.per_class[c]) << '\n';
      }
    }
    out << track.name << ",average_accuracy,,," << row2(track.average_accuracy) << '\n';
    out << track.name << ",performance_drop,,," << row2(track.performance_drop) << '\n';
  }
  return out.str();
}

void write_confusion_csvs(const EvalReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir + " (" + ec.message() + ")");
  for (const EvalReport::Track& track : report.tracks) {
    for (const SessionResult& r : track.sessions) {
      const std::string stem =
          dir + "/confusion_" + track.name + "_s" + std::to_string(r.session);
      {
        std::ofstream out(stem + ".csv");
        if (!out) throw IoError("cannot open for writing: " + stem + ".csv");
        for (const auto& row : r.confusion.counts) {
          for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "," : "") << row[c];
          }
          out << '\n';
        }
      }
      {
        std::ofstream out(stem + "_norm.csv");
        if (!out) throw IoError("cannot open for writing: " + stem + "_norm.csv");
        for (const auto& row : r.confusion.counts) {
          std::int64_t total = 0;
          for (const std::int64_t v : row) total += v;
          for (std::size_t c = 0; c < row.size(); ++c) {
            char buf[32];
            const double frac =
                total == 0 ? 0.0
                           : static_cast<double>(row[c]) / static_cast<double>(total);
            std::snprintf(buf, sizeof buf, "%.6f", frac);
            out << (c ? "," : "") << buf;
          }
          out << '\n';
        }
      }
    }
  }
}

}  // namespace fscil
