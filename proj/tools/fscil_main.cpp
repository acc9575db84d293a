#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fscil/checkpoint.hpp"
#include "fscil/config.hpp"
#include "fscil/datagen.hpp"
#include "fscil/dataset_io.hpp"
#include "fscil/error.hpp"
#include "fscil/log.hpp"
#include "fscil/metrics.hpp"
#include "fscil/pfs.hpp"
#include "fscil/report.hpp"
#include "fscil/sessions.hpp"

namespace {

using namespace fscil;

constexpr std::uint64_t kTagData = 0xDA7A;
constexpr std::uint64_t kTagShots = 0x5807;

struct RunOptions {
  std::string config;
  std::string data;
  std::string report;
  std::string checkpoint;
  std::string ablate;
  std::string track;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

PipelineConfig load_config(const RunOptions& opt) {
  PipelineConfig cfg = PipelineConfig::from(Config::parse_file(opt.config));
  if (opt.seed_set) cfg.seed = opt.seed;
  if (!opt.ablate.empty()) apply_ablation(cfg, opt.ablate);
  if (!opt.track.empty()) {
    if (opt.track == "softmax") cfg.track = Track::softmax;
    else if (opt.track == "ncm") cfg.track = Track::ncm;
    else if (opt.track == "both") cfg.track = Track::both;
    else throw ConfigError("--track: expected softmax, ncm or both, got '" + opt.track + "'");
  }
  return cfg;
}

std::vector<int> labels_of(const ImageSet& set) {
  std::vector<int> out;
  out.reserve(set.samples.size());
  for (const auto& s : set.samples) out.push_back(s.label);
  return out;
}

DiskDataset load_and_check(const std::string& dir, const PipelineConfig& cfg) {
  DiskDataset d = load_dataset(dir);
  validate_protocol(d.sessions, labels_of(d.train), labels_of(d.test), cfg);
  return d;
}

void print_tracks(const PipelineState& state) {
  for (const TrackResults& track : state.tracks) {
    std::vector<double> accs;
    std::string sessions;
    for (const SessionResult& r : track.sessions) {
      accs.push_back(r.accuracy);
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.2f", round2(r.accuracy));
      sessions += buf;
    }
    if (accs.empty()) continue;
    std::printf("%s:%s  AA=%.2f PD=%.2f\n", track.name.c_str(), sessions.c_str(),
                round2(average_accuracy(accs)), round2(performance_drop(accs)));
  }
}

void finish_run(Pipeline& pipeline, const RunOptions& opt) {
  save_report(opt.report, make_report(pipeline.state()));
  if (!opt.checkpoint.empty()) save_checkpoint(opt.checkpoint, pipeline.state());
  print_tracks(pipeline.state());
  std::printf("report: %s\n", opt.report.c_str());
  if (!opt.checkpoint.empty()) std::printf("checkpoint: %s\n", opt.checkpoint.c_str());
  for (const std::string& w : pipeline.state().warnings) log::warn(w);
}

int cmd_gen_data(const RunOptions& opt, const std::string& out) {
  const PipelineConfig cfg = load_config(opt);
  Rng data_rng = Rng(cfg.seed).derive(kTagData);
  GeneratedData gen = generate_dataset(cfg.total_classes(), cfg.train_per_class,
                                       cfg.test_per_class, cfg.jitter, cfg.image_size,
                                       data_rng);
  for (auto& s : gen.train.samples) {
    s.session = static_cast<int>(session_of_class(s.label, cfg));
  }
  for (auto& s : gen.test.samples) {
    s.session = static_cast<int>(session_of_class(s.label, cfg));
  }
  Rng shot_rng = Rng(cfg.seed).derive(kTagShots);
  DiskDataset d{std::move(gen.train), std::move(gen.test), {}};
  d.sessions = make_session_specs(labels_of(d.train), labels_of(d.test), cfg, shot_rng);
  validate_protocol(d.sessions, labels_of(d.train), labels_of(d.test), cfg);
  save_dataset(out, d);
  std::printf("%s: %zu classes, %zu train / %zu test samples, %zu sessions, seed %llu\n",
              out.c_str(), cfg.total_classes(), d.train.samples.size(),
              d.test.samples.size(), d.sessions.size(),
              static_cast<unsigned long long>(cfg.seed));
  return 0;
}

int cmd_run(const RunOptions& opt) {
  const PipelineConfig cfg = load_config(opt);
  const DiskDataset d = load_and_check(opt.data, cfg);
  Pipeline pipeline(cfg);
  pipeline.run_all(d.train, d.test, d.sessions);
  finish_run(pipeline, opt);
  return 0;
}

int cmd_resume(const RunOptions& opt) {
  const PipelineConfig cfg = load_config(opt);
  PipelineState state = load_checkpoint(opt.checkpoint);
  require_same_config(state, cfg);
  const DiskDataset d = load_and_check(opt.data, cfg);
  Pipeline pipeline(std::move(state));
  if (pipeline.state().completed_session < 0) {
    pipeline.run_all(d.train, d.test, d.sessions);
  } else {
    const std::size_t first =
        static_cast<std::size_t>(pipeline.state().completed_session) + 1;
    for (std::size_t s = first; s <= cfg.incremental_sessions; ++s) {
      pipeline.run_incremental(s, d.train, d.test, d.sessions);
    }
  }
  finish_run(pipeline, opt);
  return 0;
}

int cmd_metrics(const std::string& list) {
  std::vector<double> accs;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string::npos) comma = list.size();
    const std::string token = list.substr(pos, comma - pos);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || p != token.data() + token.size() || !std::isfinite(v)) {
      throw InvalidInput("--accuracies: '" + token + "' is not a number");
    }
    accs.push_back(v);
    pos = comma + 1;
  }
  std::printf("AA=%.2f PD=%.2f\n", round2(average_accuracy(accs)),
              round2(performance_drop(accs)));
  return 0;
}

struct AuditSummary {
  std::size_t audited_classes = 0;
  std::size_t pseudo_features = 0;
  std::size_t fallbacks = 0;
  std::vector<std::string> violations;
};

void audit_pseudo(const ClassMemoryBank& bank, const PseudoFeature& pf, std::size_t slot,
                  const ClassifierHead& teacher, bool uncertainty_filter,
                  AuditSummary& out) {
  const std::string where =
      "class " + std::to_string(bank.class_id) + " pseudo " + std::to_string(slot);
  const auto flag = [&](const std::string& what) { out.violations.push_back(where + ": " + what); };

  if (pf.value.size() != bank.mean.size()) {
    flag("feature width " + std::to_string(pf.value.size()) + " != bank width " +
         std::to_string(bank.mean.size()));
    return;
  }
  if (pf.fallback) {
    ++out.fallbacks;
    if (pf.alpha != 0.0) flag("fallback with nonzero blend weight");
  } else if (!(pf.alpha > 0.0 && pf.alpha < 1.0)) {
    flag("blend weight " + std::to_string(pf.alpha) + " outside (0,1)");
  }
  if (pf.source_index < 0 ||
      static_cast<std::size_t>(pf.source_index) >= bank.stored.size()) {
    flag("source index " + std::to_string(pf.source_index) + " outside the stored set");
    return;
  }
  const Vec& src = bank.stored[static_cast<std::size_t>(pf.source_index)];
  double err = 0.0;
  for (std::size_t k = 0; k < pf.value.size(); ++k) {
    err = std::max(err, std::fabs(pf.value[k] -
                                  (pf.alpha * src[k] + (1.0 - pf.alpha) * bank.mean[k])));
  }
  if (err > 1e-12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", err);
    flag(std::string("reconstruction error ") + buf + " exceeds 1e-12");
  }
  const Vec probs = softmax(teacher.logits(pf.value));
  const double h = entropy(probs);
  if (std::fabs(h - pf.entropy) > 1e-12) {
    flag("recorded entropy disagrees with the feature");
  }
  if (!pf.fallback && uncertainty_filter) {
    if (argmax(probs) != static_cast<std::size_t>(bank.class_id)) {
      flag("teacher no longer predicts the class");
    }
    if (!(h < bank.entropy_threshold)) {
      flag("entropy " + std::to_string(h) + " not below threshold " +
           std::to_string(bank.entropy_threshold));
    }
  }
}

int cmd_pfs_audit(const std::string& checkpoint_path, bool as_json) {
  const PipelineState state = load_checkpoint(checkpoint_path);
  const PipelineConfig& cfg = state.cfg;
  AuditSummary out;
  const int completed = state.completed_session;

  const ClassifierHead* teacher = nullptr;
  if (completed >= 1) {
    const std::size_t t = static_cast<std::size_t>(completed) - 1;
    if (t < state.capture_heads.size()) teacher = &state.capture_heads[t];
  }

  for (const ClassMemoryBank& bank : state.banks) {
    const bool synthesized = cfg.pfs && completed >= 1 && bank.session < completed;
    if (!synthesized) {
      if (!bank.pseudo.empty()) {
        out.violations.push_back("class " + std::to_string(bank.class_id) +
                                 ": pseudo-features present before any synthesis pass");
      }
      continue;
    }
    ++out.audited_classes;
    out.pseudo_features += bank.pseudo.size();
    if (bank.pseudo.size() != cfg.pseudo_per_class) {
      out.violations.push_back("class " + std::to_string(bank.class_id) + ": " +
                               std::to_string(bank.pseudo.size()) +
                               " pseudo-features, expected " +
                               std::to_string(cfg.pseudo_per_class));
    }
    if (bank.attempts > cfg.pseudo_per_class * cfg.max_attempt_factor) {
      out.violations.push_back("class " + std::to_string(bank.class_id) +
                               ": attempt count exceeds the budget");
    }
    if (teacher == nullptr) {
      out.violations.push_back("class " + std::to_string(bank.class_id) +
                               ": no teacher head snapshot to audit against");
      continue;
    }
    for (std::size_t i = 0; i < bank.pseudo.size(); ++i) {
      audit_pseudo(bank, bank.pseudo[i], i, *teacher, cfg.us, out);
    }
  }

  if (as_json) {
    nlohmann::ordered_json j;
    j["checkpoint"] = checkpoint_path;
    j["completed_session"] = completed;
    j["audited_classes"] = out.audited_classes;
    j["pseudo_features"] = out.pseudo_features;
    j["fallbacks"] = out.fallbacks;
    j["violations"] = out.violations;
    std::cout << j.dump(2) << '\n';
  } else {
    for (const std::string& v : out.violations) std::printf("violation: %s\n", v.c_str());
    std::printf("pfs-audit: %zu classes, %zu pseudo-features, %zu fallbacks, %zu violations\n",
                out.audited_classes, out.pseudo_features, out.fallbacks,
                out.violations.size());
  }
  return out.violations.empty() ? 0 : 1;
}

int cmd_report(const std::string& report_path, const std::string& csv_path,
               const std::string& confusion_dir) {
  const EvalReport report = load_report(report_path);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot open for writing: " + csv_path);
    out << metrics_csv(report);
    if (!out) throw IoError("write failed: " + csv_path);
  } else if (confusion_dir.empty()) {
    std::cout << metrics_csv(report);
  }
  if (!confusion_dir.empty()) write_confusion_csvs(report, confusion_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot class-incremental pill recognition pipeline"};
  app.require_subcommand(1);
  int rc = 0;

  RunOptions opt;
  std::string out_dir;
  std::string accuracies;
  std::string csv_path;
  std::string confusion_dir;
  bool audit_json = false;

  const auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", opt.seed, "override the config seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
  };

  CLI::App* gen = app.add_subcommand("gen-data", "render a benchmark dataset to disk");
  gen->add_option("--config", opt.config, "pipeline config file")
      ->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "output directory")->required();
  add_seed(gen);
  gen->callback([&] { rc = cmd_gen_data(opt, out_dir); });

  CLI::App* run = app.add_subcommand("run", "train every session and write the report");
  run->add_option("--config", opt.config, "pipeline config file")
      ->required()->check(CLI::ExistingFile);
  run->add_option("--data", opt.data, "dataset directory from gen-data")
      ->required()->check(CLI::ExistingDirectory);
  run->add_option("--report", opt.report, "report JSON destination")->required();
  run->add_option("--checkpoint", opt.checkpoint, "also write a checkpoint here");
  run->add_option("--ablate", opt.ablate, "comma list of switches to disable: vcg,ct,pfs,us");
  run->add_option("--track", opt.track, "classifier track: softmax, ncm or both");
  add_seed(run);
  run->callback([&] { rc = cmd_run(opt); });

  CLI::App* resume = app.add_subcommand("resume", "continue a checkpointed run");
  resume->add_option("--config", opt.config, "pipeline config file")
      ->required()->check(CLI::ExistingFile);
  resume->add_option("--data", opt.data, "dataset directory from gen-data")
      ->required()->check(CLI::ExistingDirectory);
  resume->add_option("--checkpoint", opt.checkpoint, "checkpoint to continue from")
      ->required()->check(CLI::ExistingFile);
  resume->add_option("--report", opt.report, "report JSON destination")->required();
  resume->callback([&] { rc = cmd_resume(opt); });

  CLI::App* metrics = app.add_subcommand("metrics", "aggregate a list of session accuracies");
  metrics->add_option("--accuracies", accuracies,
                      "comma-separated per-session accuracies")->required();
  metrics->callback([&] { rc = cmd_metrics(accuracies); });

  CLI::App* audit = app.add_subcommand("pfs-audit",
                                       "re-verify pseudo-feature invariants in a checkpoint");
  audit->add_option("--checkpoint", opt.checkpoint, "checkpoint to audit")
      ->required()->check(CLI::ExistingFile);
  audit->add_flag("--json", audit_json, "emit the audit as JSON");
  audit->callback([&] { rc = cmd_pfs_audit(opt.checkpoint, audit_json); });

  CLI::App* report = app.add_subcommand("report", "flatten a report JSON to CSV tables");
  report->add_option("--report", opt.report, "report JSON to read")
      ->required()->check(CLI::ExistingFile);
  report->add_option("--csv", csv_path, "write the metrics table here (default: stdout)");
  report->add_option("--confusion-dir", confusion_dir,
                     "write per-session confusion CSVs into this directory");
  report->callback([&] { rc = cmd_report(opt.report, csv_path, confusion_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
