#include "fscil/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fscil/error.hpp"

namespace fscil {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if ((line[i] == '#' || line[i] == ';') &&
        (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            const std::string& value, const std::string& want) {
  throw ConfigError("[" + section + "] " + key + " = '" + value + "': expected " + want);
}

std::uint64_t to_u64(const std::string& section, const std::string& key,
                     const std::string& value) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) {
    bad_value(section, key, value, "a non-negative integer");
  }
  return v;
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& value) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size() || !std::isfinite(v)) {
    bad_value(section, key, value, "a finite number");
  }
  return v;
}

bool to_bool(const std::string& section, const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  bad_value(section, key, value, "a boolean");
}

std::vector<std::size_t> to_size_list(const std::string& section, const std::string& key,
                                      const std::string& value) {
  std::vector<std::size_t> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(static_cast<std::size_t>(to_u64(section, key, trim(tok))));
  }
  return out;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::string current;
  bool have_section = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      }
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": empty section name");
      }
      for (const auto& s : cfg.sections_) {
        if (s.first == current) {
          throw ParseError(origin + ":" + std::to_string(lineno) + ": duplicate section [" +
                           current + "]");
        }
      }
      cfg.sections_.push_back({current, {}});
      have_section = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    if (!have_section) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": key outside any section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    auto& kvs = cfg.sections_.back().second;
    for (const auto& kv : kvs) {
      if (kv.first == key) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                         "' in [" + current + "]");
      }
    }
    kvs.push_back({key, value});
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool Config::has(const std::string& section, const std::string& key) const {
  for (const auto& s : sections_) {
    if (s.first != section) continue;
    for (const auto& kv : s.second) {
      if (kv.first == key) return true;
    }
  }
  return false;
}

std::string Config::get(const std::string& section, const std::string& key) const {
  for (const auto& s : sections_) {
    if (s.first != section) continue;
    for (const auto& kv : s.second) {
      if (kv.first == key) return kv.second;
    }
  }
  throw ConfigError("missing config value [" + section + "] " + key);
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  for (auto& s : sections_) {
    if (s.first != section) continue;
    for (auto& kv : s.second) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    s.second.push_back({key, value});
    return;
  }
  sections_.push_back({section, {{key, value}}});
}

std::string Config::to_text() const {
  std::ostringstream out;
  for (const auto& s : sections_) {
    out << '[' << s.first << "]\n";
    for (const auto& kv : s.second) {
      out << kv.first << " = " << kv.second << '\n';
    }
    out << '\n';
  }
  return out.str();
}

PipelineConfig PipelineConfig::from(const Config& raw) {
  PipelineConfig cfg;
  bool s2_lr_set = false, s3_lr_set = false;
  for (const auto& [section, kvs] : raw.sections()) {
    for (const auto& [key, value] : kvs) {
      const auto is = [&](const char* s, const char* k) {
        return section == s && key == k;
      };
      if (is("data", "base_classes")) cfg.base_classes = to_u64(section, key, value);
      else if (is("data", "sessions")) cfg.incremental_sessions = to_u64(section, key, value);
      else if (is("data", "ways")) cfg.ways = to_u64(section, key, value);
      else if (is("data", "shots")) cfg.shots = to_u64(section, key, value);
      else if (is("data", "train_per_class")) cfg.train_per_class = to_u64(section, key, value);
      else if (is("data", "test_per_class")) cfg.test_per_class = to_u64(section, key, value);
      else if (is("data", "image_size")) cfg.image_size = to_u64(section, key, value);
      else if (is("data", "jitter_position")) cfg.jitter.position = to_double(section, key, value);
      else if (is("data", "jitter_brightness")) cfg.jitter.brightness = to_double(section, key, value);
      else if (is("data", "jitter_noise")) cfg.jitter.noise = to_double(section, key, value);
      else if (is("data", "distractor_prob")) cfg.jitter.distractor_prob = to_double(section, key, value);
      else if (is("model", "hidden")) cfg.hidden = to_size_list(section, key, value);
      else if (is("model", "feature_dim")) cfg.feature_dim = to_u64(section, key, value);
      else if (is("model", "head_bias")) cfg.head_bias = to_bool(section, key, value);
      else if (is("stage1", "epochs")) cfg.s1_epochs = to_u64(section, key, value);
      else if (is("stage1", "batch_size")) cfg.s1_batch = to_u64(section, key, value);
      else if (is("stage1", "lr")) cfg.lr = to_double(section, key, value);
      else if (is("stage1", "momentum")) cfg.momentum = to_double(section, key, value);
      else if (is("stage1", "weight_decay")) cfg.weight_decay = to_double(section, key, value);
      else if (is("stage1", "lambda_ct")) cfg.lambda_ct = to_double(section, key, value);
      else if (is("stage1", "margin")) cfg.margin = to_double(section, key, value);
      else if (is("stage1", "center_ema")) cfg.center_ema = to_double(section, key, value);
      else if (is("stage1", "virtual_fold")) cfg.virtual_fold = to_u64(section, key, value);
      else if (is("stage2", "epochs")) cfg.s2_epochs = to_u64(section, key, value);
      else if (is("stage2", "batch_size")) cfg.s2_batch = to_u64(section, key, value);
      else if (is("stage2", "lr")) { cfg.s2_lr = to_double(section, key, value); s2_lr_set = true; }
      else if (is("stage2", "stored_per_class")) cfg.stored_per_class = to_u64(section, key, value);
      else if (is("stage3", "epochs")) cfg.s3_epochs = to_u64(section, key, value);
      else if (is("stage3", "batch_size")) cfg.s3_batch = to_u64(section, key, value);
      else if (is("stage3", "lr")) { cfg.s3_lr = to_double(section, key, value); s3_lr_set = true; }
      else if (is("stage3", "pseudo_per_class")) cfg.pseudo_per_class = to_u64(section, key, value);
      else if (is("stage3", "kd_temperature")) cfg.kd_temperature = to_double(section, key, value);
      else if (is("stage3", "kd_beta")) cfg.kd_beta = to_double(section, key, value);
      else if (is("stage3", "kd_direction")) {
        if (value == "forward") cfg.kd_direction = KdDirection::forward;
        else if (value == "reverse") cfg.kd_direction = KdDirection::reverse;
        else bad_value(section, key, value, "forward|reverse");
      }
      else if (is("stage3", "replay_stored")) cfg.replay_stored = to_bool(section, key, value);
      else if (is("pfs", "entropy_threshold")) cfg.entropy_threshold = to_double(section, key, value);
      else if (is("pfs", "threshold_mode")) {
        if (value == "fraction") cfg.threshold_mode = ThresholdMode::fraction;
        else if (value == "absolute") cfg.threshold_mode = ThresholdMode::absolute;
        else bad_value(section, key, value, "fraction|absolute");
      }
      else if (is("pfs", "max_attempt_factor")) cfg.max_attempt_factor = to_u64(section, key, value);
      else if (is("eval", "track")) {
        if (value == "softmax") cfg.track = Track::softmax;
        else if (value == "ncm") cfg.track = Track::ncm;
        else if (value == "both") cfg.track = Track::both;
        else bad_value(section, key, value, "softmax|ncm|both");
      }
      else if (is("eval", "ncm_similarity")) {
        if (value == "cosine") cfg.ncm_similarity = Similarity::cosine;
        else if (value == "euclidean") cfg.ncm_similarity = Similarity::euclidean;
        else bad_value(section, key, value, "cosine|euclidean");
      }
      else if (is("run", "seed")) cfg.seed = to_u64(section, key, value);
      else if (is("run", "epoch_multiplier")) cfg.epoch_multiplier = to_double(section, key, value);
      else if (is("ablation", "vcg")) cfg.vcg = to_bool(section, key, value);
      else if (is("ablation", "ct")) cfg.ct = to_bool(section, key, value);
      else if (is("ablation", "pfs")) cfg.pfs = to_bool(section, key, value);
      else if (is("ablation", "us")) cfg.us = to_bool(section, key, value);
      else throw ConfigError("unknown config key [" + section + "] " + key);
    }
  }
  if (!s2_lr_set) cfg.s2_lr = cfg.lr;
  if (!s3_lr_set) cfg.s3_lr = cfg.lr;
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (base_classes < 2) fail("base_classes must be at least 2");
  if (ways < 1) fail("ways must be at least 1");
  if (shots < 1) fail("shots must be at least 1");
  if (train_per_class < shots) fail("train_per_class must cover the shot count");
  if (test_per_class < 1) fail("test_per_class must be at least 1");
  if (image_size < 8) fail("image_size must be at least 8");
  if (jitter.position < 0 || jitter.brightness < 0 || jitter.noise < 0) {
    fail("jitter values must be non-negative");
  }
  if (jitter.distractor_prob < 0 || jitter.distractor_prob > 1) {
    fail("distractor_prob must lie in [0,1]");
  }
  if (feature_dim < 1) fail("feature_dim must be at least 1");
  for (std::size_t h : hidden) {
    if (h < 1) fail("hidden widths must be positive");
  }
  if (s1_batch < 1 || s2_batch < 1 || s3_batch < 1) fail("batch sizes must be positive");
  if (!(lr > 0) || !(s2_lr > 0) || !(s3_lr > 0)) fail("learning rates must be positive");
  if (momentum < 0 || momentum >= 1) fail("momentum must lie in [0,1)");
  if (weight_decay < 0) fail("weight_decay must be non-negative");
  if (lambda_ct < 0) fail("lambda_ct must be non-negative");
  if (margin < 0) fail("margin must be non-negative");
  if (!(center_ema > 0 && center_ema <= 1)) fail("center_ema must lie in (0,1]");
  if (stored_per_class < 1) fail("stored_per_class must be at least 1");
  if (!(kd_temperature > 0)) fail("kd_temperature must be positive");
  if (kd_beta < 0) fail("kd_beta must be non-negative");
  if (!(entropy_threshold > 0)) fail("entropy_threshold must be positive");
  if (threshold_mode == ThresholdMode::fraction && entropy_threshold > 1.0) {
    fail("fractional entropy_threshold cannot exceed 1");
  }
  if (max_attempt_factor < 1) fail("max_attempt_factor must be at least 1");
  if (!(epoch_multiplier > 0)) fail("epoch_multiplier must be positive");
}

Config PipelineConfig::echo() const {
  Config c;
  const auto set_u = [&](const char* s, const char* k, std::uint64_t v) {
    c.set(s, k, std::to_string(v));
  };
  const auto set_d = [&](const char* s, const char* k, double v) {
    c.set(s, k, fmt_double(v));
  };
  const auto set_b = [&](const char* s, const char* k, bool v) {
    c.set(s, k, v ? "true" : "false");
  };
  set_u("data", "base_classes", base_classes);
  set_u("data", "sessions", incremental_sessions);
  set_u("data", "ways", ways);
  set_u("data", "shots", shots);
  set_u("data", "train_per_class", train_per_class);
  set_u("data", "test_per_class", test_per_class);
  set_u("data", "image_size", image_size);
  set_d("data", "jitter_position", jitter.position);
  set_d("data", "jitter_brightness", jitter.brightness);
  set_d("data", "jitter_noise", jitter.noise);
  set_d("data", "distractor_prob", jitter.distractor_prob);
  std::string hs;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i > 0) hs += ',';
    hs += std::to_string(hidden[i]);
  }
  c.set("model", "hidden", hs);
  set_u("model", "feature_dim", feature_dim);
  set_b("model", "head_bias", head_bias);
  set_u("stage1", "epochs", s1_epochs);
  set_u("stage1", "batch_size", s1_batch);
  set_d("stage1", "lr", lr);
  set_d("stage1", "momentum", momentum);
  set_d("stage1", "weight_decay", weight_decay);
  set_d("stage1", "lambda_ct", lambda_ct);
  set_d("stage1", "margin", margin);
  set_d("stage1", "center_ema", center_ema);
  set_u("stage1", "virtual_fold", virtual_fold);
  set_u("stage2", "epochs", s2_epochs);
  set_u("stage2", "batch_size", s2_batch);
  set_d("stage2", "lr", s2_lr);
  set_u("stage2", "stored_per_class", stored_per_class);
  set_u("stage3", "epochs", s3_epochs);
  set_u("stage3", "batch_size", s3_batch);
  set_d("stage3", "lr", s3_lr);
  set_u("stage3", "pseudo_per_class", pseudo_per_class);
  set_d("stage3", "kd_temperature", kd_temperature);
  set_d("stage3", "kd_beta", kd_beta);
  c.set("stage3", "kd_direction", kd_direction == KdDirection::forward ? "forward" : "reverse");
  set_b("stage3", "replay_stored", replay_stored);
  set_d("pfs", "entropy_threshold", entropy_threshold);
  c.set("pfs", "threshold_mode", threshold_mode == ThresholdMode::fraction ? "fraction" : "absolute");
  set_u("pfs", "max_attempt_factor", max_attempt_factor);
  c.set("eval", "track", track == Track::softmax ? "softmax" : (track == Track::ncm ? "ncm" : "both"));
  c.set("eval", "ncm_similarity", ncm_similarity == Similarity::cosine ? "cosine" : "euclidean");
  set_u("run", "seed", seed);
  set_d("run", "epoch_multiplier", epoch_multiplier);
  set_b("ablation", "vcg", vcg);
  set_b("ablation", "ct", ct);
  set_b("ablation", "pfs", pfs);
  set_b("ablation", "us", us);
  return c;
}

std::size_t PipelineConfig::effective_epochs(std::size_t epochs) const {
  if (epochs == 0) return 0;
  if (epoch_multiplier == 1.0) return epochs;
  const double scaled = static_cast<double>(epochs) * epoch_multiplier;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scaled)));
}

void apply_ablation(PipelineConfig& cfg, const std::string& list) {
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    if (tok == "vcg") cfg.vcg = false;
    else if (tok == "ct") cfg.ct = false;
    else if (tok == "pfs") cfg.pfs = false;
    else if (tok == "us") cfg.us = false;
    else throw ConfigError("unknown ablation switch '" + tok + "' (use vcg,ct,pfs,us)");
  }
}

}  // namespace fscil
