#include "fscil/features_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "fscil/error.hpp"

namespace fscil {

namespace {

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& path, std::size_t line, std::string_view tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(path, line, "bad number '" + std::string(tok) + "'");
  }
  return v;
}

long parse_long(const std::string& path, std::size_t line, std::string_view tok) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(path, line, "bad integer '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    if (at == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, at - start));
    start = at + 1;
  }
}

void check_contiguous(const std::vector<int>& labels, std::size_t classes,
                      const std::string& context) {
  std::set<int> seen(labels.begin(), labels.end());
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ParseError(context + ": label " + std::to_string(l) + " outside 0.." +
                       std::to_string(classes == 0 ? 0 : classes - 1));
    }
  }
  if (seen.size() != classes) {
    for (std::size_t c = 0; c < classes; ++c) {
      if (!seen.count(static_cast<int>(c))) {
        throw ParseError(context + ": class " + std::to_string(c) + " has no records");
      }
    }
  }
}

}  // namespace

FeatureDataset load_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file: " + path);

  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto head = split(line, ',');
  if (head.size() != 2 || head[0].substr(0, 2) != "d=" || head[1].substr(0, 8) != "classes=") {
    fail(path, 1, "header must be d=<int>,classes=<int>");
  }
  const long dim = parse_long(path, 1, head[0].substr(2));
  const long classes = parse_long(path, 1, head[1].substr(8));
  if (dim <= 0) fail(path, 1, "dimension must be positive");
  if (classes < 0) fail(path, 1, "class count must be non-negative");

  FeatureDataset out;
  out.dim = static_cast<std::size_t>(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto toks = split(line, ',');
    if (toks.size() != static_cast<std::size_t>(dim) + 1) {
      fail(path, lineno,
           "expected " + std::to_string(dim + 1) + " fields, got " + std::to_string(toks.size()));
    }
    const long label = parse_long(path, lineno, toks[0]);
    Vec f(static_cast<std::size_t>(dim));
    for (long i = 0; i < dim; ++i) {
      f[static_cast<std::size_t>(i)] =
          parse_double(path, lineno, toks[static_cast<std::size_t>(i) + 1]);
    }
    out.push(std::move(f), static_cast<int>(label));
  }
  check_contiguous(out.labels, static_cast<std::size_t>(classes), path);
  return out;
}

void save_feature_file(const FeatureDataset& data, const std::string& path) {
  if (data.features.size() != data.labels.size()) {
    throw DimensionMismatch("save_feature_file: labels/features size mismatch");
  }
  std::size_t classes = 0;
  for (int l : data.labels) {
    if (l < 0) throw InvalidInput("save_feature_file: negative label");
    classes = std::max(classes, static_cast<std::size_t>(l) + 1);
  }
  check_contiguous(data.labels, classes, path);
  if (data.dim == 0) throw InvalidInput("save_feature_file: zero dimension");

  std::ostringstream out;
  out << "d=" << data.dim << ",classes=" << classes << "\n";
  char buf[64];
  for (std::size_t r = 0; r < data.features.size(); ++r) {
    const Vec& f = data.features[r];
    if (f.size() != data.dim) {
      throw DimensionMismatch("save_feature_file: record " + std::to_string(r) +
                              " has wrong width");
    }
    out << data.labels[r];
    for (double v : f) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot write feature file: " + path);
  file << out.str();
  if (!file) throw IoError("short write to feature file: " + path);
}

}  // namespace fscil
