#include "fscil/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "fscil/config.hpp"
#include "fscil/error.hpp"

namespace fscil {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'C', 'I', 'L', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in, const std::string& path, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError(path + ": truncated while reading " + what);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& in, const std::string& path, const char* what) {
  const auto n = take<std::uint64_t>(in, path, what);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ParseError(path + ": truncated while reading " + what);
  return s;
}

void put_vec(std::ostream& out, const Vec& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vec take_vec(std::istream& in, const std::string& path, const char* what) {
  const auto n = take<std::uint64_t>(in, path, what);
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError(path + ": truncated while reading " + what);
  return v;
}

void put_mat(std::ostream& out, const Mat& m) {
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Mat take_mat(std::istream& in, const std::string& path, const char* what) {
  const auto rows = take<std::uint64_t>(in, path, what);
  const auto cols = take<std::uint64_t>(in, path, what);
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw ParseError(path + ": truncated while reading " + what);
  return m;
}

void put_head(std::ostream& out, const ClassifierHead& head) {
  put<std::uint8_t>(out, head.has_bias() ? 1 : 0);
  put_mat(out, head.weight());
  put_vec(out, head.bias());
}

ClassifierHead take_head(std::istream& in, const std::string& path) {
  const auto has_bias = take<std::uint8_t>(in, path, "head bias flag");
  Mat weight = take_mat(in, path, "head weight");
  Vec bias = take_vec(in, path, "head bias");
  if (weight.empty()) return {};
  Rng scratch(0);
  ClassifierHead head(weight.cols(), weight.rows(), has_bias != 0, scratch);
  head.weight() = std::move(weight);
  head.bias() = std::move(bias);
  return head;
}

}  // namespace

void save_checkpoint(const std::string& path, const PipelineState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  put_string(out, state.cfg.echo().to_text());
  put<std::int32_t>(out, state.completed_session);
  put<std::uint64_t>(out, state.data_fingerprint);

  put<std::uint8_t>(out, state.backbone.frozen() ? 1 : 0);
  put<std::uint64_t>(out, state.backbone.layers().size());
  for (const LinearLayer& layer : state.backbone.layers()) {
    put_mat(out, layer.weight);
    put_vec(out, layer.bias);
  }
  put_head(out, state.head);
  put<std::uint64_t>(out, state.capture_heads.size());
  for (const ClassifierHead& h : state.capture_heads) put_head(out, h);

  put<std::uint64_t>(out, state.banks.size());
  for (const ClassMemoryBank& bank : state.banks) {
    put<std::int32_t>(out, bank.class_id);
    put<std::int32_t>(out, bank.session);
    put_vec(out, bank.mean);
    put<std::uint64_t>(out, bank.stored.size());
    for (const Vec& f : bank.stored) put_vec(out, f);
    put<std::uint64_t>(out, bank.pseudo.size());
    for (const PseudoFeature& p : bank.pseudo) {
      put_vec(out, p.value);
      put<std::int32_t>(out, p.source_index);
      put<double>(out, p.alpha);
      put<double>(out, p.entropy);
      put<std::uint8_t>(out, p.fallback ? 1 : 0);
    }
    put<double>(out, bank.entropy_threshold);
    put<std::uint64_t>(out, bank.attempts);
  }

  put<std::uint64_t>(out, state.tracks.size());
  for (const TrackResults& track : state.tracks) {
    put_string(out, track.name);
    put<std::uint64_t>(out, track.sessions.size());
    for (const SessionResult& r : track.sessions) {
      put<std::uint64_t>(out, r.session);
      put<double>(out, r.accuracy);
      put_vec(out, r.per_class);
      put<std::uint64_t>(out, r.confusion.counts.size());
      for (const auto& row : r.confusion.counts) {
        if (row.size() != r.confusion.counts.size()) {
          throw InvalidInput("confusion matrix must be square");
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(std::int64_t)));
      }
    }
  }

  put_vec(out, state.stage1_epoch_loss);
  put<double>(out, state.separation.intra);
  put<double>(out, state.separation.inter);
  put<std::uint64_t>(out, state.pseudo_fallbacks);
  put<std::uint64_t>(out, state.warnings.size());
  for (const std::string& w : state.warnings) put_string(out, w);
  if (!out) throw IoError("write failed: " + path);
}

PipelineState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError(path + ": not a checkpoint file");
  }
  PipelineState state;
  const std::string cfg_text = take_string(in, path, "config echo");
  state.cfg = PipelineConfig::from(Config::parse(cfg_text, path + "#config"));
  state.completed_session = take<std::int32_t>(in, path, "completed session");
  state.data_fingerprint = take<std::uint64_t>(in, path, "fingerprint");

  const auto frozen = take<std::uint8_t>(in, path, "frozen flag");
  const auto n_layers = take<std::uint64_t>(in, path, "layer count");
  if (n_layers > 0) {
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    std::vector<std::size_t> widths;
    for (std::uint64_t l = 0; l < n_layers; ++l) {
      weights.push_back(take_mat(in, path, "layer weight"));
      biases.push_back(take_vec(in, path, "layer bias"));
      if (l == 0) widths.push_back(weights.back().cols());
      widths.push_back(weights.back().rows());
    }
    Rng scratch(0);
    state.backbone = MlpBackbone(widths, scratch);
    for (std::uint64_t l = 0; l < n_layers; ++l) {
      state.backbone.layers()[l].weight = std::move(weights[l]);
      state.backbone.layers()[l].bias = std::move(biases[l]);
    }
    if (frozen) state.backbone.freeze();
  }

  state.head = take_head(in, path);
  const auto n_capture = take<std::uint64_t>(in, path, "capture head count");
  for (std::uint64_t i = 0; i < n_capture; ++i) {
    state.capture_heads.push_back(take_head(in, path));
  }

  const auto n_banks = take<std::uint64_t>(in, path, "bank count");
  for (std::uint64_t i = 0; i < n_banks; ++i) {
    ClassMemoryBank bank;
    bank.class_id = take<std::int32_t>(in, path, "bank class");
    bank.session = take<std::int32_t>(in, path, "bank session");
    bank.mean = take_vec(in, path, "bank mean");
    const auto n_stored = take<std::uint64_t>(in, path, "stored count");
    for (std::uint64_t j = 0; j < n_stored; ++j) {
      bank.stored.push_back(take_vec(in, path, "stored feature"));
    }
    const auto n_pseudo = take<std::uint64_t>(in, path, "pseudo count");
    for (std::uint64_t j = 0; j < n_pseudo; ++j) {
      PseudoFeature p;
      p.value = take_vec(in, path, "pseudo value");
      p.source_index = take<std::int32_t>(in, path, "pseudo source");
      p.alpha = take<double>(in, path, "pseudo alpha");
      p.entropy = take<double>(in, path, "pseudo entropy");
      p.fallback = take<std::uint8_t>(in, path, "pseudo fallback") != 0;
      bank.pseudo.push_back(std::move(p));
    }
    bank.entropy_threshold = take<double>(in, path, "bank threshold");
    bank.attempts = take<std::uint64_t>(in, path, "bank attempts");
    state.banks.push_back(std::move(bank));
  }

  const auto n_tracks = take<std::uint64_t>(in, path, "track count");
  for (std::uint64_t t = 0; t < n_tracks; ++t) {
    TrackResults track;
    track.name = take_string(in, path, "track name");
    const auto n_sessions = take<std::uint64_t>(in, path, "session count");
    for (std::uint64_t s = 0; s < n_sessions; ++s) {
      SessionResult r;
      r.session = take<std::uint64_t>(in, path, "session id");
      r.accuracy = take<double>(in, path, "accuracy");
      r.per_class = take_vec(in, path, "per-class accuracy");
      const auto n_classes = take<std::uint64_t>(in, path, "confusion size");
      r.confusion.counts.resize(n_classes, std::vector<std::int64_t>(n_classes));
      for (auto& row : r.confusion.counts) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(std::int64_t)));
        if (!in) throw ParseError(path + ": truncated while reading confusion row");
      }
      track.sessions.push_back(std::move(r));
    }
    state.tracks.push_back(std::move(track));
  }

  state.stage1_epoch_loss = take_vec(in, path, "epoch losses");
  state.separation.intra = take<double>(in, path, "separation intra");
  state.separation.inter = take<double>(in, path, "separation inter");
  state.pseudo_fallbacks = take<std::uint64_t>(in, path, "fallback count");
  const auto n_warnings = take<std::uint64_t>(in, path, "warning count");
  for (std::uint64_t i = 0; i < n_warnings; ++i) {
    state.warnings.push_back(take_string(in, path, "warning"));
  }
  char extra;
  if (in.read(&extra, 1)) throw ParseError(path + ": trailing bytes");
  return state;
}

void require_same_config(const PipelineState& state, const PipelineConfig& cfg) {
  if (!(state.cfg == cfg)) {
    throw ConfigError("checkpoint was produced under a different configuration");
  }
}

}  // namespace fscil
