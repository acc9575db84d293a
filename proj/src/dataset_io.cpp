#include "fscil/dataset_io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fscil/error.hpp"
#include "fscil/numerics.hpp"

namespace fscil {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'C', 'I', 'L', 'I', 'M', 'G'};
constexpr std::uint32_t kVersion = 1;

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

void write_samples(std::ostream& out, const ImageSet& set) {
  for (const ImageSample& s : set.samples) {
    put<std::int32_t>(out, s.label);
    put<std::int32_t>(out, s.session);
    out.write(reinterpret_cast<const char*>(s.pixels.data()),
              static_cast<std::streamsize>(s.pixels.size() * sizeof(double)));
  }
}

ImageSet read_samples(std::istream& in, const std::string& path, std::size_t n,
                      std::size_t height, std::size_t width) {
  ImageSet set;
  set.height = height;
  set.width = width;
  set.samples.resize(n);
  const std::size_t pixels = set.pixel_count();
  for (ImageSample& s : set.samples) {
    s.label = take<std::int32_t>(in, path, "sample label");
    s.session = take<std::int32_t>(in, path, "sample session");
    s.pixels.resize(pixels);
    in.read(reinterpret_cast<char*>(s.pixels.data()),
            static_cast<std::streamsize>(pixels * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated while reading pixels");
    if (!all_finite(s.pixels)) throw ParseError(path + ": non-finite pixel value");
  }
  return set;
}

}  // namespace

void save_images(const std::string& path, const ImageSet& train, const ImageSet& test) {
  if (train.height != test.height || train.width != test.width) {
    throw InvalidInput("train and test pools disagree on image size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(train.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(train.width));
  put<std::uint32_t>(out, 3);
  put<std::uint64_t>(out, train.samples.size());
  put<std::uint64_t>(out, test.samples.size());
  write_samples(out, train);
  write_samples(out, test);
  if (!out) throw IoError("write failed: " + path);
}

std::pair<ImageSet, ImageSet> load_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError(path + ": not an image pool file");
  }
  const auto version = take<std::uint32_t>(in, path, "version");
  if (version != kVersion) {
    throw ParseError(path + ": unsupported version " + std::to_string(version));
  }
  const auto height = take<std::uint32_t>(in, path, "height");
  const auto width = take<std::uint32_t>(in, path, "width");
  const auto channels = take<std::uint32_t>(in, path, "channels");
  if (height == 0 || width == 0 || channels != 3) {
    throw ParseError(path + ": bad image geometry");
  }
  const auto n_train = take<std::uint64_t>(in, path, "train count");
  const auto n_test = take<std::uint64_t>(in, path, "test count");
  ImageSet train = read_samples(in, path, n_train, height, width);
  ImageSet test = read_samples(in, path, n_test, height, width);
  char extra;
  if (in.read(&extra, 1)) throw ParseError(path + ": trailing bytes after last sample");
  return {std::move(train), std::move(test)};
}

void save_sessions(const std::string& path, const std::vector<SessionSpec>& specs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "sessions " << specs.size() << '\n';
  for (const SessionSpec& s : specs) {
    out << "session " << s.id << '\n';
    out << "classes " << s.classes.size();
    for (int c : s.classes) out << ' ' << c;
    out << '\n';
    out << "train " << s.train_indices.size();
    for (std::size_t i : s.train_indices) out << ' ' << i;
    out << '\n';
    out << "test " << s.test_indices.size();
    for (std::size_t i : s.test_indices) out << ' ' << i;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<SessionSpec> load_sessions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  const auto expect = [&](const char* word) {
    std::string tok;
    if (!(in >> tok) || tok != word) {
      throw ParseError(path + ": expected '" + word + "'" +
                       (in && !tok.empty() ? ", got '" + tok + "'" : ""));
    }
  };
  const auto count = [&](const char* what) {
    long long v = 0;
    if (!(in >> v) || v < 0) throw ParseError(path + std::string(": bad count for ") + what);
    return static_cast<std::size_t>(v);
  };
  expect("sessions");
  std::vector<SessionSpec> specs(count("sessions"));
  for (SessionSpec& s : specs) {
    expect("session");
    s.id = count("session id");
    expect("classes");
    s.classes.resize(count("classes"));
    for (int& c : s.classes) {
      if (!(in >> c)) throw ParseError(path + ": truncated class list");
    }
    expect("train");
    s.train_indices.resize(count("train indices"));
    for (std::size_t& i : s.train_indices) {
      long long v;
      if (!(in >> v) || v < 0) throw ParseError(path + ": bad train index");
      i = static_cast<std::size_t>(v);
    }
    expect("test");
    s.test_indices.resize(count("test indices"));
    for (std::size_t& i : s.test_indices) {
      long long v;
      if (!(in >> v) || v < 0) throw ParseError(path + ": bad test index");
      i = static_cast<std::size_t>(v);
    }
  }
  std::string tok;
  if (in >> tok) throw ParseError(path + ": trailing content '" + tok + "'");
  return specs;
}

void save_dataset(const std::string& dir, const DiskDataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir + " (" + ec.message() + ")");
  save_images(dir + "/images.bin", data.train, data.test);
  save_sessions(dir + "/sessions.txt", data.sessions);
}

DiskDataset load_dataset(const std::string& dir) {
  DiskDataset data;
  auto pools = load_images(dir + "/images.bin");
  data.train = std::move(pools.first);
  data.test = std::move(pools.second);
  data.sessions = load_sessions(dir + "/sessions.txt");
  return data;
}

}  // namespace fscil
