#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fscil/datagen.hpp"
#include "fscil/sessions.hpp"

namespace fscil {

// a generated benchmark as stored on disk: two sample pools plus the split
struct DiskDataset {
  ImageSet train;
  ImageSet test;
  std::vector<SessionSpec> sessions;
};

// images.bin: little-endian binary, doubles stored bit-exactly
void save_images(const std::string& path, const ImageSet& train, const ImageSet& test);
std::pair<ImageSet, ImageSet> load_images(const std::string& path);

// sessions.txt: line-oriented text listing classes and pool indices
void save_sessions(const std::string& path, const std::vector<SessionSpec>& specs);
std::vector<SessionSpec> load_sessions(const std::string& path);

// writes/reads images.bin + sessions.txt under dir
void save_dataset(const std::string& dir, const DiskDataset& data);
DiskDataset load_dataset(const std::string& dir);

}  // namespace fscil
