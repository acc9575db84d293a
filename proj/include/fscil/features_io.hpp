#pragma once

#include <string>

#include "fscil/datagen.hpp"

namespace fscil {

// Text format, one record per line after a `d=<dim>,classes=<count>` header:
//   <label>,<v1>,...,<vdim>
// Values are written with enough digits to round-trip bit-exactly. Labels in
// a file must cover 0..classes-1 with no gaps.
FeatureDataset load_feature_file(const std::string& path);
void save_feature_file(const FeatureDataset& data, const std::string& path);

}  // namespace fscil
