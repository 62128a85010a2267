#pragma once

#include <iosfwd>
#include <string>

#include "cflow/datasets.hpp"

namespace cflow {

enum class FeatureFormat { binary, csv };

// ".csv" -> csv, anything else -> binary.
FeatureFormat format_from_path(const std::string& path);

// Binary layout (little-endian): "CFTR" | version u16 | D u32 | n u64 |
// flags u8 (bit0 labels) | D*n f32 row-major | n label bytes when flagged.
// Values are narrowed to f32 on write.
void write_features_binary(std::ostream& os, const FeatureSet& set);
FeatureSet read_features_binary(std::istream& is);

// CSV: header "f0,...,f{D-1}" plus a trailing "label" column when labelled.
void write_features_csv(std::ostream& os, const FeatureSet& set);
FeatureSet read_features_csv(std::istream& is);

void save_features(const FeatureSet& set, const std::string& path, FeatureFormat format);
void save_features(const FeatureSet& set, const std::string& path);
FeatureSet load_features(const std::string& path, FeatureFormat format);
FeatureSet load_features(const std::string& path);

}  // namespace cflow
