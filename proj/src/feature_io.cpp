#include "cflow/feature_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "cflow/error.hpp"

namespace cflow {

using detail::read_le;
using detail::write_le;

namespace {

constexpr std::uint16_t kFeatureVersion = 1;

Label label_from_code(long code) {
  if (code < 0 || code > 2) throw IoError("invalid label code " + std::to_string(code));
  return static_cast<Label>(code);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& field, std::size_t line) {
  std::size_t b = 0, e = field.size();
  while (b < e && field[b] == ' ') ++b;
  while (e > b && field[e - 1] == ' ') --e;
  double v = 0.0;
  const auto res = std::from_chars(field.data() + b, field.data() + e, v);
  if (res.ec != std::errc() || res.ptr != field.data() + e) {
    throw IoError("line " + std::to_string(line) + ": cannot parse number '" + field + "'");
  }
  return v;
}

}  // namespace

FeatureFormat format_from_path(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".csv") return FeatureFormat::csv;
  return FeatureFormat::binary;
}

void write_features_binary(std::ostream& os, const FeatureSet& set) {
  set.validate();
  os.write("CFTR", 4);
  write_le<std::uint16_t>(os, kFeatureVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(set.dim()));
  write_le<std::uint64_t>(os, set.size());
  write_le<std::uint8_t>(os, set.has_labels() ? 1 : 0);
  for (double v : set.data.values()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw NumericError("feature value overflows 32-bit float");
    write_le<float>(os, f);
  }
  for (Label l : set.labels) write_le<std::uint8_t>(os, static_cast<std::uint8_t>(l));
  if (!os) throw IoError("failed writing feature file");
}

FeatureSet read_features_binary(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "CFTR") throw IoError("not a feature file (bad magic)");
  const auto version = read_le<std::uint16_t>(is, "version");
  if (version != kFeatureVersion) throw IoError("unsupported feature format version " + std::to_string(version));
  const std::size_t d = read_le<std::uint32_t>(is, "dimension");
  const std::uint64_t n = read_le<std::uint64_t>(is, "sample count");
  const auto flags = read_le<std::uint8_t>(is, "flags");
  if (flags & ~1u) throw IoError("unknown feature flags " + std::to_string(flags));
  FeatureSet out;
  out.data = Matrix(static_cast<std::size_t>(n), d);
  for (double& v : out.data.values()) {
    const float f = read_le<float>(is, "payload (header promises more rows than present)");
    if (!std::isfinite(f)) throw IoError("feature file contains non-finite values");
    v = f;
  }
  if (flags & 1u) {
    out.labels.reserve(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i) out.labels.push_back(label_from_code(read_le<std::uint8_t>(is, "labels")));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("payload longer than header dimensions");
  return out;
}

void write_features_csv(std::ostream& os, const FeatureSet& set) {
  set.validate();
  for (std::size_t j = 0; j < set.dim(); ++j) os << (j ? "," : "") << 'f' << j;
  if (set.has_labels()) os << (set.dim() ? "," : "") << "label";
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = 0; j < set.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", set.data(i, j));
      os << (j ? "," : "") << buf;
    }
    if (set.has_labels()) os << (set.dim() ? "," : "") << static_cast<int>(set.labels[i]);
    os << '\n';
  }
  if (!os) throw IoError("failed writing CSV");
}

FeatureSet read_features_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("CSV is empty (missing header)");
  auto header = split_csv_line(line);
  const bool labelled = !header.empty() && header.back() == "label";
  const std::size_t d = header.size() - (labelled ? 1 : 0);
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j].empty() || header[j] == "label") throw IoError("malformed CSV header: '" + line + "'");
  }
  std::vector<double> values;
  FeatureSet out;
  std::size_t lineno = 1, n = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                    " columns, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double v = parse_double(fields[j], lineno);
      if (!std::isfinite(v)) throw IoError("line " + std::to_string(lineno) + ": non-finite value");
      values.push_back(v);
    }
    if (labelled) out.labels.push_back(label_from_code(std::lround(parse_double(fields[d], lineno))));
    ++n;
  }
  out.data = Matrix(n, d, std::move(values));
  return out;
}

void save_features(const FeatureSet& set, const std::string& path, FeatureFormat format) {
  std::ofstream os(path, format == FeatureFormat::binary ? std::ios::binary : std::ios::out);
  if (!os) throw IoError("cannot open for writing: " + path);
  if (format == FeatureFormat::binary) write_features_binary(os, set); else write_features_csv(os, set);
}

void save_features(const FeatureSet& set, const std::string& path) { save_features(set, path, format_from_path(path)); }

FeatureSet load_features(const std::string& path, FeatureFormat format) {
  std::ifstream is(path, format == FeatureFormat::binary ? std::ios::binary : std::ios::in);
  if (!is) throw IoError("cannot open: " + path);
  FeatureSet out = format == FeatureFormat::binary ? read_features_binary(is) : read_features_csv(is);
  out.provenance = path;
  return out;
}

FeatureSet load_features(const std::string& path) { return load_features(path, format_from_path(path)); }

}  // namespace cflow
