#include "cflow/flow_io.hpp"

#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "cflow/error.hpp"

namespace cflow {

using detail::read_le;
using detail::write_le;

void write_model(std::ostream& os, const FlowModel& model) {
  const FlowConfig& cfg = model.config();
  if (cfg.dim > std::numeric_limits<std::uint32_t>::max() || cfg.blocks > std::numeric_limits<std::uint16_t>::max() ||
      cfg.hidden > std::numeric_limits<std::uint32_t>::max() ||
      cfg.hidden_layers > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("model too large for the file format");
  }
  os.write("CFLW", 4);
  write_le<std::uint16_t>(os, kModelFormatVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.dim));
  write_le<std::uint16_t>(os, static_cast<std::uint16_t>(cfg.blocks));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.hidden));
  write_le<double>(os, cfg.clamp);
  write_le<std::uint16_t>(os, static_cast<std::uint16_t>(cfg.hidden_layers));
  write_le<std::uint8_t>(os, cfg.activation == Activation::relu ? 0 : 1);
  for (const FlowBlock& blk : model.blocks()) {
    for (auto p : blk.perm) write_le<std::uint32_t>(os, p);
    for (auto idx : blk.param_indices) {
      for (double v : model.params().value(idx).values()) write_le<double>(os, v);
    }
  }
  if (!os) throw IoError("failed writing model");
}

FlowModel read_model(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "CFLW") throw IoError("not a model file (bad magic)");
  const auto version = read_le<std::uint16_t>(is, "version");
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }
  FlowConfig cfg;
  cfg.dim = read_le<std::uint32_t>(is, "dimension");
  cfg.blocks = read_le<std::uint16_t>(is, "block count");
  cfg.hidden = read_le<std::uint32_t>(is, "hidden width");
  cfg.clamp = read_le<double>(is, "clamp");
  cfg.hidden_layers = read_le<std::uint16_t>(is, "hidden layer count");
  const auto act = read_le<std::uint8_t>(is, "activation");
  if (act > 1) throw IoError("unknown activation code " + std::to_string(act));
  cfg.activation = act == 0 ? Activation::relu : Activation::softplus;
  if (cfg.dim == 0 || cfg.blocks == 0) throw IoError("model header has zero dimension or blocks");

  FlowModel model = FlowModel::init(cfg, 0);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    std::vector<std::uint32_t> perm(cfg.dim);
    for (auto& p : perm) p = read_le<std::uint32_t>(is, "permutation");
    try {
      model.set_permutation(b, std::move(perm));
    } catch (const ConfigError& e) {
      throw IoError(std::string("corrupt permutation: ") + e.what());
    }
    for (auto idx : model.blocks()[b].param_indices) {
      for (double& v : model.params().at(idx).value.values()) v = read_le<double>(is, "parameters");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes after model payload");
  return model;
}

void save_model(const FlowModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_model(os, model);
}

FlowModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return read_model(is);
}

}  // namespace cflow
