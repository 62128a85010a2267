#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "cflow/flow.hpp"

namespace cflow {

inline constexpr std::uint16_t kModelFormatVersion = 1;

// Model file layout (all little-endian):
//   "CFLW" | version u16 | D u32 | blocks u16 | hidden u32 | clamp f64
//   | hidden_layers u16 | activation u8 (0 relu, 1 softplus)
//   | per block: D x u32 permutation, then its parameter arrays as f64
//     in declaration order.
void write_model(std::ostream& os, const FlowModel& model);
FlowModel read_model(std::istream& is);

void save_model(const FlowModel& model, const std::string& path);
FlowModel load_model(const std::string& path);

}  // namespace cflow
