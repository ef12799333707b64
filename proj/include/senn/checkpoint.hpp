#pragma once

#include <string>

#include "senn/network.hpp"

namespace senn {

// 64-bit IEEE values as 16 hex digits of their bit pattern (lossless).
std::string double_to_hex(double value);
double hex_to_double(const std::string& text);

// Versioned text checkpoint: header (version, layer sizes, budget, epsilon),
// one "layer source target weight" line per active connection in mask order,
// then one "layer index value" line per bias. load(save(x)) == x exactly.
void save_checkpoint(const SparseNetwork& net, const std::string& path);
SparseNetwork load_checkpoint(const std::string& path);

// Human-readable summary (layer sizes, sparsity, per-layer counts).
std::string inspect_checkpoint(const std::string& path);

}  // namespace senn
