#pragma once

#include <string>

#include "perin/nn.hpp"

namespace perin {

// Flat binary layout, all integers and floats little-endian:
//   "PERINCKP"  u32 version (1)  u32 array count
//   per array:  u32 name length, name bytes, u32 rows, u32 cols,
//               rows*cols f64 values in row-major order
void save_checkpoint(const std::string& path, const ParamList& params);

// Fills `params` by name. Throws DataError on a bad magic, an unknown
// version, a missing array or a shape mismatch.
void load_checkpoint(const std::string& path, ParamList& params);

}  // namespace perin
