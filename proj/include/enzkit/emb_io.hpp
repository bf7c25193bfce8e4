#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "enzkit/tensor.hpp"

namespace enzkit {

/**
 * EMB1 container: little-endian, magic "EMB1", u32 version (=1), u64 rows,
 * u64 cols, then rows*cols IEEE-754 f32 values row-major. The same record is
 * embedded per section inside checkpoints.
 */
void write_emb1(std::ostream& out, const Tensor& t);
void write_emb1_file(const std::string& path, const Tensor& t);

// `base_offset` is added to reported byte offsets so embedded records point
// into their enclosing file.
TensorPtr read_emb1(std::istream& in, std::uint64_t base_offset = 0);
TensorPtr read_emb1_file(const std::string& path);

}  // namespace enzkit
