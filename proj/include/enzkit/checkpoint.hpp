#pragma once

#include <string>

#include "enzkit/model.hpp"

namespace enzkit {

/**
 * CKPT1 container: little-endian, magic "CKPT", u32 version (=1), u32 section
 * count, then per section a u16 name length, the name bytes, and an embedded
 * EMB1 record; a 32-byte config-hash trailer closes the file. The first
 * section, "__config__", stores the canonical config text (one byte per f32)
 * so a checkpoint is self-describing; the trailer is the hash of that text.
 * Serialization is canonical: save -> load -> save is byte-identical.
 */
void save_checkpoint(const std::string& path, const Model& model);

// Rebuilds the model from the embedded config and restores every tensor.
// A trailer that does not match the embedded config is reported to stderr as
// a warning (the values are still loaded).
Model load_checkpoint(const std::string& path);

}  // namespace enzkit
