#pragma once

#include <string>

namespace neuronml {

/// Write content to a temp file in the destination directory and rename it
/// into place, so readers never observe a half-written file.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);  // throws std::runtime_error

}  // namespace neuronml
