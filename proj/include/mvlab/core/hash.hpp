#pragma once

#include <string>
#include <string_view>

namespace mvlab {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Digest of a file's bytes; throws StructuralError when it cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace mvlab
