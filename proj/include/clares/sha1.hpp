#pragma once

#include <string>

namespace clares {

// SHA-1 of a byte buffer, lowercase hex.
std::string sha1_hex(const void* data, std::size_t len);

// Git blob hash of a file: sha1("blob <len>\0" + contents); matches
// `git hash-object <file>`.
std::string git_blob_hash(const std::string& path);

}  // namespace clares
