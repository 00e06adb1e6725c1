#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace glatent {

// Formats a double with enough digits to round-trip typical values while
// staying byte-stable across runs (used for all CSV/JSON/SVG output).
std::string format_double(double value);

// SHA-1 over a git-style blob header plus content ("blob <len>\0<content>"),
// returned as lowercase hex. Used to fingerprint run configurations.
std::string git_blob_sha1(const std::string& content);

std::string read_text_file(const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames into place.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

// Stable derivation of per-stage seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag);

}  // namespace glatent
