#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace retbias {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. Maps to exit code 2 in the CLI.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Malformed input data or incompatible artifacts. Maps to exit code 3.
class DataError : public Error {
  public:
    using Error::Error;
};

/// 64-bit FNV-1a. Used for config fingerprints and file digests; not
/// cryptographic, just a stable content identity.
class Fnv1a {
  public:
    void update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update_byte(unsigned char c) {
        state_ ^= c;
        state_ *= 0x100000001b3ULL;
    }
    std::uint64_t value() const { return state_; }
    std::string hex() const;

  private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fnv1a_hex(std::string_view bytes);

/// Shortest round-trip decimal form of a double ("3" for 3.0, not "3.000000").
/// All text outputs go through this so files are byte-reproducible.
std::string format_double(double v);

std::string to_lower_ascii(std::string_view s);

/// Writes content through a .tmp sibling and a rename so readers never see a
/// half-written file. Creates missing parent directories.
void write_file_atomic(const std::string& path, std::string_view content);

/// Whole file as raw bytes; DataError if it cannot be opened.
std::string read_file_bytes(const std::string& path);

/// Rejects malformed UTF-8 byte sequences (overlong forms and bare
/// continuation bytes included). Returns the byte offset of the first bad
/// sequence, or npos if the input is valid.
std::size_t find_invalid_utf8(std::string_view s);

}  // namespace retbias
