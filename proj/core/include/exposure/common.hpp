#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace exposure {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;
using SupplierIndex = std::uint32_t;

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A malformed input row. line() is 1-based; 0 when the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what);
  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Wraps a failure in one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Bidirectional mapping between opaque string ids and dense indices.
// Indices follow ascending lexical order of the ids, so comparing indices
// is the same as comparing ids.
class IdDictionary {
 public:
  IdDictionary() = default;
  explicit IdDictionary(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::string& id(std::uint32_t index) const { return ids_.at(index); }
  std::optional<std::uint32_t> find(std::string_view id) const;
  std::span<const std::string> ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Shortest representation that round-trips through strtod.
std::string format_double(double value);

// Parses a full field as a double; nullopt on garbage or trailing characters.
std::optional<double> parse_double(std::string_view text);
std::optional<std::uint64_t> parse_uint(std::string_view text);

std::string_view trim(std::string_view text);

// Splits on a (possibly multi-character) delimiter, trimming each field.
std::vector<std::string_view> split_fields(std::string_view line, std::string_view delimiter);

// Picks "::", tab or "," based on the first data line.
std::string detect_delimiter(std::string_view sample_line);

// Uniform integer in [0, bound) from a raw 64-bit engine draw. Same
// sequence on every platform, unlike std::uniform_int_distribution.
template <typename Engine>
std::uint64_t uniform_index(Engine& engine, std::uint64_t bound) {
  __extension__ using u128 = unsigned __int128;
  const u128 wide = static_cast<u128>(engine()) * bound;
  return static_cast<std::uint64_t>(wide >> 64);
}

// Uniform double in [0, 1) with 53 random bits.
template <typename Engine>
double uniform_unit(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace exposure
