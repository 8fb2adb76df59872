#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace xsslab {

using json = nlohmann::json;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad fractions, misuse of splits, missing paths.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (e.g. stepping a finished episode).
class ContractError : public Error {
 public:
  using Error::Error;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& value);

// Little-endian float32 blobs, used by every checkpoint format.
void write_f32_blob(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f32_blob(const std::filesystem::path& path);

// Rounds through float32 so in-memory values equal what a checkpoint reloads.
double round_f32(double v);

// Formats a ratio as a percentage with two decimals ("98.62%").
std::string percent(double ratio);

}  // namespace xsslab
