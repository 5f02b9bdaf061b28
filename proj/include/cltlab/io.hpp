// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cltlab {

/// File system failure; the message names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);
/// Parses a whole field as a double, subnormals included. Throws
/// std::invalid_argument otherwise.
double parse_double(std::string_view text);
/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(std::string_view text);
/// Splits one CSV line, honoring double quotes.
std::vector<std::string> split_csv_line(std::string_view line);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: whole content, then close.
void write_text_file(const std::filesystem::path& path, std::string_view content);
void ensure_directory(const std::filesystem::path& dir);

/// Binary path batch:
///   bytes 0..7    magic "CLTLABP1"
///   bytes 8..15   spec hash (u64 little endian)
///   bytes 16..23  master seed (u64)
///   bytes 24..31  n (u64)
///   bytes 32..39  replicates R (u64)
///   then R * n little-endian IEEE-754 doubles, replicate-major.
struct PathBatchHeader {
  std::uint64_t spec_hash = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t n = 0;
  std::uint64_t replicates = 0;
};
inline constexpr std::size_t kPathBatchHeaderBytes = 40;

void write_path_batch(const std::filesystem::path& path, const PathBatchHeader& header,
                      std::span<const double> increments);
PathBatchHeader read_path_batch(const std::filesystem::path& path, std::vector<double>* increments);

}  // namespace cltlab
