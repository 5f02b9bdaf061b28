// Copyright 2026 The cltlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cltlab/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cltlab {

static_assert(std::endian::native == std::endian::little,
              "binary path files assume a little-endian host");

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::array<char, 17> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + 16, value, 16);
  std::string s(buf.data(), res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "'");
  }
}

namespace {

constexpr char kMagic[8] = {'C', 'L', 'T', 'L', 'A', 'B', 'P', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  char b[8];
  in.read(b, 8);
  std::uint64_t v = 0;
  std::memcpy(&v, b, 8);
  return v;
}

}  // namespace

void write_path_batch(const std::filesystem::path& path, const PathBatchHeader& header,
                      std::span<const double> increments) {
  if (increments.size() != header.n * header.replicates) {
    throw IoError("path batch '" + path.string() + "': size does not match the header");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, 8);
  put_u64(out, header.spec_hash);
  put_u64(out, header.master_seed);
  put_u64(out, header.n);
  put_u64(out, header.replicates);
  out.write(reinterpret_cast<const char*>(increments.data()),
            static_cast<std::streamsize>(increments.size() * sizeof(double)));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

PathBatchHeader read_path_batch(const std::filesystem::path& path,
                                std::vector<double>* increments) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing path batch '" + path.string() + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a path batch file");
  }
  PathBatchHeader h;
  h.spec_hash = get_u64(in);
  h.master_seed = get_u64(in);
  h.n = get_u64(in);
  h.replicates = get_u64(in);
  if (!in) throw IoError("truncated header in '" + path.string() + "'");
  if (increments) {
    increments->resize(h.n * h.replicates);
    in.read(reinterpret_cast<char*>(increments->data()),
            static_cast<std::streamsize>(increments->size() * sizeof(double)));
    if (!in) throw IoError("truncated data in '" + path.string() + "'");
  }
  return h;
}

}  // namespace cltlab
