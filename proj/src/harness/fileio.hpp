// Small file helpers shared by the dataset and checkpoint writers.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deepbeat/error.hpp"

namespace deepbeat::harness::detail {

static_assert(std::endian::native == std::endian::little, "binary blobs are written in host order");

/// Writes to a sibling temporary file, then renames over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::Io, "cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    require(f.good(), ErrorKind::Io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::Io, "cannot move " + tmp + " into place: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorKind::Io, "cannot create directory " + dir.string());
}

template <class T>
void append_raw(std::string& out, const T* data, std::size_t n) {
  out.append(reinterpret_cast<const char*>(data), n * sizeof(T));
}

template <class T>
std::vector<T> take_raw(const std::string& blob, std::size_t offset, std::size_t n, const std::string& what) {
  require(offset <= blob.size() && n <= (blob.size() - offset) / sizeof(T), ErrorKind::Format,
          what + ": blob is truncated");
  std::vector<T> out(n);
  if (n) std::memcpy(out.data(), blob.data() + offset, n * sizeof(T));
  return out;
}

}  // namespace deepbeat::harness::detail
