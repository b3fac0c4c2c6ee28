/*
 Copyright 2026 The Scribo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "scribo/error.hpp"

// Dataset acquisition: local directories, zip and tar.gz archives, and a
// pluggable fetcher for remote sources.

namespace scribo::corpus {

enum class ArchiveFormat { kZip, kTarGz, kUnknown };

namespace archive_detail {

namespace fs = std::filesystem;

inline fs::path safe_join(const fs::path& root, const std::string& name) {
  fs::path rel(name);
  if (name.empty() || rel.is_absolute() || rel.has_root_name()) {
    fail(ErrorKind::kParse, "archive entry with unsafe path '" + name + "'");
  }
  for (const auto& part : rel) {
    if (part == "..") fail(ErrorKind::kParse, "archive entry escapes destination: '" + name + "'");
  }
  return root / rel.lexically_normal();
}

inline void ensure_parent(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p.parent_path(), ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + p.parent_path().string() + ": " + ec.message());
}

inline std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + p.string());
  return out;
}

inline std::uint64_t parse_octal(const char* field, std::size_t len) {
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < len && (field[i] == ' ' || field[i] == '\0')) ++i;
  for (; i < len && field[i] >= '0' && field[i] <= '7'; ++i) v = v * 8 + (field[i] - '0');
  return v;
}

inline std::string field_string(const char* field, std::size_t len) {
  return std::string(field, strnlen(field, len));
}

class GzReader {
 public:
  explicit GzReader(const fs::path& path) : file_(gzopen(path.string().c_str(), "rb")) {
    if (!file_) fail(ErrorKind::kIo, "cannot open " + path.string());
  }
  ~GzReader() {
    if (file_) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  /// Reads exactly n bytes or throws; returns false only on a clean EOF
  /// before the first byte.
  bool read_exact(char* buf, std::size_t n, bool eof_ok) {
    std::size_t got = 0;
    while (got < n) {
      const int r = gzread(file_, buf + got, static_cast<unsigned>(n - got));
      if (r < 0) corrupt();
      if (r == 0) break;
      got += static_cast<std::size_t>(r);
    }
    if (got == n) return true;
    int errnum = 0;
    gzerror(file_, &errnum);
    if (got == 0 && eof_ok && errnum == Z_OK) return false;
    corrupt();
  }

  void check_clean_end() {
    int errnum = 0;
    gzerror(file_, &errnum);
    if (errnum != Z_OK) corrupt();
  }

 private:
  [[noreturn]] void corrupt() {
    int errnum = 0;
    const char* msg = gzerror(file_, &errnum);
    fail(ErrorKind::kParse, std::string("corrupt or truncated tar.gz archive: ") +
                                (errnum == Z_OK ? "unexpected end of data" : msg));
  }

  gzFile file_;
};

inline std::vector<fs::path> extract_tar_gz(const fs::path& path, const fs::path& dest) {
  GzReader gz(path);
  std::vector<fs::path> written;
  std::array<char, 512> block{};
  std::optional<std::string> long_name;
  std::vector<char> buf(1 << 16);
  int zero_blocks = 0;
  while (zero_blocks < 2) {
    if (!gz.read_exact(block.data(), block.size(), /*eof_ok=*/true)) break;
    if (std::all_of(block.begin(), block.end(), [](char c) { return c == 0; })) {
      ++zero_blocks;
      continue;
    }
    zero_blocks = 0;
    const auto stored_sum = parse_octal(block.data() + 148, 8);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < 512; ++i) {
      sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(block[i]);
    }
    if (sum != stored_sum) fail(ErrorKind::kParse, "corrupt tar header in " + path.string());
    const std::uint64_t size = parse_octal(block.data() + 124, 12);
    const char type = block[156];
    std::string name = field_string(block.data(), 100);
    if (std::memcmp(block.data() + 257, "ustar", 5) == 0) {
      const std::string prefix = field_string(block.data() + 345, 155);
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    const std::uint64_t padded = (size + 511) / 512 * 512;

    auto read_payload = [&](std::ostream* out) {
      std::uint64_t remaining = padded;
      std::uint64_t useful = size;
      while (remaining > 0) {
        const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, buf.size()));
        gz.read_exact(buf.data(), n, false);
        if (out) {
          const std::size_t keep = static_cast<std::size_t>(std::min<std::uint64_t>(useful, n));
          out->write(buf.data(), static_cast<std::streamsize>(keep));
          useful -= keep;
        }
        remaining -= n;
      }
    };

    if (type == 'L' || type == 'x') {
      std::ostringstream meta;
      read_payload(&meta);
      std::string text = meta.str();
      if (type == 'L') {
        long_name = text.substr(0, text.find('\0'));
      } else {
        // pax records: "<len> key=value\n"
        for (std::size_t pos = 0; pos < text.size();) {
          const std::size_t space = text.find(' ', pos);
          if (space == std::string::npos) break;
          const std::size_t len = std::stoul(text.substr(pos, space - pos));
          const std::string record = text.substr(space + 1, len - (space - pos) - 2);
          if (record.rfind("path=", 0) == 0) long_name = record.substr(5);
          pos += len;
        }
      }
      continue;
    }
    if (long_name) {
      name = *long_name;
      long_name.reset();
    }
    if (type == '5') {
      const auto dir = safe_join(dest, name);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string());
      read_payload(nullptr);
    } else if (type == '0' || type == '\0' || type == '7') {
      const auto target = safe_join(dest, name);
      auto out = open_out(target);
      read_payload(&out);
      if (!out) fail(ErrorKind::kIo, "write failed for " + target.string());
      written.push_back(target);
    } else {
      read_payload(nullptr);  // links, devices and fifos are skipped
    }
  }
  gz.check_clean_end();
  return written;
}

struct ZipEntry {
  std::string name;
  std::uint16_t method = 0;
  std::uint32_t crc = 0;
  std::uint64_t compressed = 0;
  std::uint64_t uncompressed = 0;
  std::uint64_t local_offset = 0;
};

inline std::uint32_t rd32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t rd16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

inline std::vector<ZipEntry> zip_directory(std::ifstream& in, std::uint64_t file_size,
                                           const std::string& label) {
  const std::uint64_t tail = std::min<std::uint64_t>(file_size, 65535 + 22);
  std::vector<unsigned char> buf(tail);
  in.seekg(static_cast<std::streamoff>(file_size - tail));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(tail));
  std::optional<std::size_t> eocd;
  for (std::size_t i = tail >= 22 ? tail - 22 + 1 : 0; i-- > 0;) {
    if (rd32(buf.data() + i) == 0x06054b50) {
      eocd = i;
      break;
    }
  }
  if (!eocd) fail(ErrorKind::kParse, "corrupt zip archive (no end of central directory): " + label);
  const unsigned char* e = buf.data() + *eocd;
  const std::uint16_t count = rd16(e + 10);
  const std::uint32_t cd_size = rd32(e + 12);
  const std::uint32_t cd_offset = rd32(e + 16);
  if (count == 0xFFFF || cd_offset == 0xFFFFFFFF) {
    fail(ErrorKind::kFormat, "zip64 archives are not supported: " + label);
  }
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > file_size) {
    fail(ErrorKind::kParse, "corrupt zip archive (central directory out of range): " + label);
  }
  std::vector<unsigned char> cd(cd_size);
  in.seekg(cd_offset);
  in.read(reinterpret_cast<char*>(cd.data()), cd_size);
  std::vector<ZipEntry> entries;
  std::size_t pos = 0;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (pos + 46 > cd.size() || rd32(cd.data() + pos) != 0x02014b50) {
      fail(ErrorKind::kParse, "corrupt zip central directory: " + label);
    }
    const unsigned char* h = cd.data() + pos;
    ZipEntry entry;
    entry.method = rd16(h + 10);
    entry.crc = rd32(h + 16);
    entry.compressed = rd32(h + 20);
    entry.uncompressed = rd32(h + 24);
    const std::uint16_t name_len = rd16(h + 28);
    const std::uint16_t extra_len = rd16(h + 30);
    const std::uint16_t comment_len = rd16(h + 32);
    entry.local_offset = rd32(h + 42);
    if (pos + 46 + name_len > cd.size()) fail(ErrorKind::kParse, "corrupt zip entry name: " + label);
    entry.name.assign(reinterpret_cast<const char*>(h + 46), name_len);
    entries.push_back(std::move(entry));
    pos += 46u + name_len + extra_len + comment_len;
  }
  return entries;
}

inline std::vector<fs::path> extract_zip(const fs::path& path, const fs::path& dest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  const auto entries = zip_directory(in, file_size, path.string());
  std::vector<fs::path> written;
  std::vector<char> inbuf(1 << 16), outbuf(1 << 16);
  for (const auto& entry : entries) {
    const auto target = safe_join(dest, entry.name);
    if (!entry.name.empty() && entry.name.back() == '/') {
      std::error_code ec;
      fs::create_directories(target, ec);
      if (ec) fail(ErrorKind::kIo, "cannot create " + target.string());
      continue;
    }
    if (entry.method != 0 && entry.method != 8) {
      fail(ErrorKind::kFormat, "zip entry '" + entry.name + "' uses unsupported method " +
                                   std::to_string(entry.method));
    }
    unsigned char local[30];
    in.seekg(static_cast<std::streamoff>(entry.local_offset));
    if (!in.read(reinterpret_cast<char*>(local), 30) || rd32(local) != 0x04034b50) {
      fail(ErrorKind::kParse, "corrupt zip local header for '" + entry.name + "'");
    }
    const std::uint64_t data_start = entry.local_offset + 30 + rd16(local + 26) + rd16(local + 28);
    if (data_start + entry.compressed > file_size) {
      fail(ErrorKind::kParse, "corrupt zip archive: entry '" + entry.name + "' is truncated");
    }
    in.seekg(static_cast<std::streamoff>(data_start));
    auto out = open_out(target);
    uLong crc = crc32(0L, Z_NULL, 0);
    std::uint64_t produced = 0;
    std::uint64_t remaining = entry.compressed;
    if (entry.method == 0) {
      while (remaining > 0) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, inbuf.size()));
        in.read(inbuf.data(), static_cast<std::streamsize>(n));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(inbuf.data()), static_cast<uInt>(n));
        out.write(inbuf.data(), static_cast<std::streamsize>(n));
        remaining -= n;
        produced += n;
      }
    } else {
      z_stream zs{};
      if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorKind::kState, "inflateInit2 failed");
      int rc = Z_OK;
      while (rc != Z_STREAM_END) {
        if (zs.avail_in == 0) {
          if (remaining == 0) break;
          const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, inbuf.size()));
          in.read(inbuf.data(), static_cast<std::streamsize>(n));
          remaining -= n;
          zs.next_in = reinterpret_cast<Bytef*>(inbuf.data());
          zs.avail_in = static_cast<uInt>(n);
        }
        zs.next_out = reinterpret_cast<Bytef*>(outbuf.data());
        zs.avail_out = static_cast<uInt>(outbuf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
          inflateEnd(&zs);
          fail(ErrorKind::kParse, "corrupt deflate data in zip entry '" + entry.name + "'");
        }
        const std::size_t have = outbuf.size() - zs.avail_out;
        crc = crc32(crc, reinterpret_cast<const Bytef*>(outbuf.data()), static_cast<uInt>(have));
        out.write(outbuf.data(), static_cast<std::streamsize>(have));
        produced += have;
      }
      inflateEnd(&zs);
      if (rc != Z_STREAM_END) {
        fail(ErrorKind::kParse, "truncated deflate data in zip entry '" + entry.name + "'");
      }
    }
    if (crc != entry.crc || produced != entry.uncompressed) {
      fail(ErrorKind::kParse, "CRC or size mismatch in zip entry '" + entry.name + "'");
    }
    written.push_back(target);
  }
  return written;
}

}  // namespace archive_detail

inline ArchiveFormat detect_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  unsigned char magic[4] = {};
  in.read(reinterpret_cast<char*>(magic), 4);
  if (magic[0] == 'P' && magic[1] == 'K' &&
      ((magic[2] == 3 && magic[3] == 4) || (magic[2] == 5 && magic[3] == 6))) {
    return ArchiveFormat::kZip;
  }
  if (magic[0] == 0x1F && magic[1] == 0x8B) return ArchiveFormat::kTarGz;
  return ArchiveFormat::kUnknown;
}

/// Unpacks a zip or tar.gz archive below `dest`. Returns the archive's single
/// top-level directory when it has one, otherwise `dest`.
inline std::filesystem::path extract_archive(const std::filesystem::path& path,
                                             const std::filesystem::path& dest) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) fail(ErrorKind::kMissing, "no such archive " + path.string());
  const ArchiveFormat format = detect_archive(path);
  if (format == ArchiveFormat::kUnknown) {
    fail(ErrorKind::kFormat, "unsupported archive format: " + path.string() +
                                 " (expected zip or tar.gz)");
  }
  std::error_code ec;
  fs::create_directories(dest, ec);
  if (ec) fail(ErrorKind::kIo, "destination not writable: " + dest.string() + ": " + ec.message());
  const auto written = format == ArchiveFormat::kZip ? archive_detail::extract_zip(path, dest)
                                                     : archive_detail::extract_tar_gz(path, dest);
  std::set<fs::path> tops;
  for (const auto& p : written) {
    const auto rel = p.lexically_relative(dest);
    tops.insert(*rel.begin());
  }
  if (tops.size() == 1 && fs::is_directory(dest / *tops.begin())) return dest / *tops.begin();
  return dest;
}

/// Fetches `url` into the given file. Installed by callers that allow network
/// access; the library itself never opens sockets.
using Fetcher = std::function<void(const std::string& url, const std::filesystem::path& target)>;

/// Resolves a dataset source into a local directory: directories are used in
/// place, archives are unpacked into `work_dir`, and URLs go through
/// `fetcher` first.
inline std::filesystem::path fetch_dataset(const std::string& source,
                                           const std::filesystem::path& work_dir,
                                           const Fetcher& fetcher = {}) {
  namespace fs = std::filesystem;
  fs::path local(source);
  if (source.find("://") != std::string::npos) {
    if (!fetcher) fail(ErrorKind::kState, "remote source " + source + " needs a fetcher");
    fs::create_directories(work_dir);
    std::string name = source.substr(source.find_last_of('/') + 1);
    if (name.empty()) name = "download";
    local = work_dir / name;
    fetcher(source, local);
  }
  if (fs::is_directory(local)) return local;
  if (!fs::exists(local)) fail(ErrorKind::kMissing, "dataset source not found: " + source);
  return extract_archive(local, work_dir / (local.stem().string() + "_extracted"));
}

}  // namespace scribo::corpus
