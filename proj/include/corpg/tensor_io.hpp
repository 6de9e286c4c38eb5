// SPDX-License-Identifier: Apache-2.0
//
// Binary tensor files:
//   magic bytes
//   key=value header lines, terminated by an empty line
//   records: [name-length u32 LE][name utf-8][rank u8][dims u32 LE x rank][f64 LE x numel]
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "corpg/error.hpp"
#include "corpg/tensor.hpp"

namespace corpg {

/// Writes via a temporary sibling and renames over the target.
inline void write_text_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using HeaderFields = std::vector<std::pair<std::string, std::string>>;

struct TensorFile {
  std::map<std::string, std::string> header;
  std::vector<std::pair<std::string, Tensor>> tensors;  // file order

  const Tensor& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return t;
    }
    throw DataError("tensor file: missing record '" + name + "'");
  }

  const std::string& field(const std::string& key) const {
    auto it = header.find(key);
    if (it == header.end()) throw DataError("tensor file: missing header field '" + key + "'");
    return it->second;
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::size_t pos) : data_(data), pos_(pos) {}

  bool done() const { return pos_ >= data_.size(); }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    }
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
    }
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError("tensor file: truncated record");
  }
  const std::string& data_;
  std::size_t pos_;
};

}  // namespace detail

inline std::string encode_tensor_file(const std::string& magic, const HeaderFields& header,
                                      const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::string out = magic;
  for (const auto& [k, v] : header) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("tensor file: invalid header field '" + k + "'");
    }
    out += k + "=" + v + "\n";
  }
  out += "\n";
  for (const auto& [name, t] : tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const Shape& s = t.shape();
    out.push_back(static_cast<char>(s.rank));
    for (std::size_t i = 0; i < s.rank; ++i) detail::put_u32(out, static_cast<std::uint32_t>(s.dims[i]));
    for (double v : t.values()) detail::put_f64(out, v);
  }
  return out;
}

inline TensorFile decode_tensor_file(const std::string& data, const std::string& magic) {
  if (data.compare(0, magic.size(), magic) != 0) {
    throw DataError("tensor file: bad magic bytes");
  }
  TensorFile f;
  std::size_t pos = magic.size();
  while (true) {
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) throw DataError("tensor file: unterminated header");
    const std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) break;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError("tensor file: malformed header line '" + line + "'");
    f.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  detail::ByteReader r(data, pos);
  while (!r.done()) {
    const std::uint32_t len = r.u32();
    std::string name = r.bytes(len);
    const std::uint8_t rank = r.u8();
    if (rank > 3) throw DataError("tensor file: rank " + std::to_string(rank) + " for '" + name + "'");
    Shape s;
    s.rank = rank;
    for (std::size_t i = 0; i < rank; ++i) s.dims[i] = r.u32();
    std::vector<double> values(s.numel());
    for (double& v : values) v = r.f64();
    f.tensors.emplace_back(std::move(name), Tensor(s, std::move(values)));
  }
  return f;
}

inline void write_tensor_file(const std::string& path, const std::string& magic,
                              const HeaderFields& header,
                              const std::vector<std::pair<std::string, Tensor>>& tensors) {
  write_text_file_atomic(path, encode_tensor_file(magic, header, tensors));
}

inline TensorFile read_tensor_file(const std::string& path, const std::string& magic) {
  return decode_tensor_file(read_file(path), magic);
}

}  // namespace corpg
