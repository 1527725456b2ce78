// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>

#include "ela/io.hpp"

namespace ela {
namespace {

constexpr std::string_view kMagic = "ELAPARAM";
constexpr std::size_t kPrefix = 16;

static_assert(std::endian::native == std::endian::little,
              "parameter container assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v;
  std::memcpy(&v, bytes.data() + at, 8);
  return v;
}

}  // namespace

std::string encode_params(const ParamStore<double>& params, const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = "ela-params";
  header["version"] = 1;
  header["dtype"] = "f64";
  header["endianness"] = "little";
  header["meta"] = meta;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& p : params.entries()) {
    const std::size_t nbytes = p.size() * sizeof(double);
    tensors.push_back({{"name", p.name},
                       {"shape", p.shape},
                       {"role", std::string(role_name(p.role))},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  std::string text = header.dump();
  while ((kPrefix + text.size()) % 8 != 0) text.push_back(' ');

  std::string out;
  out.reserve(kPrefix + text.size() + offset);
  out.append(kMagic);
  put_u64(out, text.size());
  out.append(text);
  for (const auto& p : params.entries())
    out.append(reinterpret_cast<const char*>(p.value.data()), p.size() * sizeof(double));
  return out;
}

ParamFile decode_params(std::string_view bytes) {
  if (bytes.size() < kPrefix || bytes.substr(0, 8) != kMagic)
    throw ParseError("parameter file: bad magic", 0);
  const std::uint64_t hlen = get_u64(bytes, 8);
  if (hlen > bytes.size() - kPrefix) throw ParseError("parameter file: truncated header", 0);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPrefix, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("parameter file: header: ") + e.what(), 0);
  }
  if (header.value("format", "") != "ela-params" || header.value("dtype", "") != "f64")
    throw ParseError("parameter file: unsupported format or dtype", 0);

  const std::string_view data = bytes.substr(kPrefix + hlen);
  ParamFile file;
  file.meta = header.value("meta", nlohmann::json::object());
  std::size_t used = 0;
  try {
    for (const auto& t : header.at("tensors")) {
      const auto role = parse_role(t.at("role").get<std::string>());
      if (!role) throw ParseError("parameter file: unknown role", 0);
      auto& p = file.params.add(t.at("name").get<std::string>(),
                                t.at("shape").get<std::vector<std::size_t>>(), *role);
      const auto offset = t.at("offset").get<std::size_t>();
      const auto nbytes = t.at("nbytes").get<std::size_t>();
      if (nbytes != p.size() * sizeof(double) || offset > data.size() ||
          nbytes > data.size() - offset)
        throw ParseError("parameter file: tensor " + p.name + " out of bounds", 0);
      std::memcpy(p.value.data(), data.data() + offset, nbytes);
      used = std::max(used, offset + nbytes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("parameter file: ") + e.what(), 0);
  }
  if (used != data.size()) throw ParseError("parameter file: trailing bytes after the last tensor", 0);
  return file;
}

void save_params(const std::filesystem::path& path, const ParamStore<double>& params,
                 const nlohmann::json& meta) {
  io::atomic_write(path, encode_params(params, meta));
}

ParamFile load_params(const std::filesystem::path& path) {
  return decode_params(io::read_file(path));
}

}  // namespace ela
