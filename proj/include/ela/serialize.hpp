// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Parameter container:
//
//   bytes 0..7    magic "ELAPARAM"
//   bytes 8..15   header length H, uint64 little-endian
//   bytes 16..    JSON header (UTF-8), space padded so the data starts on an
//                 8-byte boundary
//   data          raw little-endian float64 values
//
// The header lists each tensor's name, shape, role and byte offset/length
// relative to the start of the data section, plus a free-form "meta" object.
// Values are copied bit for bit in both directions.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "ela/param_store.hpp"

namespace ela {

struct ParamFile {
  ParamStore<double> params;
  nlohmann::json meta = nlohmann::json::object();
};

std::string encode_params(const ParamStore<double>& params,
                          const nlohmann::json& meta = nlohmann::json::object());
// Throws ParseError on malformed input.
ParamFile decode_params(std::string_view bytes);

void save_params(const std::filesystem::path& path, const ParamStore<double>& params,
                 const nlohmann::json& meta = nlohmann::json::object());
ParamFile load_params(const std::filesystem::path& path);

}  // namespace ela
