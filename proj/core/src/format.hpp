// SPDX-License-Identifier: Apache-2.0
//
// Internal text helpers shared by the CSV and JSON writers.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wardseq::detail {

/// Appends the shortest representation of v that parses back to the same double.
void append_number(std::string& out, double v);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian float64 payloads.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view text);

}  // namespace wardseq::detail

namespace wardseq {
using detail::append_number;
}
