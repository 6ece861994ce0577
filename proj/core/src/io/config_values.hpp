#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ktp/io/config.hpp"

namespace ktp::io::detail {

bool parse_bool(const KeyValue& kv);
std::size_t parse_count(const KeyValue& kv);
std::uint64_t parse_u64(const KeyValue& kv);
double parse_real(const KeyValue& kv);
std::vector<double> parse_real_list(const KeyValue& kv);
std::string format_real_list(const std::vector<double>& values);

}  // namespace ktp::io::detail
