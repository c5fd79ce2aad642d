// Small parsing helpers shared by the CLI, config files and corpus runner.

#pragma once

#include "simucheck/sim.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace simucheck::text {

std::string_view trim(std::string_view s);

// All throw std::invalid_argument naming the offending text.
std::int64_t parse_int(std::string_view s);
double parse_double(std::string_view s);
std::uint64_t parse_seed(std::string_view s);

/// "4", "4,2" or "4,2,1"; missing axes are 1.
sim::Dim3 parse_dim3(std::string_view s);

/// `key = value` lines; blank lines and `#` comments skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

std::string format_double(double v);

} // namespace simucheck::text
