#pragma once

#include <string>

namespace sife {

// Shortest decimal string that parses back to exactly the same double
// (std::to_chars). Used for CSV/JSON payloads so serialization is lossless.
std::string format_double(double value);

// Fixed-point with the given number of decimals, for human-facing tables.
std::string format_fixed(double value, int decimals);

}  // namespace sife
