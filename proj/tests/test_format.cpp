#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "staggered_ife/format.hpp"
#include "staggered_ife/rng.hpp"

using namespace sife;

TEST_CASE("format_double round-trips exactly") {
  RngStream s(31, rng_tag::kGeneric, 0);
  for (int i = 0; i < 5000; ++i) {
    double v = s.next_normal() * std::pow(10.0, (i % 61) - 30);
    const std::string text = format_double(v);
    const double back = std::strtod(text.c_str(), nullptr);
    CHECK(back == v);
  }
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");
}

TEST_CASE("format_double handles non-finite values") {
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("format_fixed") {
  CHECK(format_fixed(1.23456, 4) == "1.2346");
  CHECK(format_fixed(-0.5, 2) == "-0.50");
  CHECK(format_fixed(3.0, 0) == "3");
  CHECK(format_fixed(0.00004, 4) == "0.0000");
}
