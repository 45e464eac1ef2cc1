#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ntklab/csv.hpp"
#include "ntklab/errors.hpp"

using namespace ntklab;

TEST(FormatNumber, Cases) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(42.0), "42");
  EXPECT_EQ(format_number(-7.0), "-7");
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1.25e-4), "1.250000000000e-04");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  EXPECT_EQ(format_number(1e20), "1e+20");
}

TEST(FormatNumber, ParsesBackClosely) {
  for (double v : {3.141592653589793, -2.5e-7, 123456.789, 1e-3, 0.000999}) {
    const double back = std::stod(format_number(v));
    EXPECT_NEAR(back, v, 1e-12 * std::abs(v));
  }
}

TEST(CsvTable, HeaderValidation) {
  EXPECT_THROW(CsvTable({"a", "a"}), std::invalid_argument);
  EXPECT_THROW(CsvTable({"a,b"}), std::invalid_argument);
  EXPECT_THROW(CsvTable({""}), std::invalid_argument);
}

TEST(CsvTable, RowsMustBeRectangular) {
  CsvTable t({"a", "b"});
  EXPECT_THROW(t.add_row({1.0}), DimensionError);
  t.add_row({1.0, std::int64_t{2}});
  EXPECT_EQ(t.row_count(), 1u);
}

TEST(CsvTable, WriteFormat) {
  CsvTable t({"N", "x", "tag"});
  t.add_metadata("ntklab", "0.1.0");
  t.add_row({std::int64_t{16}, 2e-5, std::string("over")});
  t.add_row({std::int64_t{32}, 0.25, std::string("under")});
  EXPECT_EQ(t.str(true),
            "# ntklab: 0.1.0\n"
            "N,x,tag\n"
            "16,2.000000000000e-05,over\n"
            "32,0.25,under\n");
  const std::string stamped = t.str(false);
  EXPECT_NE(stamped.find("# generated: "), std::string::npos);
  EXPECT_EQ(stamped.find('\r'), std::string::npos);
}

TEST(CsvTable, ParseRoundTrip) {
  CsvTable t({"a", "b", "c"});
  t.add_metadata("command", "scaling");
  t.add_metadata("slope_N16", "1.02");
  t.add_row({1.5, std::int64_t{3}, std::string("yes")});
  t.add_row({-2e-9, std::int64_t{-4}, std::string("no")});
  std::istringstream in(t.str());
  const CsvTable p = CsvTable::parse(in);
  EXPECT_EQ(p.header(), t.header());
  EXPECT_EQ(p.meta("slope_N16"), "1.02");
  EXPECT_EQ(p.value(0, "a"), 1.5);
  EXPECT_EQ(p.value(1, "b"), -4.0);
  EXPECT_DOUBLE_EQ(p.value(1, "a"), -2e-9);
  EXPECT_THROW(p.value(0, "c"), std::invalid_argument);
  EXPECT_THROW(p.column("zzz"), std::out_of_range);
  EXPECT_THROW(p.meta("nope"), std::out_of_range);
  EXPECT_EQ(p.str(), t.str());
}

TEST(CsvTable, ColumnView) {
  CsvTable t({"v"});
  for (int i = 0; i < 4; ++i) t.add_row({static_cast<double>(i) / 2});
  EXPECT_EQ(t.column("v"), (std::vector<double>{0, 0.5, 1, 1.5}));
}
