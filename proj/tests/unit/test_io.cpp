#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cohgrad/io.hpp"

using namespace cohgrad;
namespace fs = std::filesystem;

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.5), "2.5");
    EXPECT_EQ(format_double(-0.0), "-0");
    EXPECT_EQ(format_double(INFINITY), "inf");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
    EXPECT_EQ(format_double(NAN), "nan");
    Rng r(4);
    for (int i = 0; i < 10000; ++i) {
        const double v = r.gaussian() * std::pow(10.0, static_cast<double>(r.below(40)) - 20.0);
        ASSERT_EQ(parse_double(format_double(v)), v);
    }
}

TEST(Csv, WriteThenRead) {
    const fs::path dir = fs::temp_directory_path() / "cohgrad_io_test";
    fs::create_directories(dir);
    const fs::path p = dir / "m.csv";
    {
        CsvWriter w(p, {"a", "b"});
        w.cell(1.0).cell(0.625);
        w.end_row();
        w.cell(-3.0).cell(1e-300);
        w.end_row();
    }
    const Mat64 m = read_matrix_csv(p);
    ASSERT_EQ(m.rows(), 2u);
    EXPECT_EQ(m(0, 1), 0.625);
    EXPECT_EQ(m(1, 1), 1e-300);
    const CsvTable t = read_csv(p);
    EXPECT_EQ(t.column("b"), 1u);
    EXPECT_THROW(t.column("zz"), std::runtime_error);
    fs::remove_all(dir);
}

TEST(Csv, RowWidthEnforced) {
    const fs::path p = fs::temp_directory_path() / "cohgrad_io_width.csv";
    CsvWriter w(p, {"a", "b"});
    w.cell(1.0);
    EXPECT_ANY_THROW(w.end_row());
    fs::remove(p);
}
