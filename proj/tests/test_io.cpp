#include "gchs/io.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <limits>
#include <sstream>

using namespace gchs;

TEST_CASE("number parsing") {
    CHECK(parse_int("42") == 42);
    CHECK(parse_int("-7") == -7);
    CHECK_THROWS_AS(parse_int("4x"), ParseError);
    CHECK_THROWS_AS(parse_int(""), ParseError);
    CHECK(parse_double("0.25") == 0.25);
    CHECK(parse_double("-1e-3") == -1e-3);
    CHECK_THROWS_AS(parse_double("abc"), ParseError);
}

TEST_CASE("format_double round-trips") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("matrix text format") {
    Matrix m(2, 3);
    m << 1.0, -2.5, 1.0 / 3.0, 0.0, 1e-300, 7.0;
    std::stringstream ss;
    write_matrix(ss, m);
    CHECK(ss.str().rfind("2 3\n", 0) == 0);
    CHECK(read_matrix(ss) == m);

    std::stringstream truncated("2 2\n1 2\n3\n");
    CHECK_THROWS_AS(read_matrix(truncated), ParseError);
    std::stringstream empty("");
    CHECK_THROWS_AS(read_matrix(empty), ParseError);
}

TEST_CASE("named matrices and vectors round-trip through files") {
    const auto dir = testing::scratch_dir("io_files");
    NamedMatrices mats{{"W1", Matrix::Random(3, 2)}, {"b1", Matrix::Random(1, 2)}};
    save_named_matrices(dir / "m.txt", mats);
    const auto back = load_named_matrices(dir / "m.txt");
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "W1");
    CHECK(back[1].second == mats[1].second);

    const Vector v = Vector::Random(5);
    save_vector(dir / "v.txt", v);
    CHECK(load_vector(dir / "v.txt") == v);
}

TEST_CASE("key value configs") {
    const auto dir = testing::scratch_dir("io_config");
    {
        std::ofstream(dir / "c.cfg") << "# comment\nmode = full\n  eta=0.5  # trailing\n\n";
    }
    const auto kv = read_key_values(dir / "c.cfg");
    CHECK(kv.at("mode") == "full");
    CHECK(kv.at("eta") == "0.5");
    {
        std::ofstream(dir / "bad.cfg") << "mode full\n";
    }
    CHECK_THROWS_AS(read_key_values(dir / "bad.cfg"), ParseError);
    CHECK_THROWS_AS(read_key_values(dir / "none.cfg"), ParseError);
}
