#include <doctest.h>

#include <cmath>
#include <set>

#include "confmix/rng.hpp"
#include "confmix/word.hpp"

using namespace confmix;

TEST_CASE("words parse 1-based text and store 0-based symbols") {
    FiniteWord w = FiniteWord::parse("12");
    REQUIRE(w.size() == 2);
    CHECK(w[0] == 0);
    CHECK(w[1] == 1);
    CHECK(w.to_string() == "12");
    CHECK(FiniteWord::parse("1 2") == w);
    CHECK(FiniteWord::parse("1,2") == w);
    CHECK(FiniteWord{1, 2} == w);
    CHECK(FiniteWord::parse("1,12").vec() == std::vector<Symbol>{0, 11});
    CHECK_THROWS(FiniteWord::parse("102"));
    CHECK_THROWS(FiniteWord::parse("1a"));
}

TEST_CASE("word operations") {
    FiniteWord a = FiniteWord::parse("121");
    FiniteWord b = FiniteWord::parse("22");
    CHECK(a.concat(b).to_string() == "12122");
    CHECK(a.prefix(2).to_string() == "12");
    CHECK(a.drop(1).to_string() == "21");
    CHECK(a.prefix(2).is_prefix_of(a));
    CHECK_FALSE(b.is_prefix_of(a));
    CHECK_NOTHROW(a.validate(2));
    CHECK_THROWS_AS(FiniteWord::parse("3").validate(2), std::invalid_argument);
}

TEST_CASE("base-m index round trip, first symbol most significant") {
    CHECK(FiniteWord::parse("21").index(2) == 2);
    CHECK(FiniteWord::parse("12").index(3) == 1);
    for (std::uint64_t i = 0; i < 81; ++i) CHECK(FiniteWord::from_index(i, 4, 3).index(3) == i);
}

TEST_CASE("periodic streams") {
    SymbolStream s = SymbolStream::periodic(2, FiniteWord::parse("1"), FiniteWord::parse("12"));
    CHECK(s.read(5).to_string() == "11212");
    CHECK(s.shifted(2).read(3).to_string() == "212");
    s.shift(1);
    CHECK(s.read(4).to_string() == "1212");
    SymbolStream c = SymbolStream::constant(3, 2);
    CHECK(c.read(3).to_string() == "333");
    CHECK(c.is_periodic());
}

TEST_CASE("symbolic distance") {
    SymbolStream a = SymbolStream::periodic(2, FiniteWord::parse("11"), FiniteWord::parse("2"));
    SymbolStream b = SymbolStream::periodic(2, FiniteWord::parse("12"), FiniteWord::parse("2"));
    SymbolStream a2 = SymbolStream::periodic(2, FiniteWord::parse("1"), FiniteWord::parse("12"));
    CHECK(common_prefix(a, b, 100) == 1);
    CHECK(symbolic_dist(a, b, 100) == doctest::Approx(0.5));
    CHECK(symbolic_dist(a, a, 100) == 0.0);
    // 1 12 12 ... and 11 2 2 2 ... share "112" and then differ.
    CHECK(symbolic_dist(a, a2, 100) == doctest::Approx(0.125));
}

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter streams are reproducible and independent of creation order") {
    CounterRng a(42, 7), b(42, 8);
    std::vector<std::uint64_t> va, vb;
    for (int i = 0; i < 10; ++i) va.push_back(a.next_u64());
    for (int i = 0; i < 10; ++i) vb.push_back(b.next_u64());
    CounterRng a2(42, 7);
    for (int i = 0; i < 10; ++i) CHECK(a2.next_u64() == va[static_cast<std::size_t>(i)]);
    CHECK(va != vb);
    CHECK(CounterRng(42, 7).split(3).next_u64() == CounterRng(42, 7).split(3).next_u64());
    CHECK(CounterRng(42, 7).split(3).next_u64() != CounterRng(42, 7).split(4).next_u64());
}

TEST_CASE("uniform draws lie in [0, 1) with mean 1/2") {
    CounterRng r(1, 0);
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        s += u;
    }
    // 4 sigma with sigma = sqrt(1/12 / n).
    CHECK(std::fabs(s / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}
