#include "doctest.h"

#include "wordspot/errors.hpp"
#include "wordspot/image.hpp"

#include <filesystem>
#include <random>

using namespace wordspot;

TEST_CASE("plain PBM decodes pixel by pixel")
{
    const auto page = decode_netpbm("P1\n# comment\n3 2\n1 0 1\n0 1 0\n");
    REQUIRE(page.width() == 3);
    REQUIRE(page.height() == 2);
    CHECK(page.ink(0, 0));
    CHECK(!page.ink(1, 0));
    CHECK(page.ink(2, 0));
    CHECK(page.ink(1, 1));
    CHECK(page.ink_count() == 3);
}

TEST_CASE("plain PBM accepts digits without separators")
{
    const auto page = decode_netpbm("P1 4 1 0110");
    CHECK(!page.ink(0, 0));
    CHECK(page.ink(1, 0));
    CHECK(page.ink(2, 0));
    CHECK(!page.ink(3, 0));
}

TEST_CASE("raw PBM rows are padded to whole bytes")
{
    // 10 px wide: two bytes per row, MSB first.
    std::string bytes = "P4\n10 2\n";
    bytes += static_cast<char>(0b1000'0000);
    bytes += static_cast<char>(0b0100'0000);
    bytes += static_cast<char>(0b0000'0001);
    bytes += static_cast<char>(0b0000'0000);
    const auto page = decode_netpbm(bytes);
    CHECK(page.ink(0, 0));
    CHECK(page.ink(9, 0));
    CHECK(page.ink(7, 1));
    CHECK(page.ink_count() == 3);
}

TEST_CASE("P4 round trip through encode_pbm")
{
    std::mt19937_64 rng(3);
    PageImage page(37, 11);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 37; ++x)
            page.set(x, y, rng() % 3 == 0);
    CHECK(decode_netpbm(encode_pbm(page)) == page);

    const auto path = std::filesystem::temp_directory_path() / "wordspot_test_roundtrip.pbm";
    write_pbm(path, page);
    CHECK(read_netpbm(path) == page);
    std::filesystem::remove(path);
}

TEST_CASE("graymaps binarize below threshold * maxval")
{
    // maxval 100, threshold 0.5: ink when v < 50.
    const auto page = decode_netpbm("P2\n4 1\n100\n0 49 50 100\n");
    CHECK(page.ink(0, 0));
    CHECK(page.ink(1, 0));
    CHECK(!page.ink(2, 0));
    CHECK(!page.ink(3, 0));

    const auto dark = decode_netpbm("P2\n4 1\n100\n0 49 50 100\n", 0.75);
    CHECK(dark.ink(2, 0));
    CHECK(!dark.ink(3, 0));

    std::string raw = "P5\n3 1\n255\n";
    raw += static_cast<char>(10);
    raw += static_cast<char>(127);
    raw += static_cast<char>(128);
    const auto p5 = decode_netpbm(raw);
    CHECK(p5.ink(0, 0));
    CHECK(p5.ink(1, 0));
    CHECK(!p5.ink(2, 0));
}

TEST_CASE("16-bit P5 samples are big-endian")
{
    std::string raw = "P5\n2 1\n1000\n";
    raw += static_cast<char>(0x01); // 0x01F4 = 500 -> not < 500
    raw += static_cast<char>(0xF4);
    raw += static_cast<char>(0x01); // 0x01F3 = 499 -> ink
    raw += static_cast<char>(0xF3);
    const auto page = decode_netpbm(raw);
    CHECK(!page.ink(0, 0));
    CHECK(page.ink(1, 0));
}

TEST_CASE("malformed images raise bad_image")
{
    const char* cases[] = {
        "",
        "GIF89a",
        "P3\n1 1\n255\n0 0 0\n",
        "P1\n0 3\n",
        "P1\n2 2\n1 0 1\n",
        "P1\n1 1\n7\n",
        "P2\n1 1\n255\n300\n",
        "P2\n1 1\n0\n0\n",
        "P4\n16 2\n\x01",
        "P5\n2 2\n255\nab",
        "P1\n-4 2\n",
    };
    for (const char* bytes : cases) {
        CAPTURE(bytes);
        try {
            (void)decode_netpbm(bytes);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "bad_image");
        }
    }
    CHECK_THROWS_AS(decode_netpbm("P1 1 1 1", 0.0), ImageFormatError);
    CHECK_THROWS_AS(read_netpbm("/nonexistent/page.pbm"), ImageFormatError);
}

TEST_CASE("fill clips, bounds and crop")
{
    PageImage page(10, 8);
    CHECK(!page.ink_bounds());
    page.fill({8, 6, 5, 5});
    CHECK(page.ink_count() == 4);
    page.fill({2, 1, 3, 2});
    const auto bounds = page.ink_bounds();
    REQUIRE(bounds);
    CHECK(*bounds == WordBox{2, 1, 8, 7});

    const auto crop = page.crop({2, 1, 3, 2});
    CHECK(crop.width() == 3);
    CHECK(crop.height() == 2);
    CHECK(crop.ink_count() == 6);
    CHECK_THROWS_AS(page.crop({9, 0, 2, 1}), ImageFormatError);
    CHECK(page.contains({0, 0, 10, 8}));
    CHECK(!page.contains({0, 0, 11, 8}));
    CHECK_THROWS_AS(PageImage(0, 5), ImageFormatError);
}
