#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "flip/errors.hpp"
#include "flip/ingest.hpp"

using namespace flip;

namespace {

// Writes a throwaway CSV and removes it when the scope ends.
struct TempCsv {
    std::filesystem::path path;

    explicit TempCsv(const std::string& content) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("flip_ingest_test_" + std::to_string(counter++) + ".csv");
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempCsv() { std::filesystem::remove(path); }
};

const std::string kBasic =
    "timestamp,entity,open,close\n"
    "2024-01-02,BBB,50,49\n"
    "2024-01-01,AAA,100,101\n"
    "2024-01-01,BBB,50,49\n"
    "2024-01-02,AAA,101,99\n"
    "2024-01-03,AAA,99,100\n"
    "2024-01-03,BBB,50,48\n";

}  // namespace

TEST_CASE("load_price_csv assembles the panel") {
    TempCsv csv(kBasic);
    const PricePanel panel = load_price_csv(csv.path);
    CHECK(panel.n() == 2);
    CHECK(panel.t() == 3);
    // Entities in first-appearance order; timestamps lexicographic.
    CHECK(panel.entities == std::vector<std::string>{"BBB", "AAA"});
    CHECK(panel.timestamps ==
          std::vector<std::string>{"2024-01-01", "2024-01-02", "2024-01-03"});
    CHECK(panel.open(1, 0) == 100.0);
    CHECK(panel.close(1, 1) == 99.0);
    CHECK(panel.close(0, 2) == 48.0);
    CHECK_FALSE(panel.has_missing());
}

TEST_CASE("load_price_csv tolerates extra columns and any order") {
    TempCsv csv(
        "volume,close,entity,timestamp,open\n"
        "9,101,AAA,d1,100\n"
        "9,99,AAA,d2,101\n");
    const PricePanel panel = load_price_csv(csv.path);
    CHECK(panel.n() == 1);
    CHECK(panel.t() == 2);
    CHECK(panel.open(0, 0) == 100.0);
    CHECK(panel.close(0, 1) == 99.0);
}

TEST_CASE("load_price_csv error cases") {
    {
        TempCsv csv("timestamp,entity,open\n");
        CHECK_THROWS_AS(load_price_csv(csv.path), ParseError);
    }
    {
        TempCsv csv("timestamp,entity,open,close\nd1,AAA,100\n");
        CHECK_THROWS_AS(load_price_csv(csv.path), ParseError);
    }
    {
        TempCsv csv("timestamp,entity,open,close\nd1,AAA,abc,101\n");
        try {
            load_price_csv(csv.path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    {
        TempCsv csv("timestamp,entity,open,close\nd1,AAA,-5,101\n");
        CHECK_THROWS_AS(load_price_csv(csv.path), ValidationError);
    }
    {
        TempCsv csv(
            "timestamp,entity,open,close\nd1,AAA,100,101\nd1,AAA,100,101\n");
        CHECK_THROWS_AS(load_price_csv(csv.path), ParseError);
    }
    {
        TempCsv csv("timestamp,entity,open,close\n");
        CHECK_THROWS_AS(load_price_csv(csv.path), InsufficientDataError);
    }
    CHECK_THROWS_AS(load_price_csv("/nonexistent/prices.csv"), ValidationError);
}

TEST_CASE("synchronize drops incomplete bins") {
    TempCsv csv(
        "timestamp,entity,open,close\n"
        "d1,AAA,100,101\n"
        "d1,BBB,50,49\n"
        "d2,AAA,101,99\n"
        "d3,AAA,99,100\n"
        "d3,BBB,49,50\n");
    const PricePanel panel = load_price_csv(csv.path);
    CHECK(panel.has_missing());
    std::vector<std::string> dropped;
    const PricePanel synced = synchronize(panel, &dropped);
    CHECK(synced.t() == 2);
    CHECK(synced.timestamps == std::vector<std::string>{"d1", "d3"});
    CHECK(dropped == std::vector<std::string>{"d2"});
    CHECK_FALSE(synced.has_missing());
    CHECK(synced.close(1, 1) == 50.0);
}

TEST_CASE("synchronize requires two complete bins") {
    TempCsv csv(
        "timestamp,entity,open,close\n"
        "d1,AAA,100,101\n"
        "d1,BBB,50,49\n"
        "d2,AAA,101,99\n");
    const PricePanel panel = load_price_csv(csv.path);
    CHECK_THROWS_AS(synchronize(panel), InsufficientDataError);
}

TEST_CASE("compute_signs binarizes returns") {
    TempCsv csv(kBasic);
    const SignPanel signs = compute_signs(synchronize(load_price_csv(csv.path)));
    // BBB: down, down, down; AAA: up, down, up.
    CHECK(signs.signs(0, 0) == -1);
    CHECK(signs.signs(0, 1) == -1);
    CHECK(signs.signs(0, 2) == -1);
    CHECK(signs.signs(1, 0) == 1);
    CHECK(signs.signs(1, 1) == -1);
    CHECK(signs.signs(1, 2) == 1);
    CHECK(signs.zero_returns == 0);
    signs.validate();
}

TEST_CASE("zero returns follow the policy") {
    TempCsv csv(
        "timestamp,entity,open,close\n"
        "d1,AAA,100,99\n"
        "d2,AAA,100,100\n"
        "d3,AAA,100,100\n");
    const PricePanel panel = load_price_csv(csv.path);

    const SignPanel positive = compute_signs(panel, ZeroPolicy::positive);
    CHECK(positive.signs(0, 1) == 1);
    CHECK(positive.signs(0, 2) == 1);
    CHECK(positive.zero_returns == 2);

    const SignPanel carried = compute_signs(panel, ZeroPolicy::carry_forward);
    CHECK(carried.signs(0, 0) == -1);
    CHECK(carried.signs(0, 1) == -1);  // repeats the previous sign
    CHECK(carried.signs(0, 2) == -1);
    CHECK(carried.zero_returns == 2);
}

TEST_CASE("carry_forward defaults to +1 with no history") {
    TempCsv csv(
        "timestamp,entity,open,close\n"
        "d1,AAA,100,100\n"
        "d2,AAA,100,99\n");
    const SignPanel signs =
        compute_signs(load_price_csv(csv.path), ZeroPolicy::carry_forward);
    CHECK(signs.signs(0, 0) == 1);
    CHECK(signs.signs(0, 1) == -1);
}

TEST_CASE("compute_signs rejects unsynchronized panels") {
    TempCsv csv(
        "timestamp,entity,open,close\n"
        "d1,AAA,100,101\n"
        "d2,AAA,101,99\n"
        "d2,BBB,50,49\n");
    CHECK_THROWS_AS(compute_signs(load_price_csv(csv.path)), ValidationError);
}

TEST_CASE("compute_reversals flags orientation changes") {
    SignPanel panel;
    panel.entities = {"A", "B"};
    panel.timestamps = {"d1", "d2", "d3", "d4"};
    panel.signs.resize(2, 4);
    panel.signs << 1, -1, -1, 1,
                   -1, -1, 1, 1;
    const ReversalPanel rev = compute_reversals(panel);
    CHECK(rev.n() == 2);
    CHECK(rev.t() == 3);
    CHECK(rev.timestamps == std::vector<std::string>{"d2", "d3", "d4"});
    CHECK(rev.flips(0, 0) == 1);
    CHECK(rev.flips(0, 1) == 0);
    CHECK(rev.flips(0, 2) == 1);
    CHECK(rev.flips(1, 0) == 0);
    CHECK(rev.flips(1, 1) == 1);
    CHECK(rev.flips(1, 2) == 0);
    rev.validate();

    SignPanel one;
    one.entities = {"A"};
    one.timestamps = {"d1"};
    one.signs.resize(1, 1);
    one.signs << 1;
    CHECK_THROWS_AS(compute_reversals(one), InsufficientDataError);
}

TEST_CASE("sign panel validation rejects bad alphabets") {
    SignPanel panel;
    panel.entities = {"A"};
    panel.timestamps = {"d1", "d2"};
    panel.signs.resize(1, 2);
    panel.signs << 1, 0;
    CHECK_THROWS_AS(panel.validate(), ValidationError);
    panel.signs << 1, -1;
    CHECK_NOTHROW(panel.validate());
    panel.timestamps = {"d2", "d1"};  // not increasing
    CHECK_THROWS_AS(panel.validate(), ValidationError);
}
