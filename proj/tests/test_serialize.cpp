#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "flip/errors.hpp"
#include "flip/sample.hpp"
#include "flip/serialize.hpp"
#include "flip/types.hpp"

using flip::CouplingSet;
using flip::Index;
using flip::Json;
using flip::Matrix;
using flip::SignPanel;
using flip::Vector;

namespace {

// Unique scratch path, removed on destruction.
struct TempFile {
    std::filesystem::path path;

    TempFile() {
        static std::mt19937_64 gen(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               ("flip_serialize_" + std::to_string(gen()) + ".json");
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

SignPanel sample_panel() {
    SignPanel panel;
    panel.entities = {"AAA", "BBB"};
    panel.timestamps = {"2004-01-02", "2004-01-05", "2004-01-06"};
    panel.signs.resize(2, 3);
    panel.signs << 1, -1, 1,  //
        -1, -1, 1;
    panel.zero_returns = 4;
    return panel;
}

CouplingSet sample_coupling() {
    CouplingSet params = CouplingSet::zeros(3, 2);
    params.h << 0.25, -0.5, 0.125;
    params.j(0, 1) = params.j(1, 0) = 0.375;
    params.j(1, 2) = params.j(2, 1) = -0.0625;
    params.lags[0](0, 0) = 0.1;
    params.lags[1](2, 1) = -0.2;
    return params;
}

}  // namespace

TEST_CASE("sign panels round-trip through json") {
    const SignPanel panel = sample_panel();
    const Json j = flip::panel_to_json(panel);
    const SignPanel back = flip::panel_from_json(j);
    CHECK(back.entities == panel.entities);
    CHECK(back.timestamps == panel.timestamps);
    CHECK(back.signs == panel.signs);
    CHECK(back.zero_returns == panel.zero_returns);

    SUBCASE("rejected inputs") {
        Json bad = j;
        bad["signs"][0][1] = 2;
        CHECK_THROWS_AS(flip::panel_from_json(bad), flip::ValidationError);

        bad = j;
        bad["signs"][1].erase(2);  // ragged row
        CHECK_THROWS_AS(flip::panel_from_json(bad), flip::ValidationError);

        bad = j;
        bad["entities"].erase(1);  // row count mismatch
        CHECK_THROWS_AS(flip::panel_from_json(bad), flip::ValidationError);

        bad = j;
        bad.erase("timestamps");
        CHECK_THROWS_AS(flip::panel_from_json(bad), flip::ValidationError);
    }
}

TEST_CASE("coupling sets round-trip through json") {
    const CouplingSet params = sample_coupling();
    const Json j = flip::coupling_to_json(params);
    const CouplingSet back = flip::coupling_from_json(j);
    CHECK((back.j - params.j).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.h - params.h).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.lag_count() == 2);
    CHECK((back.lags[0] - params.lags[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.lags[1] - params.lags[1]).cwiseAbs().maxCoeff() == 0.0);

    SUBCASE("declared shape must match the payload") {
        Json bad = j;
        bad["n"] = 4;
        CHECK_THROWS_AS(flip::coupling_from_json(bad), flip::ValidationError);

        bad = j;
        bad["lag_count"] = 1;
        CHECK_THROWS_AS(flip::coupling_from_json(bad), flip::ValidationError);
    }

    SUBCASE("asymmetric couplings are rejected") {
        Json bad = j;
        bad["j"][0][1] = 0.375;
        bad["j"][1][0] = 0.5;
        CHECK_THROWS_AS(flip::coupling_from_json(bad), flip::ValidationError);
    }
}

TEST_CASE("reversal couplings, latent-gaussian and poisson models round-trip") {
    flip::ReversalCouplingSet w = flip::ReversalCouplingSet::zeros(2);
    w.w << -0.5, 0.25, 0.25, -1.5;
    const flip::ReversalCouplingSet w2 =
        flip::reversal_coupling_from_json(flip::reversal_coupling_to_json(w));
    CHECK((w2.w - w.w).cwiseAbs().maxCoeff() == 0.0);

    flip::DgParams dg;
    dg.mu = (Vector(2) << 0.5, -0.25).finished();
    dg.sigma = Matrix::Identity(2, 2);
    dg.sigma(0, 1) = dg.sigma(1, 0) = 0.375;
    const flip::DgParams dg2 = flip::dg_from_json(flip::dg_to_json(dg));
    CHECK((dg2.mu - dg.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dg2.sigma - dg.sigma).cwiseAbs().maxCoeff() == 0.0);

    flip::PoissonModel poisson;
    poisson.rate = 1.75;
    CHECK(flip::poisson_from_json(flip::poisson_to_json(poisson)).rate == 1.75);
}

TEST_CASE("fit reports serialize their telemetry") {
    flip::FitReport report;
    report.converged = true;
    report.iterations_used = 12;
    report.objective = -0.5;
    report.lambda = 0.02;
    report.method = "newton";
    report.objective_trace = {-1.0, -0.6, -0.5};
    report.warnings = {"example"};
    const Json j = flip::report_to_json(report);
    CHECK(j["converged"] == true);
    CHECK(j["iterations_used"] == 12);
    CHECK(j["objective"] == -0.5);
    CHECK(j["lambda"] == 0.02);
    CHECK(j["method"] == "newton");
    CHECK(j["objective_trace"].size() == 3);
    CHECK(j["warnings"][0] == "example");
}

TEST_CASE("json files") {
    SUBCASE("write then read returns the same document") {
        TempFile file;
        const Json doc = flip::coupling_to_json(sample_coupling());
        flip::write_json_file(file.path, doc);
        CHECK(flip::read_json_file(file.path) == doc);
        const std::string text = flip::read_text_file(file.path);
        CHECK(!text.empty());
        CHECK(text.back() == '\n');
    }

    SUBCASE("dump output is deterministic with alphabetical keys") {
        const Json doc = flip::panel_to_json(sample_panel());
        CHECK(doc.dump() == doc.dump());
        const std::string text = doc.dump();
        CHECK(text.find("\"entities\"") < text.find("\"signs\""));
        CHECK(text.find("\"signs\"") < text.find("\"timestamps\""));
    }

    SUBCASE("malformed json reports the offending line") {
        TempFile file;
        flip::write_text_file(file.path, "{\n  \"a\": 1,\n  \"b\": oops\n}\n");
        try {
            flip::read_json_file(file.path);
            FAIL("expected a parse error");
        } catch (const flip::ParseError& e) {
            CHECK(e.line() == 3);
        }
    }

    SUBCASE("missing files raise") {
        CHECK_THROWS_AS(flip::read_json_file("/nonexistent/flip_test.json"),
                        flip::ValidationError);
        CHECK_THROWS_AS(flip::read_text_file("/nonexistent/flip_test.txt"),
                        flip::ValidationError);
    }
}

TEST_CASE("csv numbers use shortest round-trip formatting") {
    CHECK(flip::csv_number(0.1) == "0.1");
    CHECK(flip::csv_number(1.0) == "1");
    CHECK(flip::csv_number(-2.5) == "-2.5");
    CHECK(flip::csv_number(0.0) == "0");

    std::mt19937_64 gen(71);
    std::uniform_real_distribution<double> dist(-1e6, 1e6);
    for (int k = 0; k < 200; ++k) {
        const double v = dist(gen);
        CHECK(std::stod(flip::csv_number(v)) == v);
    }
}

TEST_CASE("fnv1a digests match the reference vectors") {
    CHECK(flip::fnv1a_hex("") == "cbf29ce484222325");
    CHECK(flip::fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(flip::fnv1a_hex("hello") == "a430d84680aabd0b");

    TempFile file;
    flip::write_text_file(file.path, "hello");
    CHECK(flip::hash_file(file.path) == "a430d84680aabd0b");
    CHECK_THROWS_AS(flip::hash_file("/nonexistent/flip_test.bin"), flip::ValidationError);
}
