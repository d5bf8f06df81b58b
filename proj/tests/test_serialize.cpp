#include "doctest.h"
#include "test_util.hpp"

#include "mixdyn/error.hpp"
#include "mixdyn/pipeline.hpp"
#include "mixdyn/serialize.hpp"

#include <fstream>
#include <iterator>

using namespace mixdyn;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

SparseModel lorenz_model() {
    const double dt = 1e-3;
    const Eigen::MatrixXd lz = testutil::lorenz(5000, dt);
    StateMatrix v{0.0, dt, lz, {"x", "y", "z"}};
    return identify(v, LibrarySpec{2}, SolverConfig{SolverMethod::Stlsq, 0.2});
}

}  // namespace

TEST_CASE("sparse model JSON round trip") {
    const auto model = lorenz_model();
    const auto doc = to_json(model);
    CHECK(doc["states"] == std::vector<std::string>{"x", "y", "z"});
    CHECK(doc["library"]["poly_order"] == 2);
    const auto back = sparse_model_from_json(doc);
    CHECK(back.state_labels == model.state_labels);
    CHECK(back.term_labels == model.term_labels);
    CHECK(back.spec.poly_order == model.spec.poly_order);
    CHECK(back.xi.entries == model.xi.entries);
    CHECK(back.coefficient("y", "x") == model.coefficient("y", "x"));

    const auto dir = testutil::scratch("serialize");
    write_json(dir / "a.json", doc);
    write_json(dir / "b.json", to_json(back));
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(read_json(dir / "a.json") == doc);
}

TEST_CASE("malformed model documents") {
    auto doc = to_json(lorenz_model());
    auto missing = doc;
    missing.erase("xi");
    CHECK_THROWS_AS(sparse_model_from_json(missing), InputError);
    auto ragged = doc;
    ragged["xi"][0].push_back(1.0);
    CHECK_THROWS_AS(sparse_model_from_json(ragged), InputError);
    auto wrong = doc;
    wrong["library"]["poly_order"] = "two";
    CHECK_THROWS_AS(sparse_model_from_json(wrong), InputError);

    const auto dir = testutil::scratch("serialize_bad");
    std::ofstream(dir / "bad.json") << "{not json";
    CHECK_THROWS_AS(read_json(dir / "bad.json"), InputError);
    CHECK_THROWS_AS(read_json(dir / "absent.json"), InputError);
}

TEST_CASE("havok and mixed models serialize") {
    const double dt = 50e-6;
    auto x = testutil::sampled(4000, dt, [](double t) {
        return std::sin(2 * std::numbers::pi * 60 * t) + 0.1 * std::sin(2 * std::numbers::pi * 2000 * t);
    });
    const auto model = identify_mixed(x, {});
    const auto doc = to_json(model);
    CHECK(doc["method"] == "mixed");
    CHECK(doc["havok"]["r"] == model.split.havok.r);
    CHECK(doc["havok"]["dt"] == dt);
    CHECK(doc.contains("slow_model"));
    CHECK(to_json(identify_mixed(x, {})).dump() == doc.dump());
}

TEST_CASE("error table CSV round trip") {
    std::vector<ErrorRow> rows{{"SG", "sindy", 0.0123, 1.0}, {"IBR100", "mixed", 1.0 / 3.0, 27.1}};
    const auto dir = testutil::scratch("errors_csv");
    write_error_csv(dir / "e.csv", rows);
    const auto back = read_error_csv(dir / "e.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].scenario == "IBR100");
    CHECK(back[1].method == "mixed");
    CHECK(back[1].nrmse == 1.0 / 3.0);

    std::ofstream(dir / "bad.csv") << "scenario,method,nrmse\nSG,sindy,abc\n";
    CHECK_THROWS_AS(read_error_csv(dir / "bad.csv"), InputError);
    std::ofstream(dir / "empty.csv") << "scenario,method,nrmse\n";
    CHECK_THROWS_AS(read_error_csv(dir / "empty.csv"), InputError);
}

TEST_CASE("ratio_table") {
    std::vector<ErrorRow> rows{{"SG", "mixed", 0.005, 0}, {"SG", "sindy", 0.01, 0}, {"IBR50", "sindy", 0.2, 0}};
    const auto r = ratio_table(rows, "SG");
    CHECK(r[0].ratio == doctest::Approx(0.5));
    CHECK(r[1].ratio == 1.0);
    CHECK(r[2].ratio == doctest::Approx(20.0));

    std::vector<ErrorRow> only_mixed{{"SG", "mixed", 0.004, 0}, {"IBR50", "mixed", 0.008, 0}};
    CHECK(ratio_table(only_mixed, "SG")[1].ratio == doctest::Approx(2.0));

    CHECK_THROWS_AS(ratio_table(rows, "IBR100"), InputError);
    rows[1].nrmse = 0.0;
    CHECK_THROWS_AS(ratio_table(rows, "SG"), NumericError);
}

TEST_CASE("method names") {
    for (auto m : {Method::Sindy, Method::Havok, Method::Mixed}) CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("dmd"), InputError);
}
