#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "mfdsm/io.hpp"

using namespace mfdsm;

namespace {

ErrorCode parse_code(const std::string& text, std::string* message = nullptr) {
  try {
    (void)scenario_from_json(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected a parse failure");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("scenario json round trip") {
  for (const auto& scn : {example1_scenario(), tiny_scenario()}) {
    const auto text = scenario_to_json(scn);
    const auto back = scenario_from_json(text);
    CHECK(back.n == scn.n);
    CHECK(back.p == scn.p);
    CHECK(back.beta == scn.beta);
    CHECK(back.options == scn.options);
    CHECK(back.trajectory.successors() == scn.trajectory.successors());
    CHECK(back.trajectory.thetas() == scn.trajectory.thetas());
    CHECK(back.trajectory.initial_state() == scn.trajectory.initial_state());
    CHECK(back.distance.scale == scn.distance.scale);
    CHECK(scenario_to_json(back) == text);
  }
}

TEST_CASE("tables use 1-based state labels") {
  const auto scn = scenario_from_json(R"({
    "n": 2, "p": 0.5, "beta": 0.9,
    "options": [{"alpha": 0, "delivery": {"intercept": 0.5, "slope": 0},
                 "reserve_price": {"intercept": 1, "slope": 0},
                 "demand_price": {"intercept": 1, "slope": 0}}],
    "trajectory": {"kind": "table", "successor": [2, 3, 1], "theta": [0.1, 0.2, 0.3],
                   "initial_state": 2},
    "distance": {"kind": "scaled_absolute", "scale": 1}
  })");
  CHECK(scn.trajectory.successors() == std::vector<std::size_t>{1, 2, 0});
  CHECK(scn.trajectory.initial_state() == 1);
}

TEST_CASE("malformed input is reported with a location") {
  std::string msg;
  CHECK(parse_code("{\n  \"n\": 3,\n  \"p\": ,\n}", &msg) == ErrorCode::ParseError);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);

  auto doc = scenario_to_json(tiny_scenario());
  doc.insert(1, "\"colour\": 1,");
  CHECK(parse_code(doc, &msg) == ErrorCode::ParseError);
  CHECK(msg.find("colour") != std::string::npos);
}

TEST_CASE("invalid values fail validation after parsing") {
  auto doc = scenario_to_json(tiny_scenario());
  const auto at = doc.find("\"beta\": 0.9");
  REQUIRE(at != std::string::npos);
  doc.replace(at, 11, "\"beta\": 1.5");
  const auto scn = scenario_from_json(doc);
  try {
    validate_scenario(scn);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParameter);
  }
}

TEST_CASE("csv writers") {
  Policy pol(2, 1);
  pol.at(1, 0) = {1, 2};
  CHECK(policy_csv(pol) == "m_count,s,g_r,g_d\n0,1,1,1\n1,1,2,3\n");
  CHECK(policy_grid_csv(pol) == "x,m_count,s,option\n0,0,1,1\n0,1,1,2\n1,0,1,1\n1,1,1,3\n");
  const std::vector<double> row{0.25, 0.75};
  CHECK(kernel_row_csv(row) == "m_next_count,probability\n0,0.25\n1,0.75\n");
  CHECK(format_double(0.1) == "0.1");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("output bundle writes every file") {
  const auto dir = std::filesystem::temp_directory_path() / "mfdsm_io_test";
  std::filesystem::remove_all(dir);
  OutputBundle bundle;
  bundle.add(dir / "a.csv", "a\n");
  bundle.add(dir / "sub" / "b.csv", "b\n");
  bundle.commit();
  CHECK(read_file(dir / "a.csv") == "a\n");
  CHECK(read_file(dir / "sub" / "b.csv") == "b\n");
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_file(dir / "missing.json"), Error);
}

}  // TEST_SUITE
