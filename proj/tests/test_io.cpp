#include "selclust/error.hpp"
#include "selclust/io.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace selclust;

namespace {

ErrorCode parse_error(const std::string& text, std::string* message = nullptr) {
  std::istringstream in(text);
  try {
    parse_csv(in);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("parse succeeded");
  return ErrorCode::config;
}

}  // namespace

TEST_CASE("csv parsing") {
  std::istringstream plain("0,0\n2,2\n");
  const DataMatrix a = parse_csv(plain);
  CHECK(a.n() == 2);
  CHECK(a.q() == 2);
  CHECK(a.values()(1, 0) == 2.0);

  std::istringstream header("bill,flipper\n 1.5 , -2e3\n3,+4\n\n");
  const DataMatrix b = parse_csv(header);
  CHECK(b.n() == 2);
  CHECK(b.values()(0, 1) == -2000.0);
  CHECK(b.values()(1, 1) == 4.0);
}

TEST_CASE("csv errors name the location") {
  std::string msg;
  CHECK(parse_error("1,2\n3,4,5\n", &msg) == ErrorCode::data);
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(parse_error("1,2\n3,abc\n", &msg) == ErrorCode::data);
  CHECK(msg.find("line 2, column 2") != std::string::npos);
  CHECK(parse_error("1,2\nnan,4\n", &msg) == ErrorCode::data);
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(parse_error("1,2\ninf,4\n") == ErrorCode::data);
  CHECK(parse_error("a,b\nc,d\n") == ErrorCode::data);
  CHECK(parse_error("") == ErrorCode::data);
  CHECK(parse_error("1,2\n") == ErrorCode::data);
}

TEST_CASE("csv round trip is bit exact") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  RowMatrix m(50, 4);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = std::ldexp(mant(rng), expo(rng));
  m(0, 0) = 0.1;
  m(0, 1) = -0.0;
  m(0, 2) = std::numeric_limits<double>::denorm_min();
  m(0, 3) = std::numeric_limits<double>::max();
  std::stringstream s;
  write_csv(s, m);
  const DataMatrix back = parse_csv(s);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(std::bit_cast<std::uint64_t>(back.values()(i, j)) ==
            std::bit_cast<std::uint64_t>(m(i, j)));
}

TEST_CASE("json encodings") {
  const IntervalSet s({{0, 1, false, true}, {2, kInfinity, true, true}});
  const auto j = to_json(s);
  CHECK(j.dump() == R"([[0.0,1.0,false,true],[2.0,"inf",true,true]])");

  CHECK(p_value_json(1e-308) == "<1e-307");
  CHECK(p_value_json(0.0) == "<1e-307");
  CHECK(p_value_json(0.25) == 0.25);

  TestResult r;
  r.statistic = 3.0;
  r.p_value = 0.0;
  r.log_p = -900.0;
  r.method = Method::exact;
  const auto jr = to_json(r);
  CHECK(jr["p_value"] == "<1e-307");
  CHECK(jr["log_p"] == -900.0);
  CHECK(jr["method"] == "exact");
  CHECK(jr["sigma_used"].is_null());
}

TEST_CASE("merge history json is 1-based") {
  RowMatrix m(3, 1);
  m << 0, 1, 10;
  const auto h = run_agglomerative(DataMatrix(m), Linkage::average, 2);
  const auto j = to_json(h);
  CHECK(j["labels"] == nlohmann::json::array({1, 1, 2}));
  CHECK(j["clusters"][0]["members"] == nlohmann::json::array({1, 2}));
  CHECK(j["merge_heights"] == nlohmann::json::array({1.0}));
}

TEST_CASE("qq plot is deterministic") {
  const std::vector<double> p = {0.9, 0.1, 0.5, 0.3};
  const std::string a = qq_plot_svg(p, "null <average>");
  CHECK(a == qq_plot_svg(p, "null <average>"));
  CHECK(a.find("&lt;average&gt;") != std::string::npos);
  CHECK(a.rfind("<svg", 0) == 0);
}

TEST_CASE("records csv header on an empty report") {
  SimReport empty;
  std::ostringstream out;
  write_records_csv(out, empty);
  CHECK(out.str() ==
        "replicate,delta,statistic,p_value,log_p,wald_p,size1,size2,recovered,effect_size,"
        "boundary_distance,sigma_used,method\n");
}
