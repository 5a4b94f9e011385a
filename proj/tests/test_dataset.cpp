#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "causalglm/dataset.hpp"

using namespace causalglm;
using Catch::Approx;

TEST_CASE("csv writes and reads back the same values") {
  Dataset data;
  data.names = {"X1", "Y"};
  Eigen::VectorXd x(3), y(3);
  x << 0.1, -2.5, 1e-17;
  y << 1, 0, 3;
  data.columns = {x, y};
  data.target_name = "Y";

  std::ostringstream out;
  write_csv(data, out);

  std::istringstream in(out.str());
  Dataset back = read_csv(in);
  REQUIRE(back.names == data.names);
  REQUIRE(back.n() == 3);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 3; ++i)
      CHECK(back.columns[j][i] == data.columns[j][i]);  // bit-exact round trip
}

TEST_CASE("csv rejects malformed input") {
  {
    std::istringstream in("");
    CHECK_THROWS_AS(read_csv(in), DataError);
  }
  {
    std::istringstream in("a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(in), DataError);  // ragged row
  }
  {
    std::istringstream in("a,b\n1,x\n");
    CHECK_THROWS_AS(read_csv(in), DataError);  // non-numeric cell
  }
  {
    std::istringstream in("a,b\n1,2.5e\n");
    CHECK_THROWS_AS(read_csv(in), DataError);  // trailing junk in number
  }
  {
    std::istringstream in("a,,c\n1,2,3\n");
    CHECK_THROWS_AS(read_csv(in), DataError);  // empty header name
  }
}

TEST_CASE("dataset column lookup") {
  Dataset data;
  data.names = {"A", "B"};
  Eigen::VectorXd a(2), b(2);
  a << 1, 2;
  b << 3, 4;
  data.columns = {a, b};
  data.target_name = "B";

  CHECK(data.index_of("A") == 0);
  CHECK(data.index_of("missing") == -1);
  CHECK(data.target()[1] == 4.0);
  CHECK(data.covariate_names() == std::vector<std::string>{"A"});
  CHECK_THROWS_AS(data.column("missing"), DataError);
}
