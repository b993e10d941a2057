#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "stance/csv.hpp"
#include "stance/error.hpp"
#include "support/support.hpp"

namespace stance {
namespace {

TEST(Csv, MatchesPythonCsvModuleOnTrickyFile) {
  const auto rows = csv::parse(csv::read_file(testing::data_path("tricky.csv")), "tricky.csv");
  const auto golden = nlohmann::json::parse(csv::read_file(testing::data_path("csv_golden.json")));
  ASSERT_EQ(rows.size(), golden.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i], golden[i].get<std::vector<std::string>>()) << "row " << i;
  }
}

TEST(Csv, AcceptsLfCrlfAndBom) {
  const auto a = csv::parse("a,b\nc,d\n");
  const auto b = csv::parse("\xEF\xBB\xBF" "a,b\r\nc,d\r\n");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 2U);
  EXPECT_EQ(csv::parse("x,y"), (std::vector<csv::Row>{{"x", "y"}}));
}

TEST(Csv, EmptyFieldsSurvive) {
  const auto rows = csv::parse("a,,\"\"\n");
  ASSERT_EQ(rows.size(), 1U);
  EXPECT_EQ(rows[0], (csv::Row{"a", "", ""}));
}

TEST(Csv, MalformedQuotingNamesSourceAndLine) {
  try {
    csv::parse("h1,h2\nok,fine\nbad\"quote,x\n", "stances.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("stances.csv:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(csv::parse("\"unterminated,x\n"), DataError);
  EXPECT_THROW(csv::parse("\"closed\"junk,x\n"), DataError);
}

TEST(Csv, MissingFileIsDataError) { EXPECT_THROW(csv::read_file("/nonexistent/file.csv"), DataError); }

TEST(Csv, WriteThenParseRoundTrips) {
  const std::vector<csv::Row> rows = {{"plain", "with,comma", "with \"quote\""}, {"multi\nline", "", "crlf\r\nx"}};
  std::ostringstream out;
  for (const auto& r : rows) {
    csv::write_row(out, r);
  }
  EXPECT_EQ(csv::parse(out.str()), rows);
  EXPECT_EQ(csv::escape("plain"), "plain");
  EXPECT_EQ(csv::escape("a\"b"), "\"a\"\"b\"");
}

}  // namespace
}  // namespace stance
