#include <doctest.h>

#include <algorithm>
#include <set>

#include "fsad/csv.hpp"
#include "fsad/rng.hpp"

using namespace fsad;

TEST_CASE("rng is deterministic and streams differ") {
  Rng a(42), b(42), c(mix_seed(42, 1));
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("rng uniform and below stay in range") {
  Rng r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
}

TEST_CASE("rng below is roughly uniform") {
  Rng r(9);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) counts[r.below(5)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("sample_indices gives k distinct indices") {
  Rng r(4);
  const auto picks = r.sample_indices(20, 8);
  CHECK(picks.size() == 8);
  CHECK(std::set<std::size_t>(picks.begin(), picks.end()).size() == 8);
  for (auto p : picks) CHECK(p < 20);
  CHECK(r.sample_indices(5, 5).size() == 5);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(5);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  auto w = v;
  r.shuffle(w);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}

TEST_CASE("csv parse handles quotes, embedded newlines, CRLF and BOM") {
  const auto rows = csv::parse("\xEF\xBB\xBFtext,label\r\n\"hi, there\",1\n\"say \"\"x\"\"\nnow\",0\n\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == csv::Row{"text", "label"});
  CHECK(rows[1] == csv::Row{"hi, there", "1"});
  CHECK(rows[2] == csv::Row{"say \"x\"\nnow", "0"});
}

TEST_CASE("csv escape round-trips") {
  const csv::Row row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const auto parsed = csv::parse(csv::format_row(row) + "\n");
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0] == row);
  CHECK(csv::escape("plain") == "plain");
}

TEST_CASE("csv tab delimiter") {
  const auto rows = csv::parse("a\tb\nx,y\tz\n", '\t');
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == csv::Row{"x,y", "z"});
}
