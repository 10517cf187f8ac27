#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cnmix/dataset.hpp"

using namespace cnmix;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cnmix_ds_test_" + std::to_string(++counter) + ".csv");
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

}  // namespace

TEST_CASE("load a fully observed file") {
  TempFile f("a,b\n1,2\n3,4\n5,6\n");
  const Dataset ds = load_dataset(f.path);
  CHECK(ds.n() == 3);
  CHECK(ds.d() == 2);
  CHECK(ds.mask.all());
  CHECK(ds.values(2, 1) == 6.0);
  CHECK(ds.columns == std::vector<std::string>{"a", "b"});
}

TEST_CASE("NA token and empty cells mark missing") {
  TempFile f("a,b\n1.5,NA\n,2\n");
  const Dataset ds = load_dataset(f.path);
  CHECK(ds.mask(0, 0));
  CHECK_FALSE(ds.mask(0, 1));
  CHECK_FALSE(ds.mask(1, 0));
  CHECK(ds.mask(1, 1));
}

TEST_CASE("tab delimiter is auto-detected") {
  TempFile f("a\tb\n1\t2\n");
  const Dataset ds = load_dataset(f.path);
  CHECK(ds.d() == 2);
  CHECK(ds.values(0, 1) == 2.0);
}

TEST_CASE("an all-missing row is rejected with its index") {
  TempFile f("a,b\n1,2\nNA,NA\n");
  try {
    load_dataset(f.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("an unparseable cell is reported with row and column") {
  TempFile f("a,b\n1,2\n3,oops\n");
  try {
    load_dataset(f.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
}

TEST_CASE("zero data rows is an error") {
  TempFile f("a,b\n");
  CHECK_THROWS_AS(load_dataset(f.path), DataError);
}

TEST_CASE("ragged rows are rejected") {
  TempFile f("a,b\n1,2,3\n");
  CHECK_THROWS_AS(load_dataset(f.path), DataError);
}

TEST_CASE("write/load round-trip is bit-exact") {
  TempFile f("a,b,c\n0.1,NA,-3.25e-7\n1.7976931348623157e308,2,\n");
  const Dataset ds = load_dataset(f.path);
  const fs::path out = fs::temp_directory_path() / "cnmix_ds_roundtrip.csv";
  write_dataset(ds, out);
  const Dataset back = load_dataset(out);
  REQUIRE(back.n() == ds.n());
  REQUIRE(back.d() == ds.d());
  CHECK(back.columns == ds.columns);
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      CHECK(back.mask(i, j) == ds.mask(i, j));
      if (ds.mask(i, j)) CHECK(back.values(i, j) == ds.values(i, j));
    }
  fs::remove(out);
}

TEST_CASE("observation views split coordinates by mask") {
  TempFile f("a,b,c\n1,NA,3\n4,5,6\n");
  const Dataset ds = load_dataset(f.path);
  const auto views = observation_views(ds);
  REQUIRE(views.size() == 2);
  CHECK(views[0].observed_idx == std::vector<int>{0, 2});
  CHECK(views[0].missing_idx == std::vector<int>{1});
  CHECK(views[0].d_obs == 2);
  CHECK(views[1].observed_idx == std::vector<int>{0, 1, 2});
  CHECK(views[1].missing_idx.empty());
  CHECK(views[1].d_obs == 3);

  int total = 0;
  for (const auto& v : views) total += v.d_obs;
  CHECK(total == static_cast<int>(ds.mask.count()));
}

TEST_CASE("pattern groups are keyed by mask and ordered by first occurrence") {
  TempFile f("a,b\n1,NA\n2,3\n4,NA\n5,6\n");
  const Dataset ds = load_dataset(f.path);
  const auto groups = pattern_groups(ds);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].missing_idx == std::vector<int>{1});
  CHECK(groups[0].rows == std::vector<int>{0, 2});
  CHECK(groups[1].missing_idx.empty());
  CHECK(groups[1].rows == std::vector<int>{1, 3});
}

TEST_CASE("format_double survives the round trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e17, 123456.789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
