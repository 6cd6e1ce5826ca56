// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fairview/array_store.hpp"
#include "fairview/common.hpp"
#include "fairview/csv.hpp"
#include "fairview/rng.hpp"
#include "fairview/sha256.hpp"
#include "fairview/toml_lite.hpp"

using namespace fairview;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("fairview_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex(std::string("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("seed derivation is stable and label-sensitive") {
  const auto a = derive_seed(42, "datagen");
  const auto b = derive_seed(42, "datagen");
  const auto c = derive_seed(42, "gan");
  const auto d = derive_seed(43, "datagen");
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != d);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng c(7);
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  auto w = v;
  Rng d(7);
  c.shuffle(v);
  d.shuffle(w);
  CHECK(v == w);
}

TEST_CASE("rng normal moments") {
  Rng rng(123);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("sample_without_replacement returns distinct indices") {
  Rng rng(5);
  const auto idx = rng.sample_without_replacement(10, 10);
  std::vector<bool> seen(10, false);
  for (auto i : idx) {
    CHECK(!seen[i]);
    seen[i] = true;
  }
  CHECK(idx.size() == 10);
}

TEST_CASE("toml subset parsing") {
  const std::string doc = R"(
# comment
seed = 42
name = "hello # not a comment"
[section]
value = 2.5
flag = true
arr = [1, 2, 3]
mixed = [0.5, 1.5]  # trailing comment
)";
  const TomlTable t = parse_toml_string(doc);
  CHECK(t.get_int("", "seed", 0) == 42);
  CHECK(t.get_string("", "name", "") == "hello # not a comment");
  CHECK(t.get_double("section", "value", 0) == doctest::Approx(2.5));
  CHECK(t.get_bool("section", "flag", false));
  CHECK(t.get_int_array("section", "arr", {}) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(t.get_double_array("section", "mixed", {}) == std::vector<double>{0.5, 1.5});
  CHECK(t.get_int("section", "missing", 9) == 9);
}

TEST_CASE("toml errors carry config_invalid") {
  CHECK_THROWS_AS(parse_toml_string("key"), Error);
  CHECK_THROWS_AS(parse_toml_string("[oops"), Error);
  CHECK_THROWS_AS(parse_toml_string("x = \"unterminated"), Error);
  try {
    parse_toml_string("x = zzz");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config_invalid);
  }
}

TEST_CASE("csv round trip at six decimals") {
  const auto dir = temp_dir("csv");
  CsvTable t;
  t.header = {"a", "b"};
  t.rows.push_back({format_fixed6(1.0 / 3.0), format_fixed6(2.25)});
  t.rows.push_back({format_fixed6(-0.000001), "x"});
  write_csv(dir / "t.csv", t);
  const CsvTable r = read_csv(dir / "t.csv");
  CHECK(r.header == t.header);
  CHECK(r.rows == t.rows);
  CHECK(r.rows[0][0] == "0.333333");
}

TEST_CASE("csv schema errors name the missing column") {
  const auto dir = temp_dir("csv_schema");
  CsvTable t;
  t.header = {"tau", "coverage"};
  t.rows.push_back({"1", "1"});
  write_csv(dir / "t.csv", t);
  const CsvTable r = read_csv(dir / "t.csv");
  try {
    r.require_columns({"tau", "accuracy"});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("accuracy") != std::string::npos);
    CHECK(e.code() == Errc::schema_mismatch);
  }
}

TEST_CASE("array store round trip and checksum verification") {
  const auto dir = temp_dir("store");
  ArrayStore store;
  store.manifest["note"] = "round-trip";
  std::vector<float> a = {1.0f, -2.5f, 3.25f};
  std::vector<float> b = {0.5f, 0.25f};
  store.add("layer.weight", {3}, a);
  store.add("layer.bias", {2}, b);
  store.save(dir / "ckpt");

  const ArrayStore loaded = ArrayStore::load(dir / "ckpt");
  CHECK(loaded.get("layer.weight").data == a);
  CHECK(loaded.get("layer.bias").data == b);
  CHECK(loaded.manifest.at("note") == "round-trip");
  CHECK(loaded.checksum() == store.checksum());
}

TEST_CASE("payload corruption is detected with distinct codes") {
  const auto dir = temp_dir("corrupt");
  ArrayStore store;
  store.add("w", {4}, std::vector<float>{1, 2, 3, 4});
  store.save(dir / "ckpt");

  SUBCASE("bad magic") {
    std::fstream f(dir / "ckpt" / "weights.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("XX", 2);
    f.close();
    try {
      read_f32_file(dir / "ckpt" / "weights.bin", "FVWGT01\n");
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_container_header);
    }
  }
  SUBCASE("checksum mismatch flagged on load") {
    std::fstream f(dir / "ckpt" / "weights.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(20);
    const float junk = 99.0f;
    f.write(reinterpret_cast<const char*>(&junk), sizeof(junk));
    f.close();
    try {
      (void)ArrayStore::load(dir / "ckpt");
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::checksum_mismatch);
    }
  }
  SUBCASE("truncated payload") {
    fs::resize_file(dir / "ckpt" / "weights.bin", 20);
    try {
      read_f32_file(dir / "ckpt" / "weights.bin", "FVWGT01\n");
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::truncated_payload);
    }
  }
}
