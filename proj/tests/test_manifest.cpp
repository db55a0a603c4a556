#include "doctest.h"

#include "cpc/manifest.hpp"

#include <filesystem>
#include <set>

using namespace cpc;

namespace {

ErrorCode code_of(const std::string &json) {
  try {
    expand(parse_manifest(json));
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

const char *kBinary = R"({"generators": [{
  "kind": "Binary", "ops": ["Add"], "types": ["i32", "i64"],
  "locations": [["Reg", "Stack", "Lit"], ["Reg", "Stack", "Lit"]],
  "pass_through": [0, 3], "spill": [false, true],
  "filters": [{"exclude": {"loc0": ["Lit"], "loc1": ["Lit"]}}]
}]})";

} // namespace

TEST_CASE("binary generator expands to the enumerated count") {
  // Enumerate the same space by hand.
  int want = 0;
  for (int type = 0; type < 2; ++type)
    for (int l0 = 0; l0 < 3; ++l0)
      for (int l1 = 0; l1 < 3; ++l1)
        for (int pt = 0; pt <= 3; ++pt)
          for (int spill = 0; spill < 2; ++spill)
            want += !(l0 == 2 && l1 == 2);
  CHECK(want == 128);

  auto keys = expand(parse_manifest(kBinary));
  CHECK(keys.size() == static_cast<size_t>(want));
  for (const auto &k : keys) {
    CHECK(k.key.kind == NodeKind::Binary);
    CHECK(k.source == "stencils/binary.c");
    CHECK_FALSE((k.key.locs[0] == Loc::Lit && k.key.locs[1] == Loc::Lit));
  }
}

TEST_CASE("register budget filter") {
  std::string json = kBinary;
  json.replace(json.find("}}]"), 3, R"(}}, {"register_budget": 3}])");
  auto keys = expand(parse_manifest(json));
  int want = 0;
  for (int type = 0; type < 2; ++type)
    for (int l0 = 0; l0 < 3; ++l0)
      for (int l1 = 0; l1 < 3; ++l1)
        for (int pt = 0; pt <= 3; ++pt)
          for (int spill = 0; spill < 2; ++spill) {
            if (l0 == 2 && l1 == 2)
              continue;
            int in = (l0 == 0) + (l1 == 0);
            int out = spill ? 0 : 1;
            want += pt + std::max(in, out) <= 3;
          }
  CHECK(keys.size() == static_cast<size_t>(want));
  for (const auto &k : keys)
    CHECK(k.key.pt + std::max(register_inputs(k.key), register_outputs(k.key)) <= 3);
}

TEST_CASE("the shipped manifest covers the fixture corpus") {
  auto keys = expand(load_manifest(CPC_SOURCE_DIR "/data/manifest.json"));
  REQUIRE(!keys.empty());
  std::set<StencilKey> unique;
  std::set<std::vector<std::pair<std::string, std::string>>> variants;
  for (size_t i = 0; i < keys.size(); ++i) {
    unique.insert(keys[i].key);
    variants.insert(keys[i].defines);
    if (i)
      CHECK(keys[i - 1].key < keys[i].key);
    CHECK(std::filesystem::exists(std::string(CPC_SOURCE_DIR "/tests/fixtures/") + keys[i].source));
  }
  CHECK(unique.size() == keys.size());
  // Every key selects a distinct preprocessor variant.
  CHECK(variants.size() == keys.size());
}

TEST_CASE("manifest errors") {
  CHECK(code_of("not json") == ErrorCode::InvalidManifest);
  CHECK(code_of(R"({"generators": [{"kind": "Nope"}]})") == ErrorCode::InvalidManifest);
  CHECK(code_of(R"({"generators": [{"kind": "Literal", "types": ["u8"]}]})") ==
        ErrorCode::InvalidManifest);
  CHECK(code_of(R"({"generators": []})") == ErrorCode::EmptyExpansion);
  CHECK(code_of(R"({"generators": [{"kind": "Literal", "types": ["i32"],
      "filters": [{"exclude": {"type": ["i32"]}}]}]})") == ErrorCode::EmptyExpansion);
}
