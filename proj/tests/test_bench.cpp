#include "doctest.h"

#include "cpc/bench.hpp"
#include "cpc/frontend.hpp"
#include "cpc/typecheck.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace cpc;

TEST_CASE("measure reports sane statistics") {
  int calls = 0;
  Sample s = measure([&] { ++calls; }, 10);
  CHECK(calls == 11); // one warm-up
  CHECK(s.reps == 10);
  CHECK(s.min_us <= s.mean_us);
  CHECK(s.ci95_us >= 0);

  Sample slow = measure([] { std::this_thread::sleep_for(std::chrono::milliseconds(2)); }, 3);
  CHECK(slow.min_us >= 2000);
  CHECK(measure([] {}, 0).reps == 0);
}

TEST_CASE("micro suite sources exist and typecheck") {
  for (const auto &b : micro_suite()) {
    auto path = std::string(CPC_SOURCE_DIR "/bench/") + b.file;
    REQUIRE(std::filesystem::exists(path));
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    TypedModule tm = typecheck(parse(ss.str()));
    CHECK_NOTHROW(check_call(tm.module(), b.entry, b.args));
  }
}

TEST_CASE("scaling function has one statement per step") {
  for (int n : {0, 1, 50}) {
    Function f = scaling_function(n);
    CHECK(f.body.size() == static_cast<size_t>(n) + 3); // two lets and a return
  }
  auto pts = run_scaling({10, 20}, 2);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].statements == 20);
  CHECK(pts[1].compile.mean_us > 0);
  CHECK(pts[1].per_statement_ns == doctest::Approx(pts[1].compile.mean_us * 1000 / 20));
}

TEST_CASE("report json carries every field") {
  BenchReport r;
  r.name = "fib";
  r.result = "i32 832040";
  r.interp.mean_us = 100;
  r.jit.mean_us = 10;
  auto j = nlohmann::json::parse(to_json(r, {}));
  CHECK(j["schema"] == 1);
  CHECK(j["speedup"].get<double>() == doctest::Approx(10));
  for (const char *k : {"benchmark", "result", "results_agree", "register_budget", "supernodes",
                        "jump_elision", "ast_build_us", "compile", "interpret", "jit",
                        "retained_jumps", "spills", "emitted_bytes"})
    CHECK(j.contains(k));
}
