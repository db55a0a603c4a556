#include "cpc/extractor.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <thread>

int main(int argc, char **argv) {
  CLI::App app{"Compile the stencil corpus and extract a stencil library"};
  std::string manifest, src, out, keep;
  cpc::BuildOptions opts;
  opts.jobs = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--manifest", manifest, "manifest JSON")->required();
  app.add_option("--src", src, "directory containing stencils/")->required();
  app.add_option("--out", out, "library to write")->required();
  app.add_option("--toolchain", opts.toolchain.compiler, "C compiler command");
  app.add_option("--jobs", opts.jobs, "parallel compiles");
  app.add_option("--keep-objects", keep, "keep object files in this directory");
  CLI11_PARSE(app, argc, argv);
  opts.keep_objects = keep;

  nlohmann::json report;
  try {
    auto m = cpc::load_manifest(manifest);
    auto sum = cpc::build_library_file(m, src, out, opts);
    report = {{"ok", true},
              {"output", out},
              {"stencils", sum.stencils},
              {"code_bytes", sum.code_bytes},
              {"elidable", sum.elidable}};
    std::cout << report.dump() << "\n";
    return 0;
  } catch (const cpc::Error &e) {
    report = {{"ok", false}, {"error", cpc::to_string(e.code())}, {"message", e.what()}};
    std::cout << report.dump() << "\n";
    return 1;
  }
}
