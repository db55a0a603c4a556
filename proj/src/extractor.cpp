#include "cpc/extractor.hpp"

#include <elf.h>

#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <random>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace fs = std::filesystem;

namespace cpc {

namespace {

std::optional<uint32_t> ordinal_after(std::string_view name, std::string_view prefix) {
  if (name.substr(0, prefix.size()) != prefix || name.size() == prefix.size())
    return std::nullopt;
  auto digits = name.substr(prefix.size());
  uint32_t n = 0;
  auto r = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (r.ec != std::errc() || r.ptr != digits.data() + digits.size())
    return std::nullopt;
  return n;
}

// A continuation site must be the rel32 of `jmp` (E9) or `jcc` (0F 8x).
bool is_jump_site(const std::vector<uint8_t> &code, uint32_t site) {
  if (site >= 1 && code[site - 1] == 0xE9)
    return true;
  return site >= 2 && code[site - 2] == 0x0F && (code[site - 1] & 0xF0) == 0x80;
}

std::string shell_quote(const std::string &s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

struct CommandResult {
  int status = -1;
  std::string output;
};

CommandResult run_command(const std::string &cmd) {
  CommandResult r;
  FILE *p = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!p)
    return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0)
    r.output.append(buf, n);
  int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

} // namespace

Stencil extract(const ObjectImage &obj, const StencilKey &key, const ExtractOptions &opts) {
  const std::string name = key.symbol();
  const ObjSymbol *fn = obj.find_symbol(name);
  if (!fn || fn->section == SHN_UNDEF || fn->section >= obj.sections().size())
    throw Error(ErrorCode::BadObjectFile, "object does not define " + name);
  const ObjSection &text = obj.sections()[fn->section];
  if (fn->value + fn->size > text.data.size() || fn->size == 0)
    throw Error(ErrorCode::BadObjectFile, name + " extends past its section");

  Stencil s;
  s.key = key;
  s.code.assign(text.data.begin() + static_cast<long>(fn->value),
                text.data.begin() + static_cast<long>(fn->value + fn->size));
  const auto len = static_cast<uint32_t>(s.code.size());

  for (const auto &rel : text.relocs) {
    if (rel.offset < fn->value || rel.offset >= fn->value + fn->size)
      continue;
    auto site = static_cast<uint32_t>(rel.offset - fn->value);
    PatchRecord p;
    p.offset = site;
    p.addend = rel.addend;
    p.add_target = true;
    switch (rel.type) {
    case R_X86_64_64:
      p.width = 64;
      break;
    case R_X86_64_PC32:
    case R_X86_64_PLT32:
      p.width = 32;
      p.subtract_site = true;
      break;
    case R_X86_64_32:
    case R_X86_64_32S:
      p.width = 32;
      break;
    default:
      throw Error(ErrorCode::UnknownRelocationKind,
                  name + ": relocation type " + std::to_string(rel.type) + " at offset " +
                      std::to_string(site));
    }
    if (uint64_t{site} + p.width / 8 > len)
      throw Error(ErrorCode::HoleOutOfCode, name + ": hole at " + std::to_string(site) +
                                                " extends past code end");

    const ObjSymbol &sym = obj.symbols()[rel.symbol];
    if (auto n = ordinal_after(sym.name, "__cp_cont_")) {
      p.target = HoleTarget::cont(*n);
      if (!p.subtract_site || p.width != 32 || !is_jump_site(s.code, site))
        throw Error(ErrorCode::NonTailContinuation,
                    name + ": continuation " + std::to_string(*n) + " at offset " +
                        std::to_string(site) + " is not reached by a jump");
    } else if (auto v = ordinal_after(sym.name, "__cp_val_")) {
      p.target = HoleTarget::value(*v);
    } else if (!sym.name.empty() && sym.section == SHN_UNDEF &&
               opts.runtime_symbols.count(sym.name)) {
      p.target = HoleTarget::external(sym.name);
    } else {
      std::string what = sym.name;
      if (what.empty() && sym.section < obj.sections().size())
        what = "section " + obj.sections()[sym.section].name;
      throw Error(ErrorCode::UnknownSymbol, name + ": relocation against '" + what + "'");
    }
    s.patches.push_back(std::move(p));
  }
  std::sort(s.patches.begin(), s.patches.end(),
            [](const PatchRecord &a, const PatchRecord &b) { return a.offset < b.offset; });

  // Elidable tail: the function ends in `jmp rel32` to cont0 whose patch is
  // the last relocation and ends exactly at the code end.
  if (len >= 5 && s.code[len - 5] == 0xE9 && !s.patches.empty()) {
    const auto &last = s.patches.back();
    if (last.offset == len - 4 && last.target == HoleTarget::cont(0))
      s.tail = TailSpan{len - 5, 5};
  }
  if (opts.must_elide && !s.tail)
    throw Error(ErrorCode::NoTrailingJump, name + " (" + key.describe() +
                                               ") does not end in a jump to continuation 0");
  try {
    s.validate();
  } catch (const Error &e) {
    throw Error(ErrorCode::InvalidStencil, e.what());
  }
  return s;
}

std::vector<std::string> Toolchain::default_flags() {
  return {"-x",
          "c",
          "-std=gnu11",
          "-O3",
          "-fno-pic",
          "-fno-pie",
          "-mcmodel=small",
          "-fomit-frame-pointer",
          "-fno-asynchronous-unwind-tables",
          "-fno-unwind-tables",
          "-fno-jump-tables",
          "-fno-stack-protector",
          "-fcf-protection=none",
          "-ffreestanding",
          "-fno-builtin",
          "-c"};
}

ObjectImage compile_stencil(const ExpandedKey &entry, const std::string &source_root,
                            const Toolchain &tc, const std::string &object_path) {
  std::string src = (fs::path(source_root) / entry.source).string();
  if (!fs::exists(src))
    throw Error(ErrorCode::CompileFailed, "missing stencil source " + src);
  std::string cmd = shell_quote(tc.compiler);
  for (const auto &f : Toolchain::default_flags())
    cmd += " " + f;
  cmd += " -I" + shell_quote((fs::path(source_root) / "stencils").string());
  for (const auto &[k, v] : entry.defines)
    cmd += " " + shell_quote("-D" + k + "=" + v);
  cmd += " -o " + shell_quote(object_path) + " " + shell_quote(src);
  auto r = run_command(cmd);
  if (r.status == 127 || r.status == 126)
    throw Error(ErrorCode::ToolchainMissing, tc.compiler + ": " + r.output);
  if (r.status != 0)
    throw Error(ErrorCode::CompileFailed, entry.key.describe() + ":\n" + r.output);
  return ObjectImage::load(object_path);
}

StencilLibrary build_library(const Manifest &manifest, const std::string &source_root,
                             const BuildOptions &opts, BuildSummary *summary) {
  auto keys = expand(manifest);
  if (run_command(shell_quote(opts.toolchain.compiler) + " --version").status != 0)
    throw Error(ErrorCode::ToolchainMissing, "cannot run " + opts.toolchain.compiler);

  fs::path dir;
  bool temp = opts.keep_objects.empty();
  if (temp) {
    std::random_device rd;
    dir = fs::temp_directory_path() /
          ("cpc-stencils-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
  } else {
    dir = opts.keep_objects;
  }
  fs::create_directories(dir);

  std::vector<std::optional<Stencil>> out(keys.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::optional<Error> first_error;
  auto worker = [&] {
    while (true) {
      size_t i = next++;
      if (i >= keys.size())
        return;
      {
        std::lock_guard lk(err_mu);
        if (first_error)
          return;
      }
      try {
        auto obj_path = (dir / (keys[i].key.hex() + ".o")).string();
        auto obj = compile_stencil(keys[i], source_root, opts.toolchain, obj_path);
        ExtractOptions eo{keys[i].must_elide, opts.runtime_symbols};
        out[i] = extract(obj, keys[i].key, eo);
      } catch (const Error &e) {
        std::lock_guard lk(err_mu);
        if (!first_error)
          first_error = e;
      }
    }
  };
  unsigned jobs = std::max(1u, opts.jobs);
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();
  if (temp) {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  if (first_error)
    throw *first_error;

  StencilLibrary lib;
  BuildSummary sum;
  for (auto &s : out) {
    sum.code_bytes += s->code.size();
    sum.elidable += s->tail.has_value();
    lib.insert(std::move(*s));
  }
  sum.stencils = lib.size();
  if (summary)
    *summary = sum;
  return lib;
}

BuildSummary build_library_file(const Manifest &manifest, const std::string &source_root,
                                const std::string &out_path, const BuildOptions &opts) {
  BuildSummary sum;
  auto lib = build_library(manifest, source_root, opts, &sum);
  save_library(lib, out_path);
  return sum;
}

} // namespace cpc
