#include "cpc/stencil.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unistd.h>

namespace cpc {

namespace {

class Writer {
public:
  void u8(uint8_t v) { out.push_back(v); }
  void u16(uint16_t v) { put(v, 2); }
  void u32(uint32_t v) { put(v, 4); }
  void i64(int64_t v) { put(static_cast<uint64_t>(v), 8); }
  void bytes(const uint8_t *p, size_t n) { out.insert(out.end(), p, p + n); }

  std::vector<uint8_t> out;

private:
  void put(uint64_t v, int n) {
    for (int i = 0; i < n; ++i)
      out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
};

class Reader {
public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  uint8_t u8() { return static_cast<uint8_t>(get(1)); }
  uint16_t u16() { return static_cast<uint16_t>(get(2)); }
  uint32_t u32() { return static_cast<uint32_t>(get(4)); }
  int64_t i64() { return static_cast<int64_t>(get(8)); }
  std::span<const uint8_t> bytes(size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  void need(size_t n) const {
    if (in_.size() - pos_ < n)
      throw Error(ErrorCode::TruncatedFile, "needed " + std::to_string(n) + " bytes at offset " +
                                                std::to_string(pos_));
  }
  uint64_t get(int n) {
    need(n);
    uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

constexpr uint8_t kSubtractSite = 1;
constexpr uint8_t kAddTarget = 2;

} // namespace

std::vector<uint8_t> serialize(const StencilLibrary &lib) {
  Writer w;
  w.bytes(reinterpret_cast<const uint8_t *>("CPSL"), 4);
  w.u16(StencilLibrary::kVersion);
  w.u16(lib.arch());
  w.u32(static_cast<uint32_t>(lib.size()));
  for (const Stencil *s : lib.sorted()) {
    auto key = s->key.bytes();
    w.u32(static_cast<uint32_t>(key.size()));
    w.bytes(key.data(), key.size());
    w.u32(static_cast<uint32_t>(s->code.size()));
    w.bytes(s->code.data(), s->code.size());
    w.u16(static_cast<uint16_t>(s->patches.size()));
    for (const auto &p : s->patches) {
      w.u32(p.offset);
      w.u8(p.width);
      w.u8((p.subtract_site ? kSubtractSite : 0) | (p.add_target ? kAddTarget : 0));
      w.i64(p.addend);
      w.u8(static_cast<uint8_t>(p.target.kind));
      if (p.target.kind == HoleTarget::Kind::External) {
        w.u16(static_cast<uint16_t>(p.target.name.size()));
        w.bytes(reinterpret_cast<const uint8_t *>(p.target.name.data()), p.target.name.size());
      } else {
        w.u32(p.target.ordinal);
      }
    }
    w.u8(s->tail ? 1 : 0);
    if (s->tail) {
      w.u32(s->tail->offset);
      w.u32(s->tail->length);
    }
  }
  return std::move(w.out);
}

StencilLibrary deserialize(std::span<const uint8_t> bytes, std::optional<uint16_t> expect_arch) {
  Reader r(bytes);
  auto magic = r.bytes(std::min<size_t>(4, bytes.size()));
  if (magic.size() < 4 || std::string(magic.begin(), magic.end()) != "CPSL")
    throw Error(ErrorCode::BadMagic, "not a stencil library");
  uint16_t version = r.u16();
  if (version != StencilLibrary::kVersion)
    throw Error(ErrorCode::VersionMismatch, "library version " + std::to_string(version));
  uint16_t arch = r.u16();
  if (expect_arch && arch != *expect_arch)
    throw Error(ErrorCode::ArchMismatch, "library arch tag " + std::to_string(arch));
  StencilLibrary lib(arch);
  uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    Stencil s;
    uint32_t klen = r.u32();
    s.key = StencilKey::from_bytes(r.bytes(klen));
    auto code = r.bytes(r.u32());
    s.code.assign(code.begin(), code.end());
    uint16_t np = r.u16();
    for (uint16_t j = 0; j < np; ++j) {
      PatchRecord p;
      p.offset = r.u32();
      p.width = r.u8();
      uint8_t flags = r.u8();
      p.subtract_site = flags & kSubtractSite;
      p.add_target = flags & kAddTarget;
      p.addend = r.i64();
      uint8_t kind = r.u8();
      if (kind > 2)
        throw Error(ErrorCode::InvalidStencil, "unknown hole target kind");
      p.target.kind = static_cast<HoleTarget::Kind>(kind);
      if (p.target.kind == HoleTarget::Kind::External) {
        auto name = r.bytes(r.u16());
        p.target.name.assign(name.begin(), name.end());
      } else {
        p.target.ordinal = r.u32();
      }
      s.patches.push_back(std::move(p));
    }
    if (r.u8()) {
      TailSpan t;
      t.offset = r.u32();
      t.length = r.u32();
      s.tail = t;
    }
    s.validate();
    lib.insert(std::move(s));
  }
  if (!r.done())
    throw Error(ErrorCode::InvalidStencil, "trailing bytes after last stencil");
  return lib;
}

StencilLibrary load_library(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(data);
}

void save_library(const StencilLibrary &lib, const std::string &path) {
  auto data = serialize(lib);
  std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::IoError, "cannot write " + tmp);
    out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out)
      throw Error(ErrorCode::IoError, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoError, "cannot rename to " + path + ": " + ec.message());
  }
}

} // namespace cpc
