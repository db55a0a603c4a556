#include "cpc/extractor.hpp"

#include <elf.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace cpc {

namespace {

[[noreturn]] void bad(const std::string &why) { throw Error(ErrorCode::BadObjectFile, why); }

template <class T> T read_at(std::span<const uint8_t> b, uint64_t off) {
  if (off > b.size() || b.size() - off < sizeof(T))
    bad("structure at offset " + std::to_string(off) + " runs past end of file");
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

std::string cstr_at(std::span<const uint8_t> strtab, uint64_t off) {
  if (off >= strtab.size())
    bad("string offset out of range");
  auto *p = reinterpret_cast<const char *>(strtab.data() + off);
  return std::string(p, strnlen(p, strtab.size() - off));
}

std::span<const uint8_t> section_bytes(std::span<const uint8_t> b, const Elf64_Shdr &sh) {
  if (sh.sh_type == SHT_NOBITS)
    return {};
  if (sh.sh_offset > b.size() || b.size() - sh.sh_offset < sh.sh_size)
    bad("section contents run past end of file");
  return b.subspan(sh.sh_offset, sh.sh_size);
}

} // namespace

ObjectImage ObjectImage::parse(std::span<const uint8_t> b) {
  auto eh = read_at<Elf64_Ehdr>(b, 0);
  if (std::memcmp(eh.e_ident, ELFMAG, SELFMAG) != 0)
    bad("missing ELF magic");
  if (eh.e_ident[EI_CLASS] != ELFCLASS64 || eh.e_ident[EI_DATA] != ELFDATA2LSB)
    bad("only little-endian ELF64 is supported");
  if (eh.e_type != ET_REL)
    bad("not a relocatable object");
  if (eh.e_machine != EM_X86_64)
    bad("not an x86-64 object");
  if (eh.e_shentsize != sizeof(Elf64_Shdr))
    bad("unexpected section header size");

  std::vector<Elf64_Shdr> shdrs;
  for (uint16_t i = 0; i < eh.e_shnum; ++i)
    shdrs.push_back(read_at<Elf64_Shdr>(b, eh.e_shoff + uint64_t{i} * sizeof(Elf64_Shdr)));
  if (eh.e_shstrndx >= shdrs.size())
    bad("section name table index out of range");
  auto shstr = section_bytes(b, shdrs[eh.e_shstrndx]);

  ObjectImage img;
  img.sections_.resize(shdrs.size());
  for (size_t i = 0; i < shdrs.size(); ++i) {
    auto &s = img.sections_[i];
    s.name = cstr_at(shstr, shdrs[i].sh_name);
    s.type = shdrs[i].sh_type;
    s.flags = shdrs[i].sh_flags;
    auto data = section_bytes(b, shdrs[i]);
    s.data.assign(data.begin(), data.end());
  }

  for (size_t i = 0; i < shdrs.size(); ++i) {
    const auto &sh = shdrs[i];
    if (sh.sh_type != SHT_SYMTAB)
      continue;
    if (sh.sh_link >= shdrs.size())
      bad("symbol table string link out of range");
    auto strtab = section_bytes(b, shdrs[sh.sh_link]);
    auto data = section_bytes(b, sh);
    for (uint64_t off = 0; off + sizeof(Elf64_Sym) <= data.size(); off += sizeof(Elf64_Sym)) {
      auto sym = read_at<Elf64_Sym>(data, off);
      ObjSymbol s;
      s.name = cstr_at(strtab, sym.st_name);
      s.section = sym.st_shndx;
      s.value = sym.st_value;
      s.size = sym.st_size;
      s.type = ELF64_ST_TYPE(sym.st_info);
      s.bind = ELF64_ST_BIND(sym.st_info);
      img.symbols_.push_back(std::move(s));
    }
  }

  for (size_t i = 0; i < shdrs.size(); ++i) {
    const auto &sh = shdrs[i];
    if (sh.sh_type == SHT_REL)
      bad("REL relocations are not supported on x86-64");
    if (sh.sh_type != SHT_RELA)
      continue;
    if (sh.sh_info >= shdrs.size())
      bad("relocation target section out of range");
    auto data = section_bytes(b, sh);
    auto &target = img.sections_[sh.sh_info];
    for (uint64_t off = 0; off + sizeof(Elf64_Rela) <= data.size(); off += sizeof(Elf64_Rela)) {
      auto r = read_at<Elf64_Rela>(data, off);
      ObjReloc rel{r.r_offset, static_cast<uint32_t>(ELF64_R_TYPE(r.r_info)),
                   static_cast<uint32_t>(ELF64_R_SYM(r.r_info)), r.r_addend};
      if (rel.symbol >= img.symbols_.size())
        bad("relocation symbol index out of range");
      target.relocs.push_back(rel);
    }
  }
  return img;
}

ObjectImage ObjectImage::load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(data);
}

const ObjSymbol *ObjectImage::find_symbol(std::string_view name) const noexcept {
  for (const auto &s : symbols_)
    if (s.name == name)
      return &s;
  return nullptr;
}

} // namespace cpc
