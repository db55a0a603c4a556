#include "cpc/mock.hpp"

namespace cpc {

namespace {

void put32(std::vector<uint8_t> &c) { c.insert(c.end(), 4, 0); }

} // namespace

Stencil mock_stencil(const StencilKey &key) {
  Stencil s;
  s.key = key;
  auto &c = s.code;
  // A little key-dependent padding so stencil sizes vary.
  c.insert(c.end(), 1 + key.pack() % 5, 0x90);

  auto widths = value_hole_widths(key);
  auto pcrel = value_hole_pcrel(key);
  for (uint32_t i = 0; i < widths.size(); ++i) {
    PatchRecord p;
    p.target = HoleTarget::value(i);
    if (pcrel[i]) {
      c.push_back(0xE8);
      p.subtract_site = true;
      p.addend = -4;
    } else if (widths[i] == 64) {
      c.push_back(0x48);
      c.push_back(0xB8);
    } else {
      c.push_back(0xB8);
    }
    p.offset = static_cast<uint32_t>(c.size());
    p.width = widths[i];
    c.insert(c.end(), widths[i] / 8, 0);
    s.patches.push_back(p);
  }

  uint32_t conts = continuation_count(key.kind);
  for (uint32_t k = 1; k < conts; ++k) {
    c.push_back(0x0F);
    c.push_back(0x85);
    s.patches.push_back({static_cast<uint32_t>(c.size()), 32, true, true, -4, HoleTarget::cont(k)});
    put32(c);
  }
  if (conts == 0) {
    c.push_back(0xC3);
  } else {
    auto at = static_cast<uint32_t>(c.size());
    c.push_back(0xE9);
    s.patches.push_back({at + 1, 32, true, true, -4, HoleTarget::cont(0)});
    put32(c);
    s.tail = TailSpan{at, 5};
  }
  return s;
}

StencilLibrary mock_library(const std::vector<ExpandedKey> &keys) {
  StencilLibrary lib;
  for (const auto &k : keys)
    lib.insert(mock_stencil(k.key));
  return lib;
}

void add_mock_stencils(const Function &fn, const CodegenOptions &opts, StencilLibrary &lib) {
  auto lf = lower_function(fn, opts);
  auto plan = plan_registers(lf, opts.register_budget);
  auto layout = layout_frame(fn, lf, plan);
  auto g = build_cps_graph(lf, plan, layout, nullptr, opts);
  for (const auto &n : g.nodes)
    if (!lib.find(n.key))
      lib.insert(mock_stencil(n.key));
}

} // namespace cpc
