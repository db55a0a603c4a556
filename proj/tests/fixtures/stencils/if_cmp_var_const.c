#include "holes.h"
#include "arith.h"

/* Holes: 0 = variable offset, 1 = constant. */
CP_STENCIL {
  uint64_t v = CP_SLOT(CP_HOLE32(0));
  if (__builtin_expect(!CP_COMPARE(v, CP_LIT(1)), 1))
    CP_CONT(1);
  CP_CONT(0);
}
