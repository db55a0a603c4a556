#include "holes.h"
#include "arith.h"

/* Holes: 0 = destination offset, 1 = source offset, 2 = constant. */
CP_STENCIL {
  uint64_t a = CP_SLOT(CP_HOLE32(1)), r;
  CP_BINARY(r, a, CP_LIT(2));
  CP_SLOT(CP_HOLE32(0)) = r;
  CP_CONT(0);
}
