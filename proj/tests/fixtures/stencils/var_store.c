#define CP_OPBASE 1
#include "holes.h"

/* Holes: 0 = destination offset, then the source unless it is a register. */
CP_STENCIL {
  CP_SLOT(CP_HOLE32(0)) = CP_OPND0;
  CP_CONT(0);
}
