#include "holes.h"

/* Continuation 1 is written first so the compiler places the jump to
 * continuation 0 last, where it can be elided. */
CP_STENCIL {
  if (__builtin_expect(CP_OPND0 == 0, 1))
    CP_CONT(1);
  CP_CONT(0);
}
