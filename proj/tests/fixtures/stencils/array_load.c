#include "holes.h"

CP_STENCIL {
  uint64_t base = CP_OPND0, idx = CP_OPND1;
#if defined(CP_TYPE_I32)
  CP_PRODUCE(CP_SEXT32(((int32_t *)base)[idx]));
#elif defined(CP_TYPE_BOOL)
  CP_PRODUCE((uint64_t)(((uint8_t *)base)[idx] != 0));
#else
  CP_PRODUCE(((uint64_t *)base)[idx]);
#endif
}
