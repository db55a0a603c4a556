/* Fixture stencil helpers. A stencil file defines CP_OPBASE (value ordinal
 * of its first non-register operand) and optionally CP_SPILL_ORD before
 * including this header. */
#ifndef CP_HOLES_H
#define CP_HOLES_H

#include <stdint.h>

typedef struct {
  uint64_t value;
  uint64_t status;
} cp_result;

#define CP_STATUS_EXTERNAL 1
#define CP_STATUS_DIV_ZERO 2
#define CP_STATUS_FRAME_OVERFLOW 3

#ifndef CP_OPBASE
#define CP_OPBASE 0
#endif

/* 32-bit holes: the address of an undefined symbol, laundered so the
 * compiler keeps it in a register instead of folding it into an operand. */
#define CP_HOLE32_(n)                                                          \
  ({                                                                           \
    extern char __cp_val_##n[];                                                \
    uint32_t _h = (uint32_t)(uintptr_t)__cp_val_##n;                           \
    __asm__("" : "+r"(_h));                                                    \
    _h;                                                                        \
  })
#define CP_HOLE32(n) CP_HOLE32_(n)

#define CP_HOLE64_(n)                                                          \
  ({                                                                           \
    uint64_t _v;                                                               \
    __asm__("movabsq $__cp_val_" #n ", %0" : "=r"(_v));                       \
    _v;                                                                        \
  })
#define CP_HOLE64(n) CP_HOLE64_(n)

#define CP_SEXT32(x) ((uint64_t)(int64_t)(int32_t)(uint32_t)(x))
#define CP_SLOT(off) (*(uint64_t *)(frame + (off)))

#if defined(CP_TYPE_I32) || defined(CP_TYPE_BOOL)
#define CP_LIT(n) CP_SEXT32(CP_HOLE32(n))
#else
#define CP_LIT(n) CP_HOLE64(n)
#endif

/* Value ordinals of operands 0..2 and of the spill slot. */
#define CP_ORD1_V (CP_OPBASE + (CP_NLOCS > 0 && CP_LOC0 != 0))
#define CP_ORD2_V (CP_ORD1_V + (CP_NLOCS > 1 && CP_LOC1 != 0))
#define CP_ORD3_V (CP_ORD2_V + (CP_NLOCS > 2 && CP_LOC2 != 0))

#define CP_ORD0 CP_OPBASE

#if CP_ORD1_V == 0
#define CP_ORD1 0
#elif CP_ORD1_V == 1
#define CP_ORD1 1
#else
#define CP_ORD1 2
#endif

#if CP_ORD2_V == 0
#define CP_ORD2 0
#elif CP_ORD2_V == 1
#define CP_ORD2 1
#elif CP_ORD2_V == 2
#define CP_ORD2 2
#else
#define CP_ORD2 3
#endif

#ifndef CP_SPILL_ORD
#if CP_ORD3_V == 0
#define CP_SPILL_ORD 0
#elif CP_ORD3_V == 1
#define CP_SPILL_ORD 1
#elif CP_ORD3_V == 2
#define CP_SPILL_ORD 2
#elif CP_ORD3_V == 3
#define CP_SPILL_ORD 3
#else
#define CP_SPILL_ORD 4
#endif
#endif

/* Every stencil and continuation shares one signature so continuation
 * calls can be forced into tail jumps. Argument slots hold the pass-through
 * values first, then the register operands (or the produced value when
 * calling continuation 0). Unused slots carry garbage. */
#define CP_STENCIL                                                             \
  cp_result CP_STENCIL_NAME(uintptr_t frame, uint64_t cp_a0, uint64_t cp_a1,   \
                            uint64_t cp_a2)

extern cp_result __cp_cont_0(uintptr_t, uint64_t, uint64_t, uint64_t);
extern cp_result __cp_cont_1(uintptr_t, uint64_t, uint64_t, uint64_t);

#define CP_ARG(i) ((i) == 0 ? cp_a0 : (i) == 1 ? cp_a1 : cp_a2)

#define CP_IN0_IDX (CP_PT)
#define CP_IN1_IDX (CP_IN0_IDX + (CP_NLOCS > 0 && CP_LOC0 == 0))
#define CP_IN2_IDX (CP_IN1_IDX + (CP_NLOCS > 1 && CP_LOC1 == 0))

#if CP_NLOCS > 0 && CP_LOC0 == 0
#define CP_OPND0 CP_ARG(CP_IN0_IDX)
#elif CP_NLOCS > 0 && CP_LOC0 == 1
#define CP_OPND0 CP_SLOT(CP_HOLE32(CP_ORD0))
#else
#define CP_OPND0 CP_LIT(CP_ORD0)
#endif

#if CP_NLOCS > 1 && CP_LOC1 == 0
#define CP_OPND1 CP_ARG(CP_IN1_IDX)
#elif CP_NLOCS > 1 && CP_LOC1 == 1
#define CP_OPND1 CP_SLOT(CP_HOLE32(CP_ORD1))
#else
#define CP_OPND1 CP_LIT(CP_ORD1)
#endif

#if CP_NLOCS > 2 && CP_LOC2 == 0
#define CP_OPND2 CP_ARG(CP_IN2_IDX)
#elif CP_NLOCS > 2 && CP_LOC2 == 1
#define CP_OPND2 CP_SLOT(CP_HOLE32(CP_ORD2))
#else
#define CP_OPND2 CP_LIT(CP_ORD2)
#endif

#define CP_TAIL __attribute__((musttail)) return

/* Slots past the pass-through values are dead. Stencils that make a native
 * call define CP_NATIVE_CALL so dead slots are not preserved across it. */
#ifdef CP_NATIVE_CALL
#define CP_DEAD(i)                                                             \
  ({                                                                           \
    uint64_t cp_u;                                                             \
    __asm__("" : "=r"(cp_u));                                                  \
    cp_u;                                                                      \
  })
#else
#define CP_DEAD(i) CP_ARG(i)
#endif

#define CP_KEEP(i) ((i) < CP_PT ? CP_ARG(i) : CP_DEAD(i))
#define CP_CONT(n) CP_TAIL __cp_cont_##n(frame, CP_KEEP(0), CP_KEEP(1), CP_KEEP(2))
#define CP_PASS(i, v) ((i) < CP_PT ? CP_ARG(i) : (i) == CP_PT ? (v) : CP_DEAD(i))
#define CP_CONT_VALUE(v)                                                       \
  do {                                                                         \
    uint64_t cp_v = (v);                                                       \
    CP_TAIL __cp_cont_0(frame, CP_PASS(0, cp_v), CP_PASS(1, cp_v),             \
                        CP_PASS(2, cp_v));                                     \
  } while (0)

/* Hands a produced value to the continuation, or to its spill slot. */
#if CP_SPILL
#define CP_PRODUCE(v)                                                          \
  do {                                                                         \
    CP_SLOT(CP_HOLE32(CP_SPILL_ORD)) = (v);                                    \
    CP_CONT(0);                                                                \
  } while (0)
#else
#define CP_PRODUCE(v) CP_CONT_VALUE(v)
#endif

#define CP_TRAP(status) ((cp_result){0, (status)})

/* Returns `status` when `cond` is nonzero. Written as an in-line exit so the
 * compiler keeps the continuation jump as the last instruction; only valid
 * where the stencil has no native stack frame. */
#define CP_TRAP_IF(cond, status)                                               \
  do {                                                                         \
    __asm__ goto("testq %0, %0\n\tjz %l[cp_ok]\n\t"                            \
                 "xorl %%eax, %%eax\n\tmovl $%c1, %%edx\n\tret"                \
                 :                                                             \
                 : "r"((uint64_t)(cond)), "i"(status)                          \
                 :                                                             \
                 : cp_ok);                                                     \
    __builtin_unreachable();                                                   \
  cp_ok:;                                                                      \
  } while (0)

static inline double cp_f64(uint64_t bits) {
  union {
    uint64_t u;
    double d;
  } x = {bits};
  return x.d;
}

static inline uint64_t cp_bits(double d) {
  union {
    double d;
    uint64_t u;
  } x = {d};
  return x.u;
}

#endif
