/* Operator semantics shared by Binary, BinaryVarConst, Compare and
 * IfCmpVarConst. Integer arithmetic wraps; division by zero traps. */
#ifndef CP_ARITH_H
#define CP_ARITH_H

#if defined(CP_TYPE_I32)
typedef int32_t cp_int;
typedef uint32_t cp_uint;
#define CP_WRAP(x) CP_SEXT32(x)
#else
typedef int64_t cp_int;
typedef uint64_t cp_uint;
#define CP_WRAP(x) ((uint64_t)(x))
#endif

#if defined(CP_TYPE_F64)
#if defined(CP_OP_ADD)
#define CP_BINARY(r, a, b) r = cp_bits(cp_f64(a) + cp_f64(b))
#elif defined(CP_OP_SUB)
#define CP_BINARY(r, a, b) r = cp_bits(cp_f64(a) - cp_f64(b))
#elif defined(CP_OP_MUL)
#define CP_BINARY(r, a, b) r = cp_bits(cp_f64(a) * cp_f64(b))
#else
#define CP_BINARY(r, a, b) r = cp_bits(cp_f64(a) / cp_f64(b))
#endif
#else
#if defined(CP_OP_ADD)
#define CP_BINARY(r, a, b) r = CP_WRAP((cp_uint)(a) + (cp_uint)(b))
#elif defined(CP_OP_SUB)
#define CP_BINARY(r, a, b) r = CP_WRAP((cp_uint)(a) - (cp_uint)(b))
#elif defined(CP_OP_MUL)
#define CP_BINARY(r, a, b) r = CP_WRAP((cp_uint)(a) * (cp_uint)(b))
#elif defined(CP_OP_DIV)
#define CP_BINARY(r, a, b)                                                     \
  do {                                                                         \
    cp_int _y = (cp_int)(b);                                                   \
    CP_TRAP_IF(_y == 0, CP_STATUS_DIV_ZERO);                                   \
    r = _y == -1 ? CP_WRAP(-(cp_uint)(a)) : CP_WRAP((cp_int)(a) / _y);         \
  } while (0)
#else
#define CP_BINARY(r, a, b)                                                     \
  do {                                                                         \
    cp_int _y = (cp_int)(b);                                                   \
    CP_TRAP_IF(_y == 0, CP_STATUS_DIV_ZERO);                                   \
    r = _y == -1 ? 0 : CP_WRAP((cp_int)(a) % _y);                              \
  } while (0)
#endif
#endif

#if defined(CP_TYPE_F64)
#define CP_CMP_VAL(x) cp_f64(x)
#elif defined(CP_TYPE_I32)
#define CP_CMP_VAL(x) ((int32_t)(x))
#else
#define CP_CMP_VAL(x) ((int64_t)(x))
#endif

#if defined(CP_OP_EQ)
#define CP_COMPARE(a, b) (CP_CMP_VAL(a) == CP_CMP_VAL(b))
#elif defined(CP_OP_NE)
#define CP_COMPARE(a, b) (CP_CMP_VAL(a) != CP_CMP_VAL(b))
#elif defined(CP_OP_LT)
#define CP_COMPARE(a, b) (CP_CMP_VAL(a) < CP_CMP_VAL(b))
#elif defined(CP_OP_LE)
#define CP_COMPARE(a, b) (CP_CMP_VAL(a) <= CP_CMP_VAL(b))
#elif defined(CP_OP_GT)
#define CP_COMPARE(a, b) (CP_CMP_VAL(a) > CP_CMP_VAL(b))
#else
#define CP_COMPARE(a, b) (CP_CMP_VAL(a) >= CP_CMP_VAL(b))
#endif

#endif
