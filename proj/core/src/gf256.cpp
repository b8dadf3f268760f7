#include "roadcast/gf256.hpp"

#include <stdexcept>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define ROADCAST_GF_X86 1
#endif

namespace roadcast::gf {

namespace {

constexpr unsigned kPoly = 0x11b;

std::uint8_t slow_mul(std::uint8_t a, std::uint8_t b) {
  unsigned acc = 0;
  unsigned aa = a;
  for (unsigned bb = b; bb; bb >>= 1) {
    if (bb & 1) acc ^= aa;
    aa <<= 1;
    if (aa & 0x100) aa ^= kPoly;
  }
  return static_cast<std::uint8_t>(acc);
}

struct Tables {
  std::uint8_t mul[256][256];
  std::uint8_t inv[256];
  // 4-bit split tables: mul(c, x) == lo[c][x & 15] ^ hi[c][x >> 4]
  alignas(16) std::uint8_t lo[256][16];
  alignas(16) std::uint8_t hi[256][16];

  Tables() {
    for (unsigned a = 0; a < 256; ++a)
      for (unsigned b = 0; b < 256; ++b)
        mul[a][b] = slow_mul(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b));
    inv[0] = 0;
    for (unsigned a = 1; a < 256; ++a)
      for (unsigned b = 1; b < 256; ++b)
        if (mul[a][b] == 1) {
          inv[a] = static_cast<std::uint8_t>(b);
          break;
        }
    for (unsigned c = 0; c < 256; ++c)
      for (unsigned nibble = 0; nibble < 16; ++nibble) {
        lo[c][nibble] = mul[c][nibble];
        hi[c][nibble] = mul[c][nibble << 4];
      }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

#ifdef ROADCAST_GF_X86
__attribute__((target("ssse3"))) void axpy_ssse3(std::uint8_t* dst, const std::uint8_t* src,
                                                 std::size_t n, FieldByte c) {
  const Tables& t = tables();
  const __m128i table_lo = _mm_load_si128(reinterpret_cast<const __m128i*>(t.lo[c]));
  const __m128i table_hi = _mm_load_si128(reinterpret_cast<const __m128i*>(t.hi[c]));
  const __m128i nibble_mask = _mm_set1_epi8(0x0f);

  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    __m128i x = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src + i));
    __m128i lo = _mm_shuffle_epi8(table_lo, _mm_and_si128(x, nibble_mask));
    __m128i hi = _mm_shuffle_epi8(table_hi, _mm_and_si128(_mm_srli_epi64(x, 4), nibble_mask));
    __m128i product = _mm_xor_si128(lo, hi);
    __m128i d = _mm_loadu_si128(reinterpret_cast<const __m128i*>(dst + i));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(dst + i), _mm_xor_si128(d, product));
  }
  const std::uint8_t* row = t.mul[c];
  for (; i < n; ++i) dst[i] ^= row[src[i]];
}

bool have_ssse3() {
  static const bool ok = __builtin_cpu_supports("ssse3");
  return ok;
}
#endif

}  // namespace

FieldByte mul(FieldByte a, FieldByte b) { return tables().mul[a][b]; }

FieldByte inv(FieldByte a) {
  if (a == 0) throw std::domain_error("gf256: 0 has no multiplicative inverse");
  return tables().inv[a];
}

FieldByte div(FieldByte a, FieldByte b) { return mul(a, inv(b)); }

const std::uint8_t* mul_row(FieldByte c) { return tables().mul[c]; }

void axpy(std::uint8_t* dst, const std::uint8_t* src, std::size_t n, FieldByte c) {
  if (c == 0) return;
  if (c == 1) {
    for (std::size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
#ifdef ROADCAST_GF_X86
  if (have_ssse3()) {
    axpy_ssse3(dst, src, n, c);
    return;
  }
#endif
  const std::uint8_t* row = mul_row(c);
  for (std::size_t i = 0; i < n; ++i) dst[i] ^= row[src[i]];
}

void scale(std::uint8_t* dst, std::size_t n, FieldByte c) {
  if (c == 1) return;
  const std::uint8_t* row = mul_row(c);
  for (std::size_t i = 0; i < n; ++i) dst[i] = row[dst[i]];
}

}  // namespace roadcast::gf
