#pragma once

#include <cstddef>
#include <cstdint>

namespace roadcast::gf {

// GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x + 1 (0x11b).
using FieldByte = std::uint8_t;

inline FieldByte add(FieldByte a, FieldByte b) { return a ^ b; }

FieldByte mul(FieldByte a, FieldByte b);
FieldByte inv(FieldByte a);  // a != 0
FieldByte div(FieldByte a, FieldByte b);

// 256-entry table row: mul_row(c)[x] == mul(c, x).
const std::uint8_t* mul_row(FieldByte c);

// dst[i] ^= c * src[i], for i in [0, n)
void axpy(std::uint8_t* dst, const std::uint8_t* src, std::size_t n, FieldByte c);

// dst[i] = c * dst[i]
void scale(std::uint8_t* dst, std::size_t n, FieldByte c);

}  // namespace roadcast::gf
