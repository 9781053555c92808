#pragma once

// Composite-field arithmetic for the compact AES S-box.
//
// Tower: GF(2^8) = GF(2^4)[Y]/(Y^2 + Y + nu), GF(2^4) = GF(2^2)[Z]/(Z^2 + Z + N),
// GF(2^2) = GF(2)[W]/(W^2 + W + 1), each level in a normal basis
// (Y^16, Y), (Z^4, Z), (W^2, W). The high half of a value holds the
// coefficient of the first basis element. N = W^2, nu = N^2 Z.
//
// Every function is a bit formula over its inputs; there are no tables.

#include <array>
#include <cstdint>
#include <optional>

namespace sboxbench {

// Raw bit formulas on unsigned lanes. The strong-typed API below forwards here;
// the dataflow interpreter calls these directly.
namespace tower_bits {

constexpr unsigned g4_sq(unsigned x) {
    return ((x & 1u) << 1) | ((x >> 1) & 1u);
}

constexpr unsigned g4_mul(unsigned x, unsigned y) {
    const unsigned a = (x >> 1) & 1u, b = x & 1u;
    const unsigned c = (y >> 1) & 1u, d = y & 1u;
    const unsigned e = (a ^ b) & (c ^ d);
    const unsigned p = (a & c) ^ e;
    const unsigned q = (b & d) ^ e;
    return (p << 1) | q;
}

// scale by N = W^2
constexpr unsigned g4_scl_n(unsigned x) {
    const unsigned a = (x >> 1) & 1u, b = x & 1u;
    return (b << 1) | (a ^ b);
}

// scale by N^2 = W
constexpr unsigned g4_scl_n2(unsigned x) {
    const unsigned a = (x >> 1) & 1u, b = x & 1u;
    return ((a ^ b) << 1) | a;
}

constexpr unsigned g16_mul(unsigned x, unsigned y) {
    const unsigned a = (x >> 2) & 3u, b = x & 3u;
    const unsigned c = (y >> 2) & 3u, d = y & 3u;
    const unsigned e = g4_scl_n(g4_mul(a ^ b, c ^ d));
    const unsigned p = g4_mul(a, c) ^ e;
    const unsigned q = g4_mul(b, d) ^ e;
    return (p << 2) | q;
}

// square then scale by nu
constexpr unsigned g16_sq_scl(unsigned x) {
    const unsigned a = (x >> 2) & 3u, b = x & 3u;
    const unsigned p = g4_sq(a ^ b);
    const unsigned q = g4_scl_n2(g4_sq(b));
    return (p << 2) | q;
}

constexpr unsigned g16_inv(unsigned x) {
    const unsigned a = (x >> 2) & 3u, b = x & 3u;
    const unsigned c = g4_scl_n(g4_sq(a ^ b));
    const unsigned d = g4_mul(a, b);
    const unsigned e = g4_sq(c ^ d); // GF(4) inverse is the square
    const unsigned p = g4_mul(e, b);
    const unsigned q = g4_mul(e, a);
    return (p << 2) | q;
}

constexpr unsigned g256_inv(unsigned x) {
    const unsigned a = (x >> 4) & 15u, b = x & 15u;
    const unsigned c = g16_sq_scl(a ^ b);
    const unsigned d = g16_mul(a, b);
    const unsigned e = g16_inv(c ^ d);
    const unsigned p = g16_mul(e, b);
    const unsigned q = g16_mul(e, a);
    return (p << 4) | q;
}

} // namespace tower_bits

struct GF4 {
    std::uint8_t bits = 0;
    friend constexpr bool operator==(GF4, GF4) = default;
    friend constexpr GF4 operator^(GF4 a, GF4 b) { return GF4{std::uint8_t(a.bits ^ b.bits)}; }
};

struct GF16 {
    std::uint8_t bits = 0;
    friend constexpr bool operator==(GF16, GF16) = default;
    friend constexpr GF16 operator^(GF16 a, GF16 b) { return GF16{std::uint8_t(a.bits ^ b.bits)}; }
};

struct GF256 {
    std::uint8_t bits = 0;
    friend constexpr bool operator==(GF256, GF256) = default;
    friend constexpr GF256 operator^(GF256 a, GF256 b) { return GF256{std::uint8_t(a.bits ^ b.bits)}; }
};

constexpr GF4 gf4(unsigned v) { return GF4{std::uint8_t(v & 3u)}; }
constexpr GF16 gf16(unsigned v) { return GF16{std::uint8_t(v & 15u)}; }

constexpr GF4 gf4_sq(GF4 a) { return gf4(tower_bits::g4_sq(a.bits)); }
constexpr GF4 gf4_mul(GF4 a, GF4 b) { return gf4(tower_bits::g4_mul(a.bits, b.bits)); }
constexpr GF4 gf4_scl_N(GF4 a) { return gf4(tower_bits::g4_scl_n(a.bits)); }
constexpr GF4 gf4_scl_N2(GF4 a) { return gf4(tower_bits::g4_scl_n2(a.bits)); }

constexpr GF16 gf16_mul(GF16 a, GF16 b) { return gf16(tower_bits::g16_mul(a.bits, b.bits)); }
constexpr GF16 gf16_sq_scl(GF16 a) { return gf16(tower_bits::g16_sq_scl(a.bits)); }
constexpr GF16 gf16_inv(GF16 a) { return gf16(tower_bits::g16_inv(a.bits)); }

/// Multiplicative inverse in the tower basis, with 0 mapped to 0.
constexpr GF256 gf256_inv(GF256 a) { return GF256{std::uint8_t(tower_bits::g256_inv(a.bits))}; }

/// GF(2) linear map on bytes. rows[i] is the linear form producing output bit i.
struct BitMatrix8 {
    std::array<std::uint8_t, 8> rows{};

    friend constexpr bool operator==(const BitMatrix8&, const BitMatrix8&) = default;

    static constexpr BitMatrix8 identity() {
        BitMatrix8 m;
        for (int i = 0; i < 8; ++i) m.rows[i] = std::uint8_t(1u << i);
        return m;
    }

    /// Canright's array layout: cols[7 - j] is the image of input bit j.
    static constexpr BitMatrix8 from_canright(const std::array<std::uint8_t, 8>& cols) {
        BitMatrix8 m;
        for (int j = 0; j < 8; ++j) {
            const std::uint8_t image = cols[7 - j];
            for (int i = 0; i < 8; ++i)
                if ((image >> i) & 1u) m.rows[i] = std::uint8_t(m.rows[i] | (1u << j));
        }
        return m;
    }

    /// Image of input bit j (column j).
    constexpr std::uint8_t column(int j) const {
        std::uint8_t c = 0;
        for (int i = 0; i < 8; ++i)
            if ((rows[i] >> j) & 1u) c = std::uint8_t(c | (1u << i));
        return c;
    }

    constexpr bool bit(int i, int j) const { return (rows[i] >> j) & 1u; }
};

constexpr std::uint8_t basis_change(std::uint8_t x, const BitMatrix8& m) {
    std::uint8_t y = 0;
    for (int i = 0; i < 8; ++i) {
        const unsigned parity = unsigned(__builtin_popcount(unsigned(m.rows[i] & x))) & 1u;
        y = std::uint8_t(y | (parity << i));
    }
    return y;
}

constexpr BitMatrix8 multiply(const BitMatrix8& a, const BitMatrix8& b) {
    BitMatrix8 c;
    for (int j = 0; j < 8; ++j) {
        const std::uint8_t col = basis_change(b.column(j), a);
        for (int i = 0; i < 8; ++i)
            if ((col >> i) & 1u) c.rows[i] = std::uint8_t(c.rows[i] | (1u << j));
    }
    return c;
}

/// Inverse over GF(2) by Gauss-Jordan elimination; nullopt when singular.
std::optional<BitMatrix8> inverse(const BitMatrix8& m);

/// Determinant over GF(2).
bool determinant(const BitMatrix8& m);

/// Basis-change constants from Canright's reference implementation.
namespace canright {
// AES polynomial basis -> tower basis
inline constexpr BitMatrix8 A2X =
    BitMatrix8::from_canright({0x98, 0xF3, 0xF2, 0x48, 0x09, 0x81, 0xA9, 0xFF});
// tower basis -> AES polynomial basis
inline constexpr BitMatrix8 X2A =
    BitMatrix8::from_canright({0x64, 0x78, 0x6E, 0x8C, 0x68, 0x29, 0xDE, 0x60});
// tower basis -> AES polynomial basis, with the affine matrix folded in
inline constexpr BitMatrix8 X2S =
    BitMatrix8::from_canright({0x58, 0x2D, 0x9E, 0x0B, 0xDC, 0x04, 0x03, 0x24});
// inverse of X2S
inline constexpr BitMatrix8 S2X =
    BitMatrix8::from_canright({0x8C, 0x79, 0x05, 0xEB, 0x12, 0x04, 0x51, 0x53});

inline constexpr std::uint8_t affine_constant = 0x63;
} // namespace canright

/// Reference S-box built directly from the tower functions (no instrumentation).
constexpr std::uint8_t tower_sbox(std::uint8_t x) {
    const std::uint8_t t = basis_change(x, canright::A2X);
    const std::uint8_t inv = gf256_inv(GF256{t}).bits;
    return std::uint8_t(basis_change(inv, canright::X2S) ^ canright::affine_constant);
}

} // namespace sboxbench
