#include "sboxbench/gf_tower.hpp"

#include <utility>

namespace sboxbench {

std::optional<BitMatrix8> inverse(const BitMatrix8& m) {
    // augmented rows: low byte = working copy, high byte = accumulated inverse
    std::array<std::uint16_t, 8> aug{};
    for (int i = 0; i < 8; ++i) aug[i] = std::uint16_t(m.rows[i] | (1u << (8 + i)));

    for (int col = 0; col < 8; ++col) {
        int pivot = -1;
        for (int r = col; r < 8; ++r)
            if ((aug[r] >> col) & 1u) {
                pivot = r;
                break;
            }
        if (pivot < 0) return std::nullopt;
        std::swap(aug[col], aug[pivot]);
        for (int r = 0; r < 8; ++r)
            if (r != col && ((aug[r] >> col) & 1u)) aug[r] ^= aug[col];
    }

    BitMatrix8 inv;
    for (int i = 0; i < 8; ++i) inv.rows[i] = std::uint8_t(aug[i] >> 8);
    return inv;
}

bool determinant(const BitMatrix8& m) { return inverse(m).has_value(); }

} // namespace sboxbench
