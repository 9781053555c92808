#include "sboxbench/program.hpp"

#include "sboxbench/gf_tower.hpp"

#include <array>
#include <bit>
#include <stdexcept>

namespace sboxbench {

namespace {

constexpr std::array<std::string_view, 3> kDesignNames{"UHLS", "CNG", "Masked"};
constexpr std::array<std::string_view, kFunctionCount> kFunctionNames{
    "Sbox", "G256_nb", "G256_inv", "G16_sq_scl", "G16_mul", "G16_inv", "G4_scl_N", "G4_scl_N2", "G4_mul", "G4_sq"};

constexpr unsigned lane_mask(unsigned w) { return (1u << w) - 1u; }

const BitMatrix8& matrix_of(BasisMatrix m) {
    return m == BasisMatrix::A2X ? canright::A2X : canright::X2S;
}

unsigned apply_lane(const Node& node, unsigned a, unsigned b) {
    switch (node.kind) {
    case OpKind::Xor:
    case OpKind::XorConst: return a ^ b;
    case OpKind::Concat: return (a << node.b.width) | b;
    case OpKind::G4Mul: return tower_bits::g4_mul(a, b);
    case OpKind::G4Sq: return tower_bits::g4_sq(a);
    case OpKind::G4SclN: return tower_bits::g4_scl_n(a);
    case OpKind::G4SclN2: return tower_bits::g4_scl_n2(a);
    case OpKind::BasisChange: return basis_change(std::uint8_t(a), matrix_of(node.matrix));
    }
    return 0;
}

} // namespace

std::string_view to_string(Design d) { return kDesignNames[std::size_t(d)]; }
std::string_view to_string(Function f) { return kFunctionNames[std::size_t(f)]; }

std::string_view to_string(OpKind k) {
    switch (k) {
    case OpKind::Xor: return "xor";
    case OpKind::XorConst: return "xor_const";
    case OpKind::Concat: return "concat";
    case OpKind::G4Mul: return "g4_mul";
    case OpKind::G4Sq: return "g4_sq";
    case OpKind::G4SclN: return "g4_scl_n";
    case OpKind::G4SclN2: return "g4_scl_n2";
    case OpKind::BasisChange: return "basis_change";
    }
    return "?";
}

std::string_view to_string(Port p) {
    switch (p) {
    case Port::Plaintext: return "plaintext";
    case Port::Key: return "key";
    case Port::MaskIn: return "m_in";
    case Port::Mask4a: return "m4a";
    case Port::Mask4b: return "m4b";
    case Port::Mask2: return "m2";
    }
    return "?";
}

std::optional<Design> parse_design(std::string_view s) {
    for (std::size_t i = 0; i < kDesignNames.size(); ++i)
        if (s == kDesignNames[i]) return Design(i);
    if (s == "uhls") return Design::UHLS;
    if (s == "cng") return Design::CNG;
    if (s == "masked") return Design::Masked;
    return std::nullopt;
}

int Program::port_slot(Port p) const {
    for (std::size_t i = 0; i < ports.size(); ++i)
        if (ports[i].port == p) return int(i);
    return -1;
}

std::uint32_t port_view(const Program& prog, int slot, std::uint32_t raw) {
    if (prog.lanes && prog.ports[std::size_t(slot)].broadcast) return (raw & 0xFFu) | ((raw & 0xFFu) << 8);
    return raw;
}

std::uint32_t constant_raw(const Program& prog, const Operand& op) {
    return prog.lanes ? (op.index | (std::uint32_t(op.index) << 8)) : op.index;
}

std::uint32_t read_operand(const Program& prog, const Operand& op, std::span<const std::uint32_t> ports,
                           std::span<const std::uint32_t> values) {
    std::uint32_t raw = 0;
    switch (op.source) {
    case Operand::Source::Port: raw = port_view(prog, op.index, ports[op.index]); break;
    case Operand::Source::Node: raw = values[op.index]; break;
    case Operand::Source::Constant: raw = constant_raw(prog, op); break;
    }
    return slice_operand(prog, op, raw);
}

std::uint32_t slice_operand(const Program& prog, const Operand& op, std::uint32_t raw) {
    const unsigned m = lane_mask(op.width);
    if (!prog.lanes) return (raw >> op.offset) & m;
    return ((raw >> op.offset) & m) | (((raw >> (8 + op.offset)) & m) << 8);
}

std::uint32_t apply_node(const Program& prog, const Node& node, std::uint32_t a, std::uint32_t b) {
    const unsigned m = lane_mask(node.width);
    if (!prog.lanes) return apply_lane(node, a, b) & m;
    const unsigned lo = apply_lane(node, a & 0xFFu, b & 0xFFu) & m;
    const unsigned hi = apply_lane(node, (a >> 8) & 0xFFu, (b >> 8) & 0xFFu) & m;
    return lo | (hi << 8);
}

void evaluate(const Program& prog, std::span<const std::uint32_t> ports, std::span<std::uint32_t> values) {
    if (values.size() < prog.nodes.size()) throw std::invalid_argument("evaluate: value buffer too small");
    for (std::size_t i = 0; i < prog.nodes.size(); ++i) {
        const Node& n = prog.nodes[i];
        const std::uint32_t a = read_operand(prog, n.a, ports, values);
        const std::uint32_t b = n.b.width ? read_operand(prog, n.b, ports, values) : 0u;
        values[i] = apply_node(prog, n, a, b);
    }
}

unsigned glitch_weight(const Program& prog, const Node& node, std::span<const std::uint32_t> ports,
                       std::span<const std::uint32_t> values) {
    if (!node.glitch) return 0;
    const std::uint32_t v = read_operand(prog, node.glitch->masked, ports, values);
    const std::uint32_t m = read_operand(prog, node.glitch->mask, ports, values);
    return unsigned(std::popcount(v ^ m));
}

std::vector<int> fanout(const Program& prog) {
    std::vector<int> count(prog.nodes.size(), 0);
    for (const Node& n : prog.nodes) {
        if (n.a.width && n.a.source == Operand::Source::Node) ++count[n.a.index];
        if (n.b.width && n.b.source == Operand::Source::Node) ++count[n.b.index];
    }
    for (const OutputSpec& o : prog.outputs) ++count[std::size_t(o.node)];
    return count;
}

} // namespace sboxbench
