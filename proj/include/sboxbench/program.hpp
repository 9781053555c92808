#pragma once

// Dataflow form of an S-box design. Each node is one elementary operation and
// produces one recorded intermediate; operands are bit slices of ports, earlier
// nodes or constants. The scheduler binds these nodes to cycles and registers.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sboxbench {

enum class Design : std::uint8_t { UHLS, CNG, Masked };

/// Function of the Canright code an operation belongs to.
enum class Function : std::uint8_t {
    Sbox,
    G256_nb,
    G256_inv,
    G16_sq_scl,
    G16_mul,
    G16_inv,
    G4_scl_N,
    G4_scl_N2,
    G4_mul,
    G4_sq,
};

inline constexpr int kFunctionCount = 10;

enum class OpKind : std::uint8_t { Xor, XorConst, Concat, G4Mul, G4Sq, G4SclN, G4SclN2, BasisChange };

enum class Port : std::uint8_t { Plaintext, Key, MaskIn, Mask4a, Mask4b, Mask2 };

enum class BasisMatrix : std::uint8_t { A2X, X2S };

std::string_view to_string(Design d);
std::string_view to_string(Function f);
std::string_view to_string(OpKind k);
std::string_view to_string(Port p);
std::optional<Design> parse_design(std::string_view s);

struct Operand {
    enum class Source : std::uint8_t { Port, Node, Constant };
    Source source = Source::Node;
    std::uint16_t index = 0; // port slot, node id, or the constant itself
    std::uint8_t offset = 0; // slice start within each lane
    std::uint8_t width = 0;  // slice width within each lane
};

struct Glitch {
    Operand masked;
    Operand mask;
};

struct Node {
    OpKind kind = OpKind::Xor;
    Function function = Function::Sbox;
    std::uint16_t op_index = 0; // position within the enclosing function instance
    std::uint8_t width = 0;     // lane width in bits
    Operand a;
    Operand b;
    BasisMatrix matrix = BasisMatrix::A2X;
    std::string label;
    std::optional<Glitch> glitch; // remasking step that may recombine shares
};

struct PortSpec {
    Port port;
    std::uint8_t width; // register width
    bool broadcast;     // lane mode: one physical value feeds both lanes
};

struct OutputSpec {
    std::string name;
    int node;
};

/// In lane mode (CNG) every value carries two lanes: low byte = true key slice,
/// high byte = fake key slice, each lane holding a `width`-bit value.
struct Program {
    Design design = Design::UHLS;
    bool lanes = false;
    std::vector<PortSpec> ports;
    std::vector<Node> nodes;
    std::vector<OutputSpec> outputs;

    int port_slot(Port p) const;
    std::size_t size() const { return nodes.size(); }
};

/// Raw (unsliced) value of a constant operand, duplicated into both lanes in lane mode.
std::uint32_t constant_raw(const Program& prog, const Operand& op);

/// Extracts an operand's slice from the raw value of its source.
std::uint32_t slice_operand(const Program& prog, const Operand& op, std::uint32_t raw);

/// Reads an operand from already-computed values. Lane mode keeps lanes at bit 0 and 8.
std::uint32_t read_operand(const Program& prog, const Operand& op, std::span<const std::uint32_t> ports,
                           std::span<const std::uint32_t> values);

/// Applies a node's operation to operand values (per lane in lane mode).
std::uint32_t apply_node(const Program& prog, const Node& node, std::uint32_t a, std::uint32_t b);

/// Port values as seen by the datapath (broadcast ports duplicated into both lanes).
std::uint32_t port_view(const Program& prog, int slot, std::uint32_t raw);

/// Evaluates all nodes in order. `ports` holds raw port values indexed by slot.
void evaluate(const Program& prog, std::span<const std::uint32_t> ports, std::span<std::uint32_t> values);

/// Hamming weight of the share recombination a glitch at `node` would expose.
unsigned glitch_weight(const Program& prog, const Node& node, std::span<const std::uint32_t> ports,
                       std::span<const std::uint32_t> values);

/// Number of consumers of each node (outputs count as consumers).
std::vector<int> fanout(const Program& prog);

} // namespace sboxbench
