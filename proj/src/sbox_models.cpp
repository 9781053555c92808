#include "sboxbench/sbox_models.hpp"

#include <array>
#include <stdexcept>

namespace sboxbench {

namespace {

using Src = Operand::Source;

// Emits the Canright functions as dataflow. Function calls open a scope so each
// node knows which function instance it belongs to and its position there.
class Builder {
public:
    Builder(Design d, bool lanes) {
        prog_.design = d;
        prog_.lanes = lanes;
    }

    Operand port(Port p, std::uint8_t width, bool broadcast = false) {
        prog_.ports.push_back({p, width, broadcast});
        const std::uint8_t lane_width = (prog_.lanes && !broadcast) ? std::uint8_t(width / 2) : width;
        return Operand{Src::Port, std::uint16_t(prog_.ports.size() - 1), 0, lane_width};
    }

    void output(std::string name, Operand v) {
        if (v.source != Src::Node) throw std::logic_error("output must be a node");
        prog_.outputs.push_back({std::move(name), v.index});
    }

    Program finish() { return std::move(prog_); }

    static Operand hi(Operand x) {
        x.width = std::uint8_t(x.width / 2);
        x.offset = std::uint8_t(x.offset + x.width);
        return x;
    }
    static Operand lo(Operand x) {
        x.width = std::uint8_t(x.width / 2);
        return x;
    }

    class Scope {
    public:
        Scope(Builder& b, Function f) : b_(b) { b_.push(f); }
        ~Scope() { b_.pop(); }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Builder& b_;
    };

    Operand xor_(Operand a, Operand b, std::optional<Glitch> glitch = std::nullopt) {
        return emit(OpKind::Xor, a, b, a.width, glitch);
    }

    Operand xor_const(Operand a, std::uint8_t c, std::optional<Glitch> glitch = std::nullopt) {
        return emit(OpKind::XorConst, a, Operand{Src::Constant, c, 0, a.width}, a.width, glitch);
    }

    Operand concat(Operand high, Operand low) {
        return emit(OpKind::Concat, high, low, std::uint8_t(high.width + low.width));
    }

    Operand g4_mul(Operand x, Operand y) {
        Scope s(*this, Function::G4_mul);
        return emit(OpKind::G4Mul, x, y, 2);
    }
    Operand g4_sq(Operand x) {
        Scope s(*this, Function::G4_sq);
        return emit(OpKind::G4Sq, x, {}, 2);
    }
    Operand g4_scl_n(Operand x) {
        Scope s(*this, Function::G4_scl_N);
        return emit(OpKind::G4SclN, x, {}, 2);
    }
    Operand g4_scl_n2(Operand x) {
        Scope s(*this, Function::G4_scl_N2);
        return emit(OpKind::G4SclN2, x, {}, 2);
    }

    Operand g16_mul(Operand x, Operand y) {
        Scope s(*this, Function::G16_mul);
        const Operand a = hi(x), b = lo(x), c = hi(y), d = lo(y);
        const Operand e = g4_scl_n(g4_mul(xor_(a, b), xor_(c, d)));
        const Operand p = xor_(g4_mul(a, c), e);
        const Operand q = xor_(g4_mul(b, d), e);
        return concat(p, q);
    }

    Operand g16_sq_scl(Operand x) {
        Scope s(*this, Function::G16_sq_scl);
        const Operand a = hi(x), b = lo(x);
        const Operand p = g4_sq(xor_(a, b));
        const Operand q = g4_scl_n2(g4_sq(b));
        return concat(p, q);
    }

    Operand g16_inv(Operand x) {
        Scope s(*this, Function::G16_inv);
        const Operand a = hi(x), b = lo(x);
        const Operand c = g4_scl_n(g4_sq(xor_(a, b)));
        const Operand d = g4_mul(a, b);
        const Operand e = g4_sq(xor_(c, d));
        const Operand p = g4_mul(e, b);
        const Operand q = g4_mul(e, a);
        return concat(p, q);
    }

    Operand g256_inv(Operand x) {
        Scope s(*this, Function::G256_inv);
        const Operand a = hi(x), b = lo(x);
        const Operand c = g16_sq_scl(xor_(a, b));
        const Operand d = g16_mul(a, b);
        const Operand e = g16_inv(xor_(c, d));
        const Operand p = g16_mul(e, b);
        const Operand q = g16_mul(e, a);
        return concat(p, q);
    }

    Operand newbasis(Operand x, BasisMatrix m) {
        Scope s(*this, Function::G256_nb);
        Operand r = emit(OpKind::BasisChange, x, {}, 8);
        prog_.nodes.back().matrix = m;
        return r;
    }

    // x*y from shares: x = X ^ mx, y = Y ^ my, result masked by out_mask.
    // The partial sums are ordered so that each one stays masked.
    template <class Mul>
    Operand masked_mul(Operand X, Operand mx, Operand Y, Operand my, Operand out_mask, Mul mul) {
        Operand acc = xor_(mul(X, Y), out_mask);
        acc = xor_(acc, mul(X, my));
        acc = xor_(acc, mul(mx, Y));
        return xor_(acc, mul(mx, my), Glitch{Operand{}, out_mask});
    }

    // GF(2^4) inversion of F = f ^ R; output mask R, fresh 2-bit mask s.
    Operand masked_g16_inv(Operand F, Operand R, Operand s) {
        Scope sc(*this, Function::G16_inv);
        auto mul4 = [this](Operand u, Operand v) { return g4_mul(u, v); };
        const Operand G = hi(F), H = lo(F), Rh = hi(R), Rl = lo(R);
        const Operand C = g4_scl_n(g4_sq(xor_(G, H)));
        const Operand D = (masked_mul(G, Rh, H, Rl, s, mul4));
        const Operand K = xor_(C, D);
        const Operand mK = xor_(g4_scl_n(g4_sq(xor_(Rh, Rl))), s);
        const Operand E = g4_sq(K);
        const Operand mE = g4_sq(mK);
        const Operand P = (masked_mul(E, mE, H, Rl, Rh, mul4));
        const Operand Q = (masked_mul(E, mE, G, Rh, Rl, mul4));
        return concat(P, Q);
    }

    // GF(2^8) inversion of X = x ^ M; output mask M, fresh masks r1, r2 (4-bit) and s (2-bit).
    Operand masked_g256_inv(Operand X, Operand M, Operand r1, Operand r2, Operand s) {
        Scope sc(*this, Function::G256_inv);
        auto mul16 = [this](Operand u, Operand v) { return g16_mul(u, v); };
        const Operand A = hi(X), B = lo(X), mh = hi(M), ml = lo(M);
        const Operand C = g16_sq_scl(xor_(A, B));
        const Operand D = (masked_mul(A, mh, B, ml, r1, mul16));
        const Operand F = xor_(C, D);
        const Operand mF = xor_(g16_sq_scl(xor_(mh, ml)), r1);
        const Operand F1 = xor_(F, r2);
        const Operand F2 = xor_(F1, mF, Glitch{F, mF});
        const Operand E = masked_g16_inv(F2, r2, s);
        const Operand P = (masked_mul(E, r2, B, ml, mh, mul16));
        const Operand Q = (masked_mul(E, r2, A, mh, ml, mul16));
        return concat(P, Q);
    }

private:
    struct Frame {
        Function function;
        std::string path;
        std::uint16_t next_op = 0;
    };

    void push(Function f) {
        const int instance = instance_count_[std::size_t(f)]++;
        std::string path = frames_.empty() ? std::string{} : frames_.back().path + "/";
        path += std::string(to_string(f)) + "." + std::to_string(instance);
        frames_.push_back({f, std::move(path), 0});
    }
    void pop() { frames_.pop_back(); }

    Operand emit(OpKind kind, Operand a, Operand b, std::uint8_t width, std::optional<Glitch> glitch = std::nullopt) {
        Frame& f = frames_.back();
        Node n;
        n.kind = kind;
        n.function = f.function;
        n.op_index = f.next_op++;
        n.width = width;
        n.a = a;
        n.b = b;
        n.label = f.path + "#" + std::to_string(n.op_index);
        n.glitch = glitch;
        prog_.nodes.push_back(std::move(n));
        return Operand{Src::Node, std::uint16_t(prog_.nodes.size() - 1), 0, width};
    }

    Program prog_;
    std::vector<Frame> frames_;
    std::array<int, kFunctionCount> instance_count_{};
};

Program build_plain(Design d) {
    const bool lanes = d == Design::CNG;
    Builder b(d, lanes);
    const Operand pt = b.port(Port::Plaintext, 8, lanes);
    const Operand key = b.port(Port::Key, lanes ? 16 : 8);
    Builder::Scope s(b, Function::Sbox);
    const Operand x = b.xor_(pt, key);
    const Operand t = b.newbasis(x, BasisMatrix::A2X);
    const Operand inv = b.g256_inv(t);
    const Operand y = b.newbasis(inv, BasisMatrix::X2S);
    b.output("out", b.xor_const(y, canright::affine_constant));
    return b.finish();
}

Program build_masked() {
    Builder b(Design::Masked, false);
    const Operand pt = b.port(Port::Plaintext, 8);
    const Operand key = b.port(Port::Key, 8);
    const Operand m_in = b.port(Port::MaskIn, 8);
    const Operand m4a = b.port(Port::Mask4a, 4);
    const Operand m4b = b.port(Port::Mask4b, 4);
    const Operand m2 = b.port(Port::Mask2, 2);
    Builder::Scope s(b, Function::Sbox);
    const Operand masked_pt = b.xor_(pt, m_in);
    const Operand x = b.xor_(masked_pt, key, Glitch{Operand{}, m_in});
    const Operand M = b.newbasis(m_in, BasisMatrix::A2X);
    const Operand X = b.newbasis(x, BasisMatrix::A2X);
    const Operand inv = b.masked_g256_inv(X, M, m4a, m4b, m2);
    const Operand y = b.newbasis(inv, BasisMatrix::X2S);
    const Operand m_out = b.newbasis(M, BasisMatrix::X2S);
    const Operand out = b.xor_const(y, canright::affine_constant, Glitch{Operand{}, m_out});
    b.output("masked_out", out);
    b.output("m_out", m_out);
    Program prog = b.finish();
    // Glitch pairs whose masked operand is the node itself.
    for (std::size_t i = 0; i < prog.nodes.size(); ++i) {
        auto& g = prog.nodes[i].glitch;
        if (g && g->masked.width == 0) g->masked = Operand{Src::Node, std::uint16_t(i), 0, prog.nodes[i].width};
    }
    return prog;
}

void record_all(const Program& prog, std::span<const std::uint32_t> values, IntermediateSink* recorder) {
    if (!recorder) return;
    for (std::size_t i = 0; i < prog.nodes.size(); ++i) recorder->record({int(i), values[i]});
}

std::uint32_t output_value(const Program& prog, std::span<const std::uint32_t> values, std::size_t which) {
    return values[std::size_t(prog.outputs.at(which).node)];
}

} // namespace

MaskSet MaskSet::derive(std::uint8_t m_in, std::uint8_t m4a, std::uint8_t m4b, std::uint8_t m2) {
    MaskSet m;
    m.m_in = m_in;
    m.m4a = std::uint8_t(m4a & 0x0F);
    m.m4b = std::uint8_t(m4b & 0x0F);
    m.m2 = std::uint8_t(m2 & 0x03);
    m.m_in_t = basis_change(m_in, canright::A2X);
    m.m_out = basis_change(m.m_in_t, canright::X2S);
    return m;
}

MaskSet MaskSet::from_index(std::uint32_t index) {
    return derive(std::uint8_t(index & 0xFF), std::uint8_t((index >> 8) & 0x0F), std::uint8_t((index >> 12) & 0x0F),
                  std::uint8_t((index >> 16) & 0x03));
}

bool MaskSet::valid() const {
    return m4a < 16 && m4b < 16 && m2 < 4 && derive(m_in, m4a, m4b, m2) == *this;
}

const Program& design_program(Design d) {
    static const std::array<Program, 3> programs{build_plain(Design::UHLS), build_plain(Design::CNG), build_masked()};
    return programs[std::size_t(d)];
}

std::vector<std::uint32_t> port_values(const Program& prog, const DesignInputs& in) {
    std::vector<std::uint32_t> v(prog.ports.size(), 0);
    for (std::size_t i = 0; i < prog.ports.size(); ++i) {
        switch (prog.ports[i].port) {
        case Port::Plaintext: v[i] = in.plaintext; break;
        case Port::Key: v[i] = prog.lanes ? (in.key | (std::uint32_t(in.fake_key) << 8)) : in.key; break;
        case Port::MaskIn: v[i] = in.masks.m_in; break;
        case Port::Mask4a: v[i] = in.masks.m4a; break;
        case Port::Mask4b: v[i] = in.masks.m4b; break;
        case Port::Mask2: v[i] = in.masks.m2; break;
        }
    }
    return v;
}

void evaluate_design(Design d, const DesignInputs& in, std::span<std::uint32_t> values) {
    const Program& prog = design_program(d);
    const auto ports = port_values(prog, in);
    evaluate(prog, ports, values);
}

std::uint8_t sbox_unprotected(std::uint8_t plaintext, std::uint8_t key, IntermediateSink* recorder) {
    const Program& prog = design_program(Design::UHLS);
    std::vector<std::uint32_t> values(prog.size());
    evaluate_design(Design::UHLS, {plaintext, key, 0, {}}, values);
    record_all(prog, values, recorder);
    return std::uint8_t(output_value(prog, values, 0));
}

CngOutput sbox_cng(std::uint8_t plaintext, std::uint8_t key, std::uint8_t fake_key, IntermediateSink* recorder) {
    const Program& prog = design_program(Design::CNG);
    std::vector<std::uint32_t> values(prog.size());
    evaluate_design(Design::CNG, {plaintext, key, fake_key, {}}, values);
    record_all(prog, values, recorder);
    const std::uint32_t out = output_value(prog, values, 0);
    CngOutput r;
    r.true_out = std::uint8_t(out & 0xFF);
    r.fake_out = std::uint8_t(out >> 8);
    r.alarm = cng_alarm(plaintext, fake_key, r.fake_out);
    return r;
}

MaskedOutput sbox_masked(std::uint8_t plaintext, std::uint8_t key, const MaskSet& masks, IntermediateSink* recorder) {
    if (!masks.valid()) throw std::invalid_argument("sbox_masked: inconsistent mask set");
    const Program& prog = design_program(Design::Masked);
    std::vector<std::uint32_t> values(prog.size());
    evaluate_design(Design::Masked, {plaintext, key, 0, masks}, values);
    record_all(prog, values, recorder);
    return {std::uint8_t(output_value(prog, values, 0)), std::uint8_t(output_value(prog, values, 1))};
}

bool cng_alarm(std::uint8_t plaintext, std::uint8_t fake_key, std::uint8_t fake_out) {
    return fake_out != tower_sbox(std::uint8_t(plaintext ^ fake_key));
}

std::vector<IntermediateDescriptor> enumerate_intermediates(Design d) {
    const Program& prog = design_program(d);
    std::vector<IntermediateDescriptor> out;
    out.reserve(prog.size());
    for (std::size_t i = 0; i < prog.size(); ++i) {
        const Node& n = prog.nodes[i];
        out.push_back({int(i), n.function, n.op_index, prog.lanes ? 16 : int(n.width), n.label});
    }
    return out;
}

} // namespace sboxbench
