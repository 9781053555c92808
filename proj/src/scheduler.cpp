#include "sboxbench/scheduler.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <map>
#include <stdexcept>

namespace sboxbench {

namespace {

using Src = Operand::Source;

bool is_loop(const Node& n, Profile p) { return n.kind == OpKind::BasisChange && p != Profile::Unrolled; }

std::vector<std::vector<int>> consumers(const Program& prog) {
    std::vector<std::vector<int>> c(prog.size());
    for (std::size_t i = 0; i < prog.size(); ++i) {
        const Node& n = prog.nodes[i];
        if (n.a.width && n.a.source == Src::Node) c[n.a.index].push_back(int(i));
        if (n.b.width && n.b.source == Src::Node && !(n.a.source == Src::Node && n.a.index == n.b.index))
            c[n.b.index].push_back(int(i));
    }
    return c;
}

class ScheduleBuilder {
public:
    ScheduleBuilder(Design d, Profile p) : prog_(design_program(d)) {
        s_.design = d;
        s_.profile = p;
        s_.binding.assign(prog_.size(), {});
        users_ = consumers(prog_);
        is_output_.assign(prog_.size(), false);
        for (const OutputSpec& o : prog_.outputs) is_output_[std::size_t(o.node)] = true;
    }

    Schedule build() {
        add_ports();
        decide_registered();
        if (s_.profile == Profile::Unrolled)
            place_flat();
        else
            place_steps();
        s_.steps.push_back({StepKind::Done, {}});
        allocate_registers();
        add_control();
        int cycle = 0;
        for (std::size_t i = 0; i < s_.steps.size(); ++i) {
            s_.step_cycle.push_back(cycle);
            cycle += s_.step_length(int(i));
        }
        s_.nominal_latency = cycle;
        return std::move(s_);
    }

private:
    int data_width(int node_width) const { return prog_.lanes ? 2 * node_width : node_width; }

    int add_register(std::string name, int width, RegisterKind kind, bool lane_packed) {
        s_.registers.push_back({std::move(name), width, kind, lane_packed});
        return int(s_.registers.size() - 1);
    }

    void add_ports() {
        for (const PortSpec& p : prog_.ports) {
            const bool packed = prog_.lanes && !p.broadcast;
            s_.port_register.push_back(add_register("in_" + std::string(to_string(p.port)), p.width, RegisterKind::Data, packed));
        }
    }

    void decide_registered() {
        registered_.assign(prog_.size(), true);
        if (s_.profile == Profile::Rolled) return;
        for (std::size_t i = 0; i < prog_.size(); ++i) {
            const Node& n = prog_.nodes[i];
            if (is_output_[i]) continue;
            if (s_.profile == Profile::Unrolled) {
                registered_[i] = false;
                continue;
            }
            // Modular: XORs local to a function with one reader stay combinational,
            // function results and anything feeding a memory-backed loop get a register.
            const bool local_xor = n.kind == OpKind::Xor && n.function != Function::Sbox;
            const bool single = users_[i].size() == 1;
            const bool feeds_loop = single && is_loop(prog_.nodes[std::size_t(users_[i][0])], s_.profile);
            registered_[i] = !(local_xor && single && !feeds_loop);
        }
    }

    void place_flat() {
        s_.steps.push_back({StepKind::Compute, {}});
        for (std::size_t i = 0; i < prog_.size(); ++i) {
            s_.binding[i].step = 0;
            s_.steps[0].nodes.push_back(int(i));
        }
    }

    // Earliest step at which node i's operands are available.
    int ready(int i) const {
        const Node& n = prog_.nodes[std::size_t(i)];
        int r = 0;
        for (const Operand* op : {&n.a, &n.b}) {
            if (!op->width || op->source != Src::Node) continue;
            const int p = op->index;
            r = std::max(r, registered_[std::size_t(p)] ? s_.binding[std::size_t(p)].step + 1 : net_ready_[std::size_t(p)]);
        }
        return r;
    }

    Step& step_at(int s) {
        while (int(s_.steps.size()) <= s) {
            s_.steps.push_back({StepKind::Compute, {}});
            muls_.push_back(0);
        }
        return s_.steps[std::size_t(s)];
    }

    void pull_nets(int i, int step) {
        const Node& n = prog_.nodes[std::size_t(i)];
        for (const Operand* op : {&n.a, &n.b}) {
            if (!op->width || op->source != Src::Node) continue;
            const int p = op->index;
            if (registered_[std::size_t(p)] || s_.binding[std::size_t(p)].step >= 0) continue;
            s_.binding[std::size_t(p)].step = step;
            s_.steps[std::size_t(step)].nodes.push_back(p);
            pull_nets(p, step);
        }
    }

    void place_steps() {
        net_ready_.assign(prog_.size(), 0);
        const bool limit_muls = s_.profile == Profile::Rolled;
        const bool prefetch = s_.profile == Profile::Modular;
        for (int i = 0; i < int(prog_.size()); ++i) {
            const Node& n = prog_.nodes[std::size_t(i)];
            const int earliest = ready(i);
            if (!registered_[std::size_t(i)]) {
                net_ready_[std::size_t(i)] = earliest;
                continue;
            }
            int s = earliest;
            if (is_loop(n, s_.profile)) {
                // a loop owns its step; the memory profile also needs a free step for the prefetch
                while (!step_at(s).nodes.empty() || step_at(s).kind != StepKind::Compute ||
                       (prefetch && (!step_at(s + 1).nodes.empty() || step_at(s + 1).kind != StepKind::Compute)))
                    ++s;
                if (prefetch) {
                    s_.steps[std::size_t(s)].kind = StepKind::Prefetch;
                    ++s;
                }
                s_.steps[std::size_t(s)].kind = StepKind::Loop;
            } else {
                while (step_at(s).kind != StepKind::Compute || (limit_muls && n.kind == OpKind::G4Mul && muls_[std::size_t(s)] >= 2))
                    ++s;
            }
            s_.binding[std::size_t(i)].step = s;
            s_.steps[std::size_t(s)].nodes.push_back(i);
            muls_[std::size_t(s)] += n.kind == OpKind::G4Mul;
            pull_nets(i, s);
        }
        for (Step& st : s_.steps) std::sort(st.nodes.begin(), st.nodes.end());
        // drop steps left empty by the loop search
        std::vector<int> remap(s_.steps.size(), -1);
        std::vector<Step> kept;
        for (std::size_t k = 0; k < s_.steps.size(); ++k) {
            if (s_.steps[k].nodes.empty() && s_.steps[k].kind == StepKind::Compute) continue;
            remap[k] = int(kept.size());
            kept.push_back(std::move(s_.steps[k]));
        }
        s_.steps = std::move(kept);
        for (Binding& b : s_.binding) b.step = remap[std::size_t(b.step)];
    }

    struct Slot {
        int reg;
        int free_after; // last step reading the current occupant
        bool strict;    // occupant is read by a loop: the next writer must come strictly later
    };

    void allocate_registers() {
        std::vector<int> last_use(prog_.size(), -1);
        std::vector<bool> read_by_loop(prog_.size(), false);
        for (std::size_t i = 0; i < prog_.size(); ++i)
            for (int c : users_[i]) {
                last_use[i] = std::max(last_use[i], s_.binding[std::size_t(c)].step);
                if (s_.steps[std::size_t(s_.binding[std::size_t(c)].step)].kind == StepKind::Loop) read_by_loop[i] = true;
            }

        std::vector<int> order;
        for (std::size_t i = 0; i < prog_.size(); ++i)
            if (registered_[i] && !is_output_[i]) order.push_back(int(i));
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return s_.binding[std::size_t(a)].step < s_.binding[std::size_t(b)].step; });

        std::map<int, std::vector<Slot>> pools; // by register width
        for (int i : order) {
            const Node& n = prog_.nodes[std::size_t(i)];
            const int def = s_.binding[std::size_t(i)].step;
            const bool loop = is_loop(n, s_.profile);
            const int w = data_width(n.width);
            auto& pool = pools[w];
            Slot* chosen = nullptr;
            for (Slot& sl : pool) {
                const bool ok = (loop || sl.strict) ? def > sl.free_after : def >= sl.free_after;
                if (ok) {
                    chosen = &sl;
                    break;
                }
            }
            if (!chosen) {
                const int r = add_register("r" + std::to_string(w) + "_" + std::to_string(pool.size()), w,
                                           RegisterKind::Data, prog_.lanes);
                pool.push_back({r, -1, false});
                chosen = &pool.back();
            }
            s_.binding[std::size_t(i)].reg = chosen->reg;
            chosen->free_after = last_use[std::size_t(i)] < 0 ? def : last_use[std::size_t(i)];
            chosen->strict = read_by_loop[std::size_t(i)] || loop;
        }

        for (const OutputSpec& o : prog_.outputs) {
            const Node& n = prog_.nodes[std::size_t(o.node)];
            const int r = add_register(o.name, data_width(n.width), RegisterKind::Data, prog_.lanes);
            s_.binding[std::size_t(o.node)].reg = r;
            s_.output_register.push_back(r);
        }
    }

    void add_control() {
        // one-hot state split into 32-bit words
        const int states = int(s_.steps.size());
        for (int base = 0; base < states; base += 32)
            s_.fsm_registers.push_back(add_register("fsm" + std::to_string(base / 32), std::min(32, states - base),
                                                    RegisterKind::Control, false));
        const bool has_loop =
            std::any_of(s_.steps.begin(), s_.steps.end(), [](const Step& st) { return st.kind == StepKind::Loop; });
        if (!has_loop) return;
        s_.counter_register = add_register("loop_ctr", kLoopIterations, RegisterKind::Control, false);
        if (s_.profile == Profile::Modular)
            s_.memory_register = add_register("mem_rd", prog_.lanes ? 16 : 8, RegisterKind::MemoryRead, prog_.lanes);
    }

    const Program& prog_;
    Schedule s_;
    std::vector<std::vector<int>> users_;
    std::vector<bool> is_output_;
    std::vector<bool> registered_;
    std::vector<int> net_ready_;
    std::vector<int> muls_;
};

const BitMatrix8& matrix_of(BasisMatrix m) { return m == BasisMatrix::A2X ? canright::A2X : canright::X2S; }

std::uint32_t mask_bits(int w) { return w >= 32 ? 0xFFFFFFFFu : (1u << w) - 1u; }

bool one_hot(std::uint32_t v) { return std::has_single_bit(v); }

} // namespace

std::string_view to_string(Profile p) {
    switch (p) {
    case Profile::Rolled: return "Rolled";
    case Profile::Unrolled: return "Unrolled";
    case Profile::Modular: return "Modular";
    }
    return "?";
}

std::optional<Profile> parse_profile(std::string_view s) {
    if (s == "Rolled" || s == "rolled" || s == "sol1") return Profile::Rolled;
    if (s == "Unrolled" || s == "unrolled" || s == "sol2") return Profile::Unrolled;
    if (s == "Modular" || s == "modular" || s == "sol3") return Profile::Modular;
    return std::nullopt;
}

std::string_view to_string(RegisterKind k) {
    switch (k) {
    case RegisterKind::Data: return "data";
    case RegisterKind::Control: return "control";
    case RegisterKind::MemoryRead: return "memory_read";
    }
    return "?";
}

std::string_view to_string(SliceClass s) {
    switch (s) {
    case SliceClass::Shared: return "shared";
    case SliceClass::TrueSlice: return "true_slice";
    case SliceClass::FakeSlice: return "fake_slice";
    }
    return "?";
}

int Schedule::total_register_bits() const {
    int n = 0;
    for (const RegisterSpec& r : registers) n += r.width;
    return n;
}

SliceClass Schedule::slice_of(int reg, int bit) const {
    const RegisterSpec& r = registers.at(std::size_t(reg));
    if (!r.lane_packed) return SliceClass::Shared;
    return bit < r.width / 2 ? SliceClass::TrueSlice : SliceClass::FakeSlice;
}

int Schedule::step_length(int step) const {
    return steps.at(std::size_t(step)).kind == StepKind::Loop ? kLoopIterations : 1;
}

Schedule build_schedule(Design design, Profile profile) {
    if (std::size_t(design) > 2 || std::size_t(profile) > 2) throw std::invalid_argument("build_schedule: unknown design/profile");
    return ScheduleBuilder(design, profile).build();
}

std::uint32_t encode_register(const Schedule& s, int reg, std::uint32_t value) {
    const RegisterSpec& r = s.registers[std::size_t(reg)];
    if (!r.lane_packed) return value & mask_bits(r.width);
    const int w = r.width / 2;
    return (value & mask_bits(w)) | (((value >> 8) & mask_bits(w)) << w);
}

std::uint32_t decode_register(const Schedule& s, int reg, std::uint32_t bits) {
    const RegisterSpec& r = s.registers[std::size_t(reg)];
    if (!r.lane_packed) return bits;
    const int w = r.width / 2;
    return (bits & mask_bits(w)) | (((bits >> w) & mask_bits(w)) << 8);
}

int default_watchdog(const Schedule& s) { return 4 * s.nominal_latency; }

namespace {

class Machine {
public:
    Machine(const Schedule& s, TraceDetail detail) : s_(s), prog_(s.program()), detail_(detail) {
        regs_.assign(s.registers.size(), 0);
        nets_.assign(prog_.size(), 0);
    }

    void load(const DesignInputs& in) {
        const auto ports = port_values(prog_, in);
        for (std::size_t i = 0; i < ports.size(); ++i)
            regs_[std::size_t(s_.port_register[i])] = ports[i] & mask_bits(s_.registers[std::size_t(s_.port_register[i])].width);
        regs_[std::size_t(s_.fsm_registers.front())] = 1u;
        if (s_.steps.front().kind == StepKind::Loop) regs_[std::size_t(s_.counter_register)] = 1u;
    }

    ExecutionTrace run(std::span<const ScheduledFlip> faults, int watchdog) {
        ExecutionTrace t;
        std::size_t next_fault = 0;
        std::vector<ScheduledFlip> plan(faults.begin(), faults.end());
        std::stable_sort(plan.begin(), plan.end(), [](const ScheduledFlip& a, const ScheduledFlip& b) { return a.cycle < b.cycle; });
        for (int cycle = 0; cycle < watchdog; ++cycle) {
            for (; next_fault < plan.size() && plan[next_fault].cycle <= cycle; ++next_fault) {
                const ScheduledFlip& f = plan[next_fault];
                if (f.cycle == cycle) regs_[std::size_t(f.reg)] ^= 1u << f.bit;
            }
            CycleRecord rec;
            const bool done = step_cycle(rec);
            if (detail_ == TraceDetail::Full) rec.registers = regs_;
            if (detail_ != TraceDetail::Outputs) t.cycles.push_back(std::move(rec));
            if (done) {
                t.status = ExecStatus::Completed;
                t.cycles_used = cycle + 1;
                for (int r : s_.output_register) t.outputs.push_back(decode_register(s_, r, regs_[std::size_t(r)]));
                return t;
            }
        }
        t.status = ExecStatus::Hung;
        t.cycles_used = watchdog;
        return t;
    }

private:
    std::uint32_t reg_value(int r) const { return decode_register(s_, r, regs_[std::size_t(r)]); }

    std::uint32_t fetch(const Operand& op) const {
        std::uint32_t raw = 0;
        switch (op.source) {
        case Src::Port: raw = port_view(prog_, op.index, regs_[std::size_t(s_.port_register[op.index])]); break;
        case Src::Node: {
            const int r = s_.binding[op.index].reg;
            raw = r >= 0 ? reg_value(r) : nets_[op.index];
            break;
        }
        case Src::Constant: raw = constant_raw(prog_, op); break;
        }
        return slice_operand(prog_, op, raw);
    }

    // Later writes to the same register in one cycle win.
    void write(int reg, std::uint32_t value_bits) {
        value_bits &= mask_bits(s_.registers[std::size_t(reg)].width);
        for (RegisterWrite& w : pending_)
            if (w.reg == reg) {
                w.new_bits = value_bits;
                return;
            }
        pending_.push_back({reg, regs_[std::size_t(reg)], value_bits});
    }

    // Active state, or -1 when the one-hot encoding is broken.
    int decode_state() const {
        int active = -1;
        for (std::size_t w = 0; w < s_.fsm_registers.size(); ++w) {
            const std::uint32_t v = regs_[std::size_t(s_.fsm_registers[w])];
            if (!v) continue;
            if (active >= 0 || !one_hot(v)) return -1;
            active = int(w) * 32 + std::countr_zero(v);
        }
        return active;
    }

    void set_state(int from, int to) {
        write(s_.fsm_registers[std::size_t(from / 32)], 0);
        write(s_.fsm_registers[std::size_t(to / 32)], 1u << (to % 32));
    }

    void write_node(CycleRecord& rec, int node, std::uint32_t value) {
        const int r = s_.binding[std::size_t(node)].reg;
        if (r < 0) {
            nets_[std::size_t(node)] = value;
            if (detail_ != TraceDetail::Outputs) rec.nodes.push_back({node, value, -1, 0});
            return;
        }
        if (detail_ != TraceDetail::Outputs) rec.nodes.push_back({node, value, r, reg_value(r)});
        write(r, encode_register(s_, r, value));
    }

    std::uint32_t column_value(BasisMatrix m, int t) const {
        const std::uint32_t c = matrix_of(m).column(t);
        return prog_.lanes ? (c | (c << 8)) : c;
    }

    // Executes one cycle; returns true when the DONE state was active.
    bool step_cycle(CycleRecord& rec) {
        pending_.clear();
        const int step = decode_state();
        if (step < 0) return false; // stuck
        rec.step = step;
        const Step& st = s_.steps[std::size_t(step)];
        bool advance = true;

        switch (st.kind) {
        case StepKind::Done: return true;
        case StepKind::Compute:
            for (int n : st.nodes) {
                const Node& node = prog_.nodes[std::size_t(n)];
                const std::uint32_t a = fetch(node.a);
                const std::uint32_t b = node.b.width ? fetch(node.b) : 0u;
                write_node(rec, n, apply_node(prog_, node, a, b));
            }
            break;
        case StepKind::Prefetch: {
            const Node& loop = prog_.nodes[std::size_t(s_.steps[std::size_t(step + 1)].nodes.front())];
            write(s_.memory_register, encode_register(s_, s_.memory_register, column_value(loop.matrix, 0)));
            write(s_.counter_register, 1u);
            break;
        }
        case StepKind::Loop: {
            const std::uint32_t ctr = regs_[std::size_t(s_.counter_register)];
            if (!one_hot(ctr)) return false; // counter outside its encoding: the loop never exits
            const int it = std::countr_zero(ctr);
            const int n = st.nodes.front();
            const Node& node = prog_.nodes[std::size_t(n)];
            const std::uint32_t x = fetch(node.a);
            const int acc_reg = s_.binding[std::size_t(n)].reg;
            const std::uint32_t col = s_.memory_register >= 0 ? reg_value(s_.memory_register) : column_value(node.matrix, it);
            std::uint32_t acc = it == 0 ? 0u : reg_value(acc_reg);
            if ((x >> it) & 1u) acc ^= col & 0xFFu;
            if (prog_.lanes && ((x >> (8 + it)) & 1u)) acc ^= col & 0xFF00u;
            if (it + 1 < kLoopIterations) {
                write(acc_reg, encode_register(s_, acc_reg, acc));
                write(s_.counter_register, ctr << 1);
                if (s_.memory_register >= 0)
                    write(s_.memory_register,
                          encode_register(s_, s_.memory_register, column_value(node.matrix, it + 1)));
                advance = false;
            } else {
                write_node(rec, n, acc);
                write(s_.counter_register, 0);
            }
            break;
        }
        }

        if (advance) {
            const int next = step + 1;
            set_state(step, next);
            if (s_.steps[std::size_t(next)].kind == StepKind::Loop && st.kind != StepKind::Prefetch)
                write(s_.counter_register, 1u);
        }
        for (const RegisterWrite& w : pending_) {
            regs_[std::size_t(w.reg)] = w.new_bits;
            if (detail_ != TraceDetail::Outputs) rec.writes.push_back(w);
        }
        return false;
    }

    const Schedule& s_;
    const Program& prog_;
    TraceDetail detail_;
    std::vector<std::uint32_t> regs_;
    std::vector<std::uint32_t> nets_;
    std::vector<RegisterWrite> pending_;
};

} // namespace

ExecutionTrace execute(const Schedule& s, const DesignInputs& in, std::span<const ScheduledFlip> faults, int watchdog,
                       TraceDetail detail) {
    if (watchdog == 0) watchdog = default_watchdog(s);
    if (watchdog < s.nominal_latency) throw std::invalid_argument("execute: watchdog below nominal latency");
    Machine m(s, detail);
    m.load(in);
    return m.run(faults, watchdog);
}

void to_json(nlohmann::json& j, const Schedule& s) {
    const Program& prog = s.program();
    auto source_name = [&](const Operand& op) -> std::string {
        switch (op.source) {
        case Src::Port: return s.registers[std::size_t(s.port_register[op.index])].name;
        case Src::Constant: return "const:" + std::to_string(op.index);
        case Src::Node: {
            const int r = s.binding[op.index].reg;
            return r >= 0 ? s.registers[std::size_t(r)].name : "net:" + std::to_string(op.index);
        }
        }
        return "?";
    };

    j = nlohmann::json::object();
    j["design"] = std::string(to_string(s.design));
    j["profile"] = std::string(to_string(s.profile));
    j["nominal_latency"] = s.nominal_latency;
    j["register_bits"] = s.total_register_bits();
    auto& regs = j["registers"] = nlohmann::json::array();
    for (const RegisterSpec& r : s.registers)
        regs.push_back({{"name", r.name}, {"width", r.width}, {"kind", std::string(to_string(r.kind))}, {"lane_packed", r.lane_packed}});

    auto& steps = j["steps"] = nlohmann::json::array();
    static constexpr std::string_view kinds[] = {"compute", "prefetch", "loop", "done"};
    for (std::size_t k = 0; k < s.steps.size(); ++k) {
        const Step& st = s.steps[k];
        nlohmann::json ops = nlohmann::json::array();
        for (int n : st.nodes) {
            const Node& node = prog.nodes[std::size_t(n)];
            nlohmann::json src = nlohmann::json::array();
            src.push_back(source_name(node.a));
            if (node.b.width) src.push_back(source_name(node.b));
            const int r = s.binding[std::size_t(n)].reg;
            ops.push_back({{"node", n},
                           {"label", node.label},
                           {"op", std::string(to_string(node.kind))},
                           {"sources", src},
                           {"dest", r >= 0 ? s.registers[std::size_t(r)].name : "net:" + std::to_string(n)}});
        }
        steps.push_back({{"index", k},
                         {"kind", std::string(kinds[std::size_t(st.kind)])},
                         {"first_cycle", s.step_cycle[k]},
                         {"cycles", s.step_length(int(k))},
                         {"ops", ops}});
    }
}

} // namespace sboxbench
