#include "sboxbench/scheduler.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <bit>
#include <random>

using namespace sboxbench;

namespace {

constexpr Design kDesigns[] = {Design::UHLS, Design::CNG, Design::Masked};
constexpr Profile kProfiles[] = {Profile::Rolled, Profile::Unrolled, Profile::Modular};

std::vector<std::uint32_t> pure_outputs(Design d, const DesignInputs& in) {
    const Program& prog = design_program(d);
    std::vector<std::uint32_t> v(prog.size());
    evaluate_design(d, in, v);
    std::vector<std::uint32_t> out;
    for (const OutputSpec& o : prog.outputs) out.push_back(v[std::size_t(o.node)]);
    return out;
}

} // namespace

TEST(Scheduler, FaultFreeMatchesPureModel) {
    std::mt19937 rng(5);
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            const Schedule s = build_schedule(d, p);
            for (int k = 0; k < 8; ++k) {
                const std::uint8_t key = std::uint8_t(rng());
                for (unsigned pt = 0; pt < 256; ++pt) {
                    DesignInputs in{std::uint8_t(pt), key, std::uint8_t(key ^ 0xA5), MaskSet::from_index(rng() % kMaskCombinations)};
                    const ExecutionTrace t = execute(s, in, {}, 0, TraceDetail::Outputs);
                    ASSERT_EQ(t.status, ExecStatus::Completed);
                    ASSERT_EQ(t.cycles_used, s.nominal_latency);
                    ASSERT_EQ(t.outputs, pure_outputs(d, in)) << to_string(d) << "/" << to_string(p) << " pt=" << pt;
                }
            }
        }
}

TEST(Scheduler, Deterministic) {
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            nlohmann::json a = build_schedule(d, p), b = build_schedule(d, p);
            EXPECT_EQ(a.dump(), b.dump());
        }
}

TEST(Scheduler, ProfileShapes) {
    for (Design d : kDesigns) {
        const Schedule rolled = build_schedule(d, Profile::Rolled);
        const Schedule flat = build_schedule(d, Profile::Unrolled);
        const Schedule modular = build_schedule(d, Profile::Modular);
        EXPECT_GT(rolled.nominal_latency, flat.nominal_latency);
        EXPECT_LT(flat.nominal_latency, 10);
        EXPECT_LT(flat.total_register_bits(), rolled.total_register_bits());
        EXPECT_LT(flat.total_register_bits(), modular.total_register_bits());
        EXPECT_GE(rolled.counter_register, 0);
        EXPECT_GE(modular.memory_register, 0);
        EXPECT_LT(flat.counter_register, 0);
        EXPECT_LT(rolled.memory_register, 0);
    }
    // only I/O, FSM: plaintext + key + output + two state bits
    EXPECT_EQ(build_schedule(Design::UHLS, Profile::Unrolled).total_register_bits(), 26);
    EXPECT_EQ(build_schedule(Design::UHLS, Profile::Unrolled).nominal_latency, 2);
}

TEST(Scheduler, ModularPaysForMemoryReads) {
    for (Design d : kDesigns) {
        const Schedule m = build_schedule(d, Profile::Modular);
        int prefetch = 0, loops = 0;
        for (const Step& st : m.steps) {
            prefetch += st.kind == StepKind::Prefetch;
            loops += st.kind == StepKind::Loop;
        }
        EXPECT_EQ(prefetch, loops);
        EXPECT_GT(loops, 0);
    }
}

TEST(Scheduler, SourcesWrittenEarlier) {
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            const Schedule s = build_schedule(d, p);
            const Program& prog = s.program();
            for (std::size_t i = 0; i < prog.size(); ++i) {
                const Binding& b = s.binding[i];
                ASSERT_GE(b.step, 0);
                for (const Operand* op : {&prog.nodes[i].a, &prog.nodes[i].b}) {
                    if (!op->width || op->source != Operand::Source::Node) continue;
                    const Binding& src = s.binding[op->index];
                    if (src.reg >= 0)
                        EXPECT_LT(src.step, b.step);
                    else // nets are evaluated earlier in the same cycle
                        EXPECT_EQ(src.step, b.step);
                }
            }
        }
}

TEST(Scheduler, SnapshotsHoldEveryIntermediate) {
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            const Schedule s = build_schedule(d, p);
            const Program& prog = s.program();
            const DesignInputs in{0x3A, 0xC5, 0x19, MaskSet::from_index(0x2F0F1)};
            std::vector<std::uint32_t> values(prog.size());
            evaluate_design(d, in, values);
            const ExecutionTrace t = execute(s, in);
            std::vector<int> seen(prog.size(), 0);
            for (std::size_t c = 0; c < t.cycles.size(); ++c)
                for (const NodeEvent& e : t.cycles[c].nodes) {
                    ++seen[std::size_t(e.node)];
                    EXPECT_EQ(e.value, values[std::size_t(e.node)]);
                    EXPECT_EQ(int(c) >= s.step_cycle[std::size_t(s.binding[std::size_t(e.node)].step)], true);
                    if (e.reg >= 0) EXPECT_EQ(t.cycles[c].registers[std::size_t(e.reg)], encode_register(s, e.reg, e.value));
                }
            for (std::size_t i = 0; i < prog.size(); ++i) EXPECT_EQ(seen[i], 1) << prog.nodes[i].label;
        }
}

TEST(Scheduler, OutputFlipAtFinalCycleFlipsOneBit) {
    for (Design d : kDesigns)
        for (Profile p : kProfiles) {
            const Schedule s = build_schedule(d, p);
            const DesignInputs in{0x77, 0x01, 0xEE, MaskSet::from_index(999)};
            const ExecutionTrace golden = execute(s, in, {}, 0, TraceDetail::Outputs);
            const int r = s.output_register[0];
            for (int bit = 0; bit < s.registers[std::size_t(r)].width; ++bit) {
                const ScheduledFlip f{s.nominal_latency - 1, r, bit};
                const ExecutionTrace t = execute(s, in, std::span(&f, 1), 0, TraceDetail::Outputs);
                ASSERT_EQ(t.status, ExecStatus::Completed);
                const std::uint32_t diff = encode_register(s, r, t.outputs[0]) ^ encode_register(s, r, golden.outputs[0]);
                EXPECT_EQ(diff, 1u << bit);
            }
        }
}

TEST(Scheduler, BrokenStateEncodingHangs) {
    for (Design d : kDesigns)
        for (Profile p : {Profile::Rolled, Profile::Modular}) {
            const Schedule s = build_schedule(d, p);
            // set a second state bit mid-run: two active states is unreachable in one-hot
            const int reg = s.fsm_registers.back();
            const ScheduledFlip f{2, reg, s.registers[std::size_t(reg)].width - 1};
            const ExecutionTrace t = execute(s, {1, 2, 3, MaskSet::from_index(4)}, std::span(&f, 1), 0, TraceDetail::Outputs);
            EXPECT_EQ(t.status, ExecStatus::Hung);
            EXPECT_EQ(t.cycles_used, default_watchdog(s));
            EXPECT_TRUE(t.outputs.empty());
        }
}

TEST(Scheduler, CounterCorruptionHangs) {
    const Schedule s = build_schedule(Design::UHLS, Profile::Rolled);
    int loop_start = -1;
    for (std::size_t k = 0; k < s.steps.size(); ++k)
        if (s.steps[k].kind == StepKind::Loop) {
            loop_start = s.step_cycle[k];
            break;
        }
    ASSERT_GE(loop_start, 0);
    const ScheduledFlip f{loop_start + 3, s.counter_register, 3};
    EXPECT_EQ(execute(s, {}, std::span(&f, 1)).status, ExecStatus::Hung);
}

TEST(Scheduler, WatchdogBelowLatencyRejected) {
    const Schedule s = build_schedule(Design::UHLS, Profile::Rolled);
    EXPECT_THROW(execute(s, {}, {}, s.nominal_latency - 1), std::invalid_argument);
    EXPECT_EQ(execute(s, {}, {}, s.nominal_latency).status, ExecStatus::Completed);
}

TEST(Scheduler, CngRegistersSplitIntoSlices) {
    const Schedule s = build_schedule(Design::CNG, Profile::Rolled);
    const int pt = s.port_register[std::size_t(s.program().port_slot(Port::Plaintext))];
    const int key = s.port_register[std::size_t(s.program().port_slot(Port::Key))];
    EXPECT_EQ(s.slice_of(pt, 0), SliceClass::Shared);
    EXPECT_EQ(s.slice_of(key, 0), SliceClass::TrueSlice);
    EXPECT_EQ(s.slice_of(key, 15), SliceClass::FakeSlice);
    EXPECT_EQ(s.slice_of(s.fsm_registers[0], 0), SliceClass::Shared);
    EXPECT_EQ(s.slice_of(s.counter_register, 0), SliceClass::Shared);
}

TEST(Scheduler, RegisterEncodingRoundTrip) {
    const Schedule s = build_schedule(Design::CNG, Profile::Rolled);
    for (std::size_t r = 0; r < s.registers.size(); ++r) {
        if (!s.registers[r].lane_packed) continue;
        const int w = s.registers[r].width / 2;
        for (std::uint32_t lo = 0; lo < (1u << w); ++lo) {
            const std::uint32_t v = lo | (((lo * 7u) & ((1u << w) - 1)) << 8);
            EXPECT_EQ(decode_register(s, int(r), encode_register(s, int(r), v)), v);
        }
    }
}

TEST(Scheduler, JsonDump) {
    const nlohmann::json j = build_schedule(Design::Masked, Profile::Modular);
    EXPECT_EQ(j["profile"], "Modular");
    EXPECT_FALSE(j["registers"].empty());
    EXPECT_EQ(j["steps"].back()["kind"], "done");
    int ops = 0;
    for (const auto& st : j["steps"]) ops += int(st["ops"].size());
    EXPECT_EQ(ops, int(design_program(Design::Masked).size()));
}
