#pragma once

// Register-transfer model of a design. A schedule binds every dataflow node to
// an FSM step and either a register or a combinational net; execute() runs it
// cycle by cycle and can flip register bits on the way.
//
// Steps run one per cycle except loop steps (8 cycles, one basis-matrix column
// per iteration). The last step is DONE: outputs are valid at the end of it.

#include "sboxbench/program.hpp"
#include "sboxbench/sbox_models.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sboxbench {

enum class Profile : std::uint8_t { Rolled, Unrolled, Modular };

std::string_view to_string(Profile p);
std::optional<Profile> parse_profile(std::string_view s);

enum class RegisterKind : std::uint8_t { Data, Control, MemoryRead };

/// Which CNG slice a register bit feeds.
enum class SliceClass : std::uint8_t { Shared, TrueSlice, FakeSlice };

std::string_view to_string(RegisterKind k);
std::string_view to_string(SliceClass s);

struct RegisterSpec {
    std::string name;
    int width = 0;
    RegisterKind kind = RegisterKind::Data;
    // CNG datapath: bits [0, width/2) belong to the true slice, the rest to the fake slice.
    bool lane_packed = false;
};

enum class StepKind : std::uint8_t { Compute, Prefetch, Loop, Done };

struct Step {
    StepKind kind = StepKind::Compute;
    std::vector<int> nodes; // topological order
};

struct Binding {
    int step = -1;
    int reg = -1; // -1: combinational net, evaluated inside its consumer's step
};

inline constexpr int kLoopIterations = 8;

struct Schedule {
    Design design = Design::UHLS;
    Profile profile = Profile::Rolled;
    std::vector<RegisterSpec> registers;
    std::vector<Step> steps;
    std::vector<Binding> binding;     // per node
    std::vector<int> port_register;   // per port slot
    std::vector<int> output_register; // per program output
    std::vector<int> fsm_registers; // one-hot state, 32 states per word
    int counter_register = -1;
    int memory_register = -1;
    int nominal_latency = 0;
    std::vector<int> step_cycle; // first nominal cycle of each step

    const Program& program() const { return design_program(design); }
    int total_register_bits() const;
    SliceClass slice_of(int reg, int bit) const;
    int step_length(int step) const;
};

Schedule build_schedule(Design design, Profile profile);

/// Register encoding <-> dataflow value (lane-packed registers store lo | hi << width/2).
std::uint32_t encode_register(const Schedule& s, int reg, std::uint32_t value);
std::uint32_t decode_register(const Schedule& s, int reg, std::uint32_t bits);

struct ScheduledFlip {
    int cycle = 0;
    int reg = 0;
    int bit = 0;
};
using FaultPlan = std::vector<ScheduledFlip>;

enum class ExecStatus : std::uint8_t { Completed, Hung };

struct RegisterWrite {
    int reg = 0;
    std::uint32_t old_bits = 0;
    std::uint32_t new_bits = 0;
};

struct NodeEvent {
    int node = 0;
    std::uint32_t value = 0; // dataflow form
    int reg = -1;
    std::uint32_t prior = 0; // previous occupant of `reg` in dataflow form; 0 for nets
};

struct CycleRecord {
    int step = -1; // -1 when the FSM stalled
    std::vector<RegisterWrite> writes;
    std::vector<NodeEvent> nodes;
    std::vector<std::uint32_t> registers; // end-of-cycle snapshot (Full detail only)
};

enum class TraceDetail : std::uint8_t { Outputs, Events, Full };

struct ExecutionTrace {
    ExecStatus status = ExecStatus::Completed;
    int cycles_used = 0;
    std::vector<std::uint32_t> outputs; // per program output, dataflow form
    std::vector<CycleRecord> cycles;    // empty at Outputs detail
};

/// watchdog = 0 selects 4 x nominal latency.
ExecutionTrace execute(const Schedule& s, const DesignInputs& in, std::span<const ScheduledFlip> faults = {},
                       int watchdog = 0, TraceDetail detail = TraceDetail::Full);

int default_watchdog(const Schedule& s);

void to_json(nlohmann::json& j, const Schedule& s);

} // namespace sboxbench
