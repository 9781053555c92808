#pragma once

// Bit-flip fault injection on scheduled executions.

#include "sboxbench/scheduler.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace sboxbench {

enum class Outcome : std::uint8_t { Silent, Critical, Hang, Detected };
inline constexpr int kOutcomeCount = 4;

std::string_view to_string(Outcome o);

struct FaultSite {
    int reg = 0;
    int bit = 0;
    int cycle = 0;
    friend bool operator==(const FaultSite&, const FaultSite&) = default;
};

struct FaultSpec {
    std::vector<std::pair<int, int>> flips; // (register, bit)
    int cycle = 0;
};

struct FaultOutcome {
    FaultSpec spec;
    Outcome classification = Outcome::Silent;
};

/// Register bits x cycles 0..latency-1, cycle-major, then register, then bit.
std::vector<FaultSite> enumerate_fault_sites(const Schedule& s);

/// Confidence levels 0.90, 0.95 and 0.99 are supported. population = nullopt means unbounded.
std::size_t sample_size(std::optional<double> population, double e, double confidence, double p);

/// True output byte of a completed run (unmasked for the masked design).
std::uint8_t true_output(Design d, const ExecutionTrace& t);

Outcome classify(const ExecutionTrace& trace, const ExecutionTrace& golden, Design design, const DesignInputs& in);

/// Flips are applied at spec.cycle; the watchdog is the schedule default.
FaultOutcome inject(const Schedule& s, const DesignInputs& in, const FaultSpec& spec, const ExecutionTrace& golden);

/// Seeded stimuli: random plaintext/key, a campaign-wide fake key, fresh masks.
std::vector<DesignInputs> make_stimuli(Design d, std::size_t count, std::uint64_t seed);

struct CampaignReport {
    Design design = Design::UHLS;
    Profile profile = Profile::Rolled;
    int multiplicity = 1;
    std::array<std::uint64_t, kOutcomeCount> counts{};
    std::array<double, kOutcomeCount> rates{};
    std::uint64_t samples = 0;
    double population = 0; // fault-site combinations (x inputs for SBF)
    double margin = 0;     // 0 for exhaustive campaigns
    double confidence = 0;
    std::uint64_t seed = 0;
    std::uint64_t would_be_critical = 0; // Detected runs whose true output was also wrong
    // SBF only: outcome counts by the CNG slice of the flipped bit
    std::array<std::array<std::uint64_t, kOutcomeCount>, 3> by_slice{};
    std::array<std::array<std::uint64_t, kOutcomeCount>, 3> by_kind{}; // by RegisterKind

    void finalize();
};

CampaignReport run_sbf_campaign(const Schedule& s, const std::vector<DesignInputs>& inputs, std::uint64_t seed = 0,
                                int jobs = 1);

struct MbfOptions {
    int multiplicity = 2;
    double margin = 0.01;
    double confidence = 0.99;
    std::uint64_t seed = 0;
    int jobs = 1;
};

CampaignReport run_mbf_campaign(const Schedule& s, const MbfOptions& opt);

/// Deterministic draw of MBF sample `index`: m distinct bits at one random cycle.
FaultSpec draw_mbf_fault(const Schedule& s, int multiplicity, std::uint64_t seed, std::uint64_t index);

} // namespace sboxbench
