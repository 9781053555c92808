#pragma once

// The three S-box designs under evaluation, each instrumented so that every
// elementary operation reports its result as a named intermediate.

#include "sboxbench/gf_tower.hpp"
#include "sboxbench/program.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sboxbench {

struct IntermediateDescriptor {
    int id = 0;
    Function function = Function::Sbox;
    int op_index = 0;
    int width = 0; // 2/4/8, or 16 for the concatenated CNG datapath
    std::string label;
};

struct IntermediateRecord {
    int descriptor_id = 0;
    std::uint32_t value = 0;
};

class IntermediateSink {
public:
    virtual ~IntermediateSink() = default;
    virtual void record(const IntermediateRecord& r) = 0;
};

class RecordBuffer final : public IntermediateSink {
public:
    void record(const IntermediateRecord& r) override { records.push_back(r); }
    std::vector<IntermediateRecord> records;
};

/// Randomness of one masked evaluation: 18 fresh bits plus two derived masks.
struct MaskSet {
    std::uint8_t m_in = 0;   // 8-bit, applied to the input
    std::uint8_t m4a = 0;    // 4-bit, remasks the GF(2^4) product
    std::uint8_t m4b = 0;    // 4-bit, masks the GF(2^4) inversion
    std::uint8_t m2 = 0;     // 2-bit, remasks the GF(2^2) product
    std::uint8_t m_in_t = 0; // m_in in the tower basis
    std::uint8_t m_out = 0;  // output mask, m_in_t mapped back through X2S

    static MaskSet derive(std::uint8_t m_in, std::uint8_t m4a, std::uint8_t m4b, std::uint8_t m2);
    /// Fresh bits packed as m_in | m4a << 8 | m4b << 12 | m2 << 16.
    static MaskSet from_index(std::uint32_t index);
    bool valid() const;

    friend bool operator==(const MaskSet&, const MaskSet&) = default;
};

inline constexpr std::uint32_t kMaskCombinations = 1u << 18;

struct CngOutput {
    std::uint8_t true_out = 0;
    std::uint8_t fake_out = 0;
    bool alarm = false;
};

struct MaskedOutput {
    std::uint8_t masked_out = 0;
    std::uint8_t m_out = 0;
};

/// Everything a design may consume in one evaluation.
struct DesignInputs {
    std::uint8_t plaintext = 0;
    std::uint8_t key = 0;
    std::uint8_t fake_key = 0;
    MaskSet masks{};
};

/// Dataflow of a design; built once and shared.
const Program& design_program(Design d);

/// Raw port values (by port slot) for a design.
std::vector<std::uint32_t> port_values(const Program& prog, const DesignInputs& in);

std::uint8_t sbox_unprotected(std::uint8_t plaintext, std::uint8_t key, IntermediateSink* recorder = nullptr);

CngOutput sbox_cng(std::uint8_t plaintext, std::uint8_t key, std::uint8_t fake_key,
                   IntermediateSink* recorder = nullptr);

MaskedOutput sbox_masked(std::uint8_t plaintext, std::uint8_t key, const MaskSet& masks,
                         IntermediateSink* recorder = nullptr);

constexpr std::uint8_t remove_mask(std::uint8_t masked_out, std::uint8_t m_out) {
    return std::uint8_t(masked_out ^ m_out);
}

/// Alarm of the CNG design: fake slice compared with its golden recomputation.
bool cng_alarm(std::uint8_t plaintext, std::uint8_t fake_key, std::uint8_t fake_out);

std::vector<IntermediateDescriptor> enumerate_intermediates(Design d);

/// Evaluates a design into `values` (one entry per intermediate) without recording.
void evaluate_design(Design d, const DesignInputs& in, std::span<std::uint32_t> values);

} // namespace sboxbench
