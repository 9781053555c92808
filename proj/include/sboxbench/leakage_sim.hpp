#pragma once

// Synthetic power traces. HW/HD: one sample per clock cycle, the sum over the
// registers written in that cycle. Value: one sample per intermediate. Glitch
// mode adds the weight of the share recombination at each remasking step.

#include "sboxbench/scheduler.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sboxbench {

enum class LeakageModel : std::uint8_t { HW, HD, Value };

std::string_view to_string(LeakageModel m);
std::optional<LeakageModel> parse_model(std::string_view s);

struct NoiseModel {
    double sigma = 1.0; // HW units
    std::uint64_t seed = 0;
};

enum class FakeKeyPolicy : std::uint8_t { Fixed, PerTrace };

struct TraceMeta {
    std::uint8_t plaintext = 0;
    std::uint8_t key = 0;
    std::uint8_t fake_key = 0;
    MaskSet masks{};
    friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

using SampleMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TraceMatrix {
    SampleMatrix samples; // n_traces x n_samples
    std::vector<TraceMeta> meta;
    LeakageModel model = LeakageModel::HW;
    Design design = Design::UHLS;
    Profile profile = Profile::Rolled;
    bool glitch = false;
    float sigma = 0.0F;
    std::uint64_t seed = 0;

    std::size_t n_traces() const { return std::size_t(samples.rows()); }
    std::size_t n_samples() const { return std::size_t(samples.cols()); }
};

struct SimOptions {
    LeakageModel model = LeakageModel::HW;
    NoiseModel noise{};
    bool glitch = false;
    FakeKeyPolicy fake_policy = FakeKeyPolicy::Fixed;
    std::optional<std::uint8_t> fake_key; // default: drawn from the seed
    int jobs = 1;
};

/// Samples per trace for a schedule and model.
std::size_t sample_count(const Schedule& s, LeakageModel model, bool glitch);

/// Nodes that get an extra glitch sample (Value mode), in sample order.
std::vector<int> glitch_nodes(const Program& prog);

MaskSet fresh_masks(std::mt19937_64& rng);

/// Fixed fake key of a campaign when none is configured.
std::uint8_t default_fake_key(std::uint64_t seed);

TraceMatrix simulate_traces(const Schedule& s, std::span<const std::uint8_t> plaintexts, std::uint8_t key,
                            const SimOptions& opt);

/// Noiseless leakage of one execution, one entry per sample.
std::vector<double> leakage_of(const Schedule& s, const DesignInputs& in, LeakageModel model, bool glitch);

/// TRC1 binary format. Throws std::runtime_error on malformed input.
void write_trc(std::ostream& out, const TraceMatrix& t);
TraceMatrix read_trc(std::istream& in);
void save_trc(const std::string& path, const TraceMatrix& t);
TraceMatrix load_trc(const std::string& path);

} // namespace sboxbench
