#pragma once

// Campaign configuration, report files (CSV / JSON / SVG) and the commands
// behind the command-line tool.

#include "sboxbench/fi_engine.hpp"
#include "sboxbench/sca_engine.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sboxbench {

inline constexpr const char* kToolVersion = "0.1.0";

struct CampaignConfig {
    Design design = Design::UHLS;
    Profile profile = Profile::Rolled;
    LeakageModel model = LeakageModel::HW;
    double sigma = 1.0;
    bool glitch = false;
    std::size_t n_traces = 100000;
    std::optional<std::uint64_t> seed; // mandatory by the time a command runs
    std::uint8_t key = 0x2B;
    std::optional<std::uint8_t> fake_key;
    FakeKeyPolicy fake_policy = FakeKeyPolicy::Fixed;
    std::size_t ttest_n_per_set = 100000;
    std::uint8_t fixed_input = 0x00;
    double fi_margin = 0.01;
    double fi_confidence = 0.99;
    std::vector<int> multiplicities{2, 3, 4, 5};
    std::size_t sbf_inputs = 8;
    std::vector<Design> fi_designs{Design::UHLS, Design::CNG, Design::Masked};
    std::vector<Profile> fi_profiles{Profile::Rolled, Profile::Unrolled, Profile::Modular};
    std::size_t top_k = 8;
    std::string trace_file; // cpa: attack this file instead of simulating
    std::string out_dir = "out";
};

/// Unknown keys and invalid values throw std::invalid_argument.
CampaignConfig parse_config(const nlohmann::json& j);
CampaignConfig load_config(const std::string& path);
nlohmann::json config_json(const CampaignConfig& c); // replayable form, without the output directory
void validate(const CampaignConfig& c);
void apply_desk(CampaignConfig& c);

std::uint64_t fnv1a64(std::string_view bytes);
std::string config_hash(const CampaignConfig& c);
nlohmann::json provenance(const CampaignConfig& c);

nlohmann::json to_json(const CampaignReport& r);
nlohmann::json to_json(const CpaResult& r, const IntermediateDescriptor& d);
nlohmann::json to_json(const TTestResult& r);

void write_cpa_csv(std::ostream& out, const std::vector<CpaResult>& results, const std::vector<IntermediateDescriptor>& desc);
/// Rate table: one row per design x profile; SBF and each multiplicity x outcome as columns.
void write_rate_table(std::ostream& out, const std::vector<CampaignReport>& reports, const std::vector<int>& multiplicities);

struct PlotSeries {
    std::string name;
    std::vector<double> y;
    std::string color = "#999999";
    double width = 0.6;
};

/// Minimal line chart; horizontal reference lines are drawn dashed.
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, const std::vector<double>& hlines = {});

struct RunContext {
    int jobs = 1;
    std::ostream* log = nullptr; // human-readable summary
};

void cmd_gen_traces(const CampaignConfig& c, const RunContext& ctx);
void cmd_cpa(const CampaignConfig& c, const RunContext& ctx);
void cmd_ttest(const CampaignConfig& c, const RunContext& ctx);
void cmd_fi(const CampaignConfig& c, const RunContext& ctx);
void cmd_report(const CampaignConfig& c, const RunContext& ctx);

/// Traces a config describes (uniform random plaintexts from the seed).
TraceMatrix simulate_from_config(const CampaignConfig& c, int jobs);

} // namespace sboxbench
