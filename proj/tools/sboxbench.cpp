// sboxbench: trace generation, CPA, t-tests and fault-injection campaigns
// over scheduled S-box designs.

#include "sboxbench/reporting.hpp"

#include <CLI11.hpp>

#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

using namespace sboxbench;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool desk = false;
    std::string out;
    std::string traces;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "campaign config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "campaign seed (overrides the config)");
    sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_flag("--desk", c.desk, "desk scale: 20k traces per trace set");
    sub->add_option("--out", c.out, "output directory (overrides the config)");
}

CampaignConfig resolve(const Common& c, bool needs_seed) {
    CampaignConfig cfg = c.config.empty() ? CampaignConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = c.seed;
    if (c.desk) apply_desk(cfg);
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (!c.traces.empty()) cfg.trace_file = c.traces;
    if (needs_seed && !cfg.seed) throw std::invalid_argument("config: seed is mandatory (set \"seed\" or pass --seed)");
    validate(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sboxbench: side-channel and fault-injection workbench for AES S-box designs"};
    app.require_subcommand(1);

    Common common;
    using Command = void (*)(const CampaignConfig&, const RunContext&);
    Command chosen = nullptr;

    auto sub = [&](const char* name, const char* help, Command cmd) {
        CLI::App* s = app.add_subcommand(name, help);
        add_common(s, common);
        s->callback([&chosen, cmd] { chosen = cmd; });
        return s;
    };
    sub("gen-traces", "simulate traces and write a TRC1 file", cmd_gen_traces);
    CLI::App* cpa = sub("cpa", "CPA sweep over every intermediate (HW and HD)", cmd_cpa);
    cpa->add_option("--traces", common.traces, "TRC1 file to attack instead of simulating")->check(CLI::ExistingFile);
    sub("ttest", "fixed-vs-random Welch t-test", cmd_ttest);
    sub("fi", "single and multiple bit-flip campaigns", cmd_fi);
    sub("report", "summarize the results found in the output directory", cmd_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const CampaignConfig cfg = resolve(common, chosen != cmd_report);
        chosen(cfg, RunContext{common.jobs, &std::cout});
    } catch (const std::exception& e) {
        std::cerr << "sboxbench: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
