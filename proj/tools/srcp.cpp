#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "srcp/cli/commands.hpp"

int main(int argc, char** argv) {
    using namespace srcp::cli;

    CLI::App app{"Selective-reflection and FMSR spectra near a dielectric window"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::string config_path;
    std::string data_path;
    Overrides over;
    std::string output, format;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "Configuration file (JSON)")->required();
        sub->add_option("--output,-o", output, "Output file (directory for sweep)");
        sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));
        sub->add_option("--seed", seed, "Seed for fit restarts");
        sub->add_option("--threads", threads, "Worker threads, 0 for all cores");
    };

    CLI::App* spectrum = app.add_subcommand("spectrum", "Spectrum of the configured signal (direct by default)");
    CLI::App* fmsr = app.add_subcommand("fmsr", "FMSR spectrum (small modulation or sideband sum)");
    CLI::App* fit = app.add_subcommand("fit", "Fit a spectrum CSV with the fit section");
    CLI::App* compare = app.add_subcommand("compare", "One column per model variant");
    CLI::App* sweep = app.add_subcommand("sweep", "Spectra over a parameter grid");
    CLI::App* converge = app.add_subcommand("converge", "Cutoff sensitivity at probe detunings");
    for (CLI::App* sub : {spectrum, fmsr, fit, compare, sweep, converge}) add_common(sub);
    fit->add_option("data", data_path, "Spectrum CSV to fit")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(invalid_input);
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--output")) over.output = output;
    if (chosen->count("--format")) over.format = format;
    if (chosen->count("--seed")) over.seed = seed;
    if (chosen->count("--threads")) over.threads = threads;

    return guarded(
        [&]() -> int {
            RunConfig c = load_config(config_path);
            apply(c, over);
            const std::string name = chosen->get_name();
            if (name == "spectrum") return cmd_spectrum(c, std::cout);
            if (name == "fmsr") return cmd_fmsr(c, std::cout);
            if (name == "fit") return cmd_fit(c, data_path, std::cout);
            if (name == "compare") return cmd_compare(c, std::cout);
            if (name == "sweep") return cmd_sweep(c, std::cerr);
            return cmd_converge(c, std::cout);
        },
        std::cerr);
}
