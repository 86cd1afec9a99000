// rfdress - command-line front end; see README.md for subcommands and the config schema

#include <iostream>

#include "CLI11.hpp"

#include "rfdress/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rf-dressed state-dependent optical lattice calculator"};
    app.require_subcommand(1);

    rfdress::cli::Invocation inv;
    double field_mT = 0.0;
    std::uint64_t seed = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", inv.config_path, "JSON configuration file");
        sub->add_option("--out", inv.out_dir, "output directory (overrides output.dir)");
        sub->add_option("--set", inv.overrides, "dotted-path override key=value (repeatable)");
        sub->add_option("--threads", inv.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "seed for synthetic data");
    };

    for (const auto& name : rfdress::cli::subcommands()) {
        CLI::App* sub = app.add_subcommand(name, "");
        common(sub);
        if (name == "zeeman") sub->add_option("--field-mT", field_mT, "bias field in mT (overrides setup.field_mT)");
        if (name == "figure") sub->add_option("id", inv.figure, "figure number: 2, 3 or 4")->required();
        sub->callback([&inv, name] { inv.subcommand = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rfdress::cli::config_error;
    }
    inv.seed = seed;
    if (field_mT != 0.0) inv.field_mT = field_mT;

    const rfdress::cli::RunResult r = rfdress::cli::run(inv, std::cerr);
    for (const auto& path : r.written) std::cout << path << '\n';
    return r.code;
}
