#include <exception>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "common.hpp"
#include "config_json.hpp"
#include "uqkit/errors.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitInvariant = 4;

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uncertainty accounting toolkit: retrieval, variance ledgers, "
                 "spatial prediction, aggregation effects, association diagnostics, "
                 "event chains and unit-checked arithmetic"};
    app.require_subcommand(1);
    app.allow_config_extras(false);

    uqkit::cli::GlobalOpts g;
    g.seed_opt = app.add_option("--seed", g.seed, "random seed for stochastic subcommands");
    app.add_option("--format", g.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.add_option("--out", g.out, "write the report to this path instead of stdout");
    app.set_config("--config", "", "JSON config file; command-line flags take precedence");
    app.config_formatter(std::make_shared<uqkit::cli::JsonConfig>());

    uqkit::cli::register_core(app, g);
    uqkit::cli::register_spatial(app, g);
    uqkit::cli::register_assoc(app, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const uqkit::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const uqkit::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const uqkit::InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const uqkit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
