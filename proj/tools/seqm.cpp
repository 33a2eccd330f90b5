#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "seqm/cli.hpp"

namespace {

void add_common(CLI::App &cmd, seqm::cli::CommonFlags &f)
{
    cmd.add_option_function<std::string>("--config", [&f](const std::string &p) { f.config = p; },
                                         "key = value configuration file");
    cmd.add_option_function<std::uint64_t>("--seed", [&f](std::uint64_t v) { f.seed = v; }, "master seed");
    cmd.add_option_function<std::string>("--out", [&f](const std::string &p) { f.out = p; }, "output directory");
    cmd.add_option_function<std::size_t>("--iters", [&f](std::size_t v) { f.iters = v; }, "total iterations");
    cmd.add_option_function<std::size_t>("--burnin", [&f](std::size_t v) { f.burnin = v; }, "burn-in iterations");
    cmd.add_option_function<std::size_t>("--temps", [&f](std::size_t v) { f.temps = v; }, "number of temperatures");
    cmd.add_option_function<double>("--gamma", [&f](double v) { f.gamma = v; }, "HPDR level");
}

} // namespace

int main(int argc, char **argv)
{
    namespace cli = seqm::cli;

    CLI::App app{"Smartphone earthquake localisation: Bayesian mixture cure model fitted by parallel tempering"};
    app.require_subcommand(1);
    cli::CommonFlags flags;

    std::string data_dir;
    auto *fit = app.add_subcommand("fit", "fit a dataset directory (triggers.csv, active.csv, metadata.txt)");
    fit->add_option("data", data_dir, "dataset directory")->required();
    add_common(*fit, flags);

    std::optional<std::size_t> n, runs;
    std::optional<double> sigma2, sigma2_ns, sigma2_ew;
    bool grid = false;
    auto *simulate = app.add_subcommand("simulate", "write synthetic datasets and their truth files");
    simulate->add_option_function<std::size_t>("--n", [&](std::size_t v) { n = v; }, "phones per network");
    simulate->add_option_function<double>("--sigma2", [&](double v) { sigma2 = v; }, "network variance (deg^2)");
    simulate->add_option_function<double>("--sigma2-ns", [&](double v) { sigma2_ns = v; }, "north-south variance");
    simulate->add_option_function<double>("--sigma2-ew", [&](double v) { sigma2_ew = v; }, "east-west variance");
    simulate->add_option_function<std::size_t>("--runs", [&](std::size_t v) { runs = v; }, "events per scenario");
    simulate->add_flag("--grid", grid, "all 9 scenarios: n in {25,50,100}, variance in {1,0.25,0.05}");
    add_common(*simulate, flags);

    std::string samples;
    auto *summarize = app.add_subcommand("summarize", "modes, HPD regions and ESS for a samples file");
    summarize->add_option("samples", samples, "samples.csv")->required();
    add_common(*summarize, flags);

    auto *study = app.add_subcommand("study", "simulate-and-fit study over a scenario grid");
    study->add_option_function<std::size_t>("--runs", [&](std::size_t v) { runs = v; }, "runs per scenario");
    study->add_option_function<std::size_t>("--n", [&](std::size_t v) { n = v; }, "phones (single scenario)");
    study->add_option_function<double>("--sigma2", [&](double v) { sigma2 = v; }, "variance (single scenario)");
    study->add_flag("--grid", grid, "all 9 scenarios");
    add_common(*study, flags);

    auto *diagnose = app.add_subcommand("diagnose", "trace, density and autocorrelation tables for a samples file");
    diagnose->add_option("samples", samples, "samples.csv")->required();
    add_common(*diagnose, flags);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kOk : cli::kInputError;
    }

    try
    {
        auto cfg = cli::resolve_config(flags);
        if (n) { cfg.n = *n; }
        if (sigma2) { cfg.sigma2_ns = cfg.sigma2_ew = *sigma2; }
        if (sigma2_ns) { cfg.sigma2_ns = *sigma2_ns; }
        if (sigma2_ew) { cfg.sigma2_ew = *sigma2_ew; }
        if (runs) { cfg.runs = *runs; }
        if (grid) { cfg.grid = true; }
        cfg.validate();

        if (*fit) { cli::cmd_fit(seqm::io::DatasetPaths::in(data_dir), cfg, std::cout); }
        else if (*simulate) { (void)cli::cmd_simulate(cfg, std::cout); }
        else if (*summarize) { cli::cmd_summarize(samples, cfg, std::cout); }
        else if (*study)
        {
            const auto records = cli::cmd_study(cfg, std::cout);
            for (const auto &r : records)
            {
                if (!r.ok()) { return cli::kRuntimeFailure; }
            }
        }
        else if (*diagnose) { cli::cmd_diagnose(samples, cfg, std::cout); }
    }
    catch (const seqm::io::InputError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kInputError;
    }
    catch (const seqm::sampler::InitializationError &e)
    {
        std::cerr << "error: sampler initialization failed: " << e.what() << '\n';
        return cli::kRuntimeFailure;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kRuntimeFailure;
    }
    return cli::kOk;
}
