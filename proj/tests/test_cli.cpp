#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "seqm/cli.hpp"

namespace cli = seqm::cli;
namespace io = seqm::io;
namespace fs = std::filesystem;
using seqm::geo::GeoPoint;

namespace {

fs::path scratch()
{
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    const auto dir =
        fs::temp_directory_path() / "seqm_cli_tests" / (std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string &args, const fs::path &log)
{
    const std::string cmd = std::string(SEQM_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const fs::path &p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) { out.push_back(l); }
    return out;
}

// 16 triggering phones and 158 active ones around an inland epicentre.
void write_event_like_dataset(const fs::path &dir)
{
    std::mt19937_64 rng(2023);
    std::normal_distribution<double> off(0.0, 0.8), jitter(0.0, 0.5);
    const GeoPoint epi(37.17, 37.03);
    const seqm::model::EarthquakeParams theta{epi, 15.0, 100.0};
    const auto detection = *io::parse_utc("2023-02-06T01:17:50Z");
    const auto epoch = detection.plus_seconds(-120.0);
    io::DatasetFiles f;
    f.metadata.detection_location = GeoPoint(37.3, 37.1);
    f.metadata.detection_time = detection;
    for (int i = 0; i < 16; ++i)
    {
        const GeoPoint z(epi.lat() + 0.3 * off(rng), epi.lon() + 0.3 * off(rng));
        const auto mu = seqm::model::wave_means(theta, z, {});
        const double t = std::min((i % 3 == 0 ? mu.p : mu.s) + jitter(rng), 119.5);
        f.triggers.push_back({"t" + std::to_string(i), z, epoch.plus_seconds(t)});
    }
    for (int i = 0; i < 158; ++i)
    {
        f.active.push_back({"a" + std::to_string(i), GeoPoint(epi.lat() + off(rng), epi.lon() + off(rng))});
    }
    io::write_dataset_files(io::DatasetPaths::in(dir), f);
}

void write_normal_samples(const fs::path &file, std::size_t n)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    io::SampleColumns cols;
    for (std::size_t i = 0; i < n; ++i)
    {
        cols[0].push_back(37.0 + 0.1 * z(rng));
        cols[1].push_back(37.0 + 0.1 * z(rng));
        cols[2].push_back(20.0 + 3.0 * z(rng));
        cols[3].push_back(10.0 + z(rng));
        cols[4].push_back(0.5 + 0.1 * z(rng));
        cols[5].push_back(0.7 + 0.05 * z(rng));
    }
    io::write_samples(file, cols);
}

} // namespace

TEST(Config, FlagsOverrideTheFileAndUnknownKeysFail)
{
    const auto dir = scratch();
    std::ofstream(dir / "run.cfg") << "iterations = 800\nburn_in = 300\ntemperatures = 4\nseed = 9\ngamma = 0.8\n"
                                      "v_p = 8.0\ntarget_acceptance = 0.2, 0.4, 0.4\n";
    cli::CommonFlags flags;
    flags.config = dir / "run.cfg";
    auto cfg = cli::resolve_config(flags);
    EXPECT_EQ(cfg.sampler.iterations, 800u);
    EXPECT_EQ(cfg.sampler.burn_in, 300u);
    EXPECT_EQ(cfg.sampler.temperatures, 4u);
    EXPECT_EQ(cfg.sampler.seed, 9u);
    EXPECT_EQ(cfg.level, 0.8);
    EXPECT_EQ(cfg.constants.v_p, 8.0);
    EXPECT_EQ(cfg.sampler.target_acceptance, (std::vector<double>{0.2, 0.4, 0.4}));
    flags.seed = 10;
    flags.iters = 1000;
    flags.gamma = 0.9;
    cfg = cli::resolve_config(flags);
    EXPECT_EQ(cfg.sampler.seed, 10u);
    EXPECT_EQ(cfg.sampler.iterations, 1000u);
    EXPECT_EQ(cfg.sampler.burn_in, 500u);
    EXPECT_EQ(cfg.level, 0.9);

    std::ofstream(dir / "bad.cfg") << "iterations = 800\nwarp_speed = 9\n";
    flags.config = dir / "bad.cfg";
    EXPECT_THROW((void)cli::resolve_config(flags), io::InputError);
    std::ofstream(dir / "bad2.cfg") << "burn_in = 900\niterations = 800\n";
    flags = {};
    flags.config = dir / "bad2.cfg";
    EXPECT_THROW((void)cli::resolve_config(flags), io::InputError);
    flags = {};
    flags.gamma = 1.5;
    EXPECT_THROW((void)cli::resolve_config(flags), io::InputError);
}

TEST(SummaryFile, RoundTrip)
{
    const auto dir = scratch();
    write_normal_samples(dir / "s.csv", 2000);
    const auto rows = cli::summarize_columns(io::read_samples(dir / "s.csv"), 0.95);
    cli::write_summary(dir / "summary.csv", rows);
    EXPECT_EQ(cli::read_summary(dir / "summary.csv"), rows);
}

TEST(TruthFile, RoundTrip)
{
    const auto dir = scratch();
    cli::TruthRecord t;
    t.scenario_id = "n25_ns1_ew1";
    t.run = 4;
    t.n = 25;
    t.sigma2_ns = 1.0;
    t.sigma2_ew = 0.25;
    t.seed = 77;
    t.epoch = cli::kSimulationEpoch;
    t.params.theta.epicentre = GeoPoint(1.234567890123, -2.5);
    t.params.theta.depth_km = 3.3;
    t.params.theta.origin_time_s = 17.125;
    t.params.alpha = 1.0 / 3.0;
    t.params.pi = 0.9;
    t.censoring_time_s = 101.0 / 7.0;
    t.n_cured = 22;
    cli::write_truth(dir / "truth.txt", t);
    EXPECT_EQ(cli::read_truth(dir / "truth.txt"), t);
}

TEST(StudyRow, MatchesHeaderWidth)
{
    seqm::simulator::StudyRecord ok;
    ok.estimate = seqm::model::ModelParams{};
    ok.epicentre_error_km = 10.0;
    EXPECT_EQ(cli::study_row(ok).size(), cli::kStudyHeader.size());
    EXPECT_EQ(cli::study_row(ok)[20], "1");
    seqm::simulator::StudyRecord bad;
    bad.error = "boom, with comma";
    const auto row = cli::study_row(bad);
    EXPECT_EQ(row.size(), cli::kStudyHeader.size());
    EXPECT_EQ(row.back(), "error: boom; with comma");
}

TEST(Fit, EventShapedDatasetEndToEnd)
{
    const auto dir = scratch();
    write_event_like_dataset(dir / "data");
    const auto before = slurp(dir / "data" / "triggers.csv");
    ASSERT_EQ(run_cli("fit " + (dir / "data").string() + " --out " + (dir / "out").string() +
                          " --iters 3000 --temps 4 --seed 5",
                      dir / "log.txt"),
              0)
        << slurp(dir / "log.txt");
    for (const char *f : {"samples.csv", "summary.csv", "telemetry.csv", "epicentre_density.csv", "fit_info.txt"})
    {
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    }
    EXPECT_EQ(io::read_samples(dir / "out" / "samples.csv")[0].size(), 1500u);
    EXPECT_EQ(lines(dir / "out" / "telemetry.csv").size(), 3001u);
    EXPECT_EQ(lines(dir / "out" / "epicentre_density.csv").size(), 256u * 256u + 1u);
    const auto info = io::read_key_values(dir / "out" / "fit_info.txt");
    EXPECT_EQ(info.at("epoch_utc"), "2023-02-06T01:15:50.000000Z");
    EXPECT_EQ(info.at("n_triggers"), "16");
    EXPECT_EQ(info.at("n_active"), "158");
    EXPECT_EQ(slurp(dir / "data" / "triggers.csv"), before);
}

TEST(Fit, FixedSeedGivesIdenticalFiles)
{
    const auto dir = scratch();
    write_event_like_dataset(dir / "data");
    for (const char *out : {"a", "b"})
    {
        ASSERT_EQ(run_cli("fit " + (dir / "data").string() + " --out " + (dir / out).string() +
                              " --iters 1000 --temps 3 --seed 42",
                          dir / "log.txt"),
                  0);
    }
    for (const char *f : {"samples.csv", "summary.csv", "telemetry.csv", "fit_info.txt"})
    {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    ASSERT_EQ(run_cli("fit " + (dir / "data").string() + " --out " + (dir / "c").string() +
                          " --iters 1000 --temps 3 --seed 43",
                      dir / "log.txt"),
              0);
    EXPECT_NE(slurp(dir / "a" / "samples.csv"), slurp(dir / "c" / "samples.csv"));
}

TEST(Fit, InputErrorsExitWithCodeTwo)
{
    const auto dir = scratch();
    write_event_like_dataset(dir / "data");
    fs::remove(dir / "data" / "metadata.txt");
    EXPECT_EQ(run_cli("fit " + (dir / "data").string() + " --out " + (dir / "o").string(), dir / "log.txt"), 2);
    EXPECT_NE(slurp(dir / "log.txt").find("metadata.txt"), std::string::npos);

    write_event_like_dataset(dir / "data");
    std::ofstream(dir / "data" / "active.csv", std::ios::app) << "a1,37.0,37.0\n";
    EXPECT_EQ(run_cli("fit " + (dir / "data").string() + " --out " + (dir / "o").string(), dir / "log.txt"), 2);
    EXPECT_NE(slurp(dir / "log.txt").find("active.csv:160:"), std::string::npos) << slurp(dir / "log.txt");

    EXPECT_EQ(run_cli("fit " + (dir / "data").string() + " --bogus-flag", dir / "log.txt"), 2);
    EXPECT_EQ(run_cli("", dir / "log.txt"), 2);
    std::ofstream(dir / "bad.cfg") << "speed = 3\n";
    EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.cfg").string() + " --out " + (dir / "o").string(),
                      dir / "log.txt"),
              2);
}

TEST(Simulate, ScenarioConservesPhonesAndTruthRoundTrips)
{
    const auto dir = scratch();
    ASSERT_EQ(run_cli("simulate --n 100 --sigma2 1 --seed 3 --out " + dir.string(), dir / "log.txt"), 0)
        << slurp(dir / "log.txt");
    const auto run_dir = dir / "n100_ns1_ew1" / "run_000";
    const auto files = io::read_dataset_files(io::DatasetPaths::in(run_dir));
    EXPECT_EQ(files.triggers.size() + files.active.size(), 100u);
    const auto truth = cli::read_truth(run_dir / "truth.txt");
    cli::write_truth(dir / "again.txt", truth);
    EXPECT_EQ(slurp(dir / "again.txt"), slurp(run_dir / "truth.txt"));
    EXPECT_EQ(truth.n, 100u);
    EXPECT_EQ(files.metadata.epoch, cli::kSimulationEpoch);

    // Same inputs, same files.
    ASSERT_EQ(run_cli("simulate --n 100 --sigma2 1 --seed 3 --out " + (dir / "again").string(), dir / "log.txt"), 0);
    EXPECT_EQ(slurp(run_dir / "triggers.csv"), slurp(dir / "again" / "n100_ns1_ew1" / "run_000" / "triggers.csv"));
}

TEST(Simulate, GridWritesNineScenarioDirectories)
{
    const auto dir = scratch();
    ASSERT_EQ(run_cli("simulate --grid --runs 2 --out " + dir.string(), dir / "log.txt"), 0);
    std::size_t dirs = 0;
    for (const auto &e : fs::directory_iterator(dir))
    {
        if (e.is_directory())
        {
            ++dirs;
            EXPECT_TRUE(fs::exists(e.path() / "run_001" / "truth.txt"));
        }
    }
    EXPECT_EQ(dirs, 9u);
    EXPECT_EQ(run_cli("simulate --n 1 --out " + dir.string(), dir / "log.txt"), 2);
    EXPECT_EQ(run_cli("simulate --sigma2 -1 --out " + dir.string(), dir / "log.txt"), 2);
}

TEST(Summarize, SixParametersAtTheRequestedLevel)
{
    const auto dir = scratch();
    write_normal_samples(dir / "samples.csv", 3000);
    ASSERT_EQ(run_cli("summarize " + (dir / "samples.csv").string() + " --gamma 0.9 --out " + (dir / "a").string(),
                      dir / "log.txt"),
              0)
        << slurp(dir / "log.txt");
    const auto rows = cli::read_summary(dir / "a" / "summary.csv");
    ASSERT_EQ(rows.size(), 6u);
    const std::vector<std::string> names{"lat_0", "lon_0", "d_0", "t_0", "alpha", "pi"};
    for (std::size_t i = 0; i < 6; ++i)
    {
        EXPECT_EQ(rows[i].parameter, names[i]);
        EXPECT_EQ(rows[i].level, 0.9);
        EXPECT_TRUE(rows[i].ess.has_value());
    }
    EXPECT_NEAR(rows[3].mode, 10.0, 0.2);
    ASSERT_EQ(run_cli("summarize " + (dir / "samples.csv").string() + " --gamma 0.9 --out " + (dir / "b").string(),
                      dir / "log.txt"),
              0);
    EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
    EXPECT_EQ(slurp(dir / "a" / "epicentre_density.csv"), slurp(dir / "b" / "epicentre_density.csv"));
}

TEST(Summarize, TruncatedSamplesFileExitsWithCodeTwo)
{
    const auto dir = scratch();
    write_normal_samples(dir / "samples.csv", 500);
    auto text = slurp(dir / "samples.csv");
    text.resize(text.rfind(','));
    std::ofstream(dir / "cut.csv") << text;
    EXPECT_EQ(run_cli("summarize " + (dir / "cut.csv").string() + " --out " + dir.string(), dir / "log.txt"), 2);
    write_normal_samples(dir / "short.csv", 50);
    EXPECT_EQ(run_cli("summarize " + (dir / "short.csv").string() + " --out " + dir.string(), dir / "log.txt"), 2);
}

TEST(Diagnose, WritesTraceDensityAcfAndEss)
{
    const auto dir = scratch();
    write_normal_samples(dir / "samples.csv", 1000);
    ASSERT_EQ(run_cli("diagnose " + (dir / "samples.csv").string() + " --out " + dir.string(), dir / "log.txt"), 0);
    EXPECT_EQ(lines(dir / "trace.csv").size(), 1001u);
    EXPECT_EQ(lines(dir / "density.csv").size(), 6u * 512u + 1u);
    EXPECT_EQ(lines(dir / "acf.csv").size(), 102u);
    EXPECT_EQ(lines(dir / "ess.csv").size(), 7u);
}

TEST(Study, NineScenariosTimesRunsRecords)
{
    const auto dir = scratch();
    ASSERT_EQ(run_cli("study --grid --runs 2 --iters 600 --burnin 300 --temps 2 --seed 4 --out " + dir.string(),
                      dir / "log.txt"),
              0)
        << slurp(dir / "log.txt");
    const auto t = io::read_csv(dir / "study.csv", cli::kStudyHeader);
    EXPECT_EQ(t.rows.size(), 18u);
    std::size_t col = 0;
    while (t.header[col] != "log10_epicentre_error_km") { ++col; }
    for (const auto &r : t.rows)
    {
        EXPECT_EQ(r.back(), "ok");
        EXPECT_NEAR(*io::parse_double(r[col]), std::log10(*io::parse_double(r[col - 1])), 1e-12);
    }
}

TEST(Study, KilledRunLeavesAValidPartialFile)
{
    const auto dir = scratch();
    const std::string cmd = "timeout -s KILL 4 " + std::string(SEQM_CLI_PATH) +
                            " study --grid --runs 3 --iters 4000 --temps 3 --out " + dir.string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    EXPECT_NE(status, 0);
    ASSERT_TRUE(fs::exists(dir / "study.csv"));
    const auto t = io::read_csv(dir / "study.csv", cli::kStudyHeader);
    EXPECT_LT(t.rows.size(), 27u);
}

TEST(Pipeline, SimulatedDatasetFitsInTheSimulationFrame)
{
    const auto dir = scratch();
    ASSERT_EQ(run_cli("simulate --n 25 --sigma2 0.25 --seed 8 --out " + dir.string(), dir / "log.txt"), 0);
    const auto data = dir / "n25_ns0.25_ew0.25" / "run_000";
    std::ofstream(dir / "fit.cfg") << "iterations = 1200\nburn_in = 600\ntemperatures = 3\n";
    ASSERT_EQ(run_cli("fit " + data.string() + " --config " + (dir / "fit.cfg").string() + " --out " +
                          (dir / "fit").string(),
                      dir / "log.txt"),
              0)
        << slurp(dir / "log.txt");
    const auto info = io::read_key_values(dir / "fit" / "fit_info.txt");
    EXPECT_EQ(info.at("epoch_utc"), io::format_utc(cli::kSimulationEpoch));
    EXPECT_EQ(info.at("iterations"), "1200");
    EXPECT_EQ(io::read_samples(dir / "fit" / "samples.csv")[0].size(), 600u);
}
