#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "nmcount/commands.hpp"

using namespace nmcount;
namespace fs = std::filesystem;

namespace {

constexpr double kGammaX20 = 0.9500000001030576811;

struct Table {
    json meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("no column " + name);
        return static_cast<std::size_t>(it - header.begin());
    }
    double num(std::size_t row, const std::string& name) const {
        return std::stod(rows.at(row).at(col(name)));
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table read_csv(const fs::path& p) {
    std::ifstream in(p);
    Table t;
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# ", 0), 0u);
    t.meta = json::parse(line.substr(2));
    std::getline(in, line);
    t.header = split(line);
    while (std::getline(in, line)) t.rows.push_back(split(line));
    return t;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("nmcount_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

RunConfig with_out(json j, const fs::path& dir) {
    j["output"] = {{"dir", dir.string()}};
    return parse_config(j);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NMCOUNT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAndOmegaRule) {
    const RunConfig cfg = parse_config(json{{"detection", {{"x", 0.2}}}});
    EXPECT_EQ(cfg.model.kind, "two_level");
    EXPECT_NEAR(cfg.omega1(), kGammaX20 / 4, 1e-12);
    ASSERT_EQ(cfg.detection.x_values.size(), 1u);
    EXPECT_DOUBLE_EQ(cfg.detection_at(0.2).tau, 0.2 / 1e4);
    EXPECT_EQ(cfg.analysis.s_grid.size(), 101u);
    EXPECT_EQ(cfg.analysis.x_grid.front(), 0.0);
}

TEST(Config, TauAndXAreExclusive) {
    EXPECT_THROW(parse_config(json{{"detection", {{"x", 1.0}, {"tau", 1e-4}}}}), std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"detection", {{"gamma", 1.0}}}}), std::invalid_argument);
    const RunConfig cfg = parse_config(json{{"detection", {{"lambda_bw", 100.0}, {"tau", 0.02}}}});
    EXPECT_DOUBLE_EQ(cfg.detection.x_values.at(0), 2.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config(json{{"detection", {{"x", 1.0}}}, {"modle", json::object()}}),
                 std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"detection", {{"x", 1.0}, {"Gamma", 2.0}}}}), std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"detection", {{"x", -1.0}}}}), std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"detection", {{"x", 1.0}}}, {"model", {{"kind", "four_level"}}}}),
                 std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"detection", {{"x", 1.0}}},
                                   {"model", {{"omega", 0.1}, {"omega_rule", json::object()}}}}),
                 std::invalid_argument);
    EXPECT_THROW(parse_config(json{{"detection", {{"x", 1.0}}},
                                   {"analysis", {{"s_grid", {0.0, 0.5, 0.5}}}}}),
                 std::invalid_argument);
    EXPECT_THROW(load_config("/nonexistent/config.json"), std::invalid_argument);
}

TEST(Config, GridSpecifications) {
    const RunConfig cfg = parse_config(json{
        {"detection", {{"x", {20.0, 0.2}}}},
        {"analysis",
         {{"s_grid", {{"min", -1.0}, {"max", 1.0}, {"points", 5}}},
          {"x_grid",
           {{"min", 0.01}, {"max", 100.0}, {"points", 5}, {"spacing", "log"}, {"include_zero", true}}}}}});
    EXPECT_EQ(cfg.analysis.s_grid, (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));
    ASSERT_EQ(cfg.analysis.x_grid.size(), 6u);
    EXPECT_EQ(cfg.analysis.x_grid[0], 0.0);
    EXPECT_NEAR(cfg.analysis.x_grid[3], 1.0, 1e-12);
    EXPECT_EQ(cfg.detection.x_values, (std::vector<double>{20.0, 0.2}));
}

TEST(Config, ShippedConfigsLoad) {
    std::size_t seen = 0;
    for (const auto& entry : fs::directory_iterator(NMCOUNT_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
        ++seen;
    }
    EXPECT_GE(seen, 3u);
}

TEST(Commands, GammaEffTable) {
    TempDir tmp;
    RunConfig cfg = with_out(json{{"detection", {{"x", 20.0}}}}, tmp.path());
    const auto files = cmd_gamma_eff(cfg);
    ASSERT_EQ(files.size(), 1u);
    const Table t = read_csv(files[0]);
    EXPECT_EQ(t.header, (std::vector<std::string>{"x", "gamma_eff"}));
    EXPECT_EQ(t.meta.at("command"), "gamma-eff");
    EXPECT_EQ(t.num(0, "x"), 0.0);
    EXPECT_EQ(t.num(0, "gamma_eff"), 0.0);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        EXPECT_GT(t.num(i, "gamma_eff"), t.num(i - 1, "gamma_eff"));
    }

    cfg.analysis.x_grid = {0.0, 0.2, 20.0};
    const Table u = read_csv(cmd_gamma_eff(cfg)[0]);
    EXPECT_NEAR(u.num(2, "gamma_eff"), 0.9500000, 1e-7);
    EXPECT_NEAR(u.num(1, "gamma_eff"), 0.0936537653899093, 1e-12);
}

TEST(Commands, LdSweepTablesPerX) {
    TempDir tmp;
    const RunConfig cfg = with_out(
        json{{"model", {{"kind", "three_level"}}},
             {"detection", {{"x", {20.0, 0.2}}}},
             {"analysis", {{"s_grid", {{"min", -1.0}, {"max", 1.5}, {"points", 51}}}}}},
        tmp.path());
    const auto files = cmd_ld_sweep(cfg);
    ASSERT_EQ(files.size(), 4u);
    for (const char* tag : {"x20", "x0.2"}) {
        const Table t = read_csv(tmp.path() / (std::string("ld_sweep_") + tag + ".csv"));
        EXPECT_EQ(t.header,
                  (std::vector<std::string>{"s", "lambda", "I", "S", "fano", "Q", "gap"}));
        ASSERT_EQ(t.rows.size(), 51u);
        std::size_t best = 0;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            if (std::abs(t.num(i, "s")) < 1e-12) {
                EXPECT_NEAR(t.num(i, "lambda"), 0.0, 1e-9);
            }
            if (t.num(i, "Q") > t.num(best, "Q")) best = i;
        }
        EXPECT_GT(best, 0u) << tag;
        EXPECT_LT(best, t.rows.size() - 1) << tag;
        const json side = json::parse(slurp(tmp.path() / (std::string("ld_sweep_") + tag + ".json")));
        EXPECT_GT(side.at("gamma_eff").get<double>(), 0.0);
    }
}

TEST(Commands, PnEvolveAtZeroTime) {
    TempDir tmp;
    const RunConfig cfg =
        with_out(json{{"detection", {{"x", 20.0}}}, {"analysis", {{"t_final", 0.0}}}}, tmp.path());
    const Table t = read_csv(cmd_pn_evolve(cfg)[0]);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.num(0, "n"), 0.0);
    EXPECT_EQ(t.num(0, "P"), 1.0);
}

TEST(Commands, PnEvolveNormalized) {
    TempDir tmp;
    const RunConfig cfg = with_out(
        json{{"detection", {{"x", 20.0}}}, {"analysis", {{"t_final", 10.0}, {"outputs", 2}}}},
        tmp.path());
    const Table t = read_csv(cmd_pn_evolve(cfg)[0]);
    double sum_last = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.num(i, "t") == 10.0) sum_last += t.num(i, "P");
    }
    EXPECT_NEAR(sum_last, 1.0, 1e-8);
    const json side = json::parse(slurp(tmp.path() / "pn_evolve_x20.json"));
    EXPECT_LT(side.at("tail_mass").get<double>(), 1e-10);
}

TEST(Commands, TrajectoriesUndrivenGroundStart) {
    TempDir tmp;
    const RunConfig cfg = with_out(json{{"model", {{"omega", 0.0}}},
                                        {"detection", {{"x", 20.0}}},
                                        {"analysis", {{"trajectories", 20}, {"horizon", 5.0}}}},
                                   tmp.path());
    cmd_trajectories(cfg);
    const Table t = read_csv(tmp.path() / "trajectories_x20.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"trajectory", "time"}));
    EXPECT_TRUE(t.rows.empty());
    const json s = json::parse(slurp(tmp.path() / "trajectories_x20_summary.json")).at("summary");
    EXPECT_EQ(s.at("rate").get<double>(), 0.0);
    EXPECT_TRUE(s.at("mandel_q").is_null());
    EXPECT_EQ(s.at("trajectories").get<std::size_t>(), 20u);
}

TEST(Commands, ByteIdenticalReruns) {
    TempDir a, b;
    const json base{{"model", {{"kind", "three_level"}}},
                    {"detection", {{"x", {20.0, 0.2}}}},
                    {"analysis",
                     {{"s_grid", {{"min", -0.5}, {"max", 0.5}, {"points", 11}}},
                      {"t_final", 5.0},
                      {"trajectories", 40},
                      {"horizon", 10.0},
                      {"seed", 3}}}};
    RunConfig ca = with_out(base, a.path());
    RunConfig cb = with_out(base, b.path());
    cb.analysis.threads = 3;
    for (auto* cmd : {&cmd_gamma_eff, &cmd_ld_sweep, &cmd_pn_evolve, &cmd_trajectories}) {
        const auto fa = (*cmd)(ca);
        const auto fb = (*cmd)(cb);
        ASSERT_EQ(fa.size(), fb.size());
        for (std::size_t i = 0; i < fa.size(); ++i) {
            EXPECT_EQ(fa[i].filename(), fb[i].filename());
            EXPECT_EQ(slurp(fa[i]), slurp(fb[i])) << fa[i];
        }
    }
}

TEST(Cli, ExitCodes) {
    TempDir tmp;
    EXPECT_EQ(run_cli("--version"), 0);
    EXPECT_NE(run_cli(""), 0);
    EXPECT_NE(run_cli("bogus"), 0);
    EXPECT_NE(run_cli("gamma-eff --config /nonexistent.json"), 0);

    fs::create_directories(tmp.path());
    const fs::path bad = tmp.path() / "bad.json";
    std::ofstream(bad) << R"({"detection": {"x": 1, "tau": 0.1}})";
    EXPECT_EQ(run_cli("gamma-eff --config " + bad.string() + " --out " + tmp.path().string()), 1);

    EXPECT_EQ(run_cli("gamma-eff --out " + (tmp.path() / "g").string()), 0);
    EXPECT_TRUE(fs::exists(tmp.path() / "g" / "gamma_eff.csv"));
}

TEST(Cli, ShippedConfigRuns) {
    TempDir tmp;
    const std::string cfg = std::string(NMCOUNT_CONFIG_DIR) + "/fluorescence.json";
    EXPECT_EQ(run_cli("ld-sweep --config " + cfg + " --out " + tmp.path().string()), 0);
    EXPECT_TRUE(fs::exists(tmp.path() / "ld_sweep_x20.csv"));
    EXPECT_TRUE(fs::exists(tmp.path() / "ld_sweep_x0.2.csv"));
}
