#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "clask/clask.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const char* env = std::getenv("CLASK_CLI_PATH");
        binary_ = env != nullptr ? env : CLASK_CLI_PATH;
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("clask_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    void TearDown() override { fs::remove_all(dir_); }

    Outcome run(const std::string& args) const {
        const fs::path log = dir_ / "stdout.txt";
        const std::string cmd = "'" + binary_ + "' " + args + " > '" + log.string() + "' 2>&1";
        const int status = std::system(cmd.c_str());
        Outcome r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(log);
        return r;
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // Moons data plus a small config pointing at it.
    std::string moons_config(std::size_t l_max) const {
        clask::save_csv(path("moons.csv"), clask::make_moons(60, 0.25, 3));
        std::ofstream cfg(path("moons.conf"));
        cfg << "dataset = " << path("moons.csv") << "\n"
            << "kernel = rbf:0.1\nkernel = rbf:1\nkernel = poly:3\n"
            << "eta = 0.01\nt = 0.05\nl_max = " << l_max << "\nseed = 4\nmax_rank = 30\n"
            << "output_dir = " << path("out") << "\n";
        return path("moons.conf");
    }

    std::string binary_;
    fs::path dir_;
};

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST_F(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("train --no-such-flag").code, 1);
}

TEST_F(Cli, MissingDatasetNamesPath) {
    const auto r = run("train -d " + path("absent.csv") + " -k rbf:1");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find(path("absent.csv")), std::string::npos) << r.out;
}

TEST_F(Cli, BadKernelSpecIsRuntimeError) {
    const auto r = run("train -c " + moons_config(1) + " -k rbf:-1");
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, SingleLayerTrainIsReproducible) {
    const std::string cfg = moons_config(1);
    const auto a = run("train -c " + cfg + " -o " + path("a.model"));
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_NE(a.out.find("trained 1 layer(s)"), std::string::npos) << a.out;
    const std::string nu_a = slurp(path("out/nu_layer1.csv"));
    EXPECT_EQ(nu_a.rfind("class,rbf:0.1,rbf:1,poly:3\n", 0), 0u) << nu_a;
    EXPECT_FALSE(fs::exists(path("out/nu_layer2.csv")));

    const auto b = run("train -c " + cfg + " -o " + path("b.model"));
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(slurp(path("out/nu_layer1.csv")), nu_a);
    // Model files also record timings, so compare the loaded parameters.
    const auto ma = clask::load_model(path("a.model"));
    const auto mb = clask::load_model(path("b.model"));
    EXPECT_EQ(ma.layers[0].nu, mb.layers[0].nu);
    EXPECT_EQ(ma.layers[0].classifier.W, mb.layers[0].classifier.W);
}

TEST_F(Cli, EvalOnTestFile) {
    const std::string cfg = moons_config(2);
    ASSERT_EQ(run("train -c " + cfg + " -o " + path("m.model")).code, 0);
    clask::save_csv(path("test.csv"), clask::make_moons(50, 0.25, 99));
    const auto r = run("eval -m " + path("m.model") + " -t " + path("test.csv") + " --output-dir " + path("ev"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("error: "), std::string::npos);
    EXPECT_TRUE(fs::exists(path("ev/confusion.csv")));
    EXPECT_EQ(run("eval -m " + path("m.model")).code, 1);
}

TEST_F(Cli, KfoldReportsEveryFold) {
    const auto r = run("eval --kfold 10 -c " + moons_config(1));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(count_of(r.out, "fold "), 10u) << r.out;
    EXPECT_NE(r.out.find(" +- "), std::string::npos);
}

TEST_F(Cli, UninformativeFeaturesGiveChanceError) {
    {
        std::ofstream data(path("flat.csv"));
        for (int i = 0; i < 20; ++i) data << (i % 2) << ",0.5,0.5\n";
    }
    const auto r = run("eval --kfold 2 -d " + path("flat.csv") + " -k rbf:1 -s scaling=none -s output_dir=" + path("o"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("error: 50.00 +- 0.00%"), std::string::npos) << r.out;
}

TEST_F(Cli, HeatmapMatchesWeights) {
    std::ofstream(path("one.conf")) << "dataset = " << path("moons.csv") << "\nkernel = rbf:1\nl_max = 1\n";
    clask::save_csv(path("moons.csv"), clask::make_moons(30, 0.2, 8));
    ASSERT_EQ(run("train -c " + path("one.conf") + " -s output_dir=" + path("o") + " -o " + path("m.model")).code, 0);
    const auto r = run("heatmap -m " + path("m.model") + " --output-dir " + path("heat"));
    ASSERT_EQ(r.code, 0) << r.out;

    EXPECT_EQ(slurp(path("heat/nu_layer1.csv")), "class,rbf:1\n0,1\n1,1\n");
    const std::string ppm = slurp(path("heat/nu_layer1.ppm"));
    const std::string header = "P6\n16 32\n255\n";
    ASSERT_EQ(ppm.size(), header.size() + 16 * 32 * 3);
    EXPECT_EQ(ppm.substr(0, header.size()), header);
    EXPECT_EQ(ppm.find_first_not_of('\xff', header.size()), std::string::npos);
}

TEST_F(Cli, UniformWeightsRenderMidGray) {
    std::ostringstream ppm;
    clask::write_nu_ppm(ppm, clask::uniform_weights(2, 2));
    const std::string bytes = ppm.str();
    const std::string header = "P6\n32 32\n255\n";
    EXPECT_EQ(bytes.size(), header.size() + 32 * 32 * 3);
    EXPECT_EQ(bytes.find_first_not_of(static_cast<char>(128), header.size()), std::string::npos);
}

TEST_F(Cli, SweepSinglePoint) {
    const auto r = run("sweep -c " + moons_config(3) + " --axis layers --values 1 -o " + path("sweep.csv"));
    ASSERT_EQ(r.code, 0) << r.out;
    const std::string csv = slurp(path("sweep.csv"));
    EXPECT_EQ(count_lines(csv), 2u) << csv;
    EXPECT_EQ(csv.rfind("point_index,value,error,accuracy,nu_opt_seconds,feature_dim,layers_trained,status\n", 0), 0u);
    EXPECT_EQ(run("sweep -c " + moons_config(1) + " --axis depth --values 1").code, 2);
}

TEST_F(Cli, BoundsOnSeparatedSubspaces) {
    const auto s = run("synth --kind subspace --classes 2 --rank 2 --dim 16 --lambda 0 --per-class 200 --seed 3 -o " +
                       path("sub.csv"));
    ASSERT_EQ(s.code, 0) << s.out;
    const auto r = run("bounds -d " + path("sub.csv") + " --pca-rank 2 --output-dir " + path("b"));
    ASSERT_EQ(r.code, 0) << r.out;

    std::ifstream csv(path("b/bounds.csv"));
    std::string header, values;
    std::getline(csv, header);
    std::getline(csv, values);
    ASSERT_EQ(header.rfind("num_classes,lambda_hat,", 0), 0u);
    const auto first = values.find(',');
    const double lambda_hat = std::stod(values.substr(first + 1, values.find(',', first + 1) - first - 1));
    EXPECT_LE(lambda_hat, 0.05) << values;
}
