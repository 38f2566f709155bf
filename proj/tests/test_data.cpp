#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "clask/clask.hpp"

using namespace clask;

namespace {

Dataset from_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in);
}

Labels balanced_labels(std::size_t per_class, std::size_t classes) {
    Labels y;
    for (std::size_t i = 0; i < per_class * classes; ++i) y.push_back(i % classes);
    return y;
}

}  // namespace

TEST(Csv, ParsesLabelFirstRows) {
    const Dataset ds = from_csv("1,0.5,2\n-1, 3 ,4e-1\n\n1,7,8\n");
    EXPECT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.dim(), 2);
    EXPECT_EQ(ds.num_classes, 2u);
    EXPECT_EQ(ds.original_labels, (std::vector<long long>{-1, 1}));
    EXPECT_EQ(ds.y, (Labels{1, 0, 1}));
    EXPECT_DOUBLE_EQ(ds.X(1, 1), 0.4);
}

TEST(Csv, SkipsHeaderWhenAsked) {
    std::istringstream in("label,a\n3,1.5\n");
    const Dataset ds = parse_csv(in, true);
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.original_labels.front(), 3);
}

TEST(Csv, RemapsSparseLabelsInOrder) {
    const Dataset ds = from_csv("7,0\n3,0\n100,0\n3,1\n");
    EXPECT_EQ(ds.original_labels, (std::vector<long long>{3, 7, 100}));
    EXPECT_EQ(ds.y, (Labels{1, 0, 2, 0}));
}

TEST(Csv, ReportsErrors) {
    EXPECT_THROW(from_csv(""), Error);
    EXPECT_THROW(from_csv("\n  \n"), Error);
    EXPECT_THROW(from_csv("1,2\n1,2,3\n"), Error);
    EXPECT_THROW(from_csv("1,abc\n"), Error);
    EXPECT_THROW(from_csv("1.5,2\n"), Error);
    try {
        from_csv("1,2\n0,x\n");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Csv, WriteThenParseRoundTrips) {
    const Dataset ds = make_moons(10, 0.2, 3);
    std::stringstream buf;
    write_csv(buf, ds);
    const Dataset back = parse_csv(buf);
    EXPECT_EQ(back.X, ds.X);
    EXPECT_EQ(back.y, ds.y);
}

TEST(Libsvm, DensifiesSparseRows) {
    std::istringstream in("+1 1:0.5 3:2\n-1 2:1 # comment\n# only a comment\n");
    const Dataset ds = parse_libsvm(in);
    EXPECT_EQ(ds.dim(), 3);
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_DOUBLE_EQ(ds.X(0, 2), 2.0);
    EXPECT_DOUBLE_EQ(ds.X(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(ds.X(1, 1), 1.0);
    EXPECT_EQ(ds.y, (Labels{1, 0}));
}

TEST(Libsvm, RejectsMalformedIndices) {
    for (const char* bad : {"1 0:1\n", "1 2:1 1:1\n", "1 a:1\n", "1 3\n", ""}) {
        std::istringstream in(bad);
        EXPECT_THROW(parse_libsvm(in), Error) << bad;
    }
}

TEST(LoadDataset, NamesMissingPath) {
    try {
        load_dataset("/nonexistent/file.csv", DataFormat::Csv);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/file.csv"), std::string::npos);
    }
}

TEST(LoadDataset, ReadsSavedFile) {
    const auto path = std::filesystem::temp_directory_path() / "clask_data_test.csv";
    const Dataset ds = make_moons(5, 0.1, 9);
    save_csv(path.string(), ds);
    const Dataset back = load_dataset(path.string(), DataFormat::Csv);
    std::filesystem::remove(path);
    EXPECT_EQ(back.X, ds.X);
}

TEST(Formats, ParseNames) {
    EXPECT_EQ(parse_format("csv"), DataFormat::Csv);
    EXPECT_EQ(parse_format("libsvm"), DataFormat::Libsvm);
    EXPECT_THROW(parse_format("arff"), Error);
    for (auto s : {Scaling::ZScore, Scaling::MinMax, Scaling::None}) EXPECT_EQ(parse_scaling(scaling_name(s)), s);
    EXPECT_THROW(parse_scaling("robust"), Error);
}

TEST(Standardizer, ZScoreGivesZeroMeanUnitVariance) {
    Matrix X(4, 3);
    X << 1, 10, 5, 2, 20, 5, 3, 30, 5, 4, 40, 5;
    const auto s = Standardizer::fit(X);
    const Matrix Z = s.apply(X);
    EXPECT_LE(Z.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR((Z.col(0).array().square().mean()), 1.0, 1e-12);
    EXPECT_EQ(s.scale(2), 1.0);
    EXPECT_LE(Z.col(2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Standardizer, MinMaxMapsTrainingRangeToUnitInterval) {
    Matrix X(3, 2);
    X << -2, 7, 0, 7, 6, 7;
    const auto s = Standardizer::fit(X, Scaling::MinMax);
    const Matrix Z = s.apply(X);
    EXPECT_DOUBLE_EQ(Z.col(0).minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(Z.col(0).maxCoeff(), 1.0);
    EXPECT_DOUBLE_EQ(Z(1, 0), 0.25);
    EXPECT_EQ(Z.col(1), Vector::Zero(3));
}

TEST(Standardizer, NoneIsIdentity) {
    const Matrix X = Matrix::Random(5, 3);
    EXPECT_EQ(Standardizer::fit(X, Scaling::None).apply(X), X);
}

TEST(Standardizer, InverseRecoversInput) {
    const Matrix X = 3.0 * Matrix::Random(20, 4);
    for (auto mode : {Scaling::ZScore, Scaling::MinMax}) {
        const auto s = Standardizer::fit(X, mode);
        const Matrix Z = s.apply(X);
        const Matrix back = (Z.array().rowwise() * s.scale.transpose().array()).matrix().rowwise() + s.offset.transpose();
        EXPECT_LE((back - X).cwiseAbs().maxCoeff(), 1e-12);
    }
    EXPECT_THROW(Standardizer::fit(X).apply(Matrix::Ones(2, 3)), Error);
}

TEST(Split, HalvesEachClass) {
    const Labels y = balanced_labels(10, 2);
    const auto s = split_indices_stratified(y, 2, 0.5, 4);
    EXPECT_EQ(s.first.size(), 10u);
    EXPECT_EQ(s.second.size(), 10u);
    std::size_t ones = 0;
    for (auto i : s.first) ones += y[i];
    EXPECT_EQ(ones, 5u);
    std::set<std::size_t> all(s.first.begin(), s.first.end());
    all.insert(s.second.begin(), s.second.end());
    EXPECT_EQ(all.size(), y.size());
}

TEST(Split, SameSeedSameSplit) {
    const Labels y = balanced_labels(30, 3);
    const auto a = split_indices_stratified(y, 3, 0.3, 8);
    const auto b = split_indices_stratified(y, 3, 0.3, 8);
    EXPECT_EQ(a.first, b.first);
    EXPECT_NE(a.first, split_indices_stratified(y, 3, 0.3, 9).first);
}

TEST(Split, KeepsOneSampleOnEachSide) {
    const auto s = split_indices_stratified(Labels{0, 0, 0}, 1, 0.9, 1);
    EXPECT_EQ(s.first.size(), 2u);
    EXPECT_EQ(s.second.size(), 1u);
    EXPECT_THROW(split_indices_stratified(Labels{0, 1, 1}, 2, 0.5, 1), Error);
    EXPECT_THROW(split_indices_stratified(Labels{0, 0}, 1, 1.0, 1), Error);
}

TEST(Kfold, PartitionsIndices) {
    const Labels y = balanced_labels(12, 3);
    const auto folds = kfold(y, 3, 4, 2);
    ASSERT_EQ(folds.size(), 4u);
    std::vector<int> seen(y.size(), 0);
    for (const auto& f : folds) {
        EXPECT_EQ(f.test.size(), 9u);
        EXPECT_EQ(f.train.size() + f.test.size(), y.size());
        for (auto i : f.test) ++seen[i];
        std::vector<std::size_t> per_class(3, 0);
        for (auto i : f.test) ++per_class[y[i]];
        EXPECT_EQ(per_class, (std::vector<std::size_t>{3, 3, 3}));
    }
    EXPECT_EQ(seen, std::vector<int>(y.size(), 1));
}

TEST(Kfold, RejectsSmallClasses) {
    EXPECT_THROW(kfold(balanced_labels(3, 2), 2, 4, 1), Error);
    EXPECT_THROW(kfold(balanced_labels(3, 2), 2, 1, 1), Error);
}

TEST(Dataset, ClassSamplesKeepOrder) {
    const Dataset ds = from_csv("0,1\n1,2\n0,3\n1,4\n0,5\n");
    const auto cs = ds.class_samples();
    EXPECT_EQ(cs[0], (Matrix(3, 1) << 1, 3, 5).finished());
    EXPECT_EQ(cs[1], (Matrix(2, 1) << 2, 4).finished());
    EXPECT_THROW(ds.subset({9}), Error);
}

TEST(SynthSubspace, UnitNormsAndOverlap) {
    SubspaceParams p;
    p.num_classes = 3;
    p.rank = 2;
    p.ambient_dim = 12;
    p.overlap_lambda = 0.25;
    p.per_class = 40;
    p.seed = 3;
    const auto s = synth_subspace(p);
    EXPECT_EQ(s.data.size(), 120u);
    EXPECT_LE((s.data.X.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
    for (const auto& U : s.bases) EXPECT_LE((U.transpose() * U - Matrix::Identity(2, 2)).norm(), 1e-12);
    const Matrix cross = s.bases[0].transpose() * s.bases[1];
    EXPECT_LE((cross - 0.5 * Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(SynthSubspace, NoiseMatchesSigma) {
    SubspaceParams p;
    p.sigma_e_sq = 0.2;
    p.seed = 4;
    p.per_class = 30;
    const auto s = synth_subspace(p);
    for (Eigen::Index i = 0; i < s.data.X.rows(); ++i) {
        const auto& U = s.bases[s.data.y[static_cast<std::size_t>(i)]];
        EXPECT_NEAR((U.transpose() * s.data.X.row(i).transpose()).squaredNorm(), 0.8, 1e-12);
    }
}

TEST(SynthSubspace, RejectsOversizedConfiguration) {
    SubspaceParams p;
    p.num_classes = 4;
    p.rank = 4;
    p.ambient_dim = 16;
    p.overlap_lambda = 0.1;
    EXPECT_THROW(synth_subspace(p), Error);
    p.overlap_lambda = 1.5;
    EXPECT_THROW(synth_subspace(p), Error);
}

TEST(SynthClassSpecific, BlocksHaveUnitNorm) {
    ClassSpecificParams p;
    p.num_classes = 3;
    p.per_class = 20;
    p.seed = 5;
    const auto s = synth_class_specific(p);
    for (Eigen::Index i = 0; i < s.data.X.rows(); ++i) {
        for (Eigen::Index b = 0; b < 3; ++b) EXPECT_NEAR(s.data.X.row(i).segment(b * 8, 8).norm(), 1.0, 1e-12);
    }
}

TEST(Generators, AreDeterministic) {
    EXPECT_EQ(make_moons(20, 0.3, 1).X, make_moons(20, 0.3, 1).X);
    EXPECT_NE(make_moons(20, 0.3, 1).X, make_moons(20, 0.3, 2).X);
    const Matrix centers = Matrix::Identity(3, 2);
    const Dataset blobs = make_blobs(centers, 15, 0.1, 6);
    EXPECT_EQ(blobs.size(), 45u);
    EXPECT_EQ(blobs.num_classes, 3u);
}

TEST(Config, ParsesAndRoundTrips) {
    std::istringstream in(
        "# comment\n"
        "dataset = data/x.csv\n"
        "kernel = rbf:0.5\n"
        "kernel = poly:3  # trailing\n"
        "eta = 0.01\n"
        "tune_ridge = yes\n"
        "scaling = minmax\n"
        "seed = 42\n");
    const RunConfig cfg = parse_config(in);
    EXPECT_EQ(cfg.kernels, (KernelSet{KernelSpec::rbf(0.5), KernelSpec::poly(3)}));
    EXPECT_DOUBLE_EQ(cfg.eta, 0.01);
    EXPECT_TRUE(cfg.tune_ridge);
    EXPECT_EQ(cfg.scaling, Scaling::MinMax);
    EXPECT_EQ(cfg.seed, 42u);
    std::istringstream again(to_string(cfg));
    EXPECT_EQ(parse_config(again), cfg);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    for (const char* bad : {"colour = red\n", "eta = fast\n", "no equals sign\n", "tune_ridge = maybe\n"}) {
        std::istringstream in(bad);
        EXPECT_THROW(parse_config(in), Error) << bad;
    }
    RunConfig cfg;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.kernels.push_back(KernelSpec::rbf(1.0));
    EXPECT_NO_THROW(cfg.validate());
    cfg.eta = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
}
