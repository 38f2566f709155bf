#include <gtest/gtest.h>

#include <random>

#include "clask/clask.hpp"
#include "oracles.hpp"

using namespace clask;

namespace {

SubspaceSample subspace_sample(std::size_t C, double lambda, double noise, std::size_t n, std::uint64_t seed) {
    SubspaceParams p;
    p.num_classes = C;
    p.rank = 2;
    p.ambient_dim = 12;
    p.overlap_lambda = lambda;
    p.sigma_e_sq = noise;
    p.per_class = n;
    p.seed = seed;
    return synth_subspace(p);
}

ModelStats true_stats(const SubspaceSample& s) {
    return estimate_model_stats(projections_from_subspaces(s.bases, s.data.class_samples()));
}

}  // namespace

TEST(ModelStats, NoiseFreeDataHasZeroNoiseEstimate) {
    const SubspaceSample s = subspace_sample(3, 0.1, 0.0, 400, 1);
    EXPECT_LE(true_stats(s).sigma_e_sq_hat, 2.0 / std::sqrt(400.0));
}

TEST(ModelStats, OrthogonalSubspacesHaveZeroOverlap) {
    const ModelStats st = true_stats(subspace_sample(3, 0.0, 0.2, 300, 2));
    EXPECT_NEAR(st.lambda_hat, 0.0, 1e-12);
    EXPECT_NEAR(st.lambda_hat_mean_norm, 0.0, 1e-12);
}

TEST(ModelStats, BalancedPriorsAndRemarkInequality) {
    const ModelStats st = true_stats(subspace_sample(2, 0.3, 0.15, 500, 3));
    ASSERT_EQ(st.priors.size(), 2u);
    EXPECT_DOUBLE_EQ(st.priors[0], 0.5);
    EXPECT_DOUBLE_EQ(st.priors[1], 0.5);
    EXPECT_NEAR(st.sigma_e_sq_hat, 0.15, 1e-9);
    for (double m : st.mean_norms) EXPECT_LE(m, 1.0 - st.sigma_e_sq_hat + 1e-6);
    EXPECT_GE(st.sigma_e_sq_hat, 0.0);
    EXPECT_LE(st.sigma_e_sq_hat, 1.0);
    // The mean-norm variant divides by something smaller, so it is never below.
    EXPECT_GE(st.lambda_hat_mean_norm, st.lambda_hat);
}

TEST(ModelStats, EmptyClassIsAnError) {
    ProjectionSet set;
    set.proj = {{Matrix::Ones(3, 2), Matrix(0, 2)}, {Matrix::Ones(3, 2), Matrix(0, 2)}};
    EXPECT_THROW(estimate_model_stats(set), Error);
}

TEST(ModelStats, RecoversConstructedOverlap) {
    for (double lambda : {0.1, 0.25, 0.6}) {
        for (double noise : {0.0, 0.2}) {
            EXPECT_NEAR(true_stats(subspace_sample(2, lambda, noise, 5000, 4)).lambda_hat, lambda, 0.05);
        }
    }
}

TEST(OverlapBound, ClosedForms) {
    EXPECT_DOUBLE_EQ(bound_lemma1(0.0, 0.0, 1.0).value, 0.0);
    EXPECT_NEAR(bound_lemma1(0.25, 0.1, 0.8).value, 0.2 / 0.55, 1e-15);
    for (double noise : {0.0, 0.3, 0.9}) EXPECT_DOUBLE_EQ(bound_lemma1(0.0, noise, 0.35).value, 0.65);
}

TEST(OverlapBound, FlagsVacuousValues) {
    EXPECT_FALSE(bound_lemma1(0.25, 0.1, 0.8).vacuous);
    const BoundValue v = bound_lemma1(0.81, 0.0, 0.1);
    EXPECT_GT(v.value, 1.0);
    EXPECT_TRUE(v.vacuous);
}

TEST(OverlapBound, HypothesisViolations) {
    EXPECT_THROW(bound_lemma1(1.0, 0.1, 0.5), Error);
    EXPECT_THROW(bound_lemma1(-0.1, 0.1, 0.5), Error);
    EXPECT_THROW(bound_lemma1(0.2, 1.5, 0.5), Error);
}

TEST(OverlapBound, MonotoneInOverlapAndMeanNorm) {
    for (double noise : {0.0, 0.1, 0.5}) {
        for (int i = 0; i < 19; ++i) {
            const double lo = 0.05 * i, hi = 0.05 * (i + 1);
            for (double m : {0.0, 0.3, 0.9}) {
                EXPECT_LE(bound_lemma1(lo, noise, m).value, bound_lemma1(hi, noise, m).value);
                EXPECT_GE(bound_lemma1(0.3, noise, lo * m).value, bound_lemma1(0.3, noise, hi * m).value);
            }
        }
    }
}

TEST(PriorWeightedBound, ReducesToEqualMeanNorms) {
    EXPECT_DOUBLE_EQ(bound_theorem1(0.2, 0.1, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.6, 0.6, 0.6}).value,
                     bound_lemma1(0.2, 0.1, 0.6).value);
    EXPECT_DOUBLE_EQ(bound_theorem1(0.2, 0.1, {1.0, 0.0}, {0.7, 0.1}).value, bound_lemma1(0.2, 0.1, 0.7).value);
}

TEST(PriorWeightedBound, HandExample) {
    EXPECT_NEAR(bound_theorem1(0.04, 0.0, {0.3, 0.7}, {0.9, 0.6}).value, 0.3875, 1e-15);
}

TEST(PriorWeightedBound, RejectsBadPriors) {
    EXPECT_THROW(bound_theorem1(0.1, 0.1, {0.3, 0.3}, {0.5, 0.5}), Error);
    EXPECT_THROW(bound_theorem1(0.1, 0.1, {0.5, 0.5}, {0.5}), Error);
    EXPECT_THROW(bound_theorem1(0.1, 0.1, {1.5, -0.5}, {0.5, 0.5}), Error);
}

TEST(PairwiseLowerBound, LowerBoundHandExample) {
    EXPECT_NEAR(bound_theorem2(0.1, 0.2, Matrix::Constant(2, 2, 0.2), 2).db_lower, 2.24, 1e-12);
    EXPECT_NEAR(lemma3_lower_bound(0.1, 0.2, 2), 2.24, 1e-12);
}

TEST(PairwiseLowerBound, ZeroNumerator) {
    const PairwiseBound b = bound_theorem2(0.0, 0.0, Matrix::Identity(2, 2), 2);
    EXPECT_DOUBLE_EQ(b.bound.value, 0.0);
}

TEST(PairwiseLowerBound, DegenerateSingleClass) {
    EXPECT_THROW(bound_theorem2(0.0, 0.0, Matrix::Ones(1, 1), 1), Error);
    EXPECT_THROW(bound_theorem2(0.2, 0.1, Matrix::Ones(2, 3), 2), Error);
}

TEST(EmpiricalSeparation, RepeatedPointsHaveNoWithinSpread) {
    Matrix F(6, 2);
    F << 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1;
    const SeparationStats s = empirical_separation(F, {0, 0, 0, 1, 1, 1}, 2);
    EXPECT_EQ(s.e_dw, 0.0);
    EXPECT_EQ(s.empirical_prob, 0.0);
    EXPECT_DOUBLE_EQ(s.e_db, 2.0);
}

TEST(EmpiricalSeparation, IdenticalPointsAcrossClassesIsAnError) {
    EXPECT_THROW(empirical_separation(Matrix::Ones(4, 2), {0, 0, 1, 1}, 2), Error);
    EXPECT_THROW(empirical_separation(Matrix::Random(4, 2), {0, 0, 0, 0}, 1), Error);
}

TEST(EmpiricalSeparation, MatchesPairwiseLoops) {
    std::mt19937_64 rng(5);
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t C = 2 + static_cast<std::size_t>(inst % 3);
        const Matrix F = oracle::random_points(30 + inst, 3, rng);
        std::vector<std::size_t> y;
        for (Eigen::Index i = 0; i < F.rows(); ++i) y.push_back(static_cast<std::size_t>(rng() % C));
        const SeparationStats got = empirical_separation(F, y, C);
        const oracle::Separation want = oracle::separation(F, y, C);
        EXPECT_NEAR(got.e_dw, want.e_dw, 1e-10);
        EXPECT_NEAR(got.e_db, want.e_db, 1e-10);
        EXPECT_NEAR(got.empirical_prob, want.prob, 1e-12);
    }
}

TEST(EmpiricalSeparation, BetweenClassWeightsSumToOne) {
    // With every pair at distance 1 the weighted between-class mean is the weight total.
    const Matrix F = Matrix::Identity(30, 30) / std::sqrt(2.0);
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < 30; ++i) y.push_back(i < 5 ? 0 : i < 15 ? 1 : 2);
    EXPECT_NEAR(empirical_separation(F, y, 3).e_db, 1.0, 1e-14);
}

TEST(EmpiricalSeparation, MarkovInequalityHolds) {
    std::mt19937_64 rng(6);
    for (int inst = 0; inst < 30; ++inst) {
        const Matrix F = oracle::random_points(40, 2, rng);
        std::vector<std::size_t> y;
        for (Eigen::Index i = 0; i < F.rows(); ++i) y.push_back(static_cast<std::size_t>(i % 3 == 0 ? 0 : i % 5 == 0 ? 1 : 2));
        const SeparationStats s = empirical_separation(F, y, 3);
        EXPECT_LE(s.empirical_prob, s.empirical_ratio + 1e-12);
    }
}

TEST(BoundChain, RatioBelowBoundOnModelData) {
    std::uint64_t seed = 10;
    for (double lambda : {0.0, 0.3, 0.7}) {
        for (double noise : {0.0, 0.1, 0.3}) {
            const SubspaceSample s = subspace_sample(2, lambda, noise, 2000, seed++);
            const ModelStats st = true_stats(s);
            const double m = 0.5 * (st.mean_norms[0] + st.mean_norms[1]);
            const SeparationStats sep = empirical_separation(s.data.class_samples());
            EXPECT_LE(sep.empirical_ratio, bound_lemma1(st.lambda_hat, st.sigma_e_sq_hat, m).value + 0.05)
                << "lambda " << lambda << " noise " << noise;
            EXPECT_LE(sep.empirical_prob, sep.empirical_ratio + 1e-12);
        }
    }
}

TEST(BoundChain, BetweenClassLowerBoundOnClassSpecificData) {
    for (double lambda : {0.05, 0.2}) {
        ClassSpecificParams p;
        p.num_classes = 2;
        p.overlap_lambda = lambda;
        p.sigma_e_sq = 0.1;
        p.per_class = 150;
        p.seed = 20;
        const SubspaceSample s = synth_class_specific(p);
        EXPECT_GE(empirical_separation(s.data.X, s.data.y, 2).e_db, lemma3_lower_bound(lambda, 0.1, 2) - 0.1);
    }
}

TEST(SeparabilityReport, CombinesStatsBoundAndSeparation) {
    const SubspaceSample s = subspace_sample(3, 0.2, 0.1, 300, 30);
    const ClassSamples classes = s.data.class_samples();
    const SeparabilityReport r = separability_report(projections_from_subspaces(s.bases, classes), classes);
    const ModelStats& st = r.stats;
    EXPECT_DOUBLE_EQ(r.bound.value, bound_theorem1(st.lambda_hat, st.sigma_e_sq_hat, st.priors, st.mean_norms).value);
    EXPECT_EQ(r.bound.vacuous, r.bound.value >= 1.0);
    ASSERT_TRUE(r.bound_mean_norm.has_value());
    EXPECT_GE(r.bound_mean_norm->value, r.bound.value);
    EXPECT_LE(r.separation.empirical_prob, r.separation.empirical_ratio);
}

TEST(SeparabilityReport, OverlapAboveOneLeavesNote) {
    // Each class carries more energy in the other class's subspace than in its own.
    const Matrix U0 = Matrix::Identity(3, 1);
    const Matrix U1 = Matrix::Identity(3, 3).col(1);
    const Matrix X = (Matrix(2, 3) << 0.6, 0.8, 0, 0.6, 0.8, 0).finished();
    const Matrix Y = (Matrix(2, 3) << 0.8, 0.6, 0, 0.8, 0.6, 0).finished();
    const ClassSamples classes{X, Y};
    const SeparabilityReport r = separability_report(projections_from_subspaces({U0, U1}, classes), classes);
    EXPECT_TRUE(r.bound.vacuous);
    EXPECT_FALSE(r.bound_note.empty());
}

TEST(Projections, BankBlocksMatchEmbedding) {
    std::mt19937_64 rng(40);
    const ClassSamples classes{oracle::random_points(30, 2, rng), oracle::random_points(30, 2, rng, 2.0)};
    const BasisBank bank = fit_bank(classes, {KernelSpec::rbf(1.0), KernelSpec::poly(3)}, BasisOptions{});
    const WeightMatrix nu = uniform_weights(2, 2);
    const ProjectionSet set = projections_from_bank(bank, nu, classes);
    const Matrix E = embed_rows(bank, nu, classes[1]);
    const Eigen::Index w0 = set.at(0, 1).cols();
    EXPECT_EQ(set.at(0, 1), E.leftCols(w0));
    EXPECT_EQ(set.at(1, 1), E.rightCols(E.cols() - w0));
}

TEST(Projections, PcaSubspacesAreOrthonormal) {
    const SubspaceSample s = subspace_sample(2, 0.1, 0.1, 200, 50);
    for (const Matrix& U : fit_pca_subspaces(s.data.class_samples(), 2)) {
        EXPECT_LE((U.transpose() * U - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_THROW(fit_pca_subspaces(s.data.class_samples(), 0), Error);
}
