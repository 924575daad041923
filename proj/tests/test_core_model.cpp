#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "toadfront/core_model.hpp"

using namespace toadfront;

TEST(ThetaDomain, CellCenters) {
    const auto d = ThetaDomain::make(1.0, 2.0, 4);
    EXPECT_DOUBLE_EQ(d.dtheta(), 0.25);
    EXPECT_DOUBLE_EQ(d.center(0), 1.125);
    EXPECT_DOUBLE_EQ(d.center(3), 1.875);
}

TEST(ThetaDomain, RejectsBadInput) {
    EXPECT_THROW(ThetaDomain::make(2.0, 1.0, 8), Error);
    EXPECT_THROW(ThetaDomain::make(0.0, 1.0, 2), Error);
    EXPECT_NO_THROW(ThetaDomain::make(0.0, 1.0, 1));
}

TEST(SampleFunction, Builtins) {
    const auto d = ThetaDomain::make(1.0, 2.0, 8);
    const auto th = sample_function("theta", d);
    const auto af = sample_function("affine 1 0.5", d);
    const auto c = sample_function("const 3", d);
    for (int j = 0; j < 8; ++j) {
        EXPECT_DOUBLE_EQ(th[j], d.center(j));
        EXPECT_DOUBLE_EQ(af[j], 1.0 + 0.5 * d.center(j));
        EXPECT_DOUBLE_EQ(c[j], 3.0);
    }
    const auto t4 = sample_function("table [1, 2, 3, 4]", ThetaDomain::make(0, 1, 4));
    EXPECT_EQ(t4, (std::vector<double>{1, 2, 3, 4}));
}

TEST(SampleFunction, UnknownAndMalformed) {
    const auto d = ThetaDomain::make(1.0, 2.0, 4);
    try {
        sample_function("sin", d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownBuiltin);
    }
    EXPECT_THROW(sample_function("table [1, 2]", d), Error);
    EXPECT_THROW(sample_function("const x", d), Error);
    EXPECT_THROW(sample_function("affine 1", d), Error);
}

TEST(SampleProfile, NonPositiveDiffusivity) {
    const auto d = ThetaDomain::make(-1.0, 1.0, 8);
    try {
        sample_profile("theta", d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveDiffusivity);
    }
}

TEST(NormalizeDrift, MeanZeroAndIdempotent) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> A(4 + trial);
        for (double& a : A) a = U(rng);
        const auto n1 = normalize_drift(A);
        double s = 0.0;
        for (double a : n1.A) s += a;
        EXPECT_LT(std::abs(s / A.size()), 1e-14);
        for (std::size_t j = 0; j < A.size(); ++j) EXPECT_NEAR(n1.A[j] + n1.shift, A[j], 1e-13);
        const auto n2 = normalize_drift(n1.A);
        for (std::size_t j = 0; j < A.size(); ++j) EXPECT_NEAR(n2.A[j], n1.A[j], 1e-15);
        EXPECT_LT(std::abs(n2.shift), 1e-14);
    }
}

TEST(ThetaIntegral, Midpoint) {
    const auto d = ThetaDomain::make(1.0, 2.0, 64);
    EXPECT_NEAR(theta_integral(sample_function("theta", d), d), 1.5, 1e-14);
}

TEST(Field, LayoutAndChecksum) {
    auto f = Field::zeros(5, -1.0, 0.5, ThetaDomain::make(0, 1, 4));
    f.at(2, 3) = 7.0;
    EXPECT_EQ(f.values[2 * 4 + 3], 7.0);
    EXPECT_DOUBLE_EQ(f.x(0), -0.75);
    const auto h = f.checksum();
    f.at(0, 0) = 1e-300;
    EXPECT_NE(h, f.checksum());
    f.at(0, 0) = 0.0;
    EXPECT_EQ(h, f.checksum());
    f.t = 1.0;
    EXPECT_NE(h, f.checksum());
}

TEST(ReactionLaw, ZerosAtEquilibria) {
    const ReactionLaw laws[] = {ReactionLaw::kpp(), ReactionLaw::lower(2.0, 1.5), ReactionLaw::upper(2.0, 1.5),
                                ReactionLaw::bounded(0.5, 1.0), ReactionLaw::modified(0.4)};
    for (const auto& f : laws) {
        EXPECT_EQ(f(0.0), 0.0) << f.describe();
        EXPECT_NEAR(f(f.upper_state()), 0.0, 1e-14) << f.describe();
        // KPP slope one at zero
        EXPECT_NEAR(f(1e-9) / 1e-9, 1.0, 1e-3) << f.describe();
    }
}

TEST(ReactionLaw, SandwichOrdering) {
    // lower <= kpp-type law <= upper on [0, C] for the bounding pair
    const double C = 2.0, p = 1.5;
    const auto lo = ReactionLaw::lower(C, p), hi = ReactionLaw::upper(C, p);
    for (double u = 0.0; u <= 1.0; u += 0.01) {
        const double g = u * (1.0 - u);
        EXPECT_LE(lo(u), g + 1e-15);
        EXPECT_GE(hi(u), g - 1e-15);
    }
}

TEST(ReactionLaw, Validation) {
    EXPECT_THROW(ReactionLaw::bounded(1.0, 0.5), Error);
    EXPECT_THROW(ReactionLaw::modified(1.5), Error);
    EXPECT_THROW(ReactionLaw::lower(-1.0, 1.0), Error);
}
