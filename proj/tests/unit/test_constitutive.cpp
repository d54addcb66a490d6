#include <random>

#include <gtest/gtest.h>

#include "fetosim/constitutive.hpp"
#include "fetosim/mesh.hpp"

using namespace fetosim;

namespace {

TetPositions rest_positions()
{
    return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
}

Mat3 rest_inverse(const TetPositions& x)
{
    Mat3 dm;
    for (int c = 0; c < 3; ++c) {
        dm.col(c) = x[c + 1] - x[0];
    }
    return dm.inverse();
}

// Positions whose deformation gradient w.r.t. the unit right tet is f.
TetPositions deformed_by(const Mat3& f)
{
    TetPositions x = rest_positions();
    for (auto& p : x) {
        p = f * p;
    }
    return x;
}

}  // namespace

TEST(DeformationGradient, IdentityScalingReflection)
{
    const TetPositions x = rest_positions();
    const Mat3 inv = rest_inverse(x);
    EXPECT_LT((deformation_gradient(x, inv) - Mat3::Identity()).norm(), 1e-14);

    TetPositions scaled = x;
    const Vec3 c = 0.25 * (x[0] + x[1] + x[2] + x[3]);
    for (auto& p : scaled) {
        p = c + 2.0 * (p - c);
    }
    const Mat3 f = deformation_gradient(scaled, inv);
    EXPECT_LT((f - 2.0 * Mat3::Identity()).norm(), 1e-14);
    EXPECT_NEAR(f.determinant(), 8.0, 1e-12);

    TetPositions mirrored = x;
    for (auto& p : mirrored) {
        p.x() = -p.x();
    }
    EXPECT_LT(deformation_gradient(mirrored, inv).determinant(), 0.0);
}

TEST(Constraints, HydrostaticValues)
{
    const Mat3 inv = rest_inverse(rest_positions());
    EXPECT_NEAR(hydrostatic_constraint(Mat3::Identity(), inv).value, 0.0, 1e-15);
    EXPECT_NEAR(hydrostatic_constraint(2.0 * Mat3::Identity(), inv).value, 7.0, 1e-12);
    EXPECT_NEAR(hydrostatic_constraint(Vec3(1, 1, 0.5).asDiagonal().toDenseMatrix(), inv).value, -0.5, 1e-15);
}

TEST(Constraints, DeviatoricValues)
{
    const Mat3 inv = rest_inverse(rest_positions());
    EXPECT_EQ(deviatoric_constraint(Mat3::Identity(), inv).value, kSqrt3);
    EXPECT_NEAR(deviatoric_constraint(2.0 * Mat3::Identity(), inv).value, 3.4641016, 1e-7);
    EXPECT_NEAR(deviatoric_constraint(Vec3(2, 1, 1).asDiagonal().toDenseMatrix(), inv).value, 2.4494897, 1e-7);
    const ConstraintEval collapsed = deviatoric_constraint(Mat3::Zero(), inv);
    EXPECT_EQ(collapsed.value, 0.0);
    for (const auto& g : collapsed.gradients) {
        EXPECT_TRUE(g.isZero());
    }
}

TEST(Energy, Values)
{
    EXPECT_NEAR(neo_hookean_energy(Mat3::Identity(), 5.0, 3.0), 0.0, 1e-15);
    EXPECT_NEAR(neo_hookean_energy(2.0 * Mat3::Identity(), 2.0, 2.0), 58.0, 1e-12);
}

TEST(Energy, UniaxialExpansionMatchesFiniteDifferences)
{
    const double lambda = 7.0;
    const double mu = 3.0;
    auto psi = [&](double e) { return neo_hookean_energy(Vec3(1, 1, 1 + e).asDiagonal().toDenseMatrix(), lambda, mu); };
    const double h = 1e-4;
    const double slope = (psi(h) - psi(-h)) / (2 * h);
    const double curvature = (psi(h) - 2 * psi(0) + psi(-h)) / (h * h);
    EXPECT_NEAR(slope, mu, 1e-6);
    EXPECT_NEAR(curvature, lambda + mu, 1e-4);
    const double eps = 1e-3;
    EXPECT_NEAR(psi(eps), 0.5 * lambda * eps * eps + mu * eps + 0.5 * mu * eps * eps, 1e-12);
}

TEST(Energy, HydrostaticTermMatchesConstraint)
{
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    const Mat3 inv = rest_inverse(rest_positions());
    for (int i = 0; i < 20; ++i) {
        Mat3 f = Mat3::Identity();
        for (int k = 0; k < 9; ++k) {
            f.data()[k] += u(rng);
        }
        const double lambda = 11.0;
        const double c = hydrostatic_constraint(f, inv).value;
        const double psi_h = neo_hookean_energy(f, lambda, 0.0);
        EXPECT_NEAR(0.5 * lambda * c * c, psi_h, 1e-12);
    }
}

TEST(Constraints, GradientsMatchFiniteDifferences)
{
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        TetPositions rest;
        do {
            for (auto& p : rest) {
                p = Vec3(u(rng), u(rng), u(rng));
            }
        } while (std::abs(signed_tet_volume(rest[0], rest[1], rest[2], rest[3])) < 0.02);
        const Mat3 inv = rest_inverse(rest);
        TetPositions x = rest;
        for (auto& p : x) {
            p += 0.2 * Vec3(u(rng), u(rng), u(rng));
        }

        auto check = [&](auto&& constraint) {
            const ConstraintEval e = constraint(deformation_gradient(x, inv), inv);
            double err = 0.0;
            double ref = 0.0;
            for (int v = 0; v < 4; ++v) {
                for (int d = 0; d < 3; ++d) {
                    TetPositions xp = x;
                    TetPositions xm = x;
                    xp[v][d] += h;
                    xm[v][d] -= h;
                    const double fd = (constraint(deformation_gradient(xp, inv), inv).value -
                                       constraint(deformation_gradient(xm, inv), inv).value) /
                                      (2 * h);
                    err += (e.gradients[v][d] - fd) * (e.gradients[v][d] - fd);
                    ref += fd * fd;
                }
            }
            EXPECT_LE(std::sqrt(err), 1e-5 * std::sqrt(ref)) << "trial " << trial;
        };
        check([](const Mat3& f, const Mat3& inv) { return hydrostatic_constraint(f, inv); });
        check([](const Mat3& f, const Mat3& inv) { return deviatoric_constraint(f, inv); });
    }
}

TEST(Constraints, TranslationAndRotationInvariance)
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const TetPositions rest = rest_positions();
    const Mat3 inv = rest_inverse(rest);
    for (int trial = 0; trial < 50; ++trial) {
        TetPositions x = rest;
        for (auto& p : x) {
            p += 0.3 * Vec3(u(rng), u(rng), u(rng));
        }
        const Mat3 f = deformation_gradient(x, inv);
        const ConstraintEval h0 = hydrostatic_constraint(f, inv);
        const ConstraintEval d0 = deviatoric_constraint(f, inv);

        const Vec3 shift(u(rng), u(rng), u(rng));
        TetPositions moved = x;
        for (auto& p : moved) {
            p += shift;
        }
        const Mat3 fm = deformation_gradient(moved, inv);
        EXPECT_NEAR(hydrostatic_constraint(fm, inv).value, h0.value, 1e-10);
        EXPECT_NEAR(deviatoric_constraint(fm, inv).value, d0.value, 1e-10);

        const Mat3 r = Quat(u(rng), u(rng), u(rng), u(rng)).normalized().toRotationMatrix();
        TetPositions rotated = x;
        for (auto& p : rotated) {
            p = r * p;
        }
        const Mat3 fr = deformation_gradient(rotated, inv);
        EXPECT_NEAR(hydrostatic_constraint(fr, inv).value, h0.value, 1e-9);
        EXPECT_NEAR(deviatoric_constraint(fr, inv).value, d0.value, 1e-9);

        Vec3 sum_h = Vec3::Zero();
        Vec3 sum_d = Vec3::Zero();
        for (int v = 0; v < 4; ++v) {
            sum_h += h0.gradients[v];
            sum_d += d0.gradients[v];
        }
        EXPECT_LT(sum_h.norm(), 1e-12);
        EXPECT_LT(sum_d.norm(), 1e-12);
        EXPECT_GE(d0.value, 0.0);
    }
}

TEST(Constraints, RestOffsetShiftsTarget)
{
    const Mat3 inv = rest_inverse(rest_positions());
    const double offset = 0.02;
    EXPECT_NEAR(hydrostatic_constraint(Mat3::Identity(), inv, offset).value, -offset, 1e-15);
    const Mat3 f = std::cbrt(1.0 + offset) * Mat3::Identity();
    EXPECT_NEAR(hydrostatic_constraint(deformation_gradient(deformed_by(f), inv), inv, offset).value, 0.0, 1e-12);
}
