#pragma once

#include <array>
#include <cmath>

#include "fetosim/types.hpp"

namespace fetosim {

inline const double kSqrt3 = std::sqrt(3.0);

/// A scalar constraint value and its gradient with respect to each of the
/// four tet vertices (1/m). Gradients of the element constraints sum to zero.
struct ConstraintEval {
    double value = 0.0;
    std::array<Vec3, 4> gradients{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
};

using TetPositions = std::array<Vec3, 4>;

/// F = D_s * D_m^-1. Inverted elements yield det F < 0.
Mat3 deformation_gradient(const TetPositions& x, const Mat3& rest_inv);

/// Cofactor matrix, i.e. d det(F) / dF.
Mat3 cofactor(const Mat3& f);

/// Hydrostatic constraint det(F) - 1 - rest_offset. `rest_offset` is zero
/// unless the rest-stabilized target 1 + mu/lambda is requested.
ConstraintEval hydrostatic_constraint(const Mat3& f, const Mat3& rest_inv, double rest_offset = 0.0);

/// Deviatoric constraint sqrt(tr(F^T F)). Gradients are zeroed when the
/// value falls below 1e-9 (fully collapsed element).
ConstraintEval deviatoric_constraint(const Mat3& f, const Mat3& rest_inv);

/// Neo-Hookean energy density lambda/2 (det F - 1)^2 + mu/2 (tr(F^T F) - 3).
double neo_hookean_energy(const Mat3& f, double lambda, double mu);

}  // namespace fetosim
