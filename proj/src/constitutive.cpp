#include "fetosim/constitutive.hpp"

namespace fetosim {

namespace {

// Maps dC/dF to per-vertex gradients through F = D_s * D_m^-1.
ConstraintEval chain_to_vertices(double value, const Mat3& dc_df, const Mat3& rest_inv)
{
    const Mat3 g = dc_df * rest_inv.transpose();
    ConstraintEval out;
    out.value = value;
    out.gradients[1] = g.col(0);
    out.gradients[2] = g.col(1);
    out.gradients[3] = g.col(2);
    out.gradients[0] = -(out.gradients[1] + out.gradients[2] + out.gradients[3]);
    return out;
}

}  // namespace

Mat3 deformation_gradient(const TetPositions& x, const Mat3& rest_inv)
{
    Mat3 ds;
    ds.col(0) = x[1] - x[0];
    ds.col(1) = x[2] - x[0];
    ds.col(2) = x[3] - x[0];
    return ds * rest_inv;
}

Mat3 cofactor(const Mat3& f)
{
    Mat3 c;
    c.col(0) = f.col(1).cross(f.col(2));
    c.col(1) = f.col(2).cross(f.col(0));
    c.col(2) = f.col(0).cross(f.col(1));
    return c;
}

ConstraintEval hydrostatic_constraint(const Mat3& f, const Mat3& rest_inv, double rest_offset)
{
    return chain_to_vertices(f.determinant() - 1.0 - rest_offset, cofactor(f), rest_inv);
}

ConstraintEval deviatoric_constraint(const Mat3& f, const Mat3& rest_inv)
{
    const double norm = f.norm();
    if (norm < 1e-9) {
        ConstraintEval out;
        out.value = norm;
        return out;
    }
    return chain_to_vertices(norm, f / norm, rest_inv);
}

double neo_hookean_energy(const Mat3& f, double lambda, double mu)
{
    const double j = f.determinant() - 1.0;
    return 0.5 * lambda * j * j + 0.5 * mu * ((f.transpose() * f).trace() - 3.0);
}

}  // namespace fetosim
