#include "fetosim/solver.hpp"

#include <bitset>
#include <cmath>
#include <cstring>

#include "fetosim/constitutive.hpp"

namespace fetosim {

void SolverConfig::validate() const
{
    if (!(frame_dt > 0.0)) {
        throw ValidationError("frame_dt must be positive");
    }
    if (substeps < 1) {
        throw ValidationError("substeps must be at least 1");
    }
    if (iterations < 1) {
        throw ValidationError("iterations must be at least 1");
    }
    if (velocity_damping < 0.0 || max_speed_clamp < 0.0) {
        throw ValidationError("damping and speed clamp must be non-negative");
    }
    if (contact_compliance < 0.0 || contact_margin < 0.0) {
        throw ValidationError("contact compliance and margin must be non-negative");
    }
    if (!gravity.allFinite()) {
        throw ValidationError("gravity must be finite");
    }
}

SolverState SolverState::from_mesh(const TetMesh& mesh)
{
    SolverState s;
    s.x = mesh.vertices;
    s.x_prev = mesh.vertices;
    s.v.assign(mesh.vertices.size(), Vec3::Zero());
    s.ext_force.assign(mesh.vertices.size(), Vec3::Zero());
    s.lambda_dev.assign(mesh.tets.size(), 0.0);
    s.lambda_hyd.assign(mesh.tets.size(), 0.0);
    return s;
}

std::optional<double> xpbd_delta_lambda(double c, std::span<const Vec3> gradients,
                                        std::span<const double> inv_masses, double alpha_tilde,
                                        double lambda_acc)
{
    double denom = alpha_tilde;
    for (std::size_t i = 0; i < gradients.size(); ++i) {
        denom += inv_masses[i] * gradients[i].squaredNorm();
    }
    if (denom < 1e-12) {
        return std::nullopt;
    }
    return (-c - alpha_tilde * lambda_acc) / denom;
}

Vec3 extract_constraint_force(double lambda_acc, const Vec3& gradient, double dt)
{
    return lambda_acc * gradient / (dt * dt);
}

std::vector<std::vector<int>> color_tets(const TetMesh& mesh)
{
    constexpr std::size_t kMaxColors = 256;
    std::vector<std::bitset<kMaxColors>> used(mesh.vertices.size());
    std::vector<std::vector<int>> batches;
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const Tet& k = mesh.tets[t];
        const auto forbidden = used[k[0]] | used[k[1]] | used[k[2]] | used[k[3]];
        std::size_t color = 0;
        while (color < kMaxColors && forbidden.test(color)) {
            ++color;
        }
        if (color == kMaxColors) {
            throw Error("tet coloring exceeded 256 colors");
        }
        for (int v : k) {
            used[v].set(color);
        }
        if (batches.size() <= color) {
            batches.resize(color + 1);
        }
        batches[color].push_back(static_cast<int>(t));
    }
    return batches;
}

ElasticModel::ElasticModel(const TetMesh& mesh, const MaterialParams& material, const SolverConfig& config)
    : material_(material), config_(config)
{
    has_hydrostatic_ = material.lame_lambda > 0.0;
    if (config.rest_correction) {
        if (!has_hydrostatic_) {
            throw ValidationError("rest correction requires a positive Lame lambda");
        }
        rest_offset_ = material.lame_mu / material.lame_lambda;
        deviatoric_target_ = 0.0;
    } else {
        rest_offset_ = 0.0;
        deviatoric_target_ = kSqrt3;
    }
    rebuild(mesh);
}

void ElasticModel::rebuild(const TetMesh& mesh)
{
    const std::size_t nt = mesh.tets.size();
    alpha_dev_.assign(nt, 0.0);
    alpha_hyd_.assign(nt, 0.0);
    for (std::size_t t = 0; t < nt; ++t) {
        const double v = mesh.rest_volume[t];
        alpha_dev_[t] = config_.deviatoric_compliance_scale / (material_.lame_mu * v);
        if (has_hydrostatic_) {
            alpha_hyd_[t] = config_.hydrostatic_compliance_scale / (material_.lame_lambda * v);
        }
    }
    batches_ = color_tets(mesh);
}

void ElasticModel::project_tet(SolverState& state, const TetMesh& mesh, int t, double dt, int* degenerate) const
{
    const Tet& k = mesh.tets[t];
    const std::array<double, 4> w{mesh.inv_mass[k[0]], mesh.inv_mass[k[1]], mesh.inv_mass[k[2]],
                                  mesh.inv_mass[k[3]]};
    const Mat3& rest_inv = mesh.rest_inv[t];
    const double inv_dt2 = 1.0 / (dt * dt);

    auto apply = [&](const ConstraintEval& c, double alpha, double& lambda) {
        const auto dl = xpbd_delta_lambda(c.value, c.gradients, w, alpha * inv_dt2, lambda);
        if (!dl) {
            if (degenerate) {
                ++*degenerate;
            }
            return;
        }
        for (int i = 0; i < 4; ++i) {
            state.x[k[i]] += w[i] * *dl * c.gradients[i];
        }
        lambda += *dl;
    };

    TetPositions x{state.x[k[0]], state.x[k[1]], state.x[k[2]], state.x[k[3]]};
    ConstraintEval dev = deviatoric_constraint(deformation_gradient(x, rest_inv), rest_inv);
    dev.value -= deviatoric_target_;
    apply(dev, alpha_dev_[t], state.lambda_dev[t]);

    if (has_hydrostatic_) {
        x = {state.x[k[0]], state.x[k[1]], state.x[k[2]], state.x[k[3]]};
        const ConstraintEval hyd = hydrostatic_constraint(deformation_gradient(x, rest_inv), rest_inv, rest_offset_);
        apply(hyd, alpha_hyd_[t], state.lambda_hyd[t]);
    }
}

void ElasticModel::project(SolverState& state, const TetMesh& mesh, double dt, bool parallel, int* degenerate) const
{
    for (const auto& batch : batches_) {
        const auto n = static_cast<std::ptrdiff_t>(batch.size());
        if (parallel && n > 256) {
            int batch_degenerate = 0;
#pragma omp parallel for schedule(static) reduction(+ : batch_degenerate)
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                project_tet(state, mesh, batch[static_cast<std::size_t>(i)], dt, &batch_degenerate);
            }
            if (degenerate) {
                *degenerate += batch_degenerate;
            }
        } else {
            for (int t : batch) {
                project_tet(state, mesh, t, dt, degenerate);
            }
        }
    }
}

std::pair<double, double> ElasticModel::constraint_values(const TetMesh& mesh, std::span<const Vec3> x,
                                                          int t) const
{
    const Tet& k = mesh.tets[t];
    const Mat3 f = deformation_gradient({x[k[0]], x[k[1]], x[k[2]], x[k[3]]}, mesh.rest_inv[t]);
    const double dev = f.norm() - deviatoric_target_;
    const double hyd = has_hydrostatic_ ? f.determinant() - 1.0 - rest_offset_ : 0.0;
    return {dev, hyd};
}

double ElasticModel::residual(const TetMesh& mesh, std::span<const Vec3> x) const
{
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
        if (!mesh.alive[t]) {
            continue;
        }
        const auto [dev, hyd] = constraint_values(mesh, x, static_cast<int>(t));
        sum += dev * dev + hyd * hyd;
    }
    return std::sqrt(sum);
}

Attachments::Handle Attachments::add(const TetMesh& mesh, int vertex, const Vec3& target, double compliance)
{
    if (vertex < 0 || static_cast<std::size_t>(vertex) >= mesh.vertices.size()) {
        throw ValidationError("attachment to unknown vertex " + std::to_string(vertex));
    }
    if (compliance < 0.0) {
        throw ValidationError("attachment compliance must be non-negative");
    }
    const Handle h = next_++;
    items_.emplace(h, Attachment{vertex, target, compliance, Vec3::Zero()});
    return h;
}

bool Attachments::remove(Handle h)
{
    return items_.erase(h) > 0;
}

void Attachments::set_target(Handle h, const Vec3& target)
{
    items_.at(h).target = target;
}

const Attachments::Attachment& Attachments::get(Handle h) const
{
    return items_.at(h);
}

void Attachments::reset_lambdas()
{
    for (auto& [h, a] : items_) {
        a.lambda.setZero();
    }
}

void Attachments::project(SolverState& state, const TetMesh& mesh, double dt)
{
    for (auto& [h, a] : items_) {
        const double w = mesh.inv_mass[a.vertex];
        const double alpha_tilde = a.compliance / (dt * dt);
        if (w + alpha_tilde < 1e-12) {
            continue;
        }
        const Vec3 c = state.x[a.vertex] - a.target;
        const Vec3 dl = (-c - alpha_tilde * a.lambda) / (w + alpha_tilde);
        state.x[a.vertex] += w * dl;
        a.lambda += dl;
    }
}

Vec3 Attachments::force(Handle h, double dt) const
{
    return items_.at(h).lambda / (dt * dt);
}

Solver::Solver(const TetMesh& mesh, const MaterialParams& material, SolverConfig config)
    : config_(std::move(config)), material_(material)
{
    config_.validate();
    elastic_ = ElasticModel(mesh, material_, config_);
}

void Solver::predict(SolverState& state, const TetMesh& mesh, double dt) const
{
    state.x_prev = state.x;
    for (std::size_t i = 0; i < state.x.size(); ++i) {
        const double w = mesh.inv_mass[i];
        if (w <= 0.0) {
            continue;
        }
        state.x[i] += state.v[i] * dt + dt * dt * (config_.gravity + w * state.ext_force[i]);
    }
}

SubstepStats Solver::project(SolverState& state, const TetMesh& mesh, double dt)
{
    SubstepStats stats;
    std::fill(state.lambda_dev.begin(), state.lambda_dev.end(), 0.0);
    std::fill(state.lambda_hyd.begin(), state.lambda_hyd.end(), 0.0);
    attachments_.reset_lambdas();
    for (auto& c : contacts_) {
        c.lambda_n = 0.0;
        c.tangential = 0.0;
    }

    const bool parallel = config_.parallel_batches;
    for (int it = 0; it < config_.iterations; ++it) {
        elastic_.project(state, mesh, dt, parallel, &stats.degenerate);
        attachments_.project(state, mesh, dt);
        for (auto& c : contacts_) {
            const auto corr = solve_contact(c, state.x, state.x_prev, mesh.inv_mass, bodies_[c.tool],
                                            material_.friction_coeff, config_.contact_compliance, dt);
            if (corr.degenerate) {
                ++stats.degenerate;
            }
            stats.max_normal_correction = std::max(stats.max_normal_correction, corr.normal);
        }
    }
    stats.contacts = static_cast<int>(contacts_.size());
    return stats;
}

void Solver::update_velocities(SolverState& state, const TetMesh& mesh, double dt) const
{
    const double damping = std::max(0.0, 1.0 - config_.velocity_damping * dt);
    for (std::size_t i = 0; i < state.x.size(); ++i) {
        if (!state.x[i].allFinite()) {
            throw SolverAbort(static_cast<int>(i), "non-finite position at vertex " + std::to_string(i));
        }
        if (mesh.inv_mass[i] <= 0.0) {
            state.v[i].setZero();
            continue;
        }
        Vec3 v = (state.x[i] - state.x_prev[i]) / dt * damping;
        if (config_.max_speed_clamp > 0.0) {
            const double speed = v.norm();
            if (speed > config_.max_speed_clamp) {
                v *= config_.max_speed_clamp / speed;
            }
        }
        state.v[i] = v;
    }
}

SubstepStats Solver::substep(SolverState& state, const TetMesh& mesh, double dt, const ContactDetector& detect)
{
    predict(state, mesh, dt);
    // Catch bad input before the projection smears it over neighbours.
    for (std::size_t i = 0; i < state.x.size(); ++i) {
        if (!state.x[i].allFinite()) {
            throw SolverAbort(static_cast<int>(i), "non-finite predicted position at vertex " + std::to_string(i));
        }
    }
    contacts_.clear();
    bodies_.clear();
    if (detect) {
        detect(state, contacts_, bodies_);
    }
    const SubstepStats stats = project(state, mesh, dt);
    update_velocities(state, mesh, dt);
    return stats;
}

double kinetic_energy(const TetMesh& mesh, std::span<const Vec3> v)
{
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        e += 0.5 * mesh.vertex_mass[i] * v[i].squaredNorm();
    }
    return e;
}

std::uint64_t position_hash(std::span<const Vec3> x)
{
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : x) {
        for (int k = 0; k < 3; ++k) {
            unsigned char bytes[sizeof(double)];
            const double value = p[k];
            std::memcpy(bytes, &value, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ull;
            }
        }
    }
    return h;
}

}  // namespace fetosim
