#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fetosim/collision/contact.hpp"
#include "fetosim/mesh.hpp"

namespace fetosim {

struct SolverConfig {
    double frame_dt = 1.0 / 60.0;  // s
    int substeps = 8;
    /// Gauss-Seidel passes per substep. 1 is the substepping scheme; larger
    /// values with substeps = 1 give the classic iterated XPBD baseline.
    int iterations = 1;
    Vec3 gravity{0.0, 0.0, -9.81};
    double velocity_damping = 0.0;  // 1/s
    double max_speed_clamp = 0.0;   // m/s, 0 = off
    bool deterministic = true;
    bool parallel_batches = false;

    /// Targets det F = 1 + mu/lambda and projects sqrt(tr F^T F) toward 0
    /// (the rest-stabilized pairing) instead of det F = 1 with
    /// sqrt(tr F^T F) = sqrt(3).
    bool rest_correction = false;
    double hydrostatic_compliance_scale = 1.0;
    double deviatoric_compliance_scale = 1.0;

    double contact_compliance = 0.0;  // m/N
    double contact_margin = 1e-3;     // m

    double substep_dt() const { return frame_dt / substeps; }
    void validate() const;
};

struct SolverState {
    std::vector<Vec3> x;
    std::vector<Vec3> x_prev;
    std::vector<Vec3> v;
    std::vector<Vec3> ext_force;  // N
    std::vector<double> lambda_dev;
    std::vector<double> lambda_hyd;

    static SolverState from_mesh(const TetMesh& mesh);
};

class SolverAbort : public Error {
public:
    SolverAbort(int vertex, const std::string& what) : Error(what), vertex_(vertex) {}
    int vertex() const noexcept { return vertex_; }

private:
    int vertex_;
};

/// XPBD multiplier update (-C - alpha~ * lambda) / (sum w |grad C|^2 + alpha~).
/// Returns nullopt when the denominator is below 1e-12.
std::optional<double> xpbd_delta_lambda(double c, std::span<const Vec3> gradients,
                                        std::span<const double> inv_masses, double alpha_tilde,
                                        double lambda_acc);

/// Constraint force lambda * grad C / dt^2.
Vec3 extract_constraint_force(double lambda_acc, const Vec3& gradient, double dt);

/// Neo-Hookean element constraints (deviatoric then hydrostatic per tet),
/// partitioned into vertex-disjoint color batches.
class ElasticModel {
public:
    ElasticModel() = default;
    ElasticModel(const TetMesh& mesh, const MaterialParams& material, const SolverConfig& config);

    /// Recomputes compliances and coloring, e.g. after tets were removed.
    void rebuild(const TetMesh& mesh);

    /// One Gauss-Seidel pass over all alive elements.
    void project(SolverState& state, const TetMesh& mesh, double dt, bool parallel, int* degenerate = nullptr) const;

    /// Effective constraint values of one tet: (deviatoric, hydrostatic).
    std::pair<double, double> constraint_values(const TetMesh& mesh, std::span<const Vec3> x, int tet) const;

    /// sqrt of the sum of squared effective constraint values.
    double residual(const TetMesh& mesh, std::span<const Vec3> x) const;

    const std::vector<std::vector<int>>& batches() const { return batches_; }
    double deviatoric_compliance(int tet) const { return alpha_dev_[tet]; }
    double hydrostatic_compliance(int tet) const { return alpha_hyd_[tet]; }
    bool has_hydrostatic() const { return has_hydrostatic_; }

private:
    void project_tet(SolverState& state, const TetMesh& mesh, int t, double dt, int* degenerate) const;

    MaterialParams material_;
    SolverConfig config_;
    double rest_offset_ = 0.0;
    double deviatoric_target_ = 0.0;
    bool has_hydrostatic_ = true;
    std::vector<double> alpha_dev_;
    std::vector<double> alpha_hyd_;
    std::vector<std::vector<int>> batches_;
};

/// Vector-valued attachment x_v - target = 0 with compliance alpha (m/N).
class Attachments {
public:
    using Handle = std::uint64_t;

    struct Attachment {
        int vertex = -1;
        Vec3 target = Vec3::Zero();
        double compliance = 0.0;
        Vec3 lambda = Vec3::Zero();
    };

    /// Throws ValidationError for an unknown vertex.
    Handle add(const TetMesh& mesh, int vertex, const Vec3& target, double compliance);
    bool remove(Handle h);
    void clear() { items_.clear(); }
    void set_target(Handle h, const Vec3& target);

    const Attachment& get(Handle h) const;
    bool contains(Handle h) const { return items_.contains(h); }
    std::size_t size() const { return items_.size(); }
    const std::map<Handle, Attachment>& items() const { return items_; }

    void reset_lambdas();
    void project(SolverState& state, const TetMesh& mesh, double dt);

    /// Force the attachment applies to its vertex, lambda / dt^2.
    Vec3 force(Handle h, double dt) const;

private:
    std::map<Handle, Attachment> items_;
    Handle next_ = 1;
};

struct SubstepStats {
    int contacts = 0;
    int degenerate = 0;
    double max_normal_correction = 0.0;
};

/// Contact source evaluated once per substep after prediction. Fills the
/// contact list and the per-tool bodies that `Contact::tool` indexes.
using ContactDetector =
    std::function<void(const SolverState&, std::vector<Contact>&, std::vector<ContactBody>&)>;

/// XPBD integrator: predict, one (or `iterations`) Gauss-Seidel pass over
/// elastic, attachment and contact constraints, velocity update.
class Solver {
public:
    Solver() = default;
    Solver(const TetMesh& mesh, const MaterialParams& material, SolverConfig config);

    const SolverConfig& config() const { return config_; }
    const MaterialParams& material() const { return material_; }
    ElasticModel& elastic() { return elastic_; }
    const ElasticModel& elastic() const { return elastic_; }
    Attachments& attachments() { return attachments_; }
    const Attachments& attachments() const { return attachments_; }
    const std::vector<Contact>& contacts() const { return contacts_; }
    const std::vector<ContactBody>& contact_bodies() const { return bodies_; }

    void rebuild(const TetMesh& mesh) { elastic_.rebuild(mesh); }
    void set_gravity(const Vec3& g) { config_.gravity = g; }

    void predict(SolverState& state, const TetMesh& mesh, double dt) const;
    SubstepStats project(SolverState& state, const TetMesh& mesh, double dt);
    void update_velocities(SolverState& state, const TetMesh& mesh, double dt) const;

    /// x_prev <- x, predict, detect contacts, project, velocities.
    /// Throws SolverAbort if a position becomes non-finite.
    SubstepStats substep(SolverState& state, const TetMesh& mesh, double dt, const ContactDetector& detect = {});

private:
    SolverConfig config_;
    MaterialParams material_;
    ElasticModel elastic_;
    Attachments attachments_;
    std::vector<Contact> contacts_;
    std::vector<ContactBody> bodies_;
};

/// Greedy vertex-disjoint coloring of alive tets, batches in ascending
/// tet order.
std::vector<std::vector<int>> color_tets(const TetMesh& mesh);

double kinetic_energy(const TetMesh& mesh, std::span<const Vec3> v);

/// FNV-1a over the raw bytes of all positions.
std::uint64_t position_hash(std::span<const Vec3> x);

}  // namespace fetosim
