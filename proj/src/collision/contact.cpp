#include "fetosim/collision/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <optional>

namespace fetosim {

namespace {

Vec3 barycentric_point(std::span<const Vec3> verts, const std::array<double, 4>& b)
{
    Vec3 p = Vec3::Zero();
    for (std::size_t i = 0; i < verts.size(); ++i) {
        p += b[i] * verts[i];
    }
    return p;
}

}  // namespace

void project_to_simplex(std::span<double> b)
{
    const std::size_t n = b.size();
    std::array<double, 4> u{};
    std::copy(b.begin(), b.end(), u.begin());
    std::sort(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(n), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) {
            theta = t;
        }
    }
    for (double& v : b) {
        v = std::max(v - theta, 0.0);
    }
}

namespace {

class ElementMinimizer {
public:
    ElementMinimizer(std::span<const Vec3> verts, const SdfShape& shape) : verts_(verts), shape_(shape)
    {
        for (std::size_t i = 0; i < verts.size(); ++i) {
            mean_ += verts[i] / static_cast<double>(verts.size());
            for (std::size_t j = i + 1; j < verts.size(); ++j) {
                longest_ = std::max(longest_, (verts[i] - verts[j]).norm());
            }
        }
    }

    double longest() const { return longest_; }
    std::size_t size() const { return verts_.size(); }

    ElementClosest sample(const std::array<double, 4>& b) const
    {
        ElementClosest c;
        c.bary = b;
        c.point = barycentric_point(verts_, b);
        const SdfSample s = shape_.eval(c.point);
        c.phi = s.distance;
        c.normal = s.gradient;
        return c;
    }

    // Projected gradient descent, fixed iteration budget.
    void descend(ElementClosest& best) const
    {
        const std::size_t n = size();
        double step = 0.5 / longest_;
        bool converged = false;
        for (int it = 0; it < kNarrowPhaseIterations; ++it) {
            std::array<double, 4> grad{};
            for (std::size_t i = 0; i < n; ++i) {
                grad[i] = best.normal.dot(verts_[i] - mean_);
            }
            bool accepted = false;
            bool stationary = false;
            for (int halving = 0; halving < 48; ++halving) {
                std::array<double, 4> cand{};
                for (std::size_t i = 0; i < n; ++i) {
                    cand[i] = best.bary[i] - step * grad[i];
                }
                project_to_simplex(std::span<double>(cand.data(), n));
                double moved = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    moved = std::max(moved, std::abs(cand[i] - best.bary[i]));
                }
                if (moved * longest_ < 1e-12) {
                    stationary = true;
                    break;
                }
                const ElementClosest c = sample(cand);
                if (c.phi < best.phi) {
                    best = c;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted || stationary) {
                converged = true;
                break;
            }
            step *= 2.0;
        }
        best.converged = converged;
    }

    // Pattern search over directions that are evenly spread in space and
    // rotate by the golden angle after every failed poll, so kinks of the
    // SDF where the gradient step stalls are still resolved. Candidates
    // are projected back onto the simplex.
    void polish(ElementClosest& best, double initial_step) const
    {
        const std::size_t n = size();
        std::vector<std::array<double, 4>> directions;
        if (n == 2) {
            directions = {{1.0, -1.0, 0.0, 0.0}, {-1.0, 1.0, 0.0, 0.0}};
        }
        Eigen::Matrix<double, 3, Eigen::Dynamic> edges(3, n - 1);
        for (std::size_t i = 1; i < n; ++i) {
            edges.col(static_cast<Eigen::Index>(i - 1)) = verts_[i] - verts_[0];
        }
        const Eigen::MatrixXd gram = edges.transpose() * edges;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible()) {
            return;
        }
        double offset = 0.0;
        auto rotate = [&] {
            if (n == 2) {
                return;
            }
            directions.clear();
            // Orthonormal frame of the element's span.
            Eigen::Matrix<double, 3, Eigen::Dynamic> frame = edges.householderQr().householderQ();
            frame.conservativeResize(3, static_cast<Eigen::Index>(n - 1));
            std::vector<Vec3> spatial;
            if (n == 3) {
                for (int k = 0; k < 8; ++k) {
                    const double theta = offset + k * (M_PI / 4.0);
                    spatial.push_back(std::cos(theta) * frame.col(0) + std::sin(theta) * frame.col(1));
                }
            } else {
                const Mat3 r = Eigen::AngleAxisd(offset, Vec3(1, 1, 1).normalized()).toRotationMatrix();
                for (int a = 0; a < 3; ++a) {
                    spatial.push_back(r.col(a));
                    spatial.push_back(-r.col(a));
                }
            }
            for (const Vec3& dir : spatial) {
                const Eigen::VectorXd beta = lu.solve(edges.transpose() * dir);
                std::array<double, 4> d{};
                for (std::size_t i = 1; i < n; ++i) {
                    d[i] = beta[static_cast<Eigen::Index>(i - 1)];
                    d[0] -= d[i];
                }
                directions.push_back(d);
            }
        };
        rotate();

        // Triangle and tet steps are in meters, edge steps in barycentric units.
        const double scale = n == 2 ? longest_ : 1.0;
        double h = n == 2 ? initial_step : initial_step * longest_;
        int evaluations = 0;
        int failures = 0;
        double model_error = 0.0;  // largest deviation from the tangent plane in a failed poll
        auto try_step = [&](const std::array<double, 4>& d, double length) {
            std::array<double, 4> cand{};
            for (std::size_t i = 0; i < n; ++i) {
                cand[i] = best.bary[i] + length * d[i];
            }
            project_to_simplex(std::span<double>(cand.data(), n));
            ++evaluations;
            const ElementClosest c = sample(cand);
            if (c.phi < best.phi) {
                best = c;
                return true;
            }
            const double predicted = best.phi + best.normal.dot(c.point - best.point);
            model_error = std::max(model_error, std::abs(c.phi - predicted));
            return false;
        };
        while (h * scale > kNarrowPhaseTolerance && evaluations < 400) {
            bool improved = false;
            model_error = 0.0;
            for (const auto& d : directions) {
                if (try_step(d, h)) {
                    // Keep going along a successful direction with growing steps.
                    double length = 2.0 * h;
                    while (evaluations < 400 && try_step(d, length)) {
                        length *= 2.0;
                    }
                    improved = true;
                    break;
                }
            }
            if (improved) {
                failures = 0;
                continue;
            }
            // phi is affine around the point and no poll descends: a
            // minimum of the local plane over the simplex.
            if (model_error < 1e-12) {
                break;
            }
            offset += 2.399963229728653;
            rotate();
            if (n == 2 || ++failures == 2) {
                h *= 0.5;
                failures = 0;
            }
        }
    }

private:
    std::span<const Vec3> verts_;
    const SdfShape& shape_;
    Vec3 mean_ = Vec3::Zero();
    double longest_ = 0.0;
};

}  // namespace

ElementClosest closest_point_element_sdf(std::span<const Vec3> verts, const SdfShape& shape, double cutoff)
{
    const std::size_t n = verts.size();
    const ElementMinimizer m(verts, shape);
    if (n == 1 || m.longest() < 1e-12) {
        return m.sample({1.0, 0.0, 0.0, 0.0});
    }

    // phi is 1-Lipschitz: the centroid value minus the circumradius about
    // the centroid bounds the element minimum from below.
    std::array<double, 4> centroid{};
    Vec3 mid = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        centroid[i] = 1.0 / static_cast<double>(n);
        mid += verts[i] / static_cast<double>(n);
    }
    double reach = 0.0;
    for (const auto& v : verts) {
        reach = std::max(reach, (v - mid).norm());
    }
    if (std::isfinite(cutoff)) {
        const ElementClosest centre = m.sample(centroid);
        if (centre.phi - reach >= cutoff) {
            return centre;
        }
    }

    // Coarse barycentric lattice; its local minima seed separate descents
    // because unions of shapes can have several basins.
    const int level = n == 2 ? 8 : (n == 3 ? 6 : 3);
    std::map<std::array<int, 4>, ElementClosest> lattice;
    std::array<int, 4> k{};
    auto visit = [&](auto&& self, std::size_t slot, int left) -> void {
        if (slot + 1 == n) {
            k[slot] = left;
            std::array<double, 4> b{};
            for (std::size_t i = 0; i < n; ++i) {
                b[i] = static_cast<double>(k[i]) / level;
            }
            lattice.emplace(k, m.sample(b));
            return;
        }
        for (int v = left; v >= 0; --v) {
            k[slot] = v;
            self(self, slot + 1, left - v);
        }
    };
    visit(visit, 0, level);

    // Every point lies within longest / level of a lattice node.
    double lowest = std::numeric_limits<double>::infinity();
    const ElementClosest* lowest_node = nullptr;
    for (const auto& [node, c] : lattice) {
        if (c.phi < lowest) {
            lowest = c.phi;
            lowest_node = &c;
        }
    }
    if (lowest - m.longest() / level >= cutoff) {
        return *lowest_node;
    }

    std::vector<const ElementClosest*> seeds;
    for (const auto& [node, c] : lattice) {
        bool minimum = true;
        for (std::size_t i = 0; i < n && minimum; ++i) {
            for (std::size_t j = 0; j < n && minimum; ++j) {
                if (i == j || node[j] == 0) {
                    continue;
                }
                std::array<int, 4> nb = node;
                ++nb[i];
                --nb[j];
                const auto it = lattice.find(nb);
                minimum = it == lattice.end() || it->second.phi >= c.phi;
            }
        }
        if (minimum) {
            seeds.push_back(&c);
        }
    }
    std::stable_sort(seeds.begin(), seeds.end(), [](auto* a, auto* b) { return a->phi < b->phi; });
    // Plateaus (e.g. an element parallel to a flat face) make every node a
    // local minimum; keep one seed per distinct value.
    std::vector<const ElementClosest*> distinct;
    for (const ElementClosest* seed : seeds) {
        if (distinct.size() == 3) {
            break;
        }
        if (distinct.empty() || seed->phi > distinct.back()->phi + 1e-12) {
            distinct.push_back(seed);
        }
    }
    seeds = std::move(distinct);

    ElementClosest best;
    best.phi = std::numeric_limits<double>::infinity();
    for (const ElementClosest* seed : seeds) {
        ElementClosest c = *seed;
        m.descend(c);
        if (c.phi < 0.0 || !c.converged) {
            m.polish(c, 1.0 / level);
        }
        if (c.phi < best.phi) {
            best = c;
        }
    }
    return best;
}

bool narrow_phase_element(const CollisionElement& e, std::span<const Vec3> x, const SdfShape& shape,
                          double margin, Contact& out)
{
    std::array<Vec3, 3> verts;
    const int count = e.count();
    for (int k = 0; k < count; ++k) {
        verts[k] = x[e.verts[k]];
    }
    const ElementClosest c = closest_point_element_sdf(std::span<const Vec3>(verts.data(), count), shape, margin);
    if (!(c.phi < margin)) {
        return false;
    }
    if (e.kind != ElementKind::Vertex) {
        for (int k = 0; k < count; ++k) {
            if (c.bary[k] > 1.0 - 1e-9) {
                return false;
            }
        }
    }
    out.kind = e.kind;
    out.tri = e.tri;
    out.verts = e.verts;
    out.bary = {c.bary[0], c.bary[1], c.bary[2]};
    out.phi = c.phi;
    out.normal = c.normal;
    return true;
}

void generate_contacts(const Bvh& bvh, std::span<const CollisionElement> elements, std::span<const Vec3> x,
                       const SdfShape& shape, double margin, int tool, std::vector<Contact>& out,
                       bool parallel)
{
    std::vector<int> candidates;
    bvh.query(shape.bounds().inflated(margin), candidates);

    std::vector<std::optional<Contact>> found(candidates.size());
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(static) if (parallel && n > 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        Contact c;
        const int e = candidates[static_cast<std::size_t>(i)];
        if (narrow_phase_element(elements[e], x, shape, margin, c)) {
            c.element = e;
            c.tool = tool;
            found[static_cast<std::size_t>(i)] = c;
        }
    }
    for (auto& c : found) {
        if (c) {
            out.push_back(*c);
        }
    }
}

void generate_contacts_brute_force(std::span<const CollisionElement> elements, std::span<const Vec3> x,
                                   const SdfShape& shape, double margin, int tool,
                                   std::vector<Contact>& out)
{
    for (std::size_t e = 0; e < elements.size(); ++e) {
        Contact c;
        if (narrow_phase_element(elements[e], x, shape, margin, c)) {
            c.element = static_cast<int>(e);
            c.tool = tool;
            out.push_back(c);
        }
    }
}

ContactCorrection solve_contact(Contact& c, std::span<Vec3> x, std::span<const Vec3> x_prev,
                                std::span<const double> inv_mass, const ContactBody& body, double friction,
                                double compliance, double dt)
{
    ContactCorrection out;
    const int count = c.count();

    Vec3 p = Vec3::Zero();
    double wsum = 0.0;
    for (int k = 0; k < count; ++k) {
        p += c.bary[k] * x[c.verts[k]];
        wsum += inv_mass[c.verts[k]] * c.bary[k] * c.bary[k];
    }
    const SdfSample s = body.shape.eval(p);
    c.phi = s.distance;
    c.normal = s.gradient;
    if (s.distance >= 0.0) {
        return out;
    }
    const double alpha_tilde = compliance / (dt * dt);
    if (wsum + alpha_tilde < 1e-12) {
        out.degenerate = true;
        return out;
    }

    double dlambda = (-s.distance - alpha_tilde * c.lambda_n) / (wsum + alpha_tilde);
    const double lambda = std::max(c.lambda_n + dlambda, 0.0);
    dlambda = lambda - c.lambda_n;
    c.lambda_n = lambda;
    for (int k = 0; k < count; ++k) {
        const int v = c.verts[k];
        x[v] += inv_mass[v] * c.bary[k] * dlambda * s.gradient;
    }
    out.normal = std::abs(dlambda) * wsum;

    if (friction <= 0.0 || wsum <= 0.0) {
        return out;
    }

    // Relative tangential motion of the contact point since the substep start.
    Vec3 p_now = Vec3::Zero();
    Vec3 p_prev = Vec3::Zero();
    for (int k = 0; k < count; ++k) {
        p_now += c.bary[k] * x[c.verts[k]];
        p_prev += c.bary[k] * x_prev[c.verts[k]];
    }
    const Vec3 tool_disp = p_now - body.motion.inverse() * p_now;
    const Vec3 rel = (p_now - p_prev) - tool_disp;
    const Vec3 tangent = rel - rel.dot(s.gradient) * s.gradient;
    const double slip = tangent.norm();
    if (slip < 1e-15) {
        return out;
    }
    const double budget = std::max(friction * c.lambda_n * wsum - c.tangential, 0.0);
    const double correction = std::min(slip, budget);
    if (correction <= 0.0) {
        return out;
    }
    const Vec3 delta = -tangent / slip * correction;
    for (int k = 0; k < count; ++k) {
        const int v = c.verts[k];
        x[v] += inv_mass[v] * c.bary[k] * delta / wsum;
    }
    c.tangential += correction;
    c.tangential_dir = delta / correction;
    out.tangential = correction;
    return out;
}

Vec3 contact_force(const Contact& c, double dt)
{
    return c.lambda_n * c.normal / (dt * dt);
}

}  // namespace fetosim
