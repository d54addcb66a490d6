#include "fetosim/collision/bvh.hpp"

#include <algorithm>
#include <numeric>

#include "fetosim/mesh.hpp"

namespace fetosim {

Aabb CollisionElement::bounds(std::span<const Vec3> x) const
{
    Aabb b = Aabb::of_point(x[verts[0]]);
    for (int k = 1; k < count(); ++k) {
        b.expand(x[verts[k]]);
    }
    return b;
}

Bvh Bvh::build(std::span<const CollisionElement> elements, std::span<const Vec3> x, double margin)
{
    if (elements.empty()) {
        throw Error("cannot build a BVH over an empty element set");
    }
    Bvh bvh;
    bvh.margin_ = margin;
    bvh.nodes_.reserve(2 * elements.size());

    std::vector<int> order(elements.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Vec3> centroids(elements.size());
    for (std::size_t i = 0; i < elements.size(); ++i) {
        centroids[i] = elements[i].bounds(x).center();
    }
    bvh.build_range(elements, x, order, centroids, 0, static_cast<int>(elements.size()));
    return bvh;
}

int Bvh::build_range(std::span<const CollisionElement> elements, std::span<const Vec3> x,
                     std::vector<int>& order, std::vector<Vec3>& centroids, int begin, int end)
{
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    if (end - begin == 1) {
        const int e = order[begin];
        nodes_[index].element = e;
        nodes_[index].box = elements[e].bounds(x).inflated(margin_);
        return index;
    }

    Aabb centroid_box;
    for (int i = begin; i < end; ++i) {
        centroid_box.expand(centroids[order[i]]);
    }
    int axis = 0;
    (centroid_box.max - centroid_box.min).maxCoeff(&axis);

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end, [&](int a, int b) {
        if (centroids[a][axis] != centroids[b][axis]) {
            return centroids[a][axis] < centroids[b][axis];
        }
        return a < b;
    });

    const int left = build_range(elements, x, order, centroids, begin, mid);
    const int right = build_range(elements, x, order, centroids, mid, end);
    nodes_[index].left = left;
    nodes_[index].right = right;
    nodes_[index].box = nodes_[left].box;
    nodes_[index].box.expand(nodes_[right].box);
    return index;
}

void Bvh::refit(std::span<const CollisionElement> elements, std::span<const Vec3> x)
{
    // Children always have larger indices than their parent.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = *it;
        if (n.leaf()) {
            n.box = elements[n.element].bounds(x).inflated(margin_);
        } else {
            n.box = nodes_[n.left].box;
            n.box.expand(nodes_[n.right].box);
        }
    }
}

void Bvh::query(const Aabb& box, std::vector<int>& out) const
{
    if (nodes_.empty()) {
        return;
    }
    const std::size_t first = out.size();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (!n.box.overlaps(box)) {
            continue;
        }
        if (n.leaf()) {
            out.push_back(n.element);
        } else {
            stack[top++] = n.right;
            stack[top++] = n.left;
        }
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
}

std::vector<CollisionElement> surface_collision_elements(const TetMesh& mesh)
{
    std::vector<CollisionElement> out;
    out.reserve(mesh.surface.size() * 3 / 2);
    for (std::size_t i = 0; i < mesh.surface.size(); ++i) {
        CollisionElement e;
        e.kind = ElementKind::Triangle;
        e.verts = mesh.surface[i].verts;
        e.tri = static_cast<int>(i);
        out.push_back(e);
    }
    for (int v : surface_vertices(mesh)) {
        CollisionElement e;
        e.kind = ElementKind::Vertex;
        e.verts = {v, -1, -1};
        out.push_back(e);
    }
    return out;
}

}  // namespace fetosim
