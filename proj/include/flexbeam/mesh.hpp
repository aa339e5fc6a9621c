#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "flexbeam/errors.hpp"
#include "flexbeam/model.hpp"

namespace flexbeam {

/// Partition of an interval (default [-1, 1]) whose nodes contain every
/// break location exactly. Immutable after construction.
class Mesh {
public:
    Mesh(std::vector<double> nodes, BreakConfig breaks, std::vector<int> break_nodes)
        : nodes_(std::move(nodes)), breaks_(std::move(breaks)), break_nodes_(std::move(break_nodes)) {
        if (nodes_.size() < 2) throw DegenerateMesh("mesh needs at least one element");
        for (size_t i = 0; i + 1 < nodes_.size(); ++i)
            if (!(nodes_[i] < nodes_[i + 1])) throw DegenerateMesh("mesh nodes must be strictly increasing");
        node_break_.assign(nodes_.size(), -1);
        for (size_t b = 0; b < break_nodes_.size(); ++b) node_break_[static_cast<size_t>(break_nodes_[b])] = static_cast<int>(b);
    }

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_elements() const { return static_cast<int>(nodes_.size()) - 1; }
    double node(int i) const { return nodes_[static_cast<size_t>(i)]; }
    const std::vector<double>& nodes() const { return nodes_; }
    double a() const { return nodes_.front(); }
    double b() const { return nodes_.back(); }
    double h(int e) const { return nodes_[static_cast<size_t>(e) + 1] - nodes_[static_cast<size_t>(e)]; }

    const BreakConfig& breaks() const { return breaks_; }
    int node_of_break(int break_index) const { return break_nodes_[static_cast<size_t>(break_index)]; }

    std::optional<BreakKind> break_at(int node_index) const {
        const int b = node_break_[static_cast<size_t>(node_index)];
        if (b < 0) return std::nullopt;
        return breaks_.items()[static_cast<size_t>(b)].kind;
    }

    /// Index of the element containing x; at interior nodes returns the
    /// element to the right except at the last node.
    int element_of(double x) const {
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        int e = static_cast<int>(it - nodes_.begin()) - 1;
        return std::clamp(e, 0, num_elements() - 1);
    }

    /// Node index whose coordinate equals x to within 1e-12, or -1.
    int node_at(double x) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x - 1e-12);
        if (it != nodes_.end() && std::fabs(*it - x) <= 1e-12) return static_cast<int>(it - nodes_.begin());
        return -1;
    }

    /// Uniform refinement: every element split at its midpoint, break set
    /// unchanged.
    Mesh refined() const {
        std::vector<double> fine;
        fine.reserve(nodes_.size() * 2);
        for (size_t i = 0; i + 1 < nodes_.size(); ++i) {
            fine.push_back(nodes_[i]);
            fine.push_back(0.5 * (nodes_[i] + nodes_[i + 1]));
        }
        fine.push_back(nodes_.back());
        std::vector<int> bn(break_nodes_.size());
        for (size_t b = 0; b < break_nodes_.size(); ++b) bn[b] = 2 * break_nodes_[b];
        return Mesh(std::move(fine), breaks_, std::move(bn));
    }

private:
    std::vector<double> nodes_;
    BreakConfig breaks_;
    std::vector<int> break_nodes_;
    std::vector<int> node_break_;
};

/// Same node set, different break tags. Every break must already sit on a
/// node.
inline Mesh with_breaks(const Mesh& base, const BreakConfig& K) {
    std::vector<int> break_nodes;
    for (const Break& b : K.items()) {
        const int node = base.node_at(b.x);
        if (node < 0) throw MeshMismatch("break location is not a mesh node: " + std::to_string(b.x));
        break_nodes.push_back(node);
    }
    return Mesh(base.nodes(), K, std::move(break_nodes));
}

/// Uniform partition of [a, b] refined so that each break location is a
/// node. Break locations within 1e-14 of a uniform node reuse it; other
/// insertions drop a neighbouring uniform node when it would create an
/// element shorter than 1e-3 of the uniform spacing, which keeps the
/// stiffness scale bounded during continuous position refinement.
inline Mesh build_mesh(int n_elements, const BreakConfig& K, double a = -1.0, double b = 1.0) {
    if (n_elements < 2) throw DegenerateMesh("build_mesh requires at least 2 elements");
    const double h = (b - a) / n_elements;
    std::vector<double> nodes(static_cast<size_t>(n_elements) + 1);
    for (int i = 0; i <= n_elements; ++i) nodes[static_cast<size_t>(i)] = a + h * i;
    nodes.front() = a;
    nodes.back() = b;

    const double sliver = 1e-3 * h;
    std::vector<double> break_xs;
    for (const Break& brk : K.items()) {
        double x = brk.x;
        auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
        // snap only within 1e-14
        double nearest = (it == nodes.end()) ? nodes.back() : *it;
        if (it != nodes.begin() && std::fabs(*(it - 1) - x) < std::fabs(nearest - x)) nearest = *(it - 1);
        if (std::fabs(nearest - x) <= 1e-14) {
            break_xs.push_back(nearest);
            continue;
        }
        // drop uniform neighbours that would become slivers
        nodes.erase(std::remove_if(nodes.begin(), nodes.end(),
                                   [&](double y) {
                                       if (y == a || y == b) return false;
                                       if (std::fabs(y - x) >= sliver) return false;
                                       return std::none_of(break_xs.begin(), break_xs.end(),
                                                           [y](double bx) { return bx == y; });
                                   }),
                    nodes.end());
        nodes.insert(std::upper_bound(nodes.begin(), nodes.end(), x), x);
        break_xs.push_back(x);
    }

    std::vector<int> break_nodes;
    for (double x : break_xs) {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
        break_nodes.push_back(static_cast<int>(it - nodes.begin()));
    }
    return Mesh(std::move(nodes), K, std::move(break_nodes));
}

} // namespace flexbeam
