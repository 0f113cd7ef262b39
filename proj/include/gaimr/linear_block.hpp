#pragma once

#include "gaimr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gaimr {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double width() const noexcept { return hi - lo; }
    double midpoint() const noexcept { return 0.5 * (lo + hi); }
    bool contains(double v, double tol = 0.0) const noexcept { return v >= lo - tol && v <= hi + tol; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Relation { Unknown, GreaterEqual, LessEqual };

struct LinearMax {
    double value = 0.0;
    std::vector<double> point;
};

namespace detail {

/// Dense tableau simplex: maximize c·y subject to A y <= b, y >= 0, with b >= 0
/// so the slack basis is feasible. Bland's rule guarantees termination.
inline LinearMax simplex_maximize(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                                  const std::vector<double>& c) {
    constexpr double eps = 1e-12;
    const std::size_t rows = a.size();
    const std::size_t vars = c.size();
    const std::size_t cols = vars + rows + 1;

    std::vector<std::vector<double>> t(rows + 1, std::vector<double>(cols, 0.0));
    std::vector<std::size_t> basis(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < vars; ++j) t[i][j] = a[i][j];
        t[i][vars + i] = 1.0;
        t[i][cols - 1] = b[i];
        basis[i] = vars + i;
    }
    for (std::size_t j = 0; j < vars; ++j) t[rows][j] = -c[j];

    while (true) {
        std::size_t enter = cols;
        for (std::size_t j = 0; j + 1 < cols; ++j)
            if (t[rows][j] < -eps) {
                enter = j;
                break;
            }
        if (enter == cols) break;

        std::size_t leave = rows;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (t[i][enter] <= eps) continue;
            const double ratio = t[i][cols - 1] / t[i][enter];
            if (leave == rows || ratio < best_ratio - eps ||
                (ratio <= best_ratio + eps && basis[i] < basis[leave])) {
                leave = i;
                best_ratio = ratio;
            }
        }
        if (leave == rows) throw Error("linear program is unbounded");

        const double pivot = t[leave][enter];
        for (auto& v : t[leave]) v /= pivot;
        for (std::size_t i = 0; i <= rows; ++i) {
            if (i == leave) continue;
            const double factor = t[i][enter];
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) t[i][j] -= factor * t[leave][j];
        }
        basis[leave] = enter;
    }

    LinearMax out;
    out.point.assign(vars, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        if (basis[i] < vars) out.point[basis[i]] = std::max(0.0, t[i][cols - 1]);
    out.value = t[rows][cols - 1];
    return out;
}

} // namespace detail

/// A block of real parameters constrained by per-parameter intervals and
/// pairwise "greater >= lesser" constraints. Keeps the tightest bounding box
/// of the polytope up to date; every instance is non-empty.
class DifferenceBlock {
public:
    DifferenceBlock() = default;

    explicit DifferenceBlock(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
        for (std::size_t i = 0; i < bounds_.size(); ++i)
            if (!(bounds_[i].lo <= bounds_[i].hi))
                throw InconsistentConstraintError("parameter " + std::to_string(i) + " has an empty interval");
        if (!retighten()) throw InconsistentConstraintError("block constraints are inconsistent");
    }

    std::size_t size() const noexcept { return bounds_.size(); }
    const std::vector<Interval>& declared_bounds() const noexcept { return bounds_; }
    const std::vector<std::pair<std::size_t, std::size_t>>& comparisons() const noexcept { return edges_; }
    bool has_comparisons() const noexcept { return !edges_.empty(); }

    /// Tightest interval per parameter over the polytope.
    const std::vector<Interval>& box() const noexcept { return box_; }

    /// Returns a copy with param >= threshold (or <= when !at_least), or throws if empty.
    DifferenceBlock with_bound(std::size_t param, bool at_least, double threshold) const {
        DifferenceBlock next = *this;
        auto& iv = next.bounds_.at(param);
        if (at_least)
            iv.lo = std::max(iv.lo, threshold);
        else
            iv.hi = std::min(iv.hi, threshold);
        if (!(iv.lo <= iv.hi) || !next.retighten())
            throw InconsistentConstraintError("bound on parameter " + std::to_string(param) +
                                              " empties the feasible region");
        return next;
    }

    /// Returns a copy with greater >= lesser, or throws if empty.
    DifferenceBlock with_comparison(std::size_t greater, std::size_t lesser) const {
        if (greater >= size() || lesser >= size()) throw Error("comparison references unknown parameter");
        DifferenceBlock next = *this;
        if (greater != lesser &&
            std::find(edges_.begin(), edges_.end(), std::pair{greater, lesser}) == edges_.end()) {
            next.edges_.emplace_back(greater, lesser);
            if (!next.retighten())
                throw InconsistentConstraintError("comparison " + std::to_string(greater) +
                                                  " >= " + std::to_string(lesser) +
                                                  " empties the feasible region");
        }
        return next;
    }

    bool contains(std::span<const double> point, double tol = 1e-9) const {
        if (point.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i)
            if (!bounds_[i].contains(point[i], tol)) return false;
        for (const auto& [g, l] : edges_)
            if (point[g] < point[l] - tol) return false;
        return true;
    }

    /// True if a >= b follows from chained comparisons or from the boxes.
    Relation known_relation(std::size_t a, std::size_t b) const {
        if (a == b) return Relation::GreaterEqual;
        if (reaches(a, b)) return Relation::GreaterEqual;
        if (reaches(b, a)) return Relation::LessEqual;
        if (box_[a].lo >= box_[b].hi) return Relation::GreaterEqual;
        if (box_[b].lo >= box_[a].hi) return Relation::LessEqual;
        return Relation::Unknown;
    }

    /// Exact maximum of objective·x over the polytope with one maximizing vertex.
    ///
    /// Parameters are split into components of the comparison graph. Singletons
    /// use the closed form (hi for positive weight, lo otherwise); small
    /// components enumerate breakpoints, since every vertex coordinate equals
    /// some box endpoint; larger ones go through the simplex.
    LinearMax maximize(std::span<const double> objective) const {
        if (objective.size() != size()) throw Error("objective dimension does not match block");
        LinearMax out;
        out.point.assign(size(), 0.0);

        for (const auto& comp : components()) {
            bool any_weight = false;
            for (auto i : comp) any_weight = any_weight || objective[i] != 0.0;
            if (comp.size() == 1 || !any_weight) {
                for (auto i : comp) out.point[i] = objective[i] > 0.0 ? box_[i].hi : box_[i].lo;
                continue;
            }
            if (comp.size() <= 3)
                enumerate_component(comp, objective, out.point);
            else
                simplex_component(comp, objective, out.point);
        }
        out.value = 0.0;
        for (std::size_t i = 0; i < size(); ++i) out.value += objective[i] * out.point[i];
        return out;
    }

private:
    bool retighten() {
        box_ = bounds_;
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [g, l] : edges_) {
                if (box_[l].lo > box_[g].lo) box_[g].lo = box_[l].lo, changed = true;
                if (box_[g].hi < box_[l].hi) box_[l].hi = box_[g].hi, changed = true;
            }
        }
        for (const auto& iv : box_)
            if (iv.lo > iv.hi) return false;
        return true;
    }

    bool reaches(std::size_t from, std::size_t to) const {
        std::vector<bool> seen(size(), false);
        std::vector<std::size_t> stack{from};
        seen[from] = true;
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            for (const auto& [g, l] : edges_) {
                if (g != v || seen[l]) continue;
                if (l == to) return true;
                seen[l] = true;
                stack.push_back(l);
            }
        }
        return false;
    }

    std::vector<std::vector<std::size_t>> components() const {
        std::vector<std::size_t> parent(size());
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t v) {
            while (parent[v] != v) v = parent[v] = parent[parent[v]];
            return v;
        };
        for (const auto& [g, l] : edges_) parent[find(g)] = find(l);
        std::vector<std::vector<std::size_t>> groups(size());
        for (std::size_t i = 0; i < size(); ++i) groups[find(i)].push_back(i);
        std::vector<std::vector<std::size_t>> out;
        for (auto& g : groups)
            if (!g.empty()) out.push_back(std::move(g));
        return out;
    }

    void enumerate_component(const std::vector<std::size_t>& comp, std::span<const double> objective,
                             std::vector<double>& point) const {
        std::vector<double> breakpoints;
        for (auto i : comp) breakpoints.push_back(box_[i].lo), breakpoints.push_back(box_[i].hi);
        std::sort(breakpoints.begin(), breakpoints.end());
        breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

        const std::size_t k = comp.size();
        std::vector<bool> member(size(), false);
        for (auto i : comp) member[i] = true;
        std::vector<std::pair<std::size_t, std::size_t>> inner;
        for (const auto& e : edges_)
            if (member[e.first]) inner.push_back(e);

        std::vector<std::size_t> pick(k, 0);
        std::vector<double> trial(point);
        double best = -INFINITY;
        std::vector<double> best_values(k);
        while (true) {
            bool ok = true;
            for (std::size_t p = 0; p < k && ok; ++p) {
                trial[comp[p]] = breakpoints[pick[p]];
                ok = box_[comp[p]].contains(trial[comp[p]]);
            }
            if (ok) {
                for (const auto& [g, l] : inner)
                    if (trial[g] < trial[l]) {
                        ok = false;
                        break;
                    }
            }
            if (ok) {
                double v = 0.0;
                for (auto i : comp) v += objective[i] * trial[i];
                if (v > best) {
                    best = v;
                    for (std::size_t p = 0; p < k; ++p) best_values[p] = trial[comp[p]];
                }
            }
            std::size_t p = 0;
            while (p < k && ++pick[p] == breakpoints.size()) pick[p++] = 0;
            if (p == k) break;
        }
        for (std::size_t p = 0; p < k; ++p) point[comp[p]] = best_values[p];
    }

    void simplex_component(const std::vector<std::size_t>& comp, std::span<const double> objective,
                           std::vector<double>& point) const {
        // Shift to y = x − lo' so every row has a non-negative right-hand side.
        const std::size_t k = comp.size();
        std::vector<std::size_t> local(size(), k);
        for (std::size_t p = 0; p < k; ++p) local[comp[p]] = p;

        std::vector<std::vector<double>> a;
        std::vector<double> b;
        for (std::size_t p = 0; p < k; ++p) {
            std::vector<double> row(k, 0.0);
            row[p] = 1.0;
            a.push_back(std::move(row));
            b.push_back(box_[comp[p]].width());
        }
        for (const auto& [g, l] : edges_) {
            if (local[g] == k) continue;
            std::vector<double> row(k, 0.0);
            row[local[l]] += 1.0;
            row[local[g]] -= 1.0;
            a.push_back(std::move(row));
            b.push_back(std::max(0.0, box_[g].lo - box_[l].lo));
        }
        std::vector<double> c(k);
        for (std::size_t p = 0; p < k; ++p) c[p] = objective[comp[p]];

        const auto solved = detail::simplex_maximize(a, b, c);
        for (std::size_t p = 0; p < k; ++p)
            point[comp[p]] = std::clamp(box_[comp[p]].lo + solved.point[p], box_[comp[p]].lo, box_[comp[p]].hi);
    }

    std::vector<Interval> bounds_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
    std::vector<Interval> box_;
};

} // namespace gaimr
