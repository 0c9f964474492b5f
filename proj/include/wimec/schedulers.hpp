#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wimec/dynamics.hpp"
#include "wimec/error.hpp"

namespace wimec {

enum class PolicyKind { WI, STLW_WI, EDF, LST, GREEDY };

inline std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::WI: return "wi";
        case PolicyKind::STLW_WI: return "stlw-wi";
        case PolicyKind::EDF: return "edf";
        case PolicyKind::LST: return "lst";
        case PolicyKind::GREEDY: return "greedy";
    }
    return "?";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
    if (s == "wi") return PolicyKind::WI;
    if (s == "stlw-wi") return PolicyKind::STLW_WI;
    if (s == "edf") return PolicyKind::EDF;
    if (s == "lst") return PolicyKind::LST;
    if (s == "greedy") return PolicyKind::GREEDY;
    throw ConfigError("unknown policy kind '" + s + "'");
}

// Per-user ranking inputs for one slot. A user counts as active only while it
// still has unfinished subtasks; finished and idle users rank last under EDF,
// LST and STLW.
struct UserAux {
    bool active = false;
    int tau = 0;
    int backlog = 0;
    Rational slack;
    double wi = 0;
    double gain = 0;  // reward(s,1) - reward(s,0)
};

inline UserAux make_aux(const TaskState& s, int capacity, double wi, double gain) {
    UserAux a;
    a.active = s.has_work();
    a.tau = s.tau;
    a.backlog = s.backlog;
    if (a.active) a.slack = slack_time(s, capacity);
    a.wi = wi;
    a.gain = gain;
    return a;
}

namespace detail {

// First M users of the order `better` induces, ties by ascending index.
template <class Better>
ActionVector top_m(std::size_t n, int M, Better better) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), better);
    return {std::vector<int>(idx.begin(), idx.begin() + M)};
}

}  // namespace detail

struct PriorityDag {
    std::vector<int> users;                 // vertex -> user index
    std::vector<UserAux> keys;              // vertex -> keys
    std::vector<std::vector<int>> succ;     // vertex -> successor vertices
    std::vector<int> indegree;

    bool has_edge(int m, int n) const {
        return std::find(succ[m].begin(), succ[m].end(), n) != succ[m].end();
    }
};

// m dominates n when it has no more slack and no more backlog, one strictly.
inline bool dominates(const UserAux& m, const UserAux& n) {
    return m.slack <= n.slack && m.backlog <= n.backlog && (m.slack < n.slack || m.backlog < n.backlog);
}

// O(N^2) pairwise construction over the active users. A dominance staircase
// would bring this to O(N log N) if N grows into the thousands.
inline PriorityDag build_stlw_dag(const std::vector<UserAux>& aux) {
    PriorityDag g;
    for (std::size_t i = 0; i < aux.size(); ++i) {
        if (!aux[i].active) continue;
        g.users.push_back(static_cast<int>(i));
        g.keys.push_back(aux[i]);
    }
    const std::size_t v = g.users.size();
    g.succ.assign(v, {});
    g.indegree.assign(v, 0);
    for (std::size_t m = 0; m < v; ++m) {
        for (std::size_t n = 0; n < v; ++n) {
            if (m != n && dominates(g.keys[m], g.keys[n])) {
                g.succ[m].push_back(static_cast<int>(n));
                ++g.indegree[n];
            }
        }
    }
    return g;
}

// Topological order that always emits the ready vertex with the largest index
// value (ties: lower user index). Returns user indices.
inline std::vector<int> kahn_topo_sort(const PriorityDag& g) {
    auto cmp = [&g](int a, int b) {
        if (g.keys[a].wi != g.keys[b].wi) return g.keys[a].wi > g.keys[b].wi;
        return g.users[a] < g.users[b];
    };
    std::set<int, decltype(cmp)> ready(cmp);
    std::vector<int> indeg = g.indegree;
    for (std::size_t v = 0; v < indeg.size(); ++v)
        if (indeg[v] == 0) ready.insert(static_cast<int>(v));
    std::vector<int> order;
    order.reserve(indeg.size());
    while (!ready.empty()) {
        const int m = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(g.users[m]);
        for (int n : g.succ[m])
            if (--indeg[n] == 0) ready.insert(n);
    }
    if (order.size() != indeg.size()) throw ModelError("dominance relation not a partial order");
    return order;
}

inline ActionVector select(PolicyKind kind, const std::vector<UserAux>& aux, int M) {
    const std::size_t n = aux.size();
    if (M < 0 || static_cast<std::size_t>(M) > n) throw ModelError("select: need 0 <= M <= N");
    switch (kind) {
        case PolicyKind::WI:
            return detail::top_m(n, M, [&](int a, int b) { return aux[a].wi > aux[b].wi; });
        case PolicyKind::GREEDY:
            return detail::top_m(n, M, [&](int a, int b) { return aux[a].gain > aux[b].gain; });
        case PolicyKind::EDF:
            return detail::top_m(n, M, [&](int a, int b) {
                if (aux[a].active != aux[b].active) return aux[a].active;
                return aux[a].active && aux[a].tau < aux[b].tau;
            });
        case PolicyKind::LST:
            return detail::top_m(n, M, [&](int a, int b) {
                if (aux[a].active != aux[b].active) return aux[a].active;
                return aux[a].active && aux[a].slack < aux[b].slack;
            });
        case PolicyKind::STLW_WI: {
            std::vector<int> order = kahn_topo_sort(build_stlw_dag(aux));
            for (std::size_t i = 0; i < n; ++i)
                if (!aux[i].active) order.push_back(static_cast<int>(i));
            order.resize(static_cast<std::size_t>(M));
            return {order};
        }
    }
    throw ModelError("select: unknown policy");
}

}  // namespace wimec
