#pragma once

// Probabilistic labelled transition systems built by exhaustive exploration.
//
// Two kinds of state: N states (configurations, nondeterministic labelled
// edges) and P states (a probability distribution over N states, reached by a
// tau edge from the configuration that forced a measurement).

#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cqp/error.hpp"
#include "cqp/semantics.hpp"

namespace cqp {

struct PltsState {
    enum class Kind { N, P };
    Kind kind = Kind::N;
    bool terminal = false;  ///< N state with no threads left
    std::optional<Configuration> config;
};

struct PltsEdge {
    std::size_t src = 0;
    Label label;  ///< Prob labels leave P states only
    std::size_t dst = 0;
};

struct Plts {
    std::vector<PltsState> states;
    std::vector<PltsEdge> edges;
    std::size_t initial = 0;

    std::size_t add(PltsState s) {
        states.push_back(std::move(s));
        return states.size() - 1;
    }
    void connect(std::size_t src, Label l, std::size_t dst) { edges.push_back({src, std::move(l), dst}); }

    std::vector<std::vector<std::size_t>> outgoing() const {
        std::vector<std::vector<std::size_t>> out(states.size());
        for (std::size_t e = 0; e < edges.size(); ++e) out[edges[e].src].push_back(e);
        return out;
    }
};

struct ExploreOptions {
    std::size_t maxStates = 20000;
    /// Replaces the configuration's input alphabet for qubits when set.
    std::optional<std::vector<TestState>> qubitTests;
    /// Keep every raw successor that was merged into an existing state.
    bool recordMerges = false;
};

/// A successor configuration that was identified with an existing state.
struct Merge {
    Configuration raw;
    std::size_t into = 0;
};

struct Exploration {
    Plts plts;
    std::vector<Merge> merges;
};

inline Exploration exploreDetailed(const Configuration& start, const ExploreOptions& options = {}) {
    Configuration initial = start;
    if (options.qubitTests) {
        auto ctx = std::make_shared<RunContext>(*start.context);
        ctx->qubitTests = *options.qubitTests;
        initial.context = std::move(ctx);
    }

    Exploration out;
    Plts& g = out.plts;
    std::unordered_map<std::string, std::vector<std::size_t>> byKey;
    std::deque<std::size_t> queue;

    auto checkCap = [&] {
        if (g.states.size() > options.maxStates) throw ExplorationLimit(options.maxStates);
    };
    auto intern = [&](const Configuration& raw) -> std::size_t {
        CanonicalForm cf = canonicalize(raw);
        auto& bucket = byKey[cf.key];
        for (std::size_t id : bucket)
            if (statesEqualUpToGlobalPhase(g.states[id].config->qstate, cf.config.qstate)) {
                if (options.recordMerges) out.merges.push_back({raw, id});
                return id;
            }
        const bool terminal = cf.config.terminated();
        std::size_t id = g.add({PltsState::Kind::N, terminal, std::move(cf.config)});
        bucket.push_back(id);
        queue.push_back(id);
        checkCap();
        return id;
    };

    g.initial = intern(initial);
    while (!queue.empty()) {
        const std::size_t src = queue.front();
        queue.pop_front();
        const Configuration here = *g.states[src].config;
        for (auto& tr : step(here)) {
            if (tr.branches.size() == 1) {
                const std::size_t dst = intern(tr.branches.front().config);
                g.connect(src, std::move(tr.label), dst);
                continue;
            }
            const std::size_t p = g.add({PltsState::Kind::P, false, std::nullopt});
            checkCap();
            g.connect(src, Label::tau(), p);
            for (auto& b : tr.branches) {
                const std::size_t dst = intern(b.config);
                g.connect(p, Label::prob(b.probability, b.outcome), dst);
            }
        }
    }
    return out;
}

/// Reachable PLTS from `start`. Throws ExplorationLimit past `maxStates`.
inline Plts explore(const Configuration& start, const ExploreOptions& options = {}) {
    return exploreDetailed(start, options).plts;
}

inline Plts explore(const Configuration& start, std::size_t maxStates, std::vector<TestState> qubitTests) {
    ExploreOptions o;
    o.maxStates = maxStates;
    o.qubitTests = std::move(qubitTests);
    return explore(start, o);
}

inline std::size_t countStates(const Plts& g, PltsState::Kind kind) {
    std::size_t n = 0;
    for (const auto& s : g.states) n += s.kind == kind;
    return n;
}

}  // namespace cqp
