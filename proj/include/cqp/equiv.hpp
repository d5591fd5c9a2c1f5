#pragma once

// Probabilistic branching bisimilarity by partition refinement, quotient
// construction, and the per-test-state equivalence driver.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cqp/plts.hpp"
#include "cqp/semantics.hpp"

namespace cqp {

inline constexpr double kProbabilityTolerance = 1e-6;

inline bool labelValuesMatch(const LabelValue& a, const LabelValue& b, double tol = kTolerance) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case LabelValue::Kind::Bit: return a.bit == b.bit;
        case LabelValue::Kind::Channel: return a.channel == b.channel;
        case LabelValue::Kind::Qubit:
            if (!a.tag.empty() || !b.tag.empty()) return a.tag == b.tag;
            return a.rho.approxEqual(b.rho, tol);
    }
    return false;
}

/// Same action: same kind, same visible channel position, matching values.
/// Transmitted qubits match when their reduced states agree within `tol`.
inline bool labelsMatch(const Label& a, const Label& b, double tol = kTolerance) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Label::Kind::Tau: return true;
        case Label::Kind::Prob: return std::abs(a.probability - b.probability) <= kProbabilityTolerance;
        case Label::Kind::Input:
        case Label::Kind::Output:
            if (a.channel != b.channel || a.values.size() != b.values.size()) return false;
            for (std::size_t i = 0; i < a.values.size(); ++i)
                if (!labelValuesMatch(a.values[i], b.values[i], tol)) return false;
            return true;
    }
    return false;
}

struct Partition {
    std::vector<std::size_t> blockOf;
    std::size_t blockCount = 0;

    std::vector<std::vector<std::size_t>> blocks() const {
        std::vector<std::vector<std::size_t>> out(blockCount);
        for (std::size_t s = 0; s < blockOf.size(); ++s) out[blockOf[s]].push_back(s);
        return out;
    }
};

namespace detail {

using Distribution = std::vector<std::pair<std::size_t, double>>;  // sorted by target

struct Move {
    int label = 0;  // label class; 0 is tau
    Distribution dist;
};

// Transition structure with labels reduced to classes. P states contribute a
// single tau move carrying their distribution.
struct Graph {
    std::vector<std::vector<Move>> moves;
    std::vector<bool> terminal;
    std::vector<Label> classLabel;  // representative label per class
    std::vector<const PltsState*> origin;
};

struct GraphBuilder {
    Graph g;

    GraphBuilder() { g.classLabel.push_back(Label::tau()); }

    int classOf(const Label& l) {
        if (l.kind == Label::Kind::Tau) return 0;
        for (std::size_t k = 1; k < g.classLabel.size(); ++k)
            if (labelsMatch(g.classLabel[k], l)) return static_cast<int>(k);
        g.classLabel.push_back(l);
        return static_cast<int>(g.classLabel.size() - 1);
    }

    std::size_t add(const Plts& p) {
        const std::size_t offset = g.moves.size();
        g.moves.resize(offset + p.states.size());
        for (const auto& s : p.states) {
            g.terminal.push_back(s.terminal);
            g.origin.push_back(&s);
        }
        std::vector<Distribution> probs(p.states.size());
        for (const auto& e : p.edges) {
            if (p.states[e.src].kind == PltsState::Kind::P) {
                probs[e.src].push_back({offset + e.dst, e.label.probability});
            } else {
                g.moves[offset + e.src].push_back({classOf(e.label), {{offset + e.dst, 1.0}}});
            }
        }
        for (std::size_t s = 0; s < p.states.size(); ++s) {
            if (p.states[s].kind != PltsState::Kind::P) continue;
            auto& d = probs[s];
            std::sort(d.begin(), d.end());
            g.moves[offset + s].push_back({0, std::move(d)});
        }
        return offset;
    }
};

struct SigMove {
    int label = 0;
    Distribution dist;  // over blocks
    bool dirac() const { return dist.size() == 1; }
};

struct Signature {
    bool terminal = false;
    std::vector<SigMove> moves;
};

inline bool distributionsMatch(const Distribution& a, const Distribution& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].first != b[i].first || std::abs(a[i].second - b[i].second) > kProbabilityTolerance) return false;
    return true;
}

inline bool signaturesMatch(const Signature& a, const Signature& b) {
    if (a.terminal != b.terminal || a.moves.size() != b.moves.size()) return false;
    for (std::size_t i = 0; i < a.moves.size(); ++i)
        if (a.moves[i].label != b.moves[i].label || !distributionsMatch(a.moves[i].dist, b.moves[i].dist)) return false;
    return true;
}

inline Distribution lift(const Distribution& d, const std::vector<std::size_t>& blockOf) {
    std::map<std::size_t, double> m;
    for (const auto& [s, p] : d) m[blockOf[s]] += p;
    Distribution out;
    for (const auto& [b, p] : m)
        if (p > kProbabilityTolerance) out.push_back({b, p});
    return out;
}

// Moves visible from `s` once inert steps (tau staying inside the block) are
// allowed first.
inline Signature signature(const Graph& g, const std::vector<std::size_t>& blockOf, std::size_t s) {
    Signature sig;
    const std::size_t block = blockOf[s];
    std::vector<std::size_t> stack{s};
    std::vector<std::size_t> seen{s};
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        sig.terminal = sig.terminal || g.terminal[u];
        for (const auto& m : g.moves[u]) {
            Distribution lifted = lift(m.dist, blockOf);
            const bool inert = m.label == 0 && lifted.size() == 1 && lifted.front().first == block;
            if (inert) {
                for (const auto& [v, p] : m.dist)
                    if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
                        seen.push_back(v);
                        stack.push_back(v);
                    }
                continue;
            }
            sig.moves.push_back({m.label, std::move(lifted)});
        }
    }
    std::sort(sig.moves.begin(), sig.moves.end(), [](const SigMove& a, const SigMove& b) {
        if (a.label != b.label) return a.label < b.label;
        if (a.dist.size() != b.dist.size()) return a.dist.size() < b.dist.size();
        for (std::size_t i = 0; i < a.dist.size(); ++i) {
            if (a.dist[i].first != b.dist[i].first) return a.dist[i].first < b.dist[i].first;
            if (std::abs(a.dist[i].second - b.dist[i].second) > kProbabilityTolerance)
                return a.dist[i].second < b.dist[i].second;
        }
        return false;
    });
    auto same = [](const SigMove& a, const SigMove& b) {
        return a.label == b.label && distributionsMatch(a.dist, b.dist);
    };
    sig.moves.erase(std::unique(sig.moves.begin(), sig.moves.end(), same), sig.moves.end());
    return sig;
}

inline Partition refine(const Graph& g) {
    const std::size_t n = g.moves.size();
    Partition p;
    p.blockOf.assign(n, 0);
    bool anyTerminal = false, anyOther = false;
    for (std::size_t s = 0; s < n; ++s) (g.terminal[s] ? anyTerminal : anyOther) = true;
    for (std::size_t s = 0; s < n; ++s) p.blockOf[s] = (anyTerminal && anyOther && !g.terminal[s]) ? 1 : 0;
    p.blockCount = n == 0 ? 0 : (anyTerminal && anyOther ? 2 : 1);

    while (true) {
        std::vector<std::vector<std::pair<Signature, std::size_t>>> reps(p.blockCount);
        std::vector<std::size_t> next(n);
        std::size_t count = 0;
        for (std::size_t s = 0; s < n; ++s) {
            Signature sig = signature(g, p.blockOf, s);
            auto& group = reps[p.blockOf[s]];
            auto it = std::find_if(group.begin(), group.end(),
                                   [&](const auto& r) { return signaturesMatch(r.first, sig); });
            if (it == group.end()) {
                group.push_back({std::move(sig), count});
                next[s] = count++;
            } else {
                next[s] = it->second;
            }
        }
        const bool stable = count == p.blockCount;
        p.blockOf = std::move(next);
        p.blockCount = count;
        if (stable) return p;
    }
}

}  // namespace detail

/// Coarsest branching bisimulation on the states of `g`.
inline Partition bisimulationPartition(const Plts& g) {
    detail::GraphBuilder b;
    b.add(g);
    return detail::refine(b.g);
}

struct EquivalenceWitness {
    enum class Kind { LabelMismatch, ProbabilityMismatch, TerminationMismatch };
    Kind kind = Kind::LabelMismatch;
    std::string label;        ///< the distinguishing action
    std::string testState;    ///< set by the per-test-state driver
    double leftProbability = 0.0;
    double rightProbability = 0.0;
    std::string description;
};

inline std::string toString(EquivalenceWitness::Kind k) {
    switch (k) {
        case EquivalenceWitness::Kind::LabelMismatch: return "label mismatch";
        case EquivalenceWitness::Kind::ProbabilityMismatch: return "probability mismatch";
        case EquivalenceWitness::Kind::TerminationMismatch: return "termination mismatch";
    }
    return "?";
}

struct EquivalenceVerdict {
    bool equivalent = false;
    std::optional<EquivalenceWitness> witness;
};

namespace detail {

inline std::string moveText(const Graph& g, const SigMove& m) {
    std::string s = toString(g.classLabel[m.label]) + " -> ";
    if (m.dirac()) return s + "block " + std::to_string(m.dist.front().first);
    s += "{";
    for (std::size_t i = 0; i < m.dist.size(); ++i)
        s += (i ? ", " : "") + std::string("block ") + std::to_string(m.dist[i].first) + ": " +
             formatReal(m.dist[i].second);
    return s + "}";
}

inline bool containsMove(const Signature& sig, const SigMove& m) {
    return std::any_of(sig.moves.begin(), sig.moves.end(), [&](const SigMove& o) {
        return o.label == m.label && distributionsMatch(o.dist, m.dist);
    });
}

inline double massOn(const Distribution& d, std::size_t block) {
    for (const auto& [b, p] : d)
        if (b == block) return p;
    return 0.0;
}

// Explains why the two states sit in different blocks, using their
// signatures under the final partition.
inline EquivalenceWitness explain(const Graph& g, const Partition& p, std::size_t left, std::size_t right) {
    const Signature sl = signature(g, p.blockOf, left);
    const Signature sr = signature(g, p.blockOf, right);
    EquivalenceWitness w;
    if (sl.terminal != sr.terminal) {
        w.kind = EquivalenceWitness::Kind::TerminationMismatch;
        w.description = std::string(sl.terminal ? "left" : "right") + " can terminate, the other cannot";
        return w;
    }

    // Probabilistic moves first: they give the most specific explanation.
    for (int pass = 0; pass < 2; ++pass) {
        for (int side = 0; side < 2; ++side) {
            const Signature& mine = side == 0 ? sl : sr;
            const Signature& other = side == 0 ? sr : sl;
            const std::size_t otherBlock = p.blockOf[side == 0 ? right : left];
            for (const auto& m : mine.moves) {
                if (m.dirac() == (pass == 0) || containsMove(other, m)) continue;
                w.label = toString(g.classLabel[m.label]);
                if (pass == 1) {
                    w.kind = EquivalenceWitness::Kind::LabelMismatch;
                    w.description = std::string(side == 0 ? "left" : "right") + " can do " + moveText(g, m) +
                                    ", the other cannot";
                    return w;
                }
                // Compare against the closest move of the other side with the
                // same label, or against staying put in its own block.
                Distribution theirs{{otherBlock, 1.0}};
                for (const auto& o : other.moves)
                    if (o.label == m.label && !o.dirac()) {
                        theirs = o.dist;
                        break;
                    }
                std::size_t worst = m.dist.front().first;
                double gap = -1.0;
                std::vector<std::size_t> support;
                for (const auto& [b, q] : m.dist) support.push_back(b);
                for (const auto& [b, q] : theirs) support.push_back(b);
                for (std::size_t b : support) {
                    const double d = std::abs(massOn(m.dist, b) - massOn(theirs, b));
                    if (d > gap) {
                        gap = d;
                        worst = b;
                    }
                }
                w.kind = EquivalenceWitness::Kind::ProbabilityMismatch;
                const double mineP = massOn(m.dist, worst), theirP = massOn(theirs, worst);
                w.leftProbability = side == 0 ? mineP : theirP;
                w.rightProbability = side == 0 ? theirP : mineP;
                w.description = "block " + std::to_string(worst) + " is reached with probability " +
                                formatReal(w.leftProbability) + " on the left and " +
                                formatReal(w.rightProbability) + " on the right";
                return w;
            }
        }
    }
    w.description = "states are distinguished deeper in the system";
    return w;
}

}  // namespace detail

/// Decides whether the initial states of `left` and `right` are branching
/// bisimilar, with a distinguishing witness when they are not.
inline EquivalenceVerdict branchingBisim(const Plts& left, const Plts& right) {
    detail::GraphBuilder b;
    const std::size_t l0 = b.add(left) + left.initial;
    const std::size_t r0 = b.add(right) + right.initial;
    const Partition p = detail::refine(b.g);
    EquivalenceVerdict v;
    v.equivalent = p.blockOf[l0] == p.blockOf[r0];
    if (!v.equivalent) v.witness = detail::explain(b.g, p, l0, r0);
    return v;
}

/// Quotient of `g` by its coarsest branching bisimulation. Blocks whose only
/// move is a probabilistic tau become P states; other probabilistic moves get
/// an auxiliary P state.
inline Plts minimize(const Plts& g) {
    detail::GraphBuilder b;
    b.add(g);
    const Partition p = detail::refine(b.g);

    std::vector<std::size_t> rep(p.blockCount, g.states.size());
    for (std::size_t s = 0; s < g.states.size(); ++s)
        if (rep[p.blockOf[s]] == g.states.size()) rep[p.blockOf[s]] = s;

    Plts q;
    std::vector<detail::Signature> sigs(p.blockCount);
    for (std::size_t k = 0; k < p.blockCount; ++k) {
        sigs[k] = detail::signature(b.g, p.blockOf, rep[k]);
        PltsState st;
        st.terminal = sigs[k].terminal;
        st.config = g.states[rep[k]].config;
        const bool probabilistic =
            sigs[k].moves.size() == 1 && sigs[k].moves[0].label == 0 && !sigs[k].moves[0].dirac() && !st.terminal;
        st.kind = probabilistic ? PltsState::Kind::P : PltsState::Kind::N;
        if (probabilistic) st.config.reset();
        q.add(std::move(st));
    }
    for (std::size_t k = 0; k < p.blockCount; ++k) {
        const bool isP = q.states[k].kind == PltsState::Kind::P;
        for (const auto& m : sigs[k].moves) {
            const Label& l = b.g.classLabel[m.label];
            if (m.dirac()) {
                q.connect(k, l, m.dist.front().first);
                continue;
            }
            std::size_t src = k;
            if (!isP) {
                src = q.add({PltsState::Kind::P, false, std::nullopt});
                q.connect(k, l, src);
            }
            for (const auto& [blk, pr] : m.dist) q.connect(src, Label::prob(pr), blk);
        }
    }
    q.initial = p.blockOf[g.initial];
    return q;
}

/// True when the states of `a` and `b` pair up one-to-one under a joint
/// bisimulation and both have the same number of edges: for quotients this
/// means the two are isomorphic.
inline bool sameShape(const Plts& a, const Plts& b) {
    if (a.states.size() != b.states.size() || a.edges.size() != b.edges.size()) return false;
    detail::GraphBuilder gb;
    const std::size_t offB = (gb.add(a), gb.add(b));
    const Partition p = detail::refine(gb.g);
    std::vector<int> countA(p.blockCount, 0), countB(p.blockCount, 0);
    for (std::size_t s = 0; s < a.states.size(); ++s) ++countA[p.blockOf[s]];
    for (std::size_t s = 0; s < b.states.size(); ++s) ++countB[p.blockOf[offB + s]];
    for (std::size_t k = 0; k < p.blockCount; ++k)
        if (countA[k] != 1 || countB[k] != 1) return false;
    return p.blockOf[a.initial] == p.blockOf[offB + b.initial];
}

// ---------------------------------------------------------------------------
// Driver

struct EquivalenceRun {
    std::string testState;
    std::size_t leftStates = 0;
    std::size_t rightStates = 0;
    EquivalenceVerdict verdict;
};

struct EquivalenceResult {
    bool equivalent = true;
    std::optional<EquivalenceWitness> witness;  ///< from the first failing test state
    std::vector<EquivalenceRun> runs;
};

/// Compares two configurations once per test state (the environment may
/// only inject that state) and conjoins the verdicts. Configurations without
/// qubit inputs still run once per test state; the verdicts then coincide.
inline EquivalenceResult checkEquivalence(const Configuration& left, const Configuration& right,
                                          const std::vector<TestState>& tests, std::size_t maxStates = 20000) {
    EquivalenceResult out;
    for (const auto& t : tests) {
        ExploreOptions o;
        o.maxStates = maxStates;
        o.qubitTests = std::vector<TestState>{t};
        const Plts l = explore(left, o);
        const Plts r = explore(right, o);
        EquivalenceRun run{t.name, l.states.size(), r.states.size(), branchingBisim(l, r)};
        if (!run.verdict.equivalent && out.equivalent) {
            out.equivalent = false;
            out.witness = run.verdict.witness;
            out.witness->testState = t.name;
        }
        out.runs.push_back(std::move(run));
    }
    return out;
}

}  // namespace cqp
