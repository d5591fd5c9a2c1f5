#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "cqp/parser.hpp"
#include "cqp/plts.hpp"
#include "cqp/report.hpp"
#include "cqp/semantics.hpp"
#include "support/generators.hpp"

using namespace cqp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Program corpus(const std::string& name) { return parseProgram(slurp(fs::path(CQP_CORPUS_DIR) / name)); }

std::vector<TestState> only(const TestState& t) { return {t}; }

ExploreOptions withTests(std::vector<TestState> tests) {
    ExploreOptions o;
    o.qubitTests = std::move(tests);
    return o;
}

// Output edges reachable from `start` without passing another output.
void collectOutputs(const Plts& g, std::size_t start, std::vector<const PltsEdge*>& out) {
    std::vector<bool> seen(g.states.size(), false);
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
        auto s = stack.back();
        stack.pop_back();
        if (seen[s]) continue;
        seen[s] = true;
        for (const auto& e : g.edges) {
            if (e.src != s) continue;
            if (e.label.kind == Label::Kind::Output) out.push_back(&e);
            else stack.push_back(e.dst);
        }
    }
}

}  // namespace

TEST(Initial, TeleportBody) {
    auto p = corpus("teleport.cqp");
    auto c = initialConfiguration(p, Call{"Teleport", {"a", "b"}}, {"a", "b"});
    EXPECT_EQ(c.qstate.numQubits(), 0u);
    ASSERT_EQ(c.threads.size(), 1u);
    auto want = substitute(p.find("Teleport")->body, {{"a", "#v0"}, {"b", "#v1"}});
    EXPECT_TRUE(structurallyEqual(c.threads[0], want));
    EXPECT_EQ(c.context->visibleNames, (std::vector<Name>{"a", "b"}));
}

TEST(Initial, IdentityStartsWithInput) {
    auto c = initialConfiguration(corpus("identity.cqp"), Call{"Identity", {"c", "d"}}, {"c", "d"});
    ASSERT_EQ(c.threads.size(), 1u);
    EXPECT_TRUE(std::holds_alternative<Input>(c.threads[0]->node));
}

TEST(Initial, Errors) {
    auto p = corpus("teleport.cqp");
    EXPECT_THROW(initialConfiguration(p, Call{"Teleport", {"a"}}, {"a"}), Error);
    EXPECT_THROW(initialConfiguration(p, Call{"Nobody", {}}, {}), Error);
    EXPECT_THROW(initialConfiguration(p, Call{"Teleport", {"a", "z"}}, {"a"}), Error);
}

TEST(Step, TeleportFirstStepAllocates) {
    auto c = initialConfiguration(corpus("teleport.cqp"));
    auto ts = step(c);
    ASSERT_EQ(ts.size(), 1u);
    EXPECT_EQ(ts[0].label.kind, Label::Kind::Tau);
    ASSERT_EQ(ts[0].branches.size(), 1u);
    EXPECT_EQ(ts[0].branches[0].config.qstate.numQubits(), 2u);
}

TEST(Step, NilIsStuck) {
    auto c = initialConfiguration(parseProgram("P() = 0"));
    EXPECT_TRUE(c.terminated());
    EXPECT_TRUE(step(c).empty());
}

TEST(Step, AliceMeasurementHasFourQuarterBranches) {
    for (const auto& t : defaultQubitTests()) {
        auto g = explore(initialConfiguration(corpus("teleport.cqp")), withTests(only(t)));
        std::size_t pNodes = 0;
        for (std::size_t s = 0; s < g.states.size(); ++s) {
            if (g.states[s].kind != PltsState::Kind::P) continue;
            ++pNodes;
            std::size_t k = 0;
            for (const auto& e : g.edges)
                if (e.src == s) {
                    ++k;
                    EXPECT_NEAR(e.label.probability, 0.25, 1e-9);
                }
            EXPECT_EQ(k, 4u);
        }
        EXPECT_GE(pNodes, 1u) << t.name;
    }
}

TEST(Step, ExternalInputUsesAlphabet) {
    auto c = initialConfiguration(corpus("identity.cqp"));
    auto ts = step(c);
    ASSERT_EQ(ts.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(ts[i].label.kind, Label::Kind::Input);
        EXPECT_EQ(ts[i].label.values.at(0).tag, defaultQubitTests()[i].name);
        EXPECT_EQ(ts[i].branches[0].config.qstate.numQubits(), 1u);
    }
    EXPECT_EQ(toString(ts[2].label), "c?[plus]");
}

TEST(Step, InternalHandshakeTransfersWord) {
    auto p = parseProgram("P(o) = (new k) (k![1, 0] . 0 | k?[r] . o![r] . 0)");
    auto c = initialConfiguration(p);
    c = step(c).at(0).branches.at(0).config;  // new channel
    auto ts = step(c);
    ASSERT_EQ(ts.size(), 1u);
    EXPECT_EQ(ts[0].label.kind, Label::Kind::Tau);
    auto after = ts[0].branches[0].config;
    EXPECT_EQ(renderTerm(after), "#v0![#b10] . 0");
    auto out = step(after);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(toString(out[0].label), "o![1,0]");
}

TEST(Step, DynamicOwnershipViolations) {
    const char* programs[] = {
        "P(a,b) = (qbit q) (a![q] . 0 | b![q] . 0)",
        "P(c) = (qbit q) c![q] . c![q] . 0",
        "P(c) = (qbit q) c![measure q] . {q *= H} . 0",
        "P(c) = (qbit q) (new k) (k![q] . {q *= H} . 0 | k?[z] . c![z] . 0)",
    };
    for (const char* src : programs) EXPECT_THROW(explore(initialConfiguration(parseProgram(src))), OwnershipViolation) << src;
}

TEST(Step, UnboundNameAtRuntime) {
    EXPECT_THROW(step(initialConfiguration(parseProgram("P(c) = c![z] . 0"))), RuntimeError);
    EXPECT_THROW(step(initialConfiguration(parseProgram("P(c) = z![0] . 0"))), RuntimeError);
}

TEST(Explore, IdentityIsAChain) {
    auto g = explore(initialConfiguration(corpus("identity.cqp")), withTests(only(defaultQubitTests()[2])));
    ASSERT_EQ(g.states.size(), 3u);
    ASSERT_EQ(g.edges.size(), 2u);
    EXPECT_EQ(countStates(g, PltsState::Kind::P), 0u);
    EXPECT_EQ(g.edges[0].label.kind, Label::Kind::Input);
    EXPECT_EQ(g.edges[1].label.kind, Label::Kind::Output);
    EXPECT_TRUE(g.states[g.edges[1].dst].terminal);
}

TEST(Explore, NilIsOneTerminalState) {
    auto g = explore(initialConfiguration(parseProgram("P() = 0")));
    ASSERT_EQ(g.states.size(), 1u);
    EXPECT_TRUE(g.states[0].terminal);
    EXPECT_TRUE(g.edges.empty());
}

TEST(Explore, CapIsReported) {
    ExploreOptions o;
    o.maxStates = 10;
    try {
        explore(initialConfiguration(corpus("teleport.cqp")), o);
        FAIL() << "expected ExplorationLimit";
    } catch (const ExplorationLimit& e) {
        EXPECT_EQ(e.cap(), 10u);
        EXPECT_NE(std::string(e.what()).find("10"), std::string::npos);
    }
}

TEST(Explore, TeleportBranchesEndInOutputs) {
    auto g = explore(initialConfiguration(corpus("teleport.cqp")), withTests(only(defaultQubitTests()[3])));
    for (std::size_t s = 0; s < g.states.size(); ++s) {
        if (g.states[s].kind != PltsState::Kind::P) continue;
        for (const auto& e : g.edges) {
            if (e.src != s) continue;
            std::vector<const PltsEdge*> outs;
            collectOutputs(g, e.dst, outs);
            ASSERT_FALSE(outs.empty());
            for (const auto* o : outs) {
                EXPECT_EQ(o->label.channelName, "b");
                EXPECT_EQ(o->label.values.at(0).kind, LabelValue::Kind::Qubit);
            }
        }
    }
}

TEST(Invariants, PerBranchDeterminismOfTeleport) {
    for (const auto& t : defaultQubitTests()) {
        auto g = explore(initialConfiguration(corpus("teleport.cqp")), withTests(only(t)));
        const auto want = DensityMatrix::fromPure(t.state);
        std::size_t branches = 0;
        for (std::size_t s = 0; s < g.states.size(); ++s) {
            if (g.states[s].kind != PltsState::Kind::P) continue;
            for (const auto& e : g.edges) {
                if (e.src != s) continue;
                ++branches;
                std::vector<const PltsEdge*> outs;
                collectOutputs(g, e.dst, outs);
                ASSERT_FALSE(outs.empty());
                for (const auto* o : outs) EXPECT_TRUE(o->label.values.at(0).rho.approxEqual(want, 1e-9)) << t.name;
            }
        }
        EXPECT_GE(branches, 4u);
    }
}

TEST(Invariants, ProbabilityConservation) {
    for (const char* f : {"teleport.cqp", "bell.cqp", "coin.cqp", "teleport_harness.cqp", "identity.cqp"}) {
        auto g = explore(initialConfiguration(corpus(f)));
        std::vector<double> mass(g.states.size(), 0.0);
        for (const auto& e : g.edges) {
            if (e.label.kind == Label::Kind::Prob) {
                EXPECT_EQ(g.states[e.src].kind, PltsState::Kind::P);
                EXPECT_GT(e.label.probability, 0.0);
                EXPECT_LE(e.label.probability, 1.0);
                mass[e.src] += e.label.probability;
            } else {
                EXPECT_EQ(g.states[e.src].kind, PltsState::Kind::N);
            }
        }
        for (std::size_t s = 0; s < g.states.size(); ++s)
            if (g.states[s].kind == PltsState::Kind::P) EXPECT_NEAR(mass[s], 1.0, 1e-9) << f;
    }
}

namespace {

// Successor signature of one configuration: per transition, the label text
// and the sorted (probability, canonical key) list.
std::vector<std::string> successorSummary(const Configuration& c) {
    std::vector<std::string> out;
    for (const auto& t : step(c)) {
        std::vector<std::string> parts;
        for (const auto& b : t.branches) {
            auto cf = canonicalize(b.config);
            parts.push_back(detail::formatReal(b.probability) + "@" + cf.key + "@" + toDirac(cf.config.qstate));
        }
        std::sort(parts.begin(), parts.end());
        std::string s = toString(t.label);
        for (const auto& p : parts) s += "|" + p;
        out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Invariants, DedupSoundness) {
    std::vector<std::pair<Configuration, Configuration>> pairs;
    auto gather = [&](const Configuration& start) {
        ExploreOptions o;
        o.recordMerges = true;
        o.qubitTests = defaultQubitTests();
        auto ex = exploreDetailed(start, o);
        for (const auto& m : ex.merges) pairs.emplace_back(m.raw, *ex.plts.states[m.into].config);
    };
    gather(initialConfiguration(corpus("teleport.cqp")));
    gather(initialConfiguration(corpus("teleport_harness.cqp")));
    gather(initialConfiguration(parseProgram("P(o) = ((qbit x) {x *= H} . o![x] . 0 | (qbit y) o![y] . 0)")));
    ASSERT_GE(pairs.size(), 50u);

    std::mt19937_64 rng(50);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (std::size_t i = 0; i < 50; ++i) {
        // The representative may print its Bloch labels and states with a
        // different qubit numbering, so compare after canonicalizing both.
        auto a = successorSummary(canonicalize(pairs[i].first).config);
        auto b = successorSummary(pairs[i].second);
        EXPECT_EQ(a, b) << renderTerm(pairs[i].first);
        // Raw successors agree too, up to the final canonical forms.
        EXPECT_EQ(successorSummary(pairs[i].first).size(), b.size());
    }
}

TEST(Canonical, InterleavedAllocationsMerge) {
    auto c = initialConfiguration(parseProgram("P(o) = ((qbit x) {x *= H} . o![x] . 0 | (qbit y) o![y] . 0)"));
    auto first = step(c);
    ASSERT_EQ(first.size(), 2u);
    auto leftThenRight = step(first[0].branches[0].config);
    auto rightThenLeft = step(first[1].branches[0].config);
    // After both allocations the two orders differ only in qubit numbering.
    auto a = canonicalize(leftThenRight.at(1).branches[0].config);
    auto b = canonicalize(rightThenLeft.at(0).branches[0].config);
    EXPECT_EQ(a.key, b.key);
    EXPECT_TRUE(statesEqualUpToGlobalPhase(a.config.qstate, b.config.qstate));
}

TEST(Canonical, GlobalPhaseIgnored) {
    auto c = initialConfiguration(parseProgram("P(o) = (qbit x) {x *= H} . o![x] . 0"));
    c = step(c).at(0).branches.at(0).config;
    c = step(c).at(0).branches.at(0).config;
    auto flipped = c;
    std::vector<Amplitude> amps = c.qstate.amplitudes();
    for (auto& a : amps) a *= Amplitude(0.0, -1.0);
    flipped.qstate = StateVector::fromAmplitudes(amps);
    auto a = canonicalize(c), b = canonicalize(flipped);
    EXPECT_EQ(a.key, b.key);
    for (std::size_t i = 0; i < a.config.qstate.dimension(); ++i)
        EXPECT_NEAR(std::abs(a.config.qstate[i] - b.config.qstate[i]), 0.0, 1e-12);
}

TEST(Run, HarnessDeliversInputState) {
    auto c = initialConfiguration(corpus("teleport_harness.cqp"));
    const auto plus = DensityMatrix::fromPure(defaultQubitTests()[2].state);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto trace = runSampled(c, seed);
        ASSERT_FALSE(trace.empty());
        const auto& last = trace.back();
        ASSERT_EQ(last.label.kind, Label::Kind::Output);
        EXPECT_TRUE(last.label.values.at(0).rho.approxEqual(plus, 1e-9));
        EXPECT_TRUE(last.config.terminated());
    }
}

TEST(Run, SeededRunsAreReproducible) {
    auto c = initialConfiguration(corpus("teleport_harness.cqp"));
    for (std::uint64_t seed : {7u, 8u}) {
        auto a = runSampled(c, seed), b = runSampled(c, seed);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(traceLine(a[i]), traceLine(b[i]));
        EXPECT_EQ(traceJson(a).dump(), traceJson(b).dump());
    }
}

TEST(Run, BellStatistics) {
    auto c = initialConfiguration(corpus("bell.cqp"));
    int zeros = 0;
    const int runs = 10000;
    for (int seed = 0; seed < runs; ++seed) {
        std::vector<int> bits;
        for (const auto& s : runSampled(c, static_cast<std::uint64_t>(seed)))
            if (s.label.kind == Label::Kind::Output) bits.push_back(s.label.values.at(0).bit);
        ASSERT_EQ(bits.size(), 2u);
        EXPECT_EQ(bits[0], bits[1]);
        zeros += bits[0] == 0;
    }
    const double f = static_cast<double>(zeros) / runs;
    EXPECT_GE(f, 0.48);
    EXPECT_LE(f, 0.52);
}

TEST(Labels, Rendering) {
    Label out;
    out.kind = Label::Kind::Output;
    out.channelName = "b";
    LabelValue q;
    q.kind = LabelValue::Kind::Qubit;
    q.rho = DensityMatrix::fromPure(StateVector::basis(1, 0));
    out.values = {q};
    EXPECT_EQ(toString(out), "b![qubit<0.0000,0.0000,1.0000>]");
    EXPECT_EQ(toString(Label::tau()), "tau");
    EXPECT_EQ(toString(Label::prob(0.25, "01")), "prob 0.2500 [01]");
}

TEST(QubitTests, FileFormat) {
    std::istringstream in("# comment\nzero 1 0 0 0\n\nminus 0.7071067811865476 0 -0.7071067811865476 0\n");
    auto ts = parseQubitTests(in);
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[1].name, "minus");
    std::istringstream bad("half 0.5 0 0 0\n");
    EXPECT_THROW(parseQubitTests(bad), Error);
    std::istringstream shortLine("x 1 0\n");
    EXPECT_THROW(parseQubitTests(shortLine), Error);
}
