// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cqp/cqp.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace cqp;
namespace fs = std::filesystem;

namespace {

constexpr double kDensityTol = 1e-9;
constexpr double kBornTol = 1e-9;
constexpr double kAmplitudeTol = 1e-12;
constexpr double kEquivSeconds = 10.0;
constexpr double kCongruenceSeconds = 300.0;
constexpr std::size_t kContexts = 50;
constexpr std::uint64_t kContextSeed = 2024;

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Program corpus(const std::string& name) { return parseProgram(slurp(fs::path(CQP_CORPUS_DIR) / name)); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

Outcome teleportSpecification() {
    const auto t0 = Clock::now();
    auto r = checkEquivalence(initialConfiguration(corpus("teleport.cqp"), Name("Teleport")),
                              initialConfiguration(corpus("identity.cqp"), Name("Identity")), defaultQubitTests());
    const double s = secondsSince(t0);
    return {r.equivalent && r.runs.size() == 4 && s < kEquivSeconds,
            std::string(r.equivalent ? "EQUIVALENT" : "NOT EQUIVALENT") + " over 4 test states" +
                fmt(", %.2f s (limit %.0f s)", s, kEquivSeconds)};
}

Outcome perBranchDeterminism() {
    int checks = 0, good = 0;
    for (const auto& t : defaultQubitTests()) {
        ExploreOptions o;
        o.qubitTests = std::vector<TestState>{t};
        const Plts g = explore(initialConfiguration(corpus("teleport.cqp"), Name("Teleport")), o);
        const auto want = DensityMatrix::fromPure(t.state);
        // The first P node on every path is Alice's measurement; check the
        // outputs reachable below each of its branches.
        std::vector<bool> isFirstP(g.states.size(), false);
        {
            std::vector<bool> seen(g.states.size(), false);
            std::vector<std::size_t> stack{g.initial};
            while (!stack.empty()) {
                auto s = stack.back();
                stack.pop_back();
                if (seen[s]) continue;
                seen[s] = true;
                if (g.states[s].kind == PltsState::Kind::P) {
                    isFirstP[s] = true;
                    continue;
                }
                for (const auto& e : g.edges)
                    if (e.src == s) stack.push_back(e.dst);
            }
        }
        // Interleavings give several measurement nodes; each must have the
        // same four outcomes, so count the distinct outcomes per test state.
        std::set<std::string> outcomes;
        bool allGood = true;
        for (std::size_t s = 0; s < g.states.size(); ++s) {
            if (!isFirstP[s]) continue;
            for (const auto& e : g.edges) {
                if (e.src != s) continue;
                outcomes.insert(e.label.outcome);
                std::vector<bool> seen(g.states.size(), false);
                std::vector<std::size_t> stack{e.dst};
                bool sawOutput = false;
                while (!stack.empty()) {
                    auto u = stack.back();
                    stack.pop_back();
                    if (seen[u]) continue;
                    seen[u] = true;
                    for (const auto& f : g.edges) {
                        if (f.src != u) continue;
                        if (f.label.kind == Label::Kind::Output) {
                            sawOutput = true;
                            allGood = allGood && f.label.values.at(0).rho.approxEqual(want, kDensityTol);
                        } else {
                            stack.push_back(f.dst);
                        }
                    }
                }
                allGood = allGood && sawOutput && std::abs(e.label.probability - 0.25) <= kBornTol;
            }
        }
        checks += static_cast<int>(outcomes.size());
        if (allGood) good += static_cast<int>(outcomes.size());
    }
    return {checks == 16 && good == 16, std::to_string(good) + "/" + std::to_string(checks) +
                                            " (branch, test state) pairs deliver the input within 1e-9"};
}

Outcome entanglementStatistics() {
    const Plts g = explore(initialConfiguration(corpus("bell.cqp")));
    // Enumerate complete runs with their probabilities; the process is a
    // single thread so every N state has at most one move.
    std::map<std::string, double> dist;
    std::function<void(std::size_t, double, std::string)> walk = [&](std::size_t s, double p, std::string bits) {
        bool any = false;
        for (const auto& e : g.edges) {
            if (e.src != s) continue;
            any = true;
            std::string b = bits;
            if (e.label.kind == Label::Kind::Output) b += std::to_string(e.label.values.at(0).bit);
            walk(e.dst, e.label.kind == Label::Kind::Prob ? p * e.label.probability : p, b);
        }
        if (!any) dist[bits] += p;
    };
    walk(g.initial, 1.0, "");
    double agree = 0.0;
    for (const auto& [bits, p] : dist) agree += bits.size() == 2 && bits[0] == bits[1] ? p : 0.0;
    const bool pass = dist.size() == 2 && std::abs(dist["00"] - 0.5) <= kBornTol &&
                      std::abs(dist["11"] - 0.5) <= kBornTol && std::abs(agree - 1.0) <= kBornTol;
    return {pass, fmt("P(00)=%.12f P(11)=%.12f", dist["00"], dist["11"]) + fmt(", P(match)=%.12f", agree)};
}

Outcome superpositionExample() {
    std::vector<Amplitude> in(8), want(8);
    in[0b000] = 0.5;
    in[0b010] = 0.5;
    in[0b110] = -0.5;
    in[0b111] = -0.5;
    want[0b010] = 0.5;
    want[0b000] = 0.5;
    want[0b100] = -0.5;
    want[0b101] = -0.5;
    const auto got = applyGate(StateVector::fromAmplitudes(in), standardGate("X"), {1});
    double worst = 0.0;
    for (std::size_t i = 0; i < 8; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    return {worst <= kAmplitudeTol, fmt("max entry error %.3g (limit %.0e)", worst, kAmplitudeTol)};
}

Outcome noCloning() {
    auto has = [](const std::vector<Diagnostic>& ds, DiagnosticCategory c) {
        for (const auto& d : ds)
            if (d.category == c) return true;
        return false;
    };
    const bool clone = has(typecheckProgram(corpus("negative/clone.cqp")), DiagnosticCategory::QubitDuplicated);
    const bool resend =
        has(typecheckProgram(corpus("negative/use_after_send.cqp")), DiagnosticCategory::QubitUsedAfterSend);
    int positives = 0, clean = 0, explored = 0, violations = 0;
    for (const auto& entry : fs::directory_iterator(CQP_CORPUS_DIR)) {
        if (entry.path().extension() != ".cqp") continue;
        ++positives;
        const Program p = parseProgram(slurp(entry.path()));
        if (!typecheckProgram(p).empty()) continue;
        ++clean;
        for (const auto& d : p.definitions) {
            bool channelsOnly = true;
            for (const auto& t : p.signatures.at(d.name)) channelsOnly = channelsOnly && t.kind == TypeExpr::Kind::Channel;
            if (!channelsOnly) continue;
            ++explored;
            try {
                explore(initialConfiguration(p, d.name));
            } catch (const OwnershipViolation&) {
                ++violations;
            }
        }
    }
    return {clone && resend && positives == clean && positives > 0 && violations == 0,
            std::string("clone→QubitDuplicated ") + (clone ? "yes" : "no") + ", use_after_send→QubitUsedAfterSend " +
                (resend ? "yes" : "no") + ", " + std::to_string(clean) + "/" + std::to_string(positives) +
                " positives typecheck, " + std::to_string(violations) + " violations over " +
                std::to_string(explored) + " explored entries"};
}

Outcome congruenceSampling() {
    const auto t0 = Clock::now();
    auto r = checkCongruence(corpus("teleport.cqp"), "Teleport", corpus("identity.cqp"), "Identity", kContextSeed,
                             kContexts);
    const double s = secondsSince(t0);
    return {r.counterexamples.empty() && r.illTyped == 0 && r.checked + r.skipped == kContexts &&
                s < kCongruenceSeconds,
            std::to_string(r.counterexamples.size()) + " counterexamples, " + std::to_string(r.checked) +
                " checked, " + std::to_string(r.skipped) + " skipped at the state cap" +
                fmt(", %.1f s (limit %.0f s)", s, kCongruenceSeconds)};
}

Outcome calibration() {
    const Program coin = corpus("coin.cqp");
    auto r = checkEquivalence(initialConfiguration(coin, Name("Coin")), initialConfiguration(coin, Name("Zero")),
                              defaultQubitTests());
    const bool coinOk = !r.equivalent && r.witness && r.witness->kind == EquivalenceWitness::Kind::ProbabilityMismatch;

    std::mt19937_64 rng(7);
    int quotients = 0, quotientOk = 0;
    for (int i = 0; i < 50; ++i) {
        auto g = gen::randomPlts(rng, 2 + gen::pick(rng, 8));
        ++quotients;
        quotientOk += branchingBisim(g, minimize(g)).equivalent;
    }
    for (const char* f : {"teleport.cqp", "identity.cqp", "coin.cqp", "bell.cqp", "teleport_harness.cqp"}) {
        auto g = explore(initialConfiguration(corpus(f)));
        ++quotients;
        quotientOk += branchingBisim(g, minimize(g)).equivalent;
    }

    int inert = 0, inertOk = 0;
    while (inert < 20) {
        auto g = gen::randomPlts(rng, 2 + gen::pick(rng, 8));
        const std::size_t target = gen::pick(rng, g.states.size());
        if (g.states[target].terminal) continue;
        ++inert;
        inertOk += branchingBisim(g, gen::insertTau(g, target)).equivalent;
    }
    return {coinOk && quotientOk == quotients && inertOk == inert,
            std::string("coin vs zero ") + (coinOk ? "NOT EQUIVALENT (probability mismatch)" : "wrong verdict") +
                ", " + std::to_string(quotientOk) + "/" + std::to_string(quotients) + " minimizations equivalent, " +
                std::to_string(inertOk) + "/" + std::to_string(inert) + " tau insertions inert"};
}

Outcome simulatorOracle() {
    std::mt19937_64 rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 3;
        const std::size_t arity = 1 + rng() % n;
        std::vector<std::size_t> qs(n);
        for (std::size_t i = 0; i < n; ++i) qs[i] = i;
        std::shuffle(qs.begin(), qs.end(), rng);
        std::vector<std::size_t> targets(qs.begin(), qs.begin() + static_cast<std::ptrdiff_t>(arity));
        const Gate g = oracle::randomGate(rng, arity);
        const StateVector s = oracle::randomState(rng, n);
        const Eigen::VectorXcd want = oracle::expandGate(oracle::toEigen(g), targets, n) * oracle::toEigen(s);
        const StateVector got = applyGate(s, g, targets);
        for (std::size_t i = 0; i < s.dimension(); ++i)
            worst = std::max(worst, std::abs(got[i] - want(static_cast<Eigen::Index>(i))));
    }
    return {worst <= kAmplitudeTol, fmt("1000 triples, max error %.3g (limit %.0e)", worst, kAmplitudeTol)};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"teleportation specification", teleportSpecification},
        {"per-branch determinism", perBranchDeterminism},
        {"entanglement statistics", entanglementStatistics},
        {"superposition gate action", superpositionExample},
        {"no-cloning via typing", noCloning},
        {"congruence sampling", congruenceSampling},
        {"equivalence-checker calibration", calibration},
        {"simulator oracle", simulatorOracle},
    };
    int failures = 0, index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
