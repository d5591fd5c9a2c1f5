#pragma once

// Randomized congruence checking: place two processes with the same
// two-channel interface (input channel, output channel) into generated
// contexts and compare the results.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cqp/equiv.hpp"
#include "cqp/syntax.hpp"
#include "cqp/types.hpp"

namespace cqp {

inline constexpr const char* kHoleName = "Hole";
inline constexpr const char* kContextName = "Ctx";

/// A process definition with calls to `Hole(in, out)` where the process
/// under test goes.
struct ProcessContext {
    std::string family;
    ProcessDef def;
    std::vector<TypeExpr> signature;
};

namespace detail {

inline TermPtr gates(std::mt19937_64& rng, const Name& q, TermPtr cont) {
    static const char* const pool[] = {"H", "X", "Z"};
    const auto n = rng() % 3;
    std::vector<const char*> chosen;
    for (std::size_t i = 0; i < n; ++i) chosen.push_back(pool[rng() % 3]);
    for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) cont = term::action({q}, term::gate(*it), cont);
    return cont;
}

inline TermPtr hole(Name in, Name out) { return term::call(kHoleName, {std::move(in), std::move(out)}); }

inline TermPtr par3(TermPtr a, TermPtr b, TermPtr c) { return term::par(std::move(a), term::par(std::move(b), std::move(c))); }

}  // namespace detail

/// Context number `rng`-chosen from a fixed set of families.
inline ProcessContext randomContext(std::mt19937_64& rng) {
    using namespace term;
    using detail::gates;
    using detail::hole;
    const TypeExpr q = TypeExpr::qbit(), b = TypeExpr::bit();
    const TypeExpr qchan = TypeExpr::channel({q}), bchan = TypeExpr::channel({b});
    ProcessContext c;
    c.def.name = kContextName;
    switch (rng() % 7) {
        case 0: {
            c.family = "feeder";
            auto sender = qbit({"p"}, gates(rng, "p", output("a", {var("p")}, nil())));
            auto observer = input("b", {"r"}, gates(rng, "r", output("o", {measureOf({"r"})}, nil())));
            c.def.params = {"o"};
            c.def.body = newChannel("a", newChannel("b", detail::par3(sender, hole("a", "b"), observer)));
            c.signature = {bchan};
            break;
        }
        case 1: {
            c.family = "observer";
            auto observer = input("b", {"r"}, gates(rng, "r", output("o", {var("r")}, nil())));
            c.def.params = {"e", "o"};
            c.def.body = newChannel("b", par(hole("e", "b"), observer));
            c.signature = {qchan, qchan};
            break;
        }
        case 2: {
            c.family = "relay";
            auto relay = input("e", {"x"}, gates(rng, "x", output("a", {var("x")}, nil())));
            c.def.params = {"e", "o"};
            c.def.body = newChannel("a", par(relay, hole("a", "o")));
            c.signature = {qchan, qchan};
            break;
        }
        case 3: {
            c.family = "prefix";
            c.def.params = {"e", "o", "n"};
            c.def.body = output("n", {bit(static_cast<int>(rng() % 2))}, hole("e", "o"));
            c.signature = {qchan, qchan, bchan};
            break;
        }
        case 4: {
            c.family = "noise";
            c.def.params = {"e", "o", "n"};
            c.def.body = par(hole("e", "o"), output("n", {bit(static_cast<int>(rng() % 2))}, nil()));
            c.signature = {qchan, qchan, bchan};
            break;
        }
        case 5: {
            c.family = "chain";
            c.def.params = {"e", "o"};
            c.def.body = newChannel("m", par(hole("e", "m"), hole("m", "o")));
            c.signature = {qchan, qchan};
            break;
        }
        default: {
            c.family = "entangled";
            auto tail = action({"r", "s"}, gate("CNot"), gates(rng, "r", output("o", {measureOf({"r", "s"})}, nil())));
            auto sender = qbit({"p", "s"},
                               action({"p"}, gate("H"),
                                      action({"p", "s"}, gate("CNot"),
                                             output("a", {var("p")}, input("b", {"r"}, tail)))));
            c.def.params = {"o"};
            c.def.body = newChannel("a", newChannel("b", par(sender, hole("a", "b"))));
            c.signature = {TypeExpr::channel({b, b})};
            break;
        }
    }
    return c;
}

/// `Ctx(e, o) = Hole(e, o)`.
inline ProcessContext trivialContext() {
    ProcessContext c;
    c.family = "trivial";
    c.def.name = kContextName;
    c.def.params = {"e", "o"};
    c.def.body = detail::hole("e", "o");
    c.signature = {TypeExpr::channel({TypeExpr::qbit()}), TypeExpr::channel({TypeExpr::qbit()})};
    return c;
}

/// Definitions of `a` followed by those of `b` not already present.
inline Program mergePrograms(const Program& a, const Program& b) {
    Program out = a;
    out.main.reset();
    for (const auto& d : b.definitions)
        if (!out.find(d.name)) out.definitions.push_back(d);
    for (const auto& [k, v] : b.signatures) out.signatures.emplace(k, v);
    return out;
}

/// `base` extended with the context, its holes calling `process`, and a
/// main running the context.
inline Program fill(const ProcessContext& ctx, const Name& process, const Program& base) {
    Program out = base;
    ProcessDef def = ctx.def;
    std::function<TermPtr(const TermPtr&)> plug = [&](const TermPtr& t) -> TermPtr {
        return std::visit(
            [&](const auto& x) -> TermPtr {
                using T = std::decay_t<decltype(x)>;
                if constexpr (std::is_same_v<T, Call>) {
                    return x.process == kHoleName ? term::call(process, x.args, t->loc) : t;
                } else if constexpr (std::is_same_v<T, Nil>) {
                    return t;
                } else if constexpr (std::is_same_v<T, Parallel>) {
                    return term::par(plug(x.left), plug(x.right), t->loc);
                } else {
                    T copy = x;
                    copy.cont = plug(x.cont);
                    return term::make(std::move(copy), t->loc);
                }
            },
            t->node);
    };
    def.body = plug(def.body);
    out.definitions.push_back(def);
    out.signatures[def.name] = ctx.signature;
    out.main = Call{def.name, def.params};
    return out;
}

struct Counterexample {
    std::string family;
    std::string context;
    EquivalenceWitness witness;
};

struct CongruenceReport {
    std::size_t checked = 0;
    std::size_t skipped = 0;  ///< exploration hit the state cap
    std::size_t illTyped = 0;
    std::vector<Counterexample> counterexamples;
    std::vector<std::string> families;  ///< family of every sampled context
};

enum class ContextStatus { Equivalent, Counterexample, Skipped, IllTyped };

struct ContextCheck {
    ContextStatus status = ContextStatus::Equivalent;
    std::optional<EquivalenceWitness> witness;
};

/// Compares C[left] with C[right] for one context.
inline ContextCheck checkContext(const Program& program, const ProcessContext& ctx, const Name& left,
                                 const Name& right, const std::vector<TestState>& tests = defaultQubitTests(),
                                 std::size_t maxStates = 20000) {
    const Program pl = fill(ctx, left, program);
    const Program pr = fill(ctx, right, program);
    if (!typecheckProgram(pl).empty() || !typecheckProgram(pr).empty()) return {ContextStatus::IllTyped, {}};
    try {
        auto result = checkEquivalence(initialConfiguration(pl), initialConfiguration(pr), tests, maxStates);
        if (result.equivalent) return {ContextStatus::Equivalent, {}};
        return {ContextStatus::Counterexample, result.witness};
    } catch (const ExplorationLimit&) {
        return {ContextStatus::Skipped, {}};
    }
}

/// Samples `count` contexts from `seed` and checks C[left] against C[right]
/// for each. `program` must define both processes.
inline CongruenceReport checkCongruence(const Program& program, const Name& left, const Name& right,
                                        std::uint64_t seed, std::size_t count,
                                        const std::vector<TestState>& tests = defaultQubitTests(),
                                        std::size_t maxStates = 20000) {
    std::mt19937_64 rng(seed);
    CongruenceReport report;
    for (std::size_t i = 0; i < count; ++i) {
        const ProcessContext ctx = randomContext(rng);
        report.families.push_back(ctx.family);
        const ContextCheck r = checkContext(program, ctx, left, right, tests, maxStates);
        switch (r.status) {
            case ContextStatus::Equivalent: ++report.checked; break;
            case ContextStatus::Skipped: ++report.skipped; break;
            case ContextStatus::IllTyped: ++report.illTyped; break;
            case ContextStatus::Counterexample:
                ++report.checked;
                report.counterexamples.push_back({ctx.family, prettyPrint(ctx.def), *r.witness});
                break;
        }
    }
    return report;
}

/// Same, for processes defined in separate programs.
inline CongruenceReport checkCongruence(const Program& a, const Name& left, const Program& b, const Name& right,
                                        std::uint64_t seed, std::size_t count,
                                        const std::vector<TestState>& tests = defaultQubitTests(),
                                        std::size_t maxStates = 20000) {
    return checkCongruence(mergePrograms(a, b), left, right, seed, count, tests, maxStates);
}

}  // namespace cqp
