#pragma once

// Small-step labelled semantics over configurations.
//
// A configuration is a quantum state plus a list of threads (the top-level
// parallel components). Runtime values live directly in the term as
// reserved names that no source program can write:
//   #q<k>   qubit k of the state vector
//   #v<k>   visible channel k (k-th external channel of the entry process)
//   #c<k>   private channel k
//   #b<bits> classical value, e.g. #b01
// so substitution is enough to bind values and a configuration carries no
// separate environment.

#include <algorithm>
#include <array>
#include <cctype>
#include <functional>
#include <istream>
#include <sstream>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cqp/error.hpp"
#include "cqp/qstate.hpp"
#include "cqp/syntax.hpp"
#include "cqp/type_expr.hpp"

namespace cqp {

struct TestState {
    std::string name;
    StateVector state;
};

/// |0>, |1>, H|0>, (|0> + i|1>)/sqrt(2)
inline std::vector<TestState> defaultQubitTests() {
    const double h = 1.0 / std::sqrt(2.0);
    return {
        {"zero", StateVector::basis(1, 0)},
        {"one", StateVector::basis(1, 1)},
        {"plus", StateVector::fromAmplitudes({h, h})},
        {"plus_i", StateVector::fromAmplitudes({h, Amplitude{0.0, h}})},
    };
}

inline std::vector<TestState> basisQubitTests() {
    return {{"zero", StateVector::basis(1, 0)}, {"one", StateVector::basis(1, 1)}};
}

/// Test states from lines `name re0 im0 re1 im1`; blank lines and lines
/// starting with '#' are skipped. Amplitudes must be normalized.
inline std::vector<TestState> parseQubitTests(std::istream& in) {
    std::vector<TestState> out;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        std::istringstream ls(line);
        std::string name;
        if (!(ls >> name) || name[0] == '#') continue;
        double v[4];
        for (double& x : v)
            if (!(ls >> x)) throw Error("line " + std::to_string(lineNo) + ": expected name and four numbers");
        std::string extra;
        if (ls >> extra) throw Error("line " + std::to_string(lineNo) + ": trailing text '" + extra + "'");
        try {
            out.push_back({name, StateVector::fromAmplitudes({{v[0], v[1]}, {v[2], v[3]}})});
        } catch (const std::invalid_argument& e) {
            throw Error("line " + std::to_string(lineNo) + ": " + e.what());
        }
    }
    if (out.empty()) throw Error("no test states");
    return out;
}

/// Everything a configuration needs that never changes during a run.
struct RunContext {
    Program program;
    std::vector<Name> visibleNames;
    /// Payload types of each visible channel, when a signature gives them.
    std::vector<std::optional<std::vector<TypeExpr>>> visibleTypes;
    std::vector<TestState> qubitTests = defaultQubitTests();
    std::size_t qubitCap = kDefaultQubitCap;
};

struct Configuration {
    StateVector qstate;
    std::vector<TermPtr> threads;
    std::size_t hiddenChannels = 0;  ///< private channel ids handed out so far
    std::shared_ptr<const RunContext> context;

    bool terminated() const { return threads.empty(); }
};

struct LabelValue {
    enum class Kind { Bit, Qubit, Channel };
    Kind kind = Kind::Bit;
    int bit = 0;
    DensityMatrix rho;  ///< reduced state of a transmitted qubit
    std::string tag;    ///< test-state name for injected qubits
    int channel = -1;   ///< visible index, or -1 for a private channel

    static LabelValue ofBit(int b) { return {Kind::Bit, b, {}, {}, -1}; }
};

struct Label {
    enum class Kind { Tau, Input, Output, Prob };
    Kind kind = Kind::Tau;
    int channel = -1;  ///< visible channel index for Input/Output
    std::string channelName;
    std::vector<LabelValue> values;
    double probability = 1.0;  ///< Prob only
    std::string outcome;       ///< Prob only: measured bits

    static Label tau() { return {}; }
    static Label prob(double p, std::string outcome = {}) {
        Label l;
        l.kind = Kind::Prob;
        l.probability = p;
        l.outcome = std::move(outcome);
        return l;
    }
};

/// Bloch vector (x, y, z) of a one-qubit density matrix.
inline std::array<double, 3> blochVector(const DensityMatrix& rho) {
    const Amplitude off = rho(0, 1);
    return {2.0 * off.real(), -2.0 * off.imag(), (rho(0, 0) - rho(1, 1)).real()};
}

inline std::string toString(const LabelValue& v) {
    switch (v.kind) {
        case LabelValue::Kind::Bit: return std::to_string(v.bit);
        case LabelValue::Kind::Channel: return v.channel >= 0 ? "chan" + std::to_string(v.channel) : "chan?";
        case LabelValue::Kind::Qubit: {
            if (!v.tag.empty()) return v.tag;
            if (v.rho.numQubits() != 1) return "qubit";
            auto b = blochVector(v.rho);
            return "qubit<" + detail::formatReal(b[0]) + "," + detail::formatReal(b[1]) + "," +
                   detail::formatReal(b[2]) + ">";
        }
    }
    return "?";
}

inline std::string toString(const Label& l) {
    auto values = [&] {
        std::string s;
        for (std::size_t i = 0; i < l.values.size(); ++i) s += (i ? "," : "") + toString(l.values[i]);
        return s;
    };
    switch (l.kind) {
        case Label::Kind::Tau: return "tau";
        case Label::Kind::Input: return l.channelName + "?[" + values() + "]";
        case Label::Kind::Output: return l.channelName + "![" + values() + "]";
        case Label::Kind::Prob:
            return "prob " + detail::formatReal(l.probability) + (l.outcome.empty() ? "" : " [" + l.outcome + "]");
    }
    return "?";
}

struct Branch {
    double probability = 1.0;
    std::string outcome;  ///< measured bits when this branch comes from a measurement
    Configuration config;
};

struct Transition {
    Label label;
    std::vector<Branch> branches;  ///< one branch unless a measurement was forced
};

// ---------------------------------------------------------------------------
// Runtime names

namespace runtime {

inline Name qubit(std::size_t id) { return "#q" + std::to_string(id); }
inline Name visible(std::size_t id) { return "#v" + std::to_string(id); }
inline Name hidden(std::size_t id) { return "#c" + std::to_string(id); }
inline Name bits(const std::string& b) { return "#b" + b; }

inline bool isRuntime(const Name& n) { return n.size() >= 2 && n[0] == '#'; }
inline bool isQubit(const Name& n) { return n.rfind("#q", 0) == 0; }
inline bool isVisible(const Name& n) { return n.rfind("#v", 0) == 0; }
inline bool isHidden(const Name& n) { return n.rfind("#c", 0) == 0; }
inline bool isBits(const Name& n) { return n.rfind("#b", 0) == 0; }
inline bool isChannel(const Name& n) { return isVisible(n) || isHidden(n); }
inline std::size_t id(const Name& n) { return std::stoul(n.substr(2)); }
inline std::string bitsOf(const Name& n) { return n.substr(2); }

}  // namespace runtime

/// A decoded runtime name.
struct RuntimeValue {
    enum class Kind { Qubit, VisibleChannel, HiddenChannel, Bits };
    Kind kind;
    std::size_t id = 0;
    std::string bits;
};

inline std::optional<RuntimeValue> decode(const Name& n) {
    if (runtime::isQubit(n)) return RuntimeValue{RuntimeValue::Kind::Qubit, runtime::id(n), {}};
    if (runtime::isVisible(n)) return RuntimeValue{RuntimeValue::Kind::VisibleChannel, runtime::id(n), {}};
    if (runtime::isHidden(n)) return RuntimeValue{RuntimeValue::Kind::HiddenChannel, runtime::id(n), {}};
    if (runtime::isBits(n)) return RuntimeValue{RuntimeValue::Kind::Bits, 0, runtime::bitsOf(n)};
    return std::nullopt;
}

/// Values bound in the configuration, keyed by their runtime name.
inline std::map<Name, RuntimeValue> bindings(const Configuration& c) {
    std::map<Name, RuntimeValue> out;
    for (const auto& t : c.threads)
        for (const auto& n : freeNames(t))
            if (auto v = decode(n)) out.emplace(n, *v);
    return out;
}

inline std::set<std::size_t> qubitsOf(const TermPtr& t) {
    std::set<std::size_t> out;
    for (const auto& n : freeNames(t))
        if (runtime::isQubit(n)) out.insert(runtime::id(n));
    return out;
}

/// Owning thread of every qubit still mentioned by some thread. Throws
/// OwnershipViolation when two threads mention the same qubit.
inline std::map<std::size_t, std::size_t> ownership(const Configuration& c) {
    std::map<std::size_t, std::size_t> owner;
    for (std::size_t i = 0; i < c.threads.size(); ++i)
        for (std::size_t q : qubitsOf(c.threads[i])) {
            auto [it, fresh] = owner.emplace(q, i);
            if (!fresh)
                throw OwnershipViolation("qubit #q" + std::to_string(q) + " is held by threads " +
                                         std::to_string(it->second) + " and " + std::to_string(i));
        }
    return owner;
}

inline std::string renderTerm(const Configuration& c) {
    if (c.threads.empty()) return "0";
    std::string s;
    for (std::size_t i = 0; i < c.threads.size(); ++i) s += (i ? " | " : "") + prettyPrint(c.threads[i]);
    return s;
}

namespace detail {

// Appends `t` to `out`, splitting top-level parallels and dropping nils.
inline void flattenInto(const TermPtr& t, std::vector<TermPtr>& out) {
    if (std::holds_alternative<Nil>(t->node)) return;
    if (auto* p = std::get_if<Parallel>(&t->node)) {
        flattenInto(p->left, out);
        flattenInto(p->right, out);
        return;
    }
    out.push_back(t);
}

// Copy of `c` where thread i is replaced by `replacement` (flattened in place).
inline Configuration replaceThread(const Configuration& c, std::size_t i, const TermPtr& replacement) {
    Configuration next = c;
    std::vector<TermPtr> threads;
    threads.reserve(c.threads.size() + 1);
    for (std::size_t k = 0; k < c.threads.size(); ++k) {
        if (k == i) flattenInto(replacement, threads);
        else threads.push_back(c.threads[k]);
    }
    next.threads = std::move(threads);
    return next;
}

inline std::size_t qubitIndex(const Name& n) {
    if (!runtime::isQubit(n)) throw RuntimeError("'" + n + "' is not a qubit");
    return runtime::id(n);
}

// One atomic component of a message.
struct Atom {
    enum class Kind { Qubit, Bit, Channel };
    Kind kind;
    Name name;  // runtime name: #q.., #b0/#b1, #v../#c..
};

inline void flattenPayload(const Expression& e, std::vector<Atom>& out) {
    if (auto* v = std::get_if<VarExpr>(&e.node)) {
        const Name& n = v->name;
        if (runtime::isQubit(n)) out.push_back({Atom::Kind::Qubit, n});
        else if (runtime::isChannel(n)) out.push_back({Atom::Kind::Channel, n});
        else if (runtime::isBits(n))
            for (char b : runtime::bitsOf(n)) out.push_back({Atom::Kind::Bit, runtime::bits(std::string(1, b))});
        else throw RuntimeError("unbound name '" + n + "' in message");
    } else if (auto* b = std::get_if<BitExpr>(&e.node)) {
        out.push_back({Atom::Kind::Bit, runtime::bits(b->value ? "1" : "0")});
    } else if (std::holds_alternative<MeasureExpr>(e.node)) {
        throw RuntimeError("unforced measurement in message");
    } else {
        for (const auto& i : std::get<TupleExpr>(e.node).items) flattenPayload(i, out);
    }
}

// Binder substitution for a received message.
inline NameMap bindMessage(const std::vector<Name>& binders, const std::vector<Atom>& msg) {
    NameMap m;
    if (binders.size() == msg.size()) {
        for (std::size_t i = 0; i < msg.size(); ++i) m[binders[i]] = msg[i].name;
        return m;
    }
    if (binders.size() == 1 && msg.size() > 1 &&
        std::all_of(msg.begin(), msg.end(), [](const Atom& a) { return a.kind == Atom::Kind::Bit; })) {
        std::string word;
        for (const auto& a : msg) word += runtime::bitsOf(a.name);
        m[binders[0]] = runtime::bits(word);
        return m;
    }
    throw RuntimeError("message of " + std::to_string(msg.size()) + " values cannot bind " +
                       std::to_string(binders.size()) + " names");
}

// Replaces the first measurement inside `payload` by `value`; returns the
// measured names through `measured`.
inline bool replaceFirstMeasure(std::vector<Expression>& payload, const Name& value, std::vector<Name>* measured) {
    std::function<bool(Expression&)> walk = [&](Expression& e) -> bool {
        if (auto* m = std::get_if<MeasureExpr>(&e.node)) {
            if (measured) *measured = m->qubits;
            e = term::var(value);
            return true;
        }
        if (auto* t = std::get_if<TupleExpr>(&e.node))
            for (auto& i : t->items)
                if (walk(i)) return true;
        return false;
    };
    for (auto& e : payload)
        if (walk(e)) return true;
    return false;
}

inline const MeasureExpr* firstMeasure(const std::vector<Expression>& payload) {
    std::function<const MeasureExpr*(const Expression&)> walk = [&](const Expression& e) -> const MeasureExpr* {
        if (auto* m = std::get_if<MeasureExpr>(&e.node)) return m;
        if (auto* t = std::get_if<TupleExpr>(&e.node))
            for (const auto& i : t->items)
                if (auto* r = walk(i)) return r;
        return nullptr;
    };
    for (const auto& e : payload)
        if (auto* m = walk(e)) return m;
    return nullptr;
}

inline void requireReleased(const TermPtr& rest, const std::vector<Atom>& msg, const char* what) {
    const auto still = qubitsOf(rest);
    std::set<std::size_t> sent;
    for (const auto& a : msg) {
        if (a.kind != Atom::Kind::Qubit) continue;
        const std::size_t q = runtime::id(a.name);
        if (!sent.insert(q).second) throw OwnershipViolation("qubit " + a.name + " sent twice in one message");
        if (still.contains(q)) throw OwnershipViolation("qubit " + a.name + " used after " + what);
    }
}

inline LabelValue labelValue(const Atom& a, const Configuration& c) {
    switch (a.kind) {
        case Atom::Kind::Bit: return LabelValue::ofBit(runtime::bitsOf(a.name) == "1" ? 1 : 0);
        case Atom::Kind::Channel: {
            LabelValue v;
            v.kind = LabelValue::Kind::Channel;
            v.channel = runtime::isVisible(a.name) ? static_cast<int>(runtime::id(a.name)) : -1;
            return v;
        }
        case Atom::Kind::Qubit: {
            LabelValue v;
            v.kind = LabelValue::Kind::Qubit;
            v.rho = reducedDensityMatrix(c.qstate, {runtime::id(a.name)});
            return v;
        }
    }
    return {};
}

inline std::string bitString(std::size_t value, std::size_t width) {
    std::string s(width, '0');
    for (std::size_t j = 0; j < width; ++j)
        if ((value >> (width - 1 - j)) & 1u) s[j] = '1';
    return s;
}

// All messages the environment may inject on visible channel `ch` for an
// input binding `arity` names.
struct Injection {
    std::vector<LabelValue> values;
    std::vector<const TestState*> qubits;  // per Qbit component, in order
    std::vector<Atom::Kind> kinds;
    std::vector<int> bits;
};

inline std::vector<Injection> injections(const RunContext& ctx, std::size_t ch, std::size_t arity) {
    std::vector<TypeExpr> components;
    if (ch < ctx.visibleTypes.size() && ctx.visibleTypes[ch]) components = *ctx.visibleTypes[ch];
    else components.assign(arity, TypeExpr::qbit());

    std::vector<Injection> out{Injection{}};
    for (const auto& t : components) {
        std::vector<Injection> grown;
        for (const auto& partial : out) {
            if (t.kind == TypeExpr::Kind::Qbit) {
                for (const auto& ts : ctx.qubitTests) {
                    Injection next = partial;
                    LabelValue v;
                    v.kind = LabelValue::Kind::Qubit;
                    v.rho = DensityMatrix::fromPure(ts.state);
                    v.tag = ts.name;
                    next.values.push_back(std::move(v));
                    next.qubits.push_back(&ts);
                    next.kinds.push_back(Atom::Kind::Qubit);
                    next.bits.push_back(0);
                    grown.push_back(std::move(next));
                }
            } else if (t.kind == TypeExpr::Kind::Bit) {
                for (int b : {0, 1}) {
                    Injection next = partial;
                    next.values.push_back(LabelValue::ofBit(b));
                    next.kinds.push_back(Atom::Kind::Bit);
                    next.bits.push_back(b);
                    grown.push_back(std::move(next));
                }
            } else {
                throw RuntimeError("the environment cannot send channels on '" + ctx.visibleNames[ch] + "'");
            }
        }
        out = std::move(grown);
    }
    return out;
}

inline void stepThread(const Configuration& c, std::size_t i, std::vector<Transition>& out) {
    const TermPtr& t = c.threads[i];
    const RunContext& ctx = *c.context;

    if (auto* x = std::get_if<Action>(&t->node)) {
        std::vector<std::size_t> targets;
        for (const auto& n : x->targets) targets.push_back(qubitIndex(n));
        std::string gateName = x->gate.name;
        if (x->gate.index) {
            const Name& idx = *x->gate.index;
            if (!runtime::isBits(idx) || runtime::bitsOf(idx).size() != 2)
                throw RuntimeError("sigma index '" + idx + "' is not a two-bit value");
            gateName = "sigma" + runtime::bitsOf(idx);
        }
        Configuration next = replaceThread(c, i, x->cont);
        try {
            next.qstate = applyGate(c.qstate, standardGate(gateName), targets);
        } catch (const std::invalid_argument& e) {
            throw RuntimeError(e.what());
        }
        out.push_back({Label::tau(), {{1.0, {}, std::move(next)}}});
    } else if (auto* x = std::get_if<QbitAlloc>(&t->node)) {
        NameMap m;
        for (std::size_t k = 0; k < x->binders.size(); ++k) m[x->binders[k]] = runtime::qubit(c.qstate.numQubits() + k);
        Configuration next = replaceThread(c, i, substitute(x->cont, m));
        next.qstate = allocQubits(c.qstate, x->binders.size(), ctx.qubitCap);
        out.push_back({Label::tau(), {{1.0, {}, std::move(next)}}});
    } else if (auto* x = std::get_if<NewChannel>(&t->node)) {
        Configuration next = replaceThread(c, i, substitute(x->cont, {{x->binder, runtime::hidden(c.hiddenChannels)}}));
        next.hiddenChannels = c.hiddenChannels + 1;
        out.push_back({Label::tau(), {{1.0, {}, std::move(next)}}});
    } else if (auto* x = std::get_if<Call>(&t->node)) {
        const ProcessDef* d = ctx.program.find(x->process);
        if (!d) throw RuntimeError("unknown process '" + x->process + "'");
        if (d->params.size() != x->args.size()) throw RuntimeError("arity mismatch calling '" + x->process + "'");
        NameMap m;
        for (std::size_t k = 0; k < d->params.size(); ++k) m[d->params[k]] = x->args[k];
        out.push_back({Label::tau(), {{1.0, {}, replaceThread(c, i, substitute(d->body, m))}}});
    } else if (auto* x = std::get_if<Output>(&t->node)) {
        if (const MeasureExpr* me = firstMeasure(x->payload)) {
            std::vector<std::size_t> targets;
            for (const auto& n : me->qubits) targets.push_back(qubitIndex(n));
            Transition tr{Label::tau(), {}};
            for (auto& o : measure(c.qstate, targets)) {
                auto payload = x->payload;
                replaceFirstMeasure(payload, runtime::bits(o.result), nullptr);
                TermPtr forced = term::output(x->channel, std::move(payload), x->cont, t->loc);
                const auto still = qubitsOf(forced);
                for (std::size_t q : targets)
                    if (still.contains(q))
                        throw OwnershipViolation("qubit #q" + std::to_string(q) + " used after measurement");
                Configuration next = replaceThread(c, i, forced);
                next.qstate = std::move(o.postState);
                tr.branches.push_back({o.probability, o.result, std::move(next)});
            }
            out.push_back(std::move(tr));
            return;
        }
        std::vector<Atom> msg;
        for (const auto& e : x->payload) flattenPayload(e, msg);
        if (!runtime::isChannel(x->channel)) throw RuntimeError("output on unbound channel '" + x->channel + "'");

        // Internal handshakes with every waiting receiver.
        for (std::size_t j = 0; j < c.threads.size(); ++j) {
            if (j == i) continue;
            auto* in = std::get_if<Input>(&c.threads[j]->node);
            if (!in || in->channel != x->channel) continue;
            requireReleased(x->cont, msg, "send");
            Configuration next = c;
            std::vector<TermPtr> threads;
            for (std::size_t k = 0; k < c.threads.size(); ++k) {
                if (k == i) flattenInto(x->cont, threads);
                else if (k == j) flattenInto(substitute(in->cont, bindMessage(in->binders, msg)), threads);
                else threads.push_back(c.threads[k]);
            }
            next.threads = std::move(threads);
            out.push_back({Label::tau(), {{1.0, {}, std::move(next)}}});
        }

        if (runtime::isVisible(x->channel)) {
            requireReleased(x->cont, msg, "send");
            Label l;
            l.kind = Label::Kind::Output;
            l.channel = static_cast<int>(runtime::id(x->channel));
            l.channelName = ctx.visibleNames.at(l.channel);
            for (const auto& a : msg) l.values.push_back(labelValue(a, c));
            out.push_back({std::move(l), {{1.0, {}, replaceThread(c, i, x->cont)}}});
        }
    } else if (auto* x = std::get_if<Input>(&t->node)) {
        if (!runtime::isChannel(x->channel)) throw RuntimeError("input on unbound channel '" + x->channel + "'");
        if (!runtime::isVisible(x->channel)) return;  // internal receives are driven by the sender
        const std::size_t ch = runtime::id(x->channel);
        for (const auto& inj : injections(ctx, ch, x->binders.size())) {
            Configuration next = c;
            std::vector<Atom> msg;
            std::size_t qi = 0;
            for (std::size_t k = 0; k < inj.kinds.size(); ++k) {
                if (inj.kinds[k] == Atom::Kind::Qubit) {
                    msg.push_back({Atom::Kind::Qubit, runtime::qubit(next.qstate.numQubits())});
                    next.qstate = appendState(next.qstate, inj.qubits[qi++]->state, ctx.qubitCap);
                } else {
                    msg.push_back({Atom::Kind::Bit, runtime::bits(inj.bits[k] ? "1" : "0")});
                }
            }
            next = replaceThread(next, i, substitute(x->cont, bindMessage(x->binders, msg)));
            Label l;
            l.kind = Label::Kind::Input;
            l.channel = static_cast<int>(ch);
            l.channelName = ctx.visibleNames.at(ch);
            l.values = inj.values;
            out.push_back({std::move(l), {{1.0, {}, std::move(next)}}});
        }
    }
}

}  // namespace detail

/// Configuration running `entry` with its arguments bound to visible
/// channels, numbered in the order of `externalChannels`.
inline Configuration initialConfiguration(const Program& program, const Call& entry,
                                          const std::vector<Name>& externalChannels,
                                          std::vector<TestState> qubitTests = defaultQubitTests(),
                                          std::size_t qubitCap = kDefaultQubitCap) {
    const ProcessDef* d = program.find(entry.process);
    if (!d) throw Error("unknown process '" + entry.process + "'");
    if (d->params.size() != entry.args.size())
        throw Error("process '" + entry.process + "' expects " + std::to_string(d->params.size()) +
                    " arguments, got " + std::to_string(entry.args.size()));

    auto ctx = std::make_shared<RunContext>();
    ctx->program = program;
    ctx->visibleNames = externalChannels;
    ctx->visibleTypes.resize(externalChannels.size());
    ctx->qubitTests = std::move(qubitTests);
    ctx->qubitCap = qubitCap;

    auto sig = program.signatures.find(d->name);
    NameMap m;
    for (std::size_t k = 0; k < d->params.size(); ++k) {
        auto it = std::find(externalChannels.begin(), externalChannels.end(), entry.args[k]);
        if (it == externalChannels.end())
            throw Error("argument '" + entry.args[k] + "' of the entry process is not an external channel");
        const auto ch = static_cast<std::size_t>(it - externalChannels.begin());
        m[d->params[k]] = runtime::visible(ch);
        if (sig != program.signatures.end() && k < sig->second.size()) {
            const TypeExpr& ty = sig->second[k];
            if (ty.kind != TypeExpr::Kind::Channel)
                throw Error("parameter '" + d->params[k] + "' of the entry process is not a channel");
            ctx->visibleTypes[ch] = ty.items;
        }
    }

    Configuration c;
    c.context = std::move(ctx);
    detail::flattenInto(substitute(d->body, m), c.threads);
    return c;
}

/// Entry from the program's `main`, or its last definition, with the entry's
/// arguments (or parameters) as external channels.
inline Configuration initialConfiguration(const Program& program, const std::optional<Name>& entryName = std::nullopt,
                                          std::vector<TestState> qubitTests = defaultQubitTests(),
                                          std::size_t qubitCap = kDefaultQubitCap) {
    Call entry;
    if (entryName) {
        const ProcessDef* d = program.find(*entryName);
        if (!d) throw Error("unknown process '" + *entryName + "'");
        entry = {d->name, d->params};
    } else if (program.main) {
        entry = *program.main;
    } else if (!program.definitions.empty()) {
        entry = {program.definitions.back().name, program.definitions.back().params};
    } else {
        throw Error("program has no definitions");
    }
    return initialConfiguration(program, entry, entry.args, std::move(qubitTests), qubitCap);
}

/// Every enabled transition, in a fixed order: threads in order; for each
/// thread its internal handshakes first, then its external action.
inline std::vector<Transition> step(const Configuration& config) {
    ownership(config);
    std::vector<Transition> out;
    for (std::size_t i = 0; i < config.threads.size(); ++i) detail::stepThread(config, i, out);
    return out;
}

// ---------------------------------------------------------------------------
// Canonical form for deduplication

namespace detail {

inline TermPtr normalizeBinders(const TermPtr& t, int& counter) {
    auto fresh = [&] { return "_" + std::to_string(counter++); };
    auto rebind = [&](const std::vector<Name>& bs, const TermPtr& cont, std::vector<Name>& outBinders) {
        NameMap m;
        for (const auto& b : bs) {
            outBinders.push_back(fresh());
            m[b] = outBinders.back();
        }
        return normalizeBinders(substitute(cont, m), counter);
    };
    return std::visit(
        [&](const auto& x) -> TermPtr {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Nil> || std::is_same_v<T, Call>) {
                return t;
            } else if constexpr (std::is_same_v<T, Input>) {
                std::vector<Name> bs;
                auto cont = rebind(x.binders, x.cont, bs);
                return term::input(x.channel, std::move(bs), std::move(cont), t->loc);
            } else if constexpr (std::is_same_v<T, QbitAlloc>) {
                std::vector<Name> bs;
                auto cont = rebind(x.binders, x.cont, bs);
                return term::qbit(std::move(bs), std::move(cont), t->loc);
            } else if constexpr (std::is_same_v<T, NewChannel>) {
                std::vector<Name> bs;
                auto cont = rebind({x.binder}, x.cont, bs);
                return term::newChannel(bs.front(), std::move(cont), t->loc);
            } else if constexpr (std::is_same_v<T, Output>) {
                return term::output(x.channel, x.payload, normalizeBinders(x.cont, counter), t->loc);
            } else if constexpr (std::is_same_v<T, Action>) {
                return term::action(x.targets, x.gate, normalizeBinders(x.cont, counter), t->loc);
            } else {
                auto l = normalizeBinders(x.left, counter);
                return term::par(std::move(l), normalizeBinders(x.right, counter), t->loc);
            }
        },
        t->node);
}

// `text` with the numbers after #q and #c erased.
inline std::string shapeOf(const std::string& text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        out += text[i];
        if (text[i] == '#' && i + 1 < text.size() && (text[i + 1] == 'q' || text[i + 1] == 'c')) {
            out += text[++i];
            while (i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) ++i;
        }
    }
    return out;
}

// Runtime qubit/private-channel names in textual order of first appearance.
inline void scanRuntimeNames(const std::string& text, std::vector<Name>& qubits, std::vector<Name>& channels) {
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if (text[i] != '#' || (text[i + 1] != 'q' && text[i + 1] != 'c')) continue;
        std::size_t j = i + 2;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        Name n = text.substr(i, j - i);
        auto& list = text[i + 1] == 'q' ? qubits : channels;
        if (std::find(list.begin(), list.end(), n) == list.end()) list.push_back(n);
        i = j - 1;
    }
}

}  // namespace detail

/// Canonical representative: binders renamed positionally, threads sorted,
/// qubits and private channels renumbered by first appearance, global phase
/// removed. `key` identifies the term part exactly; states still need an
/// up-to-phase comparison.
struct CanonicalForm {
    Configuration config;
    std::string key;
};

inline CanonicalForm canonicalize(const Configuration& c) {
    struct Item {
        TermPtr term;
        std::string text;
        std::string shape;
    };
    std::vector<Item> items;
    for (const auto& t : c.threads) {
        int counter = 0;
        TermPtr n = detail::normalizeBinders(t, counter);
        std::string text = prettyPrint(n);
        std::string shape = detail::shapeOf(text);
        items.push_back({std::move(n), std::move(text), std::move(shape)});
    }
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.shape < b.shape; });

    std::vector<Name> qubits, channels;
    for (const auto& it : items) detail::scanRuntimeNames(it.text, qubits, channels);

    NameMap rename;
    std::vector<std::size_t> order;
    std::vector<bool> seen(c.qstate.numQubits(), false);
    for (const auto& q : qubits) {
        const std::size_t id = runtime::id(q);
        if (id >= seen.size()) throw RuntimeError("qubit " + q + " does not exist");
        rename[q] = runtime::qubit(order.size());
        order.push_back(id);
        seen[id] = true;
    }
    for (std::size_t id = 0; id < seen.size(); ++id)
        if (!seen[id]) order.push_back(id);
    for (std::size_t k = 0; k < channels.size(); ++k) rename[channels[k]] = runtime::hidden(k);

    CanonicalForm out;
    out.config.context = c.context;
    out.config.hiddenChannels = channels.size();
    out.config.qstate = removeGlobalPhase(permuteQubits(c.qstate, order));
    for (const auto& it : items) {
        out.config.threads.push_back(substitute(it.term, rename));
        out.key += (out.key.empty() ? "" : " | ") + prettyPrint(out.config.threads.back());
    }
    out.key += " #n=" + std::to_string(c.qstate.numQubits());
    return out;
}

// ---------------------------------------------------------------------------
// Sampled execution

struct TraceStep {
    Label label;
    Configuration config;  ///< configuration after the step
};

/// One run: the scheduler always takes the first enabled transition (and the
/// first injectable message); measurements are sampled from a 64-bit
/// Mersenne Twister seeded with `seed`.
inline std::vector<TraceStep> runSampled(const Configuration& start, std::uint64_t seed, std::size_t maxSteps = 100000) {
    std::mt19937_64 rng(seed);
    std::vector<TraceStep> trace;
    Configuration current = start;
    for (std::size_t n = 0; n < maxSteps; ++n) {
        auto transitions = step(current);
        if (transitions.empty()) return trace;
        Transition& tr = transitions.front();
        if (tr.branches.size() == 1 && tr.label.kind != Label::Kind::Tau) {
            current = tr.branches.front().config;
            trace.push_back({tr.label, current});
            continue;
        }
        if (tr.branches.size() == 1) {
            current = tr.branches.front().config;
            trace.push_back({Label::tau(), current});
            continue;
        }
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        double acc = 0.0;
        std::size_t pick = tr.branches.size() - 1;
        for (std::size_t k = 0; k < tr.branches.size(); ++k) {
            acc += tr.branches[k].probability;
            if (u < acc) {
                pick = k;
                break;
            }
        }
        Branch& b = tr.branches[pick];
        current = b.config;
        trace.push_back({Label::prob(b.probability, b.outcome), current});
    }
    throw RuntimeError("run exceeded " + std::to_string(maxSteps) + " steps");
}

}  // namespace cqp
