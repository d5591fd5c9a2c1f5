#pragma once

// Linear (affine at termination) type checking. Qubits are resources:
//   - sending a qubit or measuring it consumes it;
//   - a gate action uses its targets without consuming them;
//   - passing a qubit to a call hands it over (consumes it);
//   - the two sides of `|` may not both mention an unconsumed qubit;
//   - a qubit still held at `0` is dropped silently.
// Bits and channels are unrestricted.
//
// Channel types of `(new c)` are inferred from their uses: the checker runs
// twice over every definition, the first pass only resolving those types.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cqp/syntax.hpp"
#include "cqp/type_expr.hpp"

namespace cqp {

enum class DiagnosticCategory {
    QubitDuplicated,
    QubitUsedAfterSend,
    UnboundName,
    ChannelArityMismatch,
    PayloadTypeMismatch,
    GateArityMismatch,
    MissingSignature,
    SignatureMismatch,
};

inline std::string toString(DiagnosticCategory c) {
    switch (c) {
        case DiagnosticCategory::QubitDuplicated: return "QubitDuplicated";
        case DiagnosticCategory::QubitUsedAfterSend: return "QubitUsedAfterSend";
        case DiagnosticCategory::UnboundName: return "UnboundName";
        case DiagnosticCategory::ChannelArityMismatch: return "ChannelArityMismatch";
        case DiagnosticCategory::PayloadTypeMismatch: return "PayloadTypeMismatch";
        case DiagnosticCategory::GateArityMismatch: return "GateArityMismatch";
        case DiagnosticCategory::MissingSignature: return "MissingSignature";
        case DiagnosticCategory::SignatureMismatch: return "SignatureMismatch";
    }
    return "Unknown";
}

struct Diagnostic {
    SourceLoc loc;
    DiagnosticCategory category;
    std::string message;
};

inline std::string formatDiagnostic(const std::string& file, const Diagnostic& d) {
    return file + ":" + std::to_string(d.loc.line) + ":" + std::to_string(d.loc.column) + " " +
           toString(d.category) + " " + d.message;
}

enum class Usage { Unused, Consumed };

struct TypeBinding {
    TypeExpr type;
    Usage usage = Usage::Unused;
    /// Index of an inferred channel type (for `(new c)`), -1 otherwise.
    int slot = -1;
};

using TypeEnv = std::map<Name, TypeBinding>;
using Signatures = std::map<Name, std::vector<TypeExpr>>;

namespace detail {

class LinearChecker {
public:
    explicit LinearChecker(const Signatures& sigs) : sigs_(sigs) {}

    void check(const TermPtr& t, TypeEnv& env) {
        std::visit([&](const auto& node) { visit(node, *t, env); }, t->node);
    }

    // Switches from the inference pass to the reporting pass.
    void beginReporting() {
        reporting_ = true;
        nextSlot_ = 0;
        diags_.clear();
    }

    std::vector<Diagnostic> takeDiagnostics() { return std::move(diags_); }

private:
    struct Flat {
        TypeExpr type;
        int slot = -1;
    };

    void report(SourceLoc loc, DiagnosticCategory c, std::string msg) {
        if (reporting_) diags_.push_back({loc, c, std::move(msg)});
    }

    TypeBinding* lookup(TypeEnv& env, const Name& n, SourceLoc loc) {
        auto it = env.find(n);
        if (it == env.end()) {
            report(loc, DiagnosticCategory::UnboundName, "name '" + n + "' is not bound");
            return nullptr;
        }
        return &it->second;
    }

    std::optional<std::vector<TypeExpr>> payloadOf(const TypeBinding& b) const {
        if (b.slot >= 0) return static_cast<std::size_t>(b.slot) < slots_.size() ? slots_[b.slot] : std::nullopt;
        return b.type.items;
    }

    // Resolves `b`'s payload to `payload` if still open; otherwise reports a mismatch.
    bool unifyChannel(const TypeBinding& b, const std::vector<TypeExpr>& payload) {
        if (b.slot >= 0) {
            auto& s = slots_[b.slot];
            if (!s) {
                s = payload;
                return true;
            }
            return *s == payload;
        }
        return b.type.items == payload;
    }

    TypeBinding* channel(TypeEnv& env, const Name& n, SourceLoc loc) {
        TypeBinding* b = lookup(env, n, loc);
        if (b && b->type.kind != TypeExpr::Kind::Channel) {
            report(loc, DiagnosticCategory::PayloadTypeMismatch, "'" + n + "' is not a channel");
            return nullptr;
        }
        return b;
    }

    // A qubit name used in a way that consumes it.
    void consume(TypeEnv& env, const Name& n, SourceLoc loc, const char* how) {
        TypeBinding* b = lookup(env, n, loc);
        if (!b) return;
        if (b->type.kind != TypeExpr::Kind::Qbit) {
            report(loc, DiagnosticCategory::PayloadTypeMismatch, "'" + n + "' is not a qubit");
            return;
        }
        if (b->usage == Usage::Consumed)
            report(loc, DiagnosticCategory::QubitUsedAfterSend, "qubit '" + n + "' " + how + " after it was consumed");
        b->usage = Usage::Consumed;
    }

    void flatten(const Expression& e, TypeEnv& env, SourceLoc loc, std::vector<Flat>& out,
                 std::vector<Name>& sentQubits) {
        if (auto* v = std::get_if<VarExpr>(&e.node)) {
            TypeBinding* b = lookup(env, v->name, loc);
            if (!b) {
                out.push_back({TypeExpr::bit()});
                return;
            }
            switch (b->type.kind) {
                case TypeExpr::Kind::Qbit:
                    if (std::find(sentQubits.begin(), sentQubits.end(), v->name) != sentQubits.end())
                        report(loc, DiagnosticCategory::QubitDuplicated,
                               "qubit '" + v->name + "' appears twice in one message");
                    sentQubits.push_back(v->name);
                    consume(env, v->name, loc, "sent");
                    out.push_back({TypeExpr::qbit()});
                    break;
                case TypeExpr::Kind::Word:
                    for (const auto& i : b->type.items) out.push_back({i});
                    break;
                case TypeExpr::Kind::Channel: out.push_back({b->type, b->slot}); break;
                case TypeExpr::Kind::Bit: out.push_back({TypeExpr::bit()}); break;
            }
        } else if (std::get_if<BitExpr>(&e.node)) {
            out.push_back({TypeExpr::bit()});
        } else if (auto* m = std::get_if<MeasureExpr>(&e.node)) {
            for (const auto& q : m->qubits) {
                consume(env, q, loc, "measured");
                out.push_back({TypeExpr::bit()});
            }
        } else {
            for (const auto& item : std::get<TupleExpr>(e.node).items) flatten(item, env, loc, out, sentQubits);
        }
    }

    bool matches(const Flat& actual, const TypeExpr& expected) {
        if (actual.type.kind != expected.kind) return false;
        if (expected.kind != TypeExpr::Kind::Channel) return true;
        TypeBinding b{actual.type, Usage::Unused, actual.slot};
        return unifyChannel(b, expected.items);
    }

    // Binds names for the scope of `cont`. Non-shadowing binders stay in the
    // environment afterwards so callers can see their final usage.
    template <typename F>
    void scoped(TypeEnv& env, const std::vector<std::pair<Name, TypeBinding>>& binds, F&& body) {
        std::vector<std::pair<Name, std::optional<TypeBinding>>> saved;
        for (const auto& [n, b] : binds) {
            auto it = env.find(n);
            saved.emplace_back(n, it == env.end() ? std::nullopt : std::optional<TypeBinding>(it->second));
            env[n] = b;
        }
        body();
        for (auto& [n, old] : saved)
            if (old) env[n] = *old;
    }

    void visit(const Nil&, const Term&, TypeEnv&) {}

    void visit(const Input& x, const Term& t, TypeEnv& env) {
        std::vector<std::pair<Name, TypeBinding>> binds;
        TypeBinding* ch = channel(env, x.channel, t.loc);
        auto payload = ch ? payloadOf(*ch) : std::nullopt;
        if (ch && !payload && reporting_)
            report(t.loc, DiagnosticCategory::PayloadTypeMismatch,
                   "payload type of channel '" + x.channel + "' cannot be determined");
        if (!payload) {
            for (const auto& b : x.binders) binds.push_back({b, {TypeExpr::bit()}});
        } else if (payload->size() == x.binders.size()) {
            for (std::size_t i = 0; i < x.binders.size(); ++i) binds.push_back({x.binders[i], {(*payload)[i]}});
        } else if (x.binders.size() == 1 &&
                   std::all_of(payload->begin(), payload->end(),
                               [](const TypeExpr& e) { return e.kind == TypeExpr::Kind::Bit; })) {
            binds.push_back({x.binders[0], {TypeExpr::word(payload->size())}});
        } else {
            report(t.loc, DiagnosticCategory::ChannelArityMismatch,
                   "channel '" + x.channel + "' carries " + std::to_string(payload->size()) + " values, input binds " +
                       std::to_string(x.binders.size()));
            for (const auto& b : x.binders) binds.push_back({b, {TypeExpr::bit()}});
        }
        // Channel payload entries with an inferred slot keep it.
        scoped(env, binds, [&] { check(x.cont, env); });
    }

    void visit(const Output& x, const Term& t, TypeEnv& env) {
        std::vector<Flat> flat;
        std::vector<Name> sent;
        for (const auto& e : x.payload) flatten(e, env, t.loc, flat, sent);
        if (TypeBinding* ch = channel(env, x.channel, t.loc)) {
            auto payload = payloadOf(*ch);
            if (!payload) {
                std::vector<TypeExpr> inferred;
                for (const auto& f : flat) inferred.push_back(f.slot >= 0 && slots_[f.slot]
                                                                  ? TypeExpr::channel(*slots_[f.slot])
                                                                  : f.type);
                unifyChannel(*ch, inferred);
            } else if (payload->size() != flat.size()) {
                report(t.loc, DiagnosticCategory::ChannelArityMismatch,
                       "channel '" + x.channel + "' carries " + std::to_string(payload->size()) +
                           " values, output sends " + std::to_string(flat.size()));
            } else {
                for (std::size_t i = 0; i < flat.size(); ++i)
                    if (!matches(flat[i], (*payload)[i]))
                        report(t.loc, DiagnosticCategory::PayloadTypeMismatch,
                               "value " + std::to_string(i + 1) + " sent on '" + x.channel + "' should be " +
                                   toString((*payload)[i]));
            }
        }
        check(x.cont, env);
    }

    void visit(const Action& x, const Term& t, TypeEnv& env) {
        const std::size_t arity = x.gate.name == "CNot" ? 2 : 1;
        if (x.targets.size() != arity)
            report(t.loc, DiagnosticCategory::GateArityMismatch,
                   "gate " + prettyPrint(x.gate) + " acts on " + std::to_string(arity) + " qubits, given " +
                       std::to_string(x.targets.size()));
        for (std::size_t i = 0; i < x.targets.size(); ++i) {
            const Name& q = x.targets[i];
            if (std::find(x.targets.begin(), x.targets.begin() + i, q) != x.targets.begin() + i) {
                report(t.loc, DiagnosticCategory::QubitDuplicated, "qubit '" + q + "' is targeted twice");
                continue;
            }
            TypeBinding* b = lookup(env, q, t.loc);
            if (!b) continue;
            if (b->type.kind != TypeExpr::Kind::Qbit)
                report(t.loc, DiagnosticCategory::PayloadTypeMismatch, "'" + q + "' is not a qubit");
            else if (b->usage == Usage::Consumed)
                report(t.loc, DiagnosticCategory::QubitUsedAfterSend,
                       "qubit '" + q + "' transformed after it was consumed");
        }
        if (x.gate.index) {
            TypeBinding* b = lookup(env, *x.gate.index, t.loc);
            if (b && !(b->type.kind == TypeExpr::Kind::Word && b->type.items.size() == 2))
                report(t.loc, DiagnosticCategory::PayloadTypeMismatch,
                       "sigma index '" + *x.gate.index + "' must be a two-bit value");
        }
        check(x.cont, env);
    }

    void visit(const QbitAlloc& x, const Term&, TypeEnv& env) {
        std::vector<std::pair<Name, TypeBinding>> binds;
        for (const auto& b : x.binders) binds.push_back({b, {TypeExpr::qbit()}});
        scoped(env, binds, [&] { check(x.cont, env); });
    }

    void visit(const NewChannel& x, const Term&, TypeEnv& env) {
        const int slot = nextSlot_++;
        if (static_cast<std::size_t>(slot) >= slots_.size()) slots_.resize(slot + 1);
        scoped(env, {{x.binder, {TypeExpr::channel({}), Usage::Unused, slot}}}, [&] { check(x.cont, env); });
    }

    void visit(const Parallel& x, const Term& t, TypeEnv& env) {
        const auto left = freeNames(x.left);
        const auto right = freeNames(x.right);
        for (const auto& [n, b] : env)
            if (b.type.kind == TypeExpr::Kind::Qbit && b.usage == Usage::Unused && left.contains(n) &&
                right.contains(n))
                report(t.loc, DiagnosticCategory::QubitDuplicated,
                       "qubit '" + n + "' is shared by both sides of a parallel composition");
        TypeEnv envL = env;
        TypeEnv envR = env;
        check(x.left, envL);
        check(x.right, envR);
        env = envL;
        for (auto& [n, b] : envR) {
            auto it = env.find(n);
            if (it == env.end()) env.emplace(n, b);
            else if (b.usage == Usage::Consumed) it->second.usage = Usage::Consumed;
        }
    }

    void visit(const Call& x, const Term& t, TypeEnv& env) {
        auto sig = sigs_.find(x.process);
        if (sig == sigs_.end()) return;  // reported at the definition
        if (sig->second.size() != x.args.size()) return;
        for (std::size_t i = 0; i < x.args.size(); ++i) {
            const Name& a = x.args[i];
            const TypeExpr& want = sig->second[i];
            if (want.kind == TypeExpr::Kind::Qbit) {
                if (std::find(x.args.begin(), x.args.begin() + i, a) != x.args.begin() + i) {
                    report(t.loc, DiagnosticCategory::QubitDuplicated,
                           "qubit '" + a + "' passed twice to " + x.process);
                    continue;
                }
                consume(env, a, t.loc, "passed");
                continue;
            }
            TypeBinding* b = lookup(env, a, t.loc);
            if (!b) continue;
            if (b->type.kind != want.kind || (want.kind == TypeExpr::Kind::Channel && !unifyChannel(*b, want.items)))
                report(t.loc, DiagnosticCategory::PayloadTypeMismatch,
                       "argument " + std::to_string(i + 1) + " of " + x.process + " should be " + toString(want));
        }
    }

    const Signatures& sigs_;
    std::vector<std::optional<std::vector<TypeExpr>>> slots_;
    int nextSlot_ = 0;
    bool reporting_ = false;
    std::vector<Diagnostic> diags_;
};

inline std::vector<Diagnostic> runChecker(const TermPtr& t, TypeEnv& env, const Signatures& sigs) {
    LinearChecker checker(sigs);
    TypeEnv scratch = env;
    checker.check(t, scratch);
    checker.beginReporting();
    checker.check(t, env);
    return checker.takeDiagnostics();
}

}  // namespace detail

/// Final usage map after checking `term` in `env`. Diagnostics, if wanted,
/// go to `diagnostics`.
inline TypeEnv inferUsage(const TermPtr& term, TypeEnv env, const Signatures& signatures = {},
                          std::vector<Diagnostic>* diagnostics = nullptr) {
    auto diags = detail::runChecker(term, env, signatures);
    if (diagnostics) *diagnostics = std::move(diags);
    return env;
}

/// Empty iff every definition is well typed under `signatures`.
inline std::vector<Diagnostic> typecheckProgram(const Program& program, const Signatures& signatures) {
    std::vector<Diagnostic> out;
    for (const auto& def : program.definitions) {
        auto sig = signatures.find(def.name);
        if (sig == signatures.end()) {
            out.push_back({def.loc, DiagnosticCategory::MissingSignature, "no signature for process '" + def.name + "'"});
            continue;
        }
        if (sig->second.size() != def.params.size()) {
            out.push_back({def.loc, DiagnosticCategory::SignatureMismatch,
                           "signature of '" + def.name + "' lists " + std::to_string(sig->second.size()) +
                               " types for " + std::to_string(def.params.size()) + " parameters"});
            continue;
        }
        TypeEnv env;
        for (std::size_t i = 0; i < def.params.size(); ++i) env[def.params[i]] = {sig->second[i]};
        auto diags = detail::runChecker(def.body, env, signatures);
        out.insert(out.end(), diags.begin(), diags.end());
    }
    return out;
}

inline std::vector<Diagnostic> typecheckProgram(const Program& program) {
    return typecheckProgram(program, program.signatures);
}

}  // namespace cqp
