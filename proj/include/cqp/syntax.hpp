#pragma once

// Abstract syntax of the process language, its printer, and the name
// utilities every later stage relies on (free names, capture-avoiding
// substitution, alpha-equivalence).
//
// Terms are immutable and shared: a TermPtr may appear in many
// configurations at once.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cqp/type_expr.hpp"

namespace cqp {

using Name = std::string;
using NameMap = std::map<Name, Name>;

struct SourceLoc {
    int line = 0;
    int column = 0;
};

struct Expression;

struct VarExpr {
    Name name;
    bool operator==(const VarExpr&) const = default;
};
struct BitExpr {
    int value = 0;
    bool operator==(const BitExpr&) const = default;
};
struct MeasureExpr {
    std::vector<Name> qubits;
    bool operator==(const MeasureExpr&) const = default;
};
struct TupleExpr {
    std::vector<Expression> items;
    bool operator==(const TupleExpr&) const;
};

struct Expression {
    std::variant<VarExpr, BitExpr, MeasureExpr, TupleExpr> node;
    bool operator==(const Expression&) const = default;
};

inline bool TupleExpr::operator==(const TupleExpr& o) const { return items == o.items; }

/// Gate in an action: a fixed name, or `sigma[r]` selected by a classical name.
struct GateRef {
    Name name;
    std::optional<Name> index;
    bool operator==(const GateRef&) const = default;
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Nil {};
struct Input {
    Name channel;
    std::vector<Name> binders;
    TermPtr cont;
};
struct Output {
    Name channel;
    std::vector<Expression> payload;
    TermPtr cont;
};
struct Action {
    std::vector<Name> targets;
    GateRef gate;
    TermPtr cont;
};
struct QbitAlloc {
    std::vector<Name> binders;
    TermPtr cont;
};
struct NewChannel {
    Name binder;
    TermPtr cont;
};
struct Parallel {
    TermPtr left;
    TermPtr right;
};
struct Call {
    Name process;
    std::vector<Name> args;
    bool operator==(const Call&) const = default;
};

struct Term {
    std::variant<Nil, Input, Output, Action, QbitAlloc, NewChannel, Parallel, Call> node;
    SourceLoc loc;
};

struct ProcessDef {
    Name name;
    std::vector<Name> params;
    TermPtr body;
    SourceLoc loc;
};

struct Program {
    std::vector<ProcessDef> definitions;
    std::optional<Call> main;
    /// Sidecar signatures (`//: P : T, ...`), keyed by process name.
    std::map<Name, std::vector<TypeExpr>> signatures;

    const ProcessDef* find(const Name& name) const {
        for (const auto& d : definitions)
            if (d.name == name) return &d;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Builders

namespace term {

inline TermPtr make(decltype(Term::node) node, SourceLoc loc = {}) {
    return std::make_shared<const Term>(Term{std::move(node), loc});
}
inline TermPtr nil(SourceLoc loc = {}) { return make(Nil{}, loc); }
inline TermPtr input(Name ch, std::vector<Name> binders, TermPtr cont, SourceLoc loc = {}) {
    return make(Input{std::move(ch), std::move(binders), std::move(cont)}, loc);
}
inline TermPtr output(Name ch, std::vector<Expression> payload, TermPtr cont, SourceLoc loc = {}) {
    return make(Output{std::move(ch), std::move(payload), std::move(cont)}, loc);
}
inline TermPtr action(std::vector<Name> targets, GateRef gate, TermPtr cont, SourceLoc loc = {}) {
    return make(Action{std::move(targets), std::move(gate), std::move(cont)}, loc);
}
inline TermPtr qbit(std::vector<Name> binders, TermPtr cont, SourceLoc loc = {}) {
    return make(QbitAlloc{std::move(binders), std::move(cont)}, loc);
}
inline TermPtr newChannel(Name binder, TermPtr cont, SourceLoc loc = {}) {
    return make(NewChannel{std::move(binder), std::move(cont)}, loc);
}
inline TermPtr par(TermPtr l, TermPtr r, SourceLoc loc = {}) {
    return make(Parallel{std::move(l), std::move(r)}, loc);
}
inline TermPtr call(Name process, std::vector<Name> args, SourceLoc loc = {}) {
    return make(Call{std::move(process), std::move(args)}, loc);
}

inline Expression var(Name n) { return {VarExpr{std::move(n)}}; }
inline Expression bit(int v) { return {BitExpr{v}}; }
inline Expression measureOf(std::vector<Name> qs) { return {MeasureExpr{std::move(qs)}}; }
inline Expression tuple(std::vector<Expression> items) { return {TupleExpr{std::move(items)}}; }

inline GateRef gate(Name name) { return {std::move(name), std::nullopt}; }
inline GateRef sigma(Name index) { return {"sigma", std::move(index)}; }

}  // namespace term

// ---------------------------------------------------------------------------
// Structural equality (source locations ignored)

inline bool structurallyEqual(const TermPtr& a, const TermPtr& b);

namespace detail {

struct TermEq {
    const Term& other;

    bool operator()(const Nil&) const { return true; }
    bool operator()(const Input& x) const {
        auto& y = std::get<Input>(other.node);
        return x.channel == y.channel && x.binders == y.binders && structurallyEqual(x.cont, y.cont);
    }
    bool operator()(const Output& x) const {
        auto& y = std::get<Output>(other.node);
        return x.channel == y.channel && x.payload == y.payload && structurallyEqual(x.cont, y.cont);
    }
    bool operator()(const Action& x) const {
        auto& y = std::get<Action>(other.node);
        return x.targets == y.targets && x.gate == y.gate && structurallyEqual(x.cont, y.cont);
    }
    bool operator()(const QbitAlloc& x) const {
        auto& y = std::get<QbitAlloc>(other.node);
        return x.binders == y.binders && structurallyEqual(x.cont, y.cont);
    }
    bool operator()(const NewChannel& x) const {
        auto& y = std::get<NewChannel>(other.node);
        return x.binder == y.binder && structurallyEqual(x.cont, y.cont);
    }
    bool operator()(const Parallel& x) const {
        auto& y = std::get<Parallel>(other.node);
        return structurallyEqual(x.left, y.left) && structurallyEqual(x.right, y.right);
    }
    bool operator()(const Call& x) const { return x == std::get<Call>(other.node); }
};

}  // namespace detail

inline bool structurallyEqual(const TermPtr& a, const TermPtr& b) {
    if (a == b) return true;
    if (!a || !b || a->node.index() != b->node.index()) return false;
    return std::visit(detail::TermEq{*b}, a->node);
}

inline bool structurallyEqual(const ProcessDef& a, const ProcessDef& b) {
    return a.name == b.name && a.params == b.params && structurallyEqual(a.body, b.body);
}

inline bool structurallyEqual(const Program& a, const Program& b) {
    if (a.definitions.size() != b.definitions.size() || a.main != b.main || a.signatures != b.signatures)
        return false;
    for (std::size_t i = 0; i < a.definitions.size(); ++i)
        if (!structurallyEqual(a.definitions[i], b.definitions[i])) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Printing

inline std::string joinNames(const std::vector<Name>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
    return s;
}

inline std::string prettyPrint(const Expression& e) {
    struct V {
        std::string operator()(const VarExpr& v) const { return v.name; }
        std::string operator()(const BitExpr& b) const { return std::to_string(b.value); }
        std::string operator()(const MeasureExpr& m) const { return "measure " + joinNames(m.qubits); }
        std::string operator()(const TupleExpr& t) const {
            std::string s = "(";
            for (std::size_t i = 0; i < t.items.size(); ++i) s += (i ? ", " : "") + prettyPrint(t.items[i]);
            return s + ")";
        }
    };
    return std::visit(V{}, e.node);
}

inline std::string prettyPrint(const GateRef& g) { return g.index ? g.name + "[" + *g.index + "]" : g.name; }

inline std::string prettyPrint(const TermPtr& t) {
    struct V {
        std::string operator()(const Nil&) const { return "0"; }
        std::string operator()(const Input& x) const {
            return x.channel + "?[" + joinNames(x.binders) + "] . " + prettyPrint(x.cont);
        }
        std::string operator()(const Output& x) const {
            std::string s = x.channel + "![";
            for (std::size_t i = 0; i < x.payload.size(); ++i) s += (i ? ", " : "") + prettyPrint(x.payload[i]);
            return s + "] . " + prettyPrint(x.cont);
        }
        std::string operator()(const Action& x) const {
            return "{" + joinNames(x.targets) + " *= " + prettyPrint(x.gate) + "} . " + prettyPrint(x.cont);
        }
        std::string operator()(const QbitAlloc& x) const {
            return "(qbit " + joinNames(x.binders) + ") " + prettyPrint(x.cont);
        }
        std::string operator()(const NewChannel& x) const { return "(new " + x.binder + ") " + prettyPrint(x.cont); }
        std::string operator()(const Parallel& x) const {
            return "(" + prettyPrint(x.left) + " | " + prettyPrint(x.right) + ")";
        }
        std::string operator()(const Call& x) const { return x.process + "(" + joinNames(x.args) + ")"; }
    };
    return std::visit(V{}, t->node);
}

inline std::string prettyPrint(const ProcessDef& d) {
    return d.name + "(" + joinNames(d.params) + ") = " + prettyPrint(d.body);
}

/// Whole program: signatures as sidecar comments, one definition per line.
inline std::string prettyPrint(const Program& p) {
    std::string out;
    for (const auto& d : p.definitions) {
        if (auto it = p.signatures.find(d.name); it != p.signatures.end()) {
            out += "//: " + d.name + " :";
            for (std::size_t i = 0; i < it->second.size(); ++i) out += (i ? ", " : " ") + toString(it->second[i]);
            out += "\n";
        }
        out += prettyPrint(d) + "\n";
    }
    if (p.main) out += "main " + p.main->process + "(" + joinNames(p.main->args) + ")\n";
    return out;
}

// ---------------------------------------------------------------------------
// Names

inline void collectNames(const Expression& e, std::set<Name>& out) {
    struct V {
        std::set<Name>& out;
        void operator()(const VarExpr& v) const { out.insert(v.name); }
        void operator()(const BitExpr&) const {}
        void operator()(const MeasureExpr& m) const { out.insert(m.qubits.begin(), m.qubits.end()); }
        void operator()(const TupleExpr& t) const {
            for (const auto& i : t.items) collectNames(i, out);
        }
    };
    std::visit(V{out}, e.node);
}

/// Free names; process names in calls are a separate namespace and excluded.
inline std::set<Name> freeNames(const TermPtr& t) {
    struct V {
        std::set<Name> operator()(const Nil&) const { return {}; }
        std::set<Name> operator()(const Input& x) const {
            auto s = freeNames(x.cont);
            for (const auto& b : x.binders) s.erase(b);
            s.insert(x.channel);
            return s;
        }
        std::set<Name> operator()(const Output& x) const {
            auto s = freeNames(x.cont);
            s.insert(x.channel);
            for (const auto& e : x.payload) collectNames(e, s);
            return s;
        }
        std::set<Name> operator()(const Action& x) const {
            auto s = freeNames(x.cont);
            s.insert(x.targets.begin(), x.targets.end());
            if (x.gate.index) s.insert(*x.gate.index);
            return s;
        }
        std::set<Name> operator()(const QbitAlloc& x) const {
            auto s = freeNames(x.cont);
            for (const auto& b : x.binders) s.erase(b);
            return s;
        }
        std::set<Name> operator()(const NewChannel& x) const {
            auto s = freeNames(x.cont);
            s.erase(x.binder);
            return s;
        }
        std::set<Name> operator()(const Parallel& x) const {
            auto s = freeNames(x.left);
            auto r = freeNames(x.right);
            s.insert(r.begin(), r.end());
            return s;
        }
        std::set<Name> operator()(const Call& x) const { return {x.args.begin(), x.args.end()}; }
    };
    return std::visit(V{}, t->node);
}

namespace detail {

inline Name mapName(const NameMap& m, const Name& n) {
    auto it = m.find(n);
    return it == m.end() ? n : it->second;
}

inline Expression mapExpression(const Expression& e, const NameMap& m) {
    struct V {
        const NameMap& m;
        Expression operator()(const VarExpr& v) const { return term::var(mapName(m, v.name)); }
        Expression operator()(const BitExpr& b) const { return {b}; }
        Expression operator()(const MeasureExpr& x) const {
            MeasureExpr r;
            for (const auto& q : x.qubits) r.qubits.push_back(mapName(m, q));
            return {r};
        }
        Expression operator()(const TupleExpr& t) const {
            TupleExpr r;
            for (const auto& i : t.items) r.items.push_back(mapExpression(i, m));
            return {r};
        }
    };
    return std::visit(V{m}, e.node);
}

inline Name freshVariant(const Name& base, const std::set<Name>& avoid) {
    for (int k = 1;; ++k) {
        Name candidate = base + "_" + std::to_string(k);
        if (!avoid.contains(candidate)) return candidate;
    }
}

}  // namespace detail

inline TermPtr substitute(const TermPtr& t, const NameMap& mapping);

namespace detail {

// Shared handling for constructs binding `binders` over `cont`: drop
// shadowed keys, then alpha-rename any binder that a substituted value
// would otherwise be captured by.
inline std::pair<std::vector<Name>, TermPtr> substituteUnder(const std::vector<Name>& binders, const TermPtr& cont,
                                                             const NameMap& mapping) {
    NameMap inner = mapping;
    for (const auto& b : binders) inner.erase(b);
    if (inner.empty()) return {binders, cont};

    const auto contFree = freeNames(cont);
    std::set<Name> incoming;
    for (const auto& [from, to] : inner)
        if (contFree.contains(from)) incoming.insert(to);

    std::vector<Name> newBinders = binders;
    NameMap rename;
    std::set<Name> avoid = contFree;
    avoid.insert(incoming.begin(), incoming.end());
    avoid.insert(binders.begin(), binders.end());
    for (auto& b : newBinders) {
        if (!incoming.contains(b)) continue;
        Name fresh = freshVariant(b, avoid);
        avoid.insert(fresh);
        rename[b] = fresh;
        b = fresh;
    }
    TermPtr body = rename.empty() ? cont : substitute(cont, rename);
    return {std::move(newBinders), substitute(body, inner)};
}

}  // namespace detail

/// Capture-avoiding substitution of free names.
inline TermPtr substitute(const TermPtr& t, const NameMap& mapping) {
    if (mapping.empty()) return t;
    using detail::mapName;
    struct V {
        const NameMap& m;
        SourceLoc loc;
        TermPtr self;
        TermPtr operator()(const Nil&) const { return self; }
        TermPtr operator()(const Input& x) const {
            auto [bs, cont] = detail::substituteUnder(x.binders, x.cont, m);
            return term::input(mapName(m, x.channel), std::move(bs), std::move(cont), loc);
        }
        TermPtr operator()(const Output& x) const {
            std::vector<Expression> payload;
            for (const auto& e : x.payload) payload.push_back(detail::mapExpression(e, m));
            return term::output(mapName(m, x.channel), std::move(payload), substitute(x.cont, m), loc);
        }
        TermPtr operator()(const Action& x) const {
            std::vector<Name> targets;
            for (const auto& n : x.targets) targets.push_back(mapName(m, n));
            GateRef g = x.gate;
            if (g.index) g.index = mapName(m, *g.index);
            return term::action(std::move(targets), std::move(g), substitute(x.cont, m), loc);
        }
        TermPtr operator()(const QbitAlloc& x) const {
            auto [bs, cont] = detail::substituteUnder(x.binders, x.cont, m);
            return term::qbit(std::move(bs), std::move(cont), loc);
        }
        TermPtr operator()(const NewChannel& x) const {
            auto [bs, cont] = detail::substituteUnder({x.binder}, x.cont, m);
            return term::newChannel(bs.front(), std::move(cont), loc);
        }
        TermPtr operator()(const Parallel& x) const {
            return term::par(substitute(x.left, m), substitute(x.right, m), loc);
        }
        TermPtr operator()(const Call& x) const {
            std::vector<Name> args;
            for (const auto& n : x.args) args.push_back(mapName(m, n));
            return term::call(x.process, std::move(args), loc);
        }
    };
    return std::visit(V{mapping, t->loc, t}, t->node);
}

namespace detail {

// Bound-name correspondence for alpha-equivalence: innermost binding wins.
struct AlphaScope {
    std::vector<std::pair<Name, Name>> pairs;

    bool same(const Name& a, const Name& b) const {
        for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
            const bool ha = it->first == a;
            const bool hb = it->second == b;
            if (ha || hb) return ha && hb;
        }
        return a == b;
    }
    bool same(const std::vector<Name>& a, const std::vector<Name>& b) const {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!same(a[i], b[i])) return false;
        return true;
    }
    bool same(const Expression& a, const Expression& b) const {
        if (a.node.index() != b.node.index()) return false;
        if (auto* v = std::get_if<VarExpr>(&a.node)) return same(v->name, std::get<VarExpr>(b.node).name);
        if (auto* x = std::get_if<BitExpr>(&a.node)) return *x == std::get<BitExpr>(b.node);
        if (auto* m = std::get_if<MeasureExpr>(&a.node)) return same(m->qubits, std::get<MeasureExpr>(b.node).qubits);
        const auto& ta = std::get<TupleExpr>(a.node).items;
        const auto& tb = std::get<TupleExpr>(b.node).items;
        if (ta.size() != tb.size()) return false;
        for (std::size_t i = 0; i < ta.size(); ++i)
            if (!same(ta[i], tb[i])) return false;
        return true;
    }
};

inline bool alphaEq(const TermPtr& a, const TermPtr& b, AlphaScope& scope);

inline bool alphaUnder(const std::vector<Name>& ba, const TermPtr& ca, const std::vector<Name>& bb, const TermPtr& cb,
                       AlphaScope& scope) {
    if (ba.size() != bb.size()) return false;
    for (std::size_t i = 0; i < ba.size(); ++i) scope.pairs.emplace_back(ba[i], bb[i]);
    const bool r = alphaEq(ca, cb, scope);
    scope.pairs.resize(scope.pairs.size() - ba.size());
    return r;
}

inline bool alphaEq(const TermPtr& a, const TermPtr& b, AlphaScope& scope) {
    if (a->node.index() != b->node.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b->node);
            if constexpr (std::is_same_v<T, Nil>) {
                return true;
            } else if constexpr (std::is_same_v<T, Input>) {
                return scope.same(x.channel, y.channel) && alphaUnder(x.binders, x.cont, y.binders, y.cont, scope);
            } else if constexpr (std::is_same_v<T, Output>) {
                if (!scope.same(x.channel, y.channel) || x.payload.size() != y.payload.size()) return false;
                for (std::size_t i = 0; i < x.payload.size(); ++i)
                    if (!scope.same(x.payload[i], y.payload[i])) return false;
                return alphaEq(x.cont, y.cont, scope);
            } else if constexpr (std::is_same_v<T, Action>) {
                if (!scope.same(x.targets, y.targets) || x.gate.name != y.gate.name) return false;
                if (x.gate.index.has_value() != y.gate.index.has_value()) return false;
                if (x.gate.index && !scope.same(*x.gate.index, *y.gate.index)) return false;
                return alphaEq(x.cont, y.cont, scope);
            } else if constexpr (std::is_same_v<T, QbitAlloc>) {
                return alphaUnder(x.binders, x.cont, y.binders, y.cont, scope);
            } else if constexpr (std::is_same_v<T, NewChannel>) {
                return alphaUnder({x.binder}, x.cont, {y.binder}, y.cont, scope);
            } else if constexpr (std::is_same_v<T, Parallel>) {
                return alphaEq(x.left, y.left, scope) && alphaEq(x.right, y.right, scope);
            } else {
                return x.process == y.process && scope.same(x.args, y.args);
            }
        },
        a->node);
}

}  // namespace detail

/// Equal up to consistent renaming of bound names.
inline bool alphaEquivalent(const TermPtr& a, const TermPtr& b) {
    detail::AlphaScope scope;
    return detail::alphaEq(a, b, scope);
}

/// Continuation of a prefix, or nullptr for nil/parallel/call.
inline const TermPtr* continuationOf(const Term& t) {
    return std::visit(
        [](const auto& x) -> const TermPtr* {
            if constexpr (requires { x.cont; }) return &x.cont;
            else return nullptr;
        },
        t.node);
}

/// Pre-order visit of every subterm.
inline void forEachSubterm(const TermPtr& t, const std::function<void(const TermPtr&)>& f) {
    f(t);
    if (auto* p = std::get_if<Parallel>(&t->node)) {
        forEachSubterm(p->left, f);
        forEachSubterm(p->right, f);
    } else if (auto* c = continuationOf(*t)) {
        forEachSubterm(*c, f);
    }
}

}  // namespace cqp
