#pragma once

// Recursive-descent parser for `.cqp` sources.
//
//   program := (def | "main" call)*
//   def     := NAME "(" names? ")" "=" proc
//   proc    := "0"
//            | NAME "?" "[" names? "]" "." proc
//            | NAME "!" "[" exprs? "]" "." proc
//            | "{" names "*=" gate "}" "." proc
//            | "(" "qbit" names ")" proc
//            | "(" "new" NAME ")" proc
//            | "(" proc ("|" proc)* ")"
//            | NAME "(" names? ")"
//   gate    := NAME | "sigma" "[" NAME "]"
//   expr    := NAME | "0" | "1" | "measure" names | "(" exprs ")"
//
// `//` starts a line comment; `//: P : T, ...` lines carry the signature
// of P, with T := Qbit | Bit | ^[T, ...].

#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cqp/error.hpp"
#include "cqp/qstate.hpp"
#include "cqp/syntax.hpp"

namespace cqp {

namespace detail {

enum class Tok { Name, Number, Sym, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourceLoc loc;
};

struct SidecarLine {
    std::string text;
    SourceLoc loc;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run(std::vector<SidecarLine>& sidecars) {
        std::vector<Token> out;
        while (true) {
            skipSpace(sidecars);
            const SourceLoc loc{line_, col_};
            if (pos_ >= src_.size()) {
                out.push_back({Tok::End, "", loc});
                return out;
            }
            const char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::string text;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    text += advance();
                out.push_back({Tok::Name, std::move(text), loc});
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string text;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) text += advance();
                out.push_back({Tok::Number, std::move(text), loc});
            } else if (c == '*' && peekChar(1) == '=') {
                advance();
                advance();
                out.push_back({Tok::Sym, "*=", loc});
            } else if (std::string_view("()[]{}.,?!=|").find(c) != std::string_view::npos) {
                out.push_back({Tok::Sym, std::string(1, advance()), loc});
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", loc.line, loc.column);
            }
        }
    }

private:
    char peekChar(std::size_t ahead) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

    char advance() {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
            ++col_;  // count UTF-8 code points, not bytes
        }
        return c;
    }

    void skipSpace(std::vector<SidecarLine>& sidecars) {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && peekChar(1) == '/') {
                const SourceLoc loc{line_, col_};
                const bool sidecar = peekChar(2) == ':';
                std::string text;
                while (pos_ < src_.size() && src_[pos_] != '\n') text += advance();
                if (sidecar) sidecars.push_back({text.substr(3), {loc.line, loc.column + 3}});
            } else {
                return;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

inline bool isReserved(std::string_view n) { return n == "qbit" || n == "new" || n == "measure" || n == "main"; }

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Program program() {
        Program p;
        while (peek().kind != Tok::End) {
            if (peek().kind == Tok::Name && peek().text == "main" && peek(1).kind == Tok::Name) {
                const SourceLoc loc = next().loc;
                if (p.main) fail("duplicate main declaration", loc);
                const Token nameTok = expectName("process name");
                mainLoc_ = nameTok.loc;
                expectSym("(");
                auto args = names(")");
                expectSym(")");
                p.main = Call{nameTok.text, std::move(args)};
            } else {
                p.definitions.push_back(definition());
            }
        }
        return p;
    }

    SourceLoc mainLoc() const { return mainLoc_; }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    [[noreturn]] static void fail(const std::string& msg, SourceLoc loc) { throw ParseError(msg, loc.line, loc.column); }

    static std::string describe(const Token& t) {
        switch (t.kind) {
            case Tok::End: return "end of input";
            case Tok::Name: return "name '" + t.text + "'";
            case Tok::Number: return "number '" + t.text + "'";
            case Tok::Sym: return "'" + t.text + "'";
        }
        return "token";
    }

    bool atSym(std::string_view s, std::size_t ahead = 0) const {
        return peek(ahead).kind == Tok::Sym && peek(ahead).text == s;
    }

    Token expectSym(std::string_view s) {
        if (!atSym(s)) fail("expected '" + std::string(s) + "', found " + describe(peek()), peek().loc);
        return next();
    }

    Token expectName(std::string_view what) {
        if (peek().kind != Tok::Name) fail("expected " + std::string(what) + ", found " + describe(peek()), peek().loc);
        if (isReserved(peek().text)) fail("'" + peek().text + "' is a reserved word", peek().loc);
        return next();
    }

    // Comma-separated names, possibly empty when `closer` follows.
    std::vector<Name> names(std::string_view closer) {
        std::vector<Name> out;
        if (atSym(closer)) return out;
        out.push_back(expectName("name").text);
        while (atSym(",")) {
            next();
            out.push_back(expectName("name").text);
        }
        return out;
    }

    void requireDistinct(const std::vector<Name>& ns, const std::string& what, SourceLoc loc) {
        std::set<Name> seen;
        for (const auto& n : ns)
            if (!seen.insert(n).second) fail("duplicate " + what + " '" + n + "'", loc);
    }

    ProcessDef definition() {
        const Token nameTok = expectName("process definition");
        expectSym("(");
        auto params = names(")");
        expectSym(")");
        requireDistinct(params, "parameter", nameTok.loc);
        expectSym("=");
        return {nameTok.text, std::move(params), proc(), nameTok.loc};
    }

    TermPtr proc() {
        const Token& t = peek();
        const SourceLoc loc = t.loc;
        if (t.kind == Tok::Number) {
            if (t.text != "0") fail("expected process, found " + describe(t), loc);
            next();
            return term::nil(loc);
        }
        if (t.kind == Tok::Name) {
            if (isReserved(t.text)) fail("'" + t.text + "' is a reserved word", loc);
            if (atSym("?", 1)) return inputPrefix();
            if (atSym("!", 1)) return outputPrefix();
            if (atSym("(", 1)) {
                const Token name = next();
                next();
                auto args = names(")");
                expectSym(")");
                return term::call(name.text, std::move(args), loc);
            }
            fail("expected '?', '!' or '(' after " + describe(t), peek(1).loc);
        }
        if (atSym("{")) return actionPrefix();
        if (atSym("(")) {
            if (peek(1).kind == Tok::Name && peek(1).text == "qbit") {
                next();
                next();
                auto binders = names(")");
                if (binders.empty()) fail("qbit allocation needs at least one name", loc);
                requireDistinct(binders, "qubit binder", loc);
                expectSym(")");
                return term::qbit(std::move(binders), proc(), loc);
            }
            if (peek(1).kind == Tok::Name && peek(1).text == "new") {
                next();
                next();
                const Token c = expectName("channel name");
                expectSym(")");
                return term::newChannel(c.text, proc(), loc);
            }
            next();
            std::vector<TermPtr> parts{proc()};
            while (atSym("|")) {
                next();
                parts.push_back(proc());
            }
            expectSym(")");
            TermPtr acc = parts.back();
            for (std::size_t i = parts.size() - 1; i-- > 0;) acc = term::par(parts[i], acc, parts[i]->loc);
            if (parts.size() > 1) acc = term::make(acc->node, loc);
            return acc;
        }
        fail("expected process, found " + describe(t), loc);
    }

    TermPtr inputPrefix() {
        const Token ch = next();
        next();  // '?'
        expectSym("[");
        auto binders = names("]");
        expectSym("]");
        requireDistinct(binders, "input binder", ch.loc);
        expectSym(".");
        return term::input(ch.text, std::move(binders), proc(), ch.loc);
    }

    TermPtr outputPrefix() {
        const Token ch = next();
        next();  // '!'
        expectSym("[");
        std::vector<Expression> payload;
        if (!atSym("]")) {
            payload.push_back(expression());
            while (atSym(",")) {
                next();
                payload.push_back(expression());
            }
        }
        expectSym("]");
        expectSym(".");
        return term::output(ch.text, std::move(payload), proc(), ch.loc);
    }

    Expression expression() {
        const Token& t = peek();
        if (t.kind == Tok::Number) {
            if (t.text != "0" && t.text != "1") fail("bit literal must be 0 or 1", t.loc);
            return term::bit(next().text == "1" ? 1 : 0);
        }
        if (t.kind == Tok::Name && t.text == "measure") {
            const SourceLoc loc = next().loc;
            std::vector<Name> qs{expectName("qubit name").text};
            // `measure` takes every following comma-separated name.
            while (atSym(",") && peek(1).kind == Tok::Name && !isReserved(peek(1).text)) {
                next();
                qs.push_back(next().text);
            }
            requireDistinct(qs, "measured qubit", loc);
            return term::measureOf(std::move(qs));
        }
        if (atSym("(")) {
            next();
            std::vector<Expression> items{expression()};
            while (atSym(",")) {
                next();
                items.push_back(expression());
            }
            expectSym(")");
            return term::tuple(std::move(items));
        }
        return term::var(expectName("expression").text);
    }

    TermPtr actionPrefix() {
        const SourceLoc loc = next().loc;  // '{'
        auto targets = names("*=");
        if (targets.empty()) fail("gate action needs at least one target", loc);
        expectSym("*=");
        GateRef g;
        const Token gname = next();
        if (gname.kind != Tok::Name) fail("expected gate name, found " + describe(gname), gname.loc);
        if (gname.text == "sigma") {
            expectSym("[");
            g = term::sigma(expectName("classical index").text);
            expectSym("]");
        } else if (isStandardGateName(gname.text)) {
            g = term::gate(gname.text);
        } else {
            fail("unknown gate '" + gname.text + "'", gname.loc);
        }
        expectSym("}");
        expectSym(".");
        return term::action(std::move(targets), std::move(g), proc(), loc);
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    SourceLoc mainLoc_;
};

// Sidecar types: Qbit | Bit | ^[T, ...]
class TypeParser {
public:
    TypeParser(std::string_view s, SourceLoc loc) : s_(s), loc_(loc) {}

    std::pair<Name, std::vector<TypeExpr>> signature() {
        skip();
        Name name = ident();
        if (name.empty()) fail("expected process name in signature");
        skip();
        if (!eat(':')) fail("expected ':' after process name in signature");
        std::vector<TypeExpr> types;
        skip();
        if (pos_ < s_.size()) {
            types.push_back(type());
            skip();
            while (eat(',')) {
                types.push_back(type());
                skip();
            }
        }
        if (pos_ != s_.size()) fail("unexpected text in signature");
        return {std::move(name), std::move(types)};
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, loc_.line, loc_.column + static_cast<int>(pos_));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    Name ident() {
        skip();
        Name n;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) n += s_[pos_++];
        return n;
    }
    TypeExpr type() {
        if (eat('^')) {
            if (!eat('[')) fail("expected '[' after '^'");
            std::vector<TypeExpr> payload;
            skip();
            if (!eat(']')) {
                payload.push_back(type());
                while (eat(',')) payload.push_back(type());
                if (!eat(']')) fail("expected ']' closing channel type");
            }
            return TypeExpr::channel(std::move(payload));
        }
        const Name n = ident();
        if (n == "Qbit") return TypeExpr::qbit();
        if (n == "Bit") return TypeExpr::bit();
        fail("unknown type '" + n + "'");
    }

    std::string_view s_;
    SourceLoc loc_;
    std::size_t pos_ = 0;
};

inline void checkCallTargets(const Program& p, const TermPtr& body) {
    forEachSubterm(body, [&](const TermPtr& t) {
        auto* c = std::get_if<Call>(&t->node);
        if (!c) return;
        const ProcessDef* d = p.find(c->process);
        if (!d) throw ParseError("call to unknown process '" + c->process + "'", t->loc.line, t->loc.column);
        if (d->params.size() != c->args.size())
            throw ParseError("process '" + c->process + "' expects " + std::to_string(d->params.size()) +
                                 " arguments, got " + std::to_string(c->args.size()),
                             t->loc.line, t->loc.column);
    });
}

inline void checkNoRecursion(const Program& p) {
    std::map<Name, int> state;  // 0 unvisited, 1 on stack, 2 done
    std::function<void(const ProcessDef&)> visit = [&](const ProcessDef& d) {
        state[d.name] = 1;
        forEachSubterm(d.body, [&](const TermPtr& t) {
            auto* c = std::get_if<Call>(&t->node);
            if (!c) return;
            const int s = state[c->process];
            if (s == 1)
                throw ParseError("recursive call to '" + c->process + "' (recursion is not supported)", t->loc.line,
                                 t->loc.column);
            if (s == 0) visit(*p.find(c->process));
        });
        state[d.name] = 2;
    };
    for (const auto& d : p.definitions)
        if (state[d.name] == 0) visit(d);
}

}  // namespace detail

/// Parses and resolves a program: duplicate definitions, unknown processes,
/// call arity and recursion are all reported as ParseError.
inline Program parseProgram(std::string_view source) {
    std::vector<detail::SidecarLine> sidecars;
    detail::Parser parser(detail::Lexer(source).run(sidecars));
    Program p = parser.program();

    std::set<Name> seen;
    for (const auto& d : p.definitions)
        if (!seen.insert(d.name).second)
            throw ParseError("duplicate definition of '" + d.name + "'", d.loc.line, d.loc.column);
    for (const auto& d : p.definitions) detail::checkCallTargets(p, d.body);
    detail::checkNoRecursion(p);

    if (p.main) {
        const ProcessDef* d = p.find(p.main->process);
        const SourceLoc loc = parser.mainLoc();
        if (!d) throw ParseError("main refers to unknown process '" + p.main->process + "'", loc.line, loc.column);
        if (d->params.size() != p.main->args.size())
            throw ParseError("main call arity mismatch for '" + d->name + "'", loc.line, loc.column);
    }

    for (const auto& line : sidecars) {
        auto [name, types] = detail::TypeParser(line.text, line.loc).signature();
        if (p.signatures.contains(name))
            throw ParseError("duplicate signature for '" + name + "'", line.loc.line, line.loc.column);
        p.signatures.emplace(std::move(name), std::move(types));
    }
    return p;
}

}  // namespace cqp
