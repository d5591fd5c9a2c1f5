#pragma once

#include <string>
#include <vector>

namespace cqp {

/// Qbit | Bit | ^[T,...] (channel) | Word (internal: a multi-bit classical
/// value bound by a single input binder, e.g. the two measured bits).
struct TypeExpr {
    enum class Kind { Qbit, Bit, Channel, Word };

    Kind kind = Kind::Bit;
    std::vector<TypeExpr> items;  ///< channel payload, or word components

    static TypeExpr qbit() { return {Kind::Qbit, {}}; }
    static TypeExpr bit() { return {Kind::Bit, {}}; }
    static TypeExpr channel(std::vector<TypeExpr> payload) { return {Kind::Channel, std::move(payload)}; }
    static TypeExpr word(std::size_t width) { return {Kind::Word, std::vector<TypeExpr>(width, bit())}; }

    bool operator==(const TypeExpr&) const = default;
};

inline std::string toString(const TypeExpr& t) {
    switch (t.kind) {
        case TypeExpr::Kind::Qbit: return "Qbit";
        case TypeExpr::Kind::Bit: return "Bit";
        case TypeExpr::Kind::Word: return "Bit^" + std::to_string(t.items.size());
        case TypeExpr::Kind::Channel: {
            std::string s = "^[";
            for (std::size_t i = 0; i < t.items.size(); ++i) s += (i ? "," : "") + toString(t.items[i]);
            return s + "]";
        }
    }
    return "?";
}

}  // namespace cqp
