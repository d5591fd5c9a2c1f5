#pragma once

// Dense state-vector simulation over a small number of qubits.
//
// Basis states are indexed so that qubit 0 is the least significant bit of
// the index; kets print with the highest qubit leftmost, |b_{n-1}...b_0>.
// Whenever a list of qubits is turned into a local index (gate targets,
// measurement results, kept qubits of a partial trace) the FIRST listed
// qubit is the MOST significant local bit, so CNot on targets [c, t] maps
// |c t> = |10> to |11>.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cqp/error.hpp"

namespace cqp {

using Amplitude = std::complex<double>;

/// User-facing tolerance for normalization, unitarity and state comparison.
inline constexpr double kTolerance = 1e-9;
/// Components smaller than this are flushed to zero after every gate.
inline constexpr double kPruneThreshold = 1e-12;
/// Measurement outcomes below this probability are not enumerated.
inline constexpr double kOutcomeFloor = 1e-15;
inline constexpr std::size_t kDefaultQubitCap = 12;

namespace detail {

inline double prune(double v) { return std::abs(v) < kPruneThreshold ? 0.0 : v; }

inline Amplitude prune(Amplitude a) { return {prune(a.real()), prune(a.imag())}; }

inline bool finite(Amplitude a) { return std::isfinite(a.real()) && std::isfinite(a.imag()); }

inline void checkTargets(std::span<const std::size_t> targets, std::size_t numQubits) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] >= numQubits)
            throw std::out_of_range("qubit index " + std::to_string(targets[i]) +
                                    " out of range for " + std::to_string(numQubits) + " qubits");
        for (std::size_t j = 0; j < i; ++j)
            if (targets[i] == targets[j])
                throw std::invalid_argument("duplicate qubit index " + std::to_string(targets[i]));
    }
}

// Local index of `basis` restricted to `targets` (first target = MSB).
inline std::size_t localIndex(std::size_t basis, std::span<const std::size_t> targets) {
    std::size_t local = 0;
    for (std::size_t t : targets) local = (local << 1) | ((basis >> t) & 1u);
    return local;
}

// Scatter a local index back over `targets` into a global index mask.
inline std::size_t scatter(std::size_t local, std::span<const std::size_t> targets) {
    std::size_t global = 0;
    const std::size_t k = targets.size();
    for (std::size_t j = 0; j < k; ++j)
        if ((local >> (k - 1 - j)) & 1u) global |= std::size_t{1} << targets[j];
    return global;
}

inline std::string formatReal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    return s == "-0.0000" ? "0.0000" : s;
}

}  // namespace detail

/// Normalized amplitude vector over `numQubits` qubits.
class StateVector {
public:
    /// The empty 0-qubit state (single amplitude 1).
    StateVector() : numQubits_(0), amps_{Amplitude{1.0, 0.0}} {}

    static StateVector basis(std::size_t numQubits, std::size_t index) {
        if (index >= (std::size_t{1} << numQubits))
            throw std::out_of_range("basis index out of range");
        std::vector<Amplitude> amps(std::size_t{1} << numQubits);
        amps[index] = 1.0;
        return StateVector(numQubits, std::move(amps));
    }

    /// Validates length, finiteness and normalization; does not renormalize.
    static StateVector fromAmplitudes(std::vector<Amplitude> amps) {
        if (amps.empty() || (amps.size() & (amps.size() - 1)) != 0)
            throw std::invalid_argument("amplitude count must be a power of two");
        std::size_t n = 0;
        while ((std::size_t{1} << n) < amps.size()) ++n;
        double total = 0.0;
        for (const auto& a : amps) {
            if (!detail::finite(a)) throw std::invalid_argument("non-finite amplitude");
            total += std::norm(a);
        }
        if (std::abs(total - 1.0) > kTolerance)
            throw std::invalid_argument("state is not normalized (norm^2 = " + std::to_string(total) + ")");
        return StateVector(n, std::move(amps));
    }

    /// Scales `amps` to unit norm first.
    static StateVector normalized(std::vector<Amplitude> amps) {
        double total = 0.0;
        for (const auto& a : amps) total += std::norm(a);
        if (!(total > 0.0)) throw std::invalid_argument("cannot normalize the zero vector");
        const double scale = 1.0 / std::sqrt(total);
        for (auto& a : amps) a *= scale;
        return fromAmplitudes(std::move(amps));
    }

    std::size_t numQubits() const { return numQubits_; }
    std::size_t dimension() const { return amps_.size(); }
    const std::vector<Amplitude>& amplitudes() const { return amps_; }
    Amplitude operator[](std::size_t i) const { return amps_[i]; }

    double normSquared() const {
        double total = 0.0;
        for (const auto& a : amps_) total += std::norm(a);
        return total;
    }

    /// Internal factory for callers that already guarantee the invariants.
    static StateVector fromTrusted(std::size_t n, std::vector<Amplitude> amps) {
        return StateVector(n, std::move(amps));
    }

private:
    StateVector(std::size_t n, std::vector<Amplitude> amps) : numQubits_(n), amps_(std::move(amps)) {}

    std::size_t numQubits_;
    std::vector<Amplitude> amps_;
};

/// Unitary on `arity` qubits, row-major 2^arity x 2^arity.
class Gate {
public:
    Gate(std::string name, std::size_t arity, std::vector<Amplitude> matrix)
        : name_(std::move(name)), arity_(arity), matrix_(std::move(matrix)) {
        const std::size_t dim = std::size_t{1} << arity_;
        if (arity_ == 0) throw std::invalid_argument("gate arity must be positive");
        if (matrix_.size() != dim * dim) throw std::invalid_argument("gate matrix has wrong size");
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) {
                Amplitude dot = 0.0;
                for (std::size_t k = 0; k < dim; ++k) dot += std::conj(at(k, r)) * at(k, c);
                if (std::abs(dot - Amplitude(r == c ? 1.0 : 0.0)) > kTolerance)
                    throw std::invalid_argument("gate " + name_ + " is not unitary");
            }
    }

    const std::string& name() const { return name_; }
    std::size_t arity() const { return arity_; }
    std::size_t dimension() const { return std::size_t{1} << arity_; }
    Amplitude at(std::size_t row, std::size_t col) const { return matrix_[row * dimension() + col]; }
    const std::vector<Amplitude>& matrix() const { return matrix_; }

private:
    std::string name_;
    std::size_t arity_;
    std::vector<Amplitude> matrix_;
};

struct MeasurementOutcome {
    std::string result;  ///< one '0'/'1' per measured qubit, in target order
    double probability = 0.0;
    StateVector postState;
};

/// Reduced density matrix over some kept qubits, row-major.
class DensityMatrix {
public:
    DensityMatrix() = default;
    DensityMatrix(std::size_t numQubits, std::vector<Amplitude> entries)
        : numQubits_(numQubits), entries_(std::move(entries)) {
        if (entries_.size() != dimension() * dimension())
            throw std::invalid_argument("density matrix has wrong size");
    }

    static DensityMatrix fromPure(const StateVector& s) {
        const std::size_t d = s.dimension();
        std::vector<Amplitude> e(d * d);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) e[r * d + c] = s[r] * std::conj(s[c]);
        return {s.numQubits(), std::move(e)};
    }

    std::size_t numQubits() const { return numQubits_; }
    std::size_t dimension() const { return std::size_t{1} << numQubits_; }
    Amplitude operator()(std::size_t r, std::size_t c) const { return entries_[r * dimension() + c]; }
    const std::vector<Amplitude>& entries() const { return entries_; }

    Amplitude trace() const {
        Amplitude t = 0.0;
        for (std::size_t i = 0; i < dimension(); ++i) t += (*this)(i, i);
        return t;
    }

    bool isHermitian(double tol = kTolerance) const {
        for (std::size_t r = 0; r < dimension(); ++r)
            for (std::size_t c = 0; c <= r; ++c)
                if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol) return false;
        return true;
    }

    /// Entrywise comparison.
    bool approxEqual(const DensityMatrix& o, double tol = kTolerance) const {
        if (numQubits_ != o.numQubits_) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (std::abs(entries_[i] - o.entries_[i]) > tol) return false;
        return true;
    }

private:
    std::size_t numQubits_ = 0;
    std::vector<Amplitude> entries_{Amplitude{1.0, 0.0}};
};

/// Returns `state` with `other` appended on the highest qubit indices.
inline StateVector appendState(const StateVector& state, const StateVector& other,
                               std::size_t cap = kDefaultQubitCap) {
    const std::size_t n = state.numQubits() + other.numQubits();
    if (n > cap)
        throw CapacityError("allocation needs " + std::to_string(n) + " qubits, cap is " + std::to_string(cap));
    std::vector<Amplitude> amps(std::size_t{1} << n);
    const std::size_t low = state.dimension();
    for (std::size_t hi = 0; hi < other.dimension(); ++hi)
        for (std::size_t lo = 0; lo < low; ++lo) amps[hi * low + lo] = other[hi] * state[lo];
    return StateVector::fromTrusted(n, std::move(amps));
}

/// state ⊗ |0...0>, new qubits on the highest indices.
inline StateVector allocQubits(const StateVector& state, std::size_t count,
                               std::size_t cap = kDefaultQubitCap) {
    if (count == 0) throw std::invalid_argument("allocation count must be positive");
    if (state.numQubits() + count > cap)
        throw CapacityError("allocation needs " + std::to_string(state.numQubits() + count) +
                            " qubits, cap is " + std::to_string(cap));
    return appendState(state, StateVector::basis(count, 0), cap);
}

inline StateVector applyGate(const StateVector& state, const Gate& gate,
                             std::span<const std::size_t> targets) {
    if (targets.size() != gate.arity())
        throw std::invalid_argument("gate " + gate.name() + " expects " + std::to_string(gate.arity()) +
                                    " targets, got " + std::to_string(targets.size()));
    detail::checkTargets(targets, state.numQubits());

    std::size_t targetMask = 0;
    for (std::size_t t : targets) targetMask |= std::size_t{1} << t;

    const std::size_t dim = gate.dimension();
    std::vector<std::size_t> offsets(dim);
    for (std::size_t l = 0; l < dim; ++l) offsets[l] = detail::scatter(l, targets);

    std::vector<Amplitude> out(state.dimension());
    std::vector<Amplitude> local(dim);
    for (std::size_t base = 0; base < state.dimension(); ++base) {
        if (base & targetMask) continue;
        for (std::size_t l = 0; l < dim; ++l) local[l] = state.amplitudes()[base | offsets[l]];
        for (std::size_t r = 0; r < dim; ++r) {
            Amplitude acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) acc += gate.at(r, c) * local[c];
            out[base | offsets[r]] = detail::prune(acc);
        }
    }
    return StateVector::fromTrusted(state.numQubits(), std::move(out));
}

inline StateVector applyGate(const StateVector& state, const Gate& gate,
                             std::initializer_list<std::size_t> targets) {
    return applyGate(state, gate, std::span<const std::size_t>(targets.begin(), targets.size()));
}

/// Born-rule measurement of `targets` in the computational basis. Outcomes are
/// listed in increasing result order; zero-probability results are omitted.
inline std::vector<MeasurementOutcome> measure(const StateVector& state, std::span<const std::size_t> targets) {
    if (targets.empty()) throw std::invalid_argument("measurement needs at least one qubit");
    detail::checkTargets(targets, state.numQubits());

    const std::size_t k = targets.size();
    std::vector<double> probs(std::size_t{1} << k, 0.0);
    for (std::size_t i = 0; i < state.dimension(); ++i)
        probs[detail::localIndex(i, targets)] += std::norm(state.amplitudes()[i]);

    std::vector<MeasurementOutcome> outcomes;
    for (std::size_t r = 0; r < probs.size(); ++r) {
        if (probs[r] < kOutcomeFloor) continue;
        const double scale = 1.0 / std::sqrt(probs[r]);
        std::vector<Amplitude> post(state.dimension());
        for (std::size_t i = 0; i < state.dimension(); ++i)
            if (detail::localIndex(i, targets) == r) post[i] = detail::prune(state.amplitudes()[i] * scale);
        std::string bits(k, '0');
        for (std::size_t j = 0; j < k; ++j)
            if ((r >> (k - 1 - j)) & 1u) bits[j] = '1';
        outcomes.push_back({std::move(bits), probs[r], StateVector::fromTrusted(state.numQubits(), std::move(post))});
    }
    return outcomes;
}

inline std::vector<MeasurementOutcome> measure(const StateVector& state, std::initializer_list<std::size_t> targets) {
    return measure(state, std::span<const std::size_t>(targets.begin(), targets.size()));
}

/// Partial trace onto `keep` (first kept qubit = most significant local bit).
inline DensityMatrix reducedDensityMatrix(const StateVector& state, std::span<const std::size_t> keep) {
    detail::checkTargets(keep, state.numQubits());
    const std::size_t k = keep.size();
    const std::size_t d = std::size_t{1} << k;
    std::size_t keepMask = 0;
    for (std::size_t t : keep) keepMask |= std::size_t{1} << t;

    std::vector<Amplitude> rho(d * d);
    // Pair up basis states that agree on every traced-out qubit.
    for (std::size_t i = 0; i < state.dimension(); ++i) {
        if (state[i] == Amplitude{}) continue;
        const std::size_t env = i & ~keepMask;
        const std::size_t r = detail::localIndex(i, keep);
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t j = env | detail::scatter(c, keep);
            rho[r * d + c] += state[i] * std::conj(state[j]);
        }
    }
    return {k, std::move(rho)};
}

inline DensityMatrix reducedDensityMatrix(const StateVector& state, std::initializer_list<std::size_t> keep) {
    return reducedDensityMatrix(state, std::span<const std::size_t>(keep.begin(), keep.size()));
}

inline Amplitude innerProduct(const StateVector& a, const StateVector& b) {
    if (a.numQubits() != b.numQubits()) throw std::invalid_argument("dimension mismatch");
    Amplitude acc = 0.0;
    for (std::size_t i = 0; i < a.dimension(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

inline double fidelity(const StateVector& a, const StateVector& b) { return std::norm(innerProduct(a, b)); }

/// True iff a = c·b for some unit complex c, i.e. |<a|b>| >= 1 - tol.
inline bool statesEqualUpToGlobalPhase(const StateVector& a, const StateVector& b, double tol = kTolerance) {
    return std::abs(innerProduct(a, b)) >= 1.0 - tol;
}

/// New qubit i is old qubit `order[i]`; `order` must be a permutation.
inline StateVector permuteQubits(const StateVector& state, std::span<const std::size_t> order) {
    if (order.size() != state.numQubits()) throw std::invalid_argument("permutation has wrong length");
    detail::checkTargets(order, state.numQubits());
    std::vector<Amplitude> out(state.dimension());
    for (std::size_t oldIdx = 0; oldIdx < state.dimension(); ++oldIdx) {
        std::size_t newIdx = 0;
        for (std::size_t i = 0; i < order.size(); ++i)
            if ((oldIdx >> order[i]) & 1u) newIdx |= std::size_t{1} << i;
        out[newIdx] = state.amplitudes()[oldIdx];
    }
    return StateVector::fromTrusted(state.numQubits(), std::move(out));
}

/// Rotates the phase so that the first nonzero amplitude is real and positive.
inline StateVector removeGlobalPhase(const StateVector& state) {
    auto it = std::find_if(state.amplitudes().begin(), state.amplitudes().end(), [](Amplitude a) { return a != Amplitude{}; });
    if (it == state.amplitudes().end()) return state;
    const Amplitude phase = std::conj(*it) / std::abs(*it);
    std::vector<Amplitude> out(state.amplitudes());
    for (auto& a : out) a = detail::prune(a * phase);
    return StateVector::fromTrusted(state.numQubits(), std::move(out));
}

// Fixed gates. σ_r is the teleportation correction selected by the two
// measured bits r = (bit of the measured data qubit, bit of the sender's half
// of the pair): σ00 = I, σ01 = X, σ10 = Z, σ11 = Z·X.
inline Gate standardGate(std::string_view name) {
    const double h = 1.0 / std::sqrt(2.0);
    using A = Amplitude;
    if (name == "I" || name == "sigma00") return Gate(std::string(name), 1, {A{1}, A{0}, A{0}, A{1}});
    if (name == "X" || name == "sigma01") return Gate(std::string(name), 1, {A{0}, A{1}, A{1}, A{0}});
    if (name == "Z" || name == "sigma10") return Gate(std::string(name), 1, {A{1}, A{0}, A{0}, A{-1}});
    if (name == "sigma11") return Gate(std::string(name), 1, {A{0}, A{1}, A{-1}, A{0}});
    if (name == "H") return Gate("H", 1, {A{h}, A{h}, A{h}, A{-h}});
    if (name == "CNot")
        return Gate("CNot", 2,
                    {A{1}, A{0}, A{0}, A{0},
                     A{0}, A{1}, A{0}, A{0},
                     A{0}, A{0}, A{0}, A{1},
                     A{0}, A{0}, A{1}, A{0}});
    throw std::invalid_argument("unknown gate '" + std::string(name) + "'");
}

inline bool isStandardGateName(std::string_view name) {
    for (std::string_view n : {"I", "X", "Z", "H", "CNot", "sigma00", "sigma01", "sigma10", "sigma11"})
        if (n == name) return true;
    return false;
}

inline std::string formatAmplitude(Amplitude a) {
    const double re = std::abs(a.real()) < 5e-5 ? 0.0 : a.real();
    const double im = std::abs(a.imag()) < 5e-5 ? 0.0 : a.imag();
    if (im == 0.0) return detail::formatReal(re);
    if (re == 0.0) return detail::formatReal(im) + "i";
    return "(" + detail::formatReal(re) + (im < 0 ? "-" : "+") + detail::formatReal(std::abs(im)) + "i)";
}

inline std::string ket(std::size_t index, std::size_t numQubits) {
    std::string bits;
    for (std::size_t q = numQubits; q-- > 0;) bits += ((index >> q) & 1u) ? '1' : '0';
    return "|" + bits + "⟩";
}

/// Dirac rendering with 4 decimals, e.g. "0.7071|00⟩ + 0.7071|11⟩".
inline std::string toDirac(const StateVector& s) {
    std::string out;
    for (std::size_t i = 0; i < s.dimension(); ++i) {
        Amplitude a = s[i];
        if (std::abs(a) < 5e-5) continue;
        const bool realNegative = std::abs(a.imag()) < 5e-5 && a.real() < 0;
        if (out.empty()) {
            out = formatAmplitude(a);
        } else {
            out += realNegative ? " - " : " + ";
            out += realNegative ? formatAmplitude(-a) : formatAmplitude(a);
        }
        out += ket(i, s.numQubits());
    }
    return out.empty() ? "0" : out;
}

}  // namespace cqp
