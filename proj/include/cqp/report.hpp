#pragma once

// Text and JSON renderings of traces, PLTSs and verdicts.

#include <string>
#include <vector>

#include "json.hpp"

#include "cqp/equiv.hpp"
#include "cqp/plts.hpp"
#include "cqp/semantics.hpp"

namespace cqp {

inline std::string traceLine(const TraceStep& s) {
    return toString(s.label) + " | " + toDirac(s.config.qstate) + " | " + renderTerm(s.config);
}

inline nlohmann::json amplitudesJson(const StateVector& s) {
    auto out = nlohmann::json::array();
    for (const auto& a : s.amplitudes()) out.push_back({a.real(), a.imag()});
    return out;
}

inline nlohmann::json labelJson(const Label& l) {
    nlohmann::json j;
    switch (l.kind) {
        case Label::Kind::Tau: j["kind"] = "tau"; break;
        case Label::Kind::Input: j["kind"] = "input"; break;
        case Label::Kind::Output: j["kind"] = "output"; break;
        case Label::Kind::Prob: j["kind"] = "prob"; break;
    }
    if (l.kind == Label::Kind::Input || l.kind == Label::Kind::Output) {
        j["channel"] = l.channelName;
        auto values = nlohmann::json::array();
        for (const auto& v : l.values) {
            switch (v.kind) {
                case LabelValue::Kind::Bit: values.push_back(v.bit); break;
                case LabelValue::Kind::Channel: values.push_back({{"channel", v.channel}}); break;
                case LabelValue::Kind::Qubit: {
                    nlohmann::json q;
                    if (!v.tag.empty()) q["test"] = v.tag;
                    if (v.rho.numQubits() == 1) {
                        auto b = blochVector(v.rho);
                        q["bloch"] = {b[0], b[1], b[2]};
                    }
                    values.push_back(q);
                    break;
                }
            }
        }
        j["values"] = values;
    }
    if (l.kind == Label::Kind::Prob && !l.outcome.empty()) j["outcome"] = l.outcome;
    j["text"] = toString(l);
    return j;
}

inline nlohmann::json traceJson(const std::vector<TraceStep>& trace) {
    auto out = nlohmann::json::array();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& s = trace[i];
        nlohmann::json j{{"step", i + 1}, {"label", labelJson(s.label)}};
        if (s.label.kind == Label::Kind::Prob) j["probability"] = s.label.probability;
        j["state"] = amplitudesJson(s.config.qstate);
        j["term"] = renderTerm(s.config);
        out.push_back(std::move(j));
    }
    return out;
}

inline nlohmann::json pltsJson(const Plts& g) {
    nlohmann::json j;
    auto states = nlohmann::json::array();
    for (std::size_t i = 0; i < g.states.size(); ++i) {
        const auto& s = g.states[i];
        nlohmann::json st{{"id", i}, {"kind", s.kind == PltsState::Kind::N ? "N" : "P"}, {"terminal", s.terminal}};
        if (s.config) st["term"] = renderTerm(*s.config);
        states.push_back(std::move(st));
    }
    auto edges = nlohmann::json::array();
    for (const auto& e : g.edges) {
        nlohmann::json ej{{"src", e.src}, {"label", toString(e.label)}, {"dst", e.dst}};
        if (e.label.kind == Label::Kind::Prob) ej["p"] = e.label.probability;
        edges.push_back(std::move(ej));
    }
    j["states"] = std::move(states);
    j["edges"] = std::move(edges);
    j["initial"] = g.initial;
    return j;
}

inline nlohmann::json witnessJson(const EquivalenceWitness& w) {
    nlohmann::json j{{"kind", toString(w.kind)}, {"label", w.label}, {"description", w.description}};
    if (!w.testState.empty()) j["test_state"] = w.testState;
    if (w.kind == EquivalenceWitness::Kind::ProbabilityMismatch) {
        j["left_probability"] = w.leftProbability;
        j["right_probability"] = w.rightProbability;
    }
    return j;
}

inline nlohmann::json equivalenceJson(const EquivalenceResult& r) {
    nlohmann::json j{{"equivalent", r.equivalent}};
    auto runs = nlohmann::json::array();
    for (const auto& run : r.runs)
        runs.push_back({{"test_state", run.testState},
                        {"left_states", run.leftStates},
                        {"right_states", run.rightStates},
                        {"equivalent", run.verdict.equivalent}});
    j["runs"] = std::move(runs);
    j["witness"] = r.witness ? witnessJson(*r.witness) : nlohmann::json(nullptr);
    return j;
}

inline std::string witnessText(const EquivalenceWitness& w) {
    std::string s = toString(w.kind);
    if (!w.testState.empty()) s += " (test state " + w.testState + ")";
    if (!w.label.empty()) s += " on " + w.label;
    return s + ": " + w.description;
}

}  // namespace cqp
