// cqp: parse, typecheck, run, explore and compare CQP programs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cqp/cqp.hpp"

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitNoInput = 66;
constexpr int kExitCap = 70;

struct FileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<cqp::TestState> qubitTests(const std::string& spec) {
    if (spec == "default") return cqp::defaultQubitTests();
    if (spec == "basis") return cqp::basisQubitTests();
    if (spec.rfind("file:", 0) == 0) {
        const std::string path = spec.substr(5);
        std::ifstream in(path);
        if (!in) throw FileError("cannot open '" + path + "'");
        try {
            return cqp::parseQubitTests(in);
        } catch (const cqp::Error& e) {
            throw FileError(path + ": " + e.what());
        }
    }
    throw UsageError("--qubit-tests must be basis, default or file:<path>");
}

void printParseError(const std::string& file, const cqp::ParseError& e) {
    std::cout << file << ":" << e.line() << ":" << e.column() << " ParseError " << e.message() << "\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

struct Options {
    std::uint64_t seed = 0;
    std::size_t maxStates = 20000;
    std::string qubitTests = "default";
    bool json = false;
    bool dumpPlts = false;
    bool minimize = false;
    std::string entry, leftEntry, rightEntry;
    std::string file, left, right;
};

std::optional<cqp::Name> entryOf(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return s;
}

int cmdParse(const Options& o) {
    const std::string src = readFile(o.file);
    try {
        std::cout << cqp::prettyPrint(cqp::parseProgram(src));
        return 0;
    } catch (const cqp::ParseError& e) {
        printParseError(o.file, e);
        return 1;
    }
}

int cmdTypecheck(const Options& o) {
    const std::string src = readFile(o.file);
    cqp::Program p;
    try {
        p = cqp::parseProgram(src);
    } catch (const cqp::ParseError& e) {
        printParseError(o.file, e);
        return 1;
    }
    const auto diags = cqp::typecheckProgram(p);
    for (const auto& d : diags) std::cout << cqp::formatDiagnostic(o.file, d) << "\n";
    return diags.empty() ? 0 : 1;
}

// Parses `file`; on failure prints the error and returns nullopt.
std::optional<cqp::Program> load(const std::string& file, bool requireTypes) {
    const std::string src = readFile(file);
    cqp::Program p;
    try {
        p = cqp::parseProgram(src);
    } catch (const cqp::ParseError& e) {
        printParseError(file, e);
        return std::nullopt;
    }
    if (requireTypes) {
        const auto diags = cqp::typecheckProgram(p);
        for (const auto& d : diags) std::cout << cqp::formatDiagnostic(file, d) << "\n";
        if (!diags.empty()) return std::nullopt;
    }
    return p;
}

int cmdRun(const Options& o) {
    auto p = load(o.file, false);
    if (!p) return 2;
    const auto start = cqp::initialConfiguration(*p, entryOf(o.entry), qubitTests(o.qubitTests));
    const auto trace = cqp::runSampled(start, o.seed);
    if (o.json) {
        std::cout << cqp::traceJson(trace).dump(2) << "\n";
    } else {
        std::cout << "start | " << cqp::toDirac(start.qstate) << " | " << cqp::renderTerm(start) << "\n";
        for (const auto& s : trace) std::cout << cqp::traceLine(s) << "\n";
    }
    return 0;
}

int cmdExplore(const Options& o) {
    auto p = load(o.file, false);
    if (!p) return 2;
    const auto start = cqp::initialConfiguration(*p, entryOf(o.entry), qubitTests(o.qubitTests));
    cqp::ExploreOptions eo;
    eo.maxStates = o.maxStates;
    cqp::Plts g = cqp::explore(start, eo);
    if (o.minimize) g = cqp::minimize(g);
    if (o.dumpPlts || o.json) {
        std::cout << cqp::pltsJson(g).dump(2) << "\n";
        return 0;
    }
    std::size_t terminal = 0;
    for (const auto& s : g.states) terminal += s.terminal;
    std::cout << "states: " << g.states.size() << "\n"
              << "probabilistic: " << cqp::countStates(g, cqp::PltsState::Kind::P) << "\n"
              << "terminal: " << terminal << "\n"
              << "edges: " << g.edges.size() << "\n";
    return 0;
}

int cmdEquiv(const Options& o) {
    auto l = load(o.left, true);
    auto r = load(o.right, true);
    if (!l || !r) return 2;
    const auto tests = qubitTests(o.qubitTests);
    const auto result = cqp::checkEquivalence(cqp::initialConfiguration(*l, entryOf(o.leftEntry), tests),
                                              cqp::initialConfiguration(*r, entryOf(o.rightEntry), tests), tests,
                                              o.maxStates);
    if (o.json) {
        std::cout << cqp::equivalenceJson(result).dump(2) << "\n";
    } else {
        std::cout << (result.equivalent ? "EQUIVALENT" : "NOT EQUIVALENT") << "\n";
        if (const auto& w = result.witness) {
            std::cout << "witness:\n"
                      << "  kind: " << cqp::toString(w->kind) << "\n"
                      << "  test state: " << w->testState << "\n"
                      << "  label: " << w->label << "\n";
            if (w->kind == cqp::EquivalenceWitness::Kind::ProbabilityMismatch)
                std::cout << "  left probability: " << fmt(w->leftProbability) << "\n"
                          << "  right probability: " << fmt(w->rightProbability) << "\n";
            std::cout << "  detail: " << w->description << "\n";
        }
    }
    return result.equivalent ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parse, typecheck, run and compare CQP programs"};
    app.require_subcommand(1);
    Options o;

    auto addTests = [&](CLI::App* c) {
        c->add_option("--qubit-tests", o.qubitTests, "basis, default or file:<path>");
    };
    auto* parse = app.add_subcommand("parse", "Parse and pretty-print a program");
    parse->add_option("file", o.file)->required();

    auto* typecheck = app.add_subcommand("typecheck", "Report linearity and type diagnostics");
    typecheck->add_option("file", o.file)->required();

    auto* run = app.add_subcommand("run", "Print one sampled execution");
    run->add_option("file", o.file)->required();
    run->add_option("--seed", o.seed, "measurement sampling seed");
    run->add_option("--entry", o.entry, "process to run (default: main)");
    run->add_flag("--json", o.json);
    addTests(run);

    auto* explore = app.add_subcommand("explore", "Build the full transition system");
    explore->add_option("file", o.file)->required();
    explore->add_option("--entry", o.entry, "process to explore (default: main)");
    explore->add_option("--max-states", o.maxStates, "state cap");
    explore->add_flag("--dump-plts", o.dumpPlts, "print the system as JSON");
    explore->add_flag("--json", o.json);
    explore->add_flag("--minimize", o.minimize, "quotient by branching bisimilarity first");
    addTests(explore);

    auto* equiv = app.add_subcommand("equiv", "Decide branching bisimilarity of two programs");
    equiv->add_option("left", o.left)->required();
    equiv->add_option("right", o.right)->required();
    equiv->add_option("--left-entry", o.leftEntry);
    equiv->add_option("--right-entry", o.rightEntry);
    equiv->add_option("--max-states", o.maxStates, "state cap per side and test state");
    equiv->add_flag("--json", o.json);
    addTests(equiv);

    // Accepted everywhere so scripts can pass one flag set.
    for (auto* c : {parse, typecheck}) c->add_option("--seed", o.seed)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (parse->parsed()) return cmdParse(o);
        if (typecheck->parsed()) return cmdTypecheck(o);
        if (run->parsed()) return cmdRun(o);
        if (explore->parsed()) return cmdExplore(o);
        if (equiv->parsed()) return cmdEquiv(o);
    } catch (const FileError& e) {
        std::cerr << "cqp: " << e.what() << "\n";
        return kExitNoInput;
    } catch (const UsageError& e) {
        std::cerr << "cqp: " << e.what() << "\n";
        return kExitUsage;
    } catch (const cqp::ExplorationLimit& e) {
        std::cerr << "cqp: " << e.what() << "\n";
        return kExitCap;
    } catch (const cqp::CapacityError& e) {
        std::cerr << "cqp: " << e.what() << "\n";
        return kExitCap;
    } catch (const cqp::Error& e) {
        std::cerr << "cqp: " << e.what() << "\n";
        return 2;
    }
    return kExitUsage;
}
