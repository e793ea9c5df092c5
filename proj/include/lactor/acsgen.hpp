#pragma once

// Actor Communicating Systems: generation from the analysis, the counter
// abstraction of concrete states, and tau-state simplification.

#include "lactor/analysis.hpp"
#include "lactor/vas.hpp"

namespace lactor::acsgen {

using namespace absdomains;

enum class RuleKind : uint8_t { Tau, Recv, Send, Nu };

struct AcsRule {
    uint32_t pid = 0;         // index into Acs::pid_classes
    uint32_t from = 0;        // index into Acs::states
    RuleKind kind = RuleKind::Tau;
    uint32_t msg = 0;         // Recv / Send
    uint32_t target = 0;      // Send: receiving pid-class
    uint32_t child_pid = 0;   // Nu
    uint32_t child_state = 0; // Nu
    uint32_t to = 0;
    auto operator<=>(const AcsRule&) const = default;
};

struct Acs {
    std::shared_ptr<AbsCtx> ctx;
    std::vector<AbsPidId> pid_classes;
    std::vector<AbsPSId> states;
    std::vector<AbsDataId> messages;
    std::vector<AcsRule> rules; // sorted, deduplicated
    uint32_t init_pid = 0;     // index
    uint32_t init_state = 0;   // index

    std::optional<uint32_t> pid_index(AbsPidId p) const;
    std::optional<uint32_t> state_index(AbsPSId s) const;
    std::optional<uint32_t> msg_index(AbsDataId m) const;

    std::string pid_name(uint32_t i) const;
    std::string state_name(uint32_t i) const;
    std::string msg_name(uint32_t i) const;
    std::optional<syntax::Symbol> state_probe(uint32_t i) const;

    // VAS place universe P x (Q ⊎ M).
    uint64_t dimension() const {
        return pid_classes.size() * (states.size() + messages.size());
    }
    uint32_t place_of_state(uint32_t pid, uint32_t state) const;
    uint32_t place_of_msg(uint32_t pid, uint32_t msg) const;
    std::string rule_label(const AcsRule& r) const;
};

Acs generate_acs(const analysis::AnalysisResult& res);

// Structural bounds on reachable markings of the VAS encoding: a pid-class
// only grows by spawn rules, and a spawn rule whose source state is not on a
// cycle of its class's rule graph fires at most once per token of that class.
// Analogously for messages and their send rules. Used to prune backward
// coverability; every returned invariant holds of every reachable marking.
std::vector<vas::SumInvariant> token_invariants(const Acs& acs);

// Counter abstraction of a concrete state, as a marking over the place
// universe of `acs` (places per acs_to_vas).
vas::Marking alpha_acs(const Acs& acs, const machine::Ctx& m, const machine::State& s);

// Contracts unprotected states whose single incoming rule is a tau, keeping
// every coverability answer over protected states and messages.
Acs simplify(const Acs& acs, const std::set<uint32_t>& protected_states = {});

std::string to_dot(const Acs& acs);
std::string to_json(const Acs& acs);

} // namespace lactor::acsgen
