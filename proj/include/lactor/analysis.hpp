#pragma once

// The abstract transition system: a worklist fixpoint over abstract process
// states with a single widened global store and global mailboxes, emitting a
// tagged abstract transition graph.

#include "lactor/absdomains.hpp"

#include <memory>

namespace lactor::analysis {

using namespace absdomains;

enum class RuleTag : uint8_t {
    FunEval, ArgEval, Apply, Vars, Letrec, Case, Choice, Probe, Self, Receive, Send, Spawn,
};

const char* rule_tag_name(RuleTag t);
RuleTag tag_of(machine::Rule r);

struct GlobalAbsState {
    std::map<AbsPidId, std::set<AbsPSId>> procs;
    std::map<AbsPidId, AbsMailbox> mailboxes;
    AbsStore store;
    bool operator==(const GlobalAbsState&) const = default;
};

bool leq(const MailboxAbstraction& mb, const GlobalAbsState& a, const GlobalAbsState& b);

enum class EffectKind : uint8_t { None, Receive, Send, Spawn };

struct AbsTransition {
    AbsPidId pid = 0;
    AbsPSId from = 0, to = 0;
    RuleTag rule = RuleTag::FunEval;
    EffectKind effect = EffectKind::None;
    AbsDataId msg = 0;       // Receive / Send
    AbsPidId target = 0;     // Send
    AbsPidId child = 0;      // Spawn
    AbsPSId child_state = 0; // Spawn
    auto operator<=>(const AbsTransition&) const = default;
};

struct AnalysisResult {
    std::shared_ptr<AbsCtx> ctx;
    GlobalAbsState fixpoint;
    std::vector<AbsTransition> transitions; // sorted, deduplicated, decorated
    uint64_t iterations = 0;

    AbsPidId init_pid = 0;
    AbsPSId init_state = 0;

    // Probe tag carried by a state's control label, if any.
    std::optional<Symbol> probe_tag(AbsPSId s) const;
    bool reaches_probe(Symbol tag) const;
};

AnalysisResult analyze(const Program& prog, const AbstractionConfig& cfg);

// Applies every enabled abstract rule once and joins the produced facts.
// The transition set is decorated against the input state's store.
std::pair<GlobalAbsState, std::vector<AbsTransition>> abstract_step(AbsCtx& cx,
                                                                    const GlobalAbsState& g);

// Pointwise abstraction of a concrete machine state.
GlobalAbsState alpha_cfa(AbsCtx& cx, const machine::Ctx& m, const machine::State& s);

std::string to_json(const AnalysisResult& r);

} // namespace lactor::analysis
