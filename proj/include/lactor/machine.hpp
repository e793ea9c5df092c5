#pragma once

// Concrete time-stamped CESK* machine for lActor: global states over
// processes, FIFFO mailboxes and a bipartite store, with contour-based pids
// and addresses.

#include "lactor/syntax.hpp"

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace lactor::machine {

using syntax::Label;
using syntax::PatternId;
using syntax::Program;
using syntax::Symbol;

using ContourId = uint32_t; // 0 = empty contour
using TermId = uint32_t;    // resolved closed terms
using PidId = uint32_t;
using EnvId = uint32_t;     // 0 = empty environment
using ValueId = uint32_t;
using VAddrId = uint32_t;
using KAddrId = uint32_t;   // 0 = the distinguished address (Stop lives there)
using KontId = uint32_t;    // 0 = Stop

inline constexpr uint32_t kNone = 0xffffffffu;

struct DanglingAddress : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TermKind : uint8_t { Ctor, Pid, Fun };

struct Term {
    TermKind kind;
    Symbol ctor = 0;              // Ctor
    PidId pid = 0;                // Pid
    Label fun = 0;                // Fun: the function's location
    std::vector<TermId> args;     // Ctor
    bool operator<(const Term& o) const {
        return std::tie(kind, ctor, pid, fun, args) < std::tie(o.kind, o.ctor, o.pid, o.fun, o.args);
    }
};

enum class ValueKind : uint8_t { Closure, Pid };

struct Value {
    ValueKind kind;
    Label loc = 0;   // Closure
    EnvId env = 0;   // Closure
    PidId pid = 0;   // Pid
    bool operator<(const Value& o) const {
        return std::tie(kind, loc, env, pid) < std::tie(o.kind, o.loc, o.env, o.pid);
    }
};

struct Kont {
    bool stop = true;
    uint32_t index = 0;           // Arg_i
    Label call = 0;
    std::vector<ValueId> done;    // values for positions 0..i-1
    EnvId env = 0;
    KAddrId next = 0;
    bool operator<(const Kont& o) const {
        return std::tie(stop, index, call, done, env, next) <
               std::tie(o.stop, o.index, o.call, o.done, o.env, o.next);
    }
};

enum class Control : uint8_t { Expr, PidVal, Error };

enum class ErrorReason : uint8_t {
    None,
    ApplyNonFunction,
    WrongArity,
    CaseNoMatch,
    SendToNonPid,
    SpawnNonFunction,
};

const char* error_reason_name(ErrorReason r);

struct ProcState {
    Control control = Control::Expr;
    Label label = 0;          // Expr control; for Error: the faulting location
    PidId pid_value = 0;      // PidVal control
    ErrorReason err = ErrorReason::None;
    EnvId env = 0;
    KAddrId kont = 0;
    ContourId time = 0;
    auto operator<=>(const ProcState&) const = default;
};

struct State {
    std::map<PidId, ProcState> procs;
    std::map<PidId, std::vector<ValueId>> mailboxes;
    std::map<VAddrId, ValueId> vstore;
    std::map<KAddrId, KontId> kstore;
    bool operator==(const State&) const = default;
};

enum class Rule : uint8_t {
    FunEval, ArgEval, Apply, Vars, Letrec, Case, Choice, Probe, Self, Receive, Send, Spawn,
};

const char* rule_name(Rule r);

struct Successor {
    State state;
    PidId pid = 0;
    Rule rule = Rule::FunEval;
    ProcState from, to;
    // Communication payloads, for the soundness harnesses.
    ValueId recv_msg = kNone;
    ValueId sent_msg = kNone;
    PidId send_target = kNone;
    PidId spawn_child = kNone;
    ProcState spawn_child_state;
};

using Subst = std::vector<std::pair<Symbol, ValueId>>; // sorted by symbol

// Interning context shared by every state of one program's runs.
class Ctx {
  public:
    explicit Ctx(const Program& p);

    const Program& prog;

    // Contours (strings of labels, most recent first) as shared cons cells.
    // Interning is caching, so the pools are mutable and these are const.
    ContourId tick(Label l, ContourId t) const;
    ContourId tick_star(ContourId prefix, ContourId base) const;
    std::pair<Label, ContourId> contour_parts(ContourId t) const; // t != 0
    std::vector<Label> contour_labels(ContourId t) const;
    ContourId contour_of(const std::vector<Label>& ls) const; // most recent first

    PidId pid(Label spawn_loc, ContourId birth) const;
    PidId initial_pid() const;
    PidId new_pid(PidId parent, Label spawn_loc, ContourId t) const;
    const std::pair<Label, ContourId>& pid_parts(PidId p) const;
    std::string pid_name(PidId p) const;
    size_t num_pids() const { return pids_.items.size(); }

    TermId term_ctor(Symbol c, std::vector<TermId> args) const;
    TermId term_pid(PidId p) const;
    TermId term_fun(Label l) const;
    const Term& term(TermId t) const;
    std::string term_to_string(TermId t) const;

    EnvId env_empty() const { return 0; }
    EnvId env_extend(EnvId base, const Subst& binds) const; // symbol -> vaddr
    EnvId env_extend1(EnvId base, Symbol x, VAddrId b) const;
    EnvId env_restrict(EnvId e, const std::vector<Symbol>& fv) const;
    std::optional<VAddrId> env_lookup(EnvId e, Symbol x) const;
    const std::vector<std::pair<Symbol, VAddrId>>& env_entries(EnvId e) const;

    ValueId val_closure(Label loc, EnvId env) const;
    ValueId val_pid(PidId p) const;
    const Value& value(ValueId v) const;
    // Closure of a control-position value term, env restricted to its fv.
    ValueId value_of(Label l, EnvId env) const;
    // Sub-value (x, rho) of a constructor closure's argument variable.
    ValueId sub_value(const Value& parent, Label arg_var) const;

    VAddrId vaddr(PidId p, Symbol x, TermId data, ContourId t) const;
    const std::tuple<PidId, Symbol, TermId, ContourId>& vaddr_parts(VAddrId a) const;
    KAddrId kaddr(PidId p, Label l, EnvId env, ContourId t) const;
    const std::tuple<PidId, Label, EnvId, ContourId>& kaddr_parts(KAddrId a) const;
    KAddrId kaddr_halt() const { return 0; }

    KontId kont_stop() const { return 0; }
    KontId kont_arg(uint32_t index, Label call, std::vector<ValueId> done, EnvId env,
                    KAddrId next) const;
    const Kont& kont(KontId k) const;

    bool is_value_term(Label l) const;

    // resolve follows every pointer of a value through the store, producing a
    // closed term; function closures resolve to an opaque fun term.
    TermId resolve(const State& s, ValueId v) const;

    std::optional<Subst> match(const State& s, EnvId rho, PatternId pat, ValueId d) const;

    struct MMatch {
        uint32_t index;                 // matching pattern (0-based)
        Subst theta;
        std::vector<ValueId> mailbox;   // with the matched message removed
        ValueId message;
        uint32_t message_pos;
    };
    std::optional<MMatch> mmatch(const State& s, const std::vector<PatternId>& pats,
                                 const std::vector<ValueId>& mailbox, EnvId rho) const;

    size_t num_values() const { return values_.items.size(); }

  private:
    ValueId deref_var_closure(const State& s, ValueId d) const;
    bool value_matches(const State& s, ValueId stored, ValueId d, int depth) const;

    template <typename K>
    struct Pool {
        std::vector<K> items;
        std::map<K, uint32_t> index;
        uint32_t intern(const K& k) {
            auto it = index.find(k);
            if (it != index.end()) return it->second;
            uint32_t id = static_cast<uint32_t>(items.size());
            items.push_back(k);
            index.emplace(items.back(), id);
            return id;
        }
    };

    mutable Pool<std::pair<Label, ContourId>> contours_; // id 0 reserved for empty
    mutable Pool<std::pair<Label, ContourId>> pids_;
    mutable Pool<Term> terms_;
    mutable Pool<std::vector<std::pair<Symbol, VAddrId>>> envs_; // id 0 = empty
    mutable Pool<Value> values_;
    mutable Pool<std::tuple<PidId, Symbol, TermId, ContourId>> vaddrs_;
    mutable Pool<std::tuple<PidId, Label, EnvId, ContourId>> kaddrs_; // id 0 = halt
    mutable Pool<Kont> konts_;                                        // id 0 = Stop
};

State init(Ctx& ctx);

// All successors over every pid and every applicable rule.
std::vector<Successor> step(Ctx& ctx, const State& s);

struct Trace {
    std::vector<State> states;      // states[0] = initial
    std::vector<Successor> steps;   // steps[i]: states[i] -> states[i+1]
    bool deadlocked = false;        // no successor before max_steps
};

Trace run(Ctx& ctx, uint64_t seed, uint32_t max_steps);

// One JSON object per line: {step, pid, rule, control_label, probe_tag?}.
std::string trace_to_jsonl(const Ctx& ctx, const Trace& t);

} // namespace lactor::machine
