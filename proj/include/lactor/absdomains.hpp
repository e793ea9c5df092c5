#pragma once

// Pluggable basic-domain abstractions (Data, Time, Mailbox) with their
// abstraction maps and abstract auxiliary operations, plus the interning
// context for every abstract entity used by the analysis.

#include "lactor/machine.hpp"
#include "lactor/syntax.hpp"

#include <set>

namespace lactor::absdomains {

using syntax::Label;
using syntax::PatternId;
using syntax::Program;
using syntax::Symbol;

using AbsTimeId = uint32_t;  // 0 = empty contour
using AbsDataId = uint32_t;  // 0 = the wildcard _
using AbsPidId = uint32_t;
using AbsVAddrId = uint32_t;
using AbsEnvId = uint32_t;   // 0 = empty env
using AbsValueId = uint32_t;
using AbsKAddrId = uint32_t; // 0 = the halt address
using AbsKontId = uint32_t;  // 0 = Stop
using AbsPSId = uint32_t;    // abstract process states

using AbsMailbox = std::set<AbsValueId>;
using AbsSubst = std::vector<std::pair<Symbol, AbsValueId>>; // sorted

struct AbstractionNotFinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AbsData {
    bool wild = true;
    Symbol ctor = 0;
    std::vector<AbsDataId> args;
    bool operator<(const AbsData& o) const {
        return std::tie(wild, ctor, args) < std::tie(o.wild, o.ctor, o.args);
    }
};

enum class AbsValueKind : uint8_t { Closure, Pid };

struct AbsValue {
    AbsValueKind kind;
    Label loc = 0;
    AbsEnvId env = 0;
    AbsPidId pid = 0;
    bool operator<(const AbsValue& o) const {
        return std::tie(kind, loc, env, pid) < std::tie(o.kind, o.loc, o.env, o.pid);
    }
};

struct AbsKont {
    bool stop = true;
    uint32_t index = 0;
    Label call = 0;
    std::vector<AbsValueId> done;
    AbsEnvId env = 0;
    AbsKAddrId next = 0;
    bool operator<(const AbsKont& o) const {
        return std::tie(stop, index, call, done, env, next) <
               std::tie(o.stop, o.index, o.call, o.done, o.env, o.next);
    }
};

enum class AbsControl : uint8_t { Expr, PidVal, Error };

struct AbsProcState {
    AbsControl control = AbsControl::Expr;
    Label label = 0;
    AbsPidId pid_value = 0;
    machine::ErrorReason err = machine::ErrorReason::None;
    AbsEnvId env = 0;
    AbsKAddrId kont = 0;
    AbsTimeId time = 0;
    auto operator<=>(const AbsProcState&) const = default;
};

// The widened global abstract store.
struct AbsStore {
    std::map<AbsVAddrId, std::set<AbsValueId>> v;
    std::map<AbsKAddrId, std::set<AbsKontId>> k;
    bool operator==(const AbsStore&) const = default;
};

// Read access to a store with optional read logging, used for the fixpoint
// engine's dependency tracking.
struct StoreView {
    const AbsStore& store;
    std::set<AbsVAddrId>* vlog = nullptr;
    std::set<AbsKAddrId>* klog = nullptr;

    const std::set<AbsValueId>* lookup_v(AbsVAddrId a) const;
    const std::set<AbsKontId>* lookup_k(AbsKAddrId a) const;
};

class AbsCtx;

// ---------------------------------------------------------------------------
// The three basic-domain abstractions. Each family is closed under its
// parameters (depth D, contour length k, set mailboxes), per the analysis
// this artifact implements.

struct TimeAbstraction {
    uint32_t k = 0;

    AbsTimeId t0() const { return 0; }
    AbsTimeId alpha(AbsCtx& cx, const machine::Ctx& m, machine::ContourId t) const;
    AbsTimeId tick(AbsCtx& cx, Label l, AbsTimeId t) const;
    // Prepends a whole abstract contour (newpid needs it).
    AbsTimeId tick_star(AbsCtx& cx, AbsTimeId prefix, AbsTimeId base) const;
    uint64_t carrier_size(const Program& p, uint64_t cap) const;
};

struct DataAbstraction {
    uint32_t depth = 0;
    uint32_t resolve_limit = 10000;

    AbsDataId alpha(AbsCtx& cx, const machine::Ctx& m, machine::TermId t) const;
    // One abstract term per combination of store choices; exceeding
    // resolve_limit widens to {_}.
    std::vector<AbsDataId> resolve(AbsCtx& cx, const StoreView& sv, AbsValueId v) const;
    uint64_t carrier_size(const Program& p, uint64_t cap) const;
};

DataAbstraction data_trivial();
DataAbstraction data_depth(uint32_t D);
TimeAbstraction time_kcfa(uint32_t k);

struct MMatchHat {
    uint32_t index;       // 0-based pattern index
    AbsSubst theta;
    AbsValueId matched;   // the abstract message value
    // The set abstraction does not shrink on extraction: the result mailbox
    // is the input mailbox itself.
};

struct MailboxAbstraction {
    AbsMailbox bottom() const { return {}; }
    AbsMailbox alpha(AbsCtx& cx, const machine::Ctx& m, const machine::State& s,
                     const std::vector<machine::ValueId>& mailbox) const;
    AbsMailbox enq(AbsValueId v, const AbsMailbox& m) const;
    bool leq(const AbsMailbox& a, const AbsMailbox& b) const;
    AbsMailbox join(const AbsMailbox& a, const AbsMailbox& b) const;
    std::vector<MMatchHat> mmatch(AbsCtx& cx, const std::vector<PatternId>& pats,
                                  const AbsMailbox& m, AbsEnvId rho, const StoreView& sv) const;
};

MailboxAbstraction mailbox_set();

struct AbstractionConfig {
    DataAbstraction data;
    TimeAbstraction time;
    MailboxAbstraction mailbox;
    DataAbstraction msg_data;
    uint64_t carrier_limit = 1000000000ull;

    // Checks carrier finiteness bounds; throws AbstractionNotFinite.
    void validate(const Program& p) const;
};

// Default configuration: k-CFA contours, depth-D data, set mailboxes and a
// message abstraction of the maximum receive-pattern depth.
AbstractionConfig default_config(const Program& p, uint32_t k = 0, uint32_t D = 0,
                                 int M = -1);

// All Appendix-style abstract match results for one pattern and value.
std::vector<AbsSubst> abs_match(AbsCtx& cx, const StoreView& sv, PatternId pat, AbsValueId d);

// ---------------------------------------------------------------------------

class AbsCtx {
  public:
    AbsCtx(const Program& p, AbstractionConfig cfg);

    const Program& prog;
    const AbstractionConfig config;

    AbsTimeId time_of(const std::vector<Label>& labels);
    const std::vector<Label>& time_labels(AbsTimeId t) const;

    AbsPidId pid(Label spawn_loc, AbsTimeId t);
    AbsPidId initial_pid();
    bool pid_is_initial(AbsPidId p) const;
    const std::pair<Label, AbsTimeId>& pid_parts(AbsPidId p) const;
    AbsPidId new_pid(AbsPidId parent, Label spawn_loc, AbsTimeId t);
    std::string pid_name(AbsPidId p) const;
    size_t num_pids() const { return pids_.items.size(); }

    AbsDataId data_wild() const { return 0; }
    AbsDataId data_ctor(Symbol c, std::vector<AbsDataId> args);
    const AbsData& data(AbsDataId d) const;
    std::string data_to_string(AbsDataId d) const;
    size_t num_data() const { return data_.items.size(); }

    AbsEnvId env_empty() const { return 0; }
    AbsEnvId env_extend(AbsEnvId base, const std::vector<std::pair<Symbol, AbsVAddrId>>& binds);
    AbsEnvId env_restrict(AbsEnvId e, const std::vector<Symbol>& fv);
    std::optional<AbsVAddrId> env_lookup(AbsEnvId e, Symbol x) const;
    const std::vector<std::pair<Symbol, AbsVAddrId>>& env_entries(AbsEnvId e) const;

    AbsVAddrId vaddr(AbsPidId p, Symbol x, AbsDataId d, AbsTimeId t);
    const std::tuple<AbsPidId, Symbol, AbsDataId, AbsTimeId>& vaddr_parts(AbsVAddrId a) const;

    AbsValueId val_closure(Label loc, AbsEnvId env);
    AbsValueId val_pid(AbsPidId p);
    const AbsValue& value(AbsValueId v) const;
    AbsValueId value_of(Label l, AbsEnvId env);
    AbsValueId sub_value(const AbsValue& parent, Label arg_var);
    std::string value_to_string(AbsValueId v) const;

    AbsKAddrId kaddr(AbsPidId p, Label l, AbsEnvId env, AbsTimeId t);
    AbsKAddrId kaddr_halt() const { return 0; }

    AbsKontId kont_stop() const { return 0; }
    AbsKontId kont_arg(uint32_t index, Label call, std::vector<AbsValueId> done, AbsEnvId env,
                       AbsKAddrId next);
    const AbsKont& kont(AbsKontId k) const;

    AbsPSId ps(const AbsProcState& q);
    const AbsProcState& ps_parts(AbsPSId id) const;
    size_t num_ps() const { return pss_.items.size(); }
    std::string ps_name(AbsPSId id) const;

    // Abstraction maps from concrete entities (memoized per concrete id).
    AbsTimeId alpha_time(const machine::Ctx& m, machine::ContourId t);
    AbsPidId alpha_pid(const machine::Ctx& m, machine::PidId p);
    AbsDataId alpha_data(const machine::Ctx& m, machine::TermId t);   // depth D
    AbsDataId alpha_msg(const machine::Ctx& m, machine::TermId t);    // depth M
    AbsEnvId alpha_env(const machine::Ctx& m, machine::EnvId e);
    AbsVAddrId alpha_vaddr(const machine::Ctx& m, machine::VAddrId a);
    AbsValueId alpha_value(const machine::Ctx& m, machine::ValueId v);
    AbsKAddrId alpha_kaddr(const machine::Ctx& m, machine::KAddrId a);
    AbsKontId alpha_kont(const machine::Ctx& m, machine::KontId k);
    AbsPSId alpha_ps(const machine::Ctx& m, const machine::ProcState& q);

  private:
    AbsDataId alpha_data_at(const machine::Ctx& m, machine::TermId t, uint32_t depth);

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

    Pool<std::vector<Label>> times_;
    Pool<std::pair<Label, AbsTimeId>> pids_;
    Pool<AbsData> data_;
    Pool<std::vector<std::pair<Symbol, AbsVAddrId>>> envs_;
    Pool<std::tuple<AbsPidId, Symbol, AbsDataId, AbsTimeId>> vaddrs_;
    Pool<AbsValue> values_;
    Pool<std::tuple<AbsPidId, Label, AbsEnvId, AbsTimeId>> kaddrs_;
    Pool<AbsKont> konts_;
    Pool<AbsProcState> pss_;

    std::map<std::pair<machine::TermId, uint32_t>, AbsDataId> data_memo_;
    std::map<machine::ContourId, AbsTimeId> time_memo_;
    std::map<machine::PidId, AbsPidId> pid_memo_;
    std::map<machine::EnvId, AbsEnvId> env_memo_;
    std::map<machine::VAddrId, AbsVAddrId> vaddr_memo_;
    std::map<machine::ValueId, AbsValueId> value_memo_;
    std::map<machine::KAddrId, AbsKAddrId> kaddr_memo_;
    std::map<machine::KontId, AbsKontId> kont_memo_;
};

} // namespace lactor::absdomains
