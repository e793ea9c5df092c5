#include "lactor/absdomains.hpp"

#include <algorithm>

namespace lactor::absdomains {

using machine::TermKind;
using syntax::Node;
using syntax::NodeKind;
using syntax::PatternNode;

const std::set<AbsValueId>* StoreView::lookup_v(AbsVAddrId a) const {
    if (vlog) vlog->insert(a);
    auto it = store.v.find(a);
    return it == store.v.end() ? nullptr : &it->second;
}

const std::set<AbsKontId>* StoreView::lookup_k(AbsKAddrId a) const {
    if (klog) klog->insert(a);
    auto it = store.k.find(a);
    return it == store.k.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// AbsCtx

AbsCtx::AbsCtx(const Program& p, AbstractionConfig cfg) : prog(p), config(std::move(cfg)) {
    times_.intern({});
    data_.intern(AbsData{});   // id 0 = _
    envs_.intern({});
    kaddrs_.intern({0, 0, 0, 0});
    konts_.intern(AbsKont{});
}

AbsTimeId AbsCtx::time_of(const std::vector<Label>& labels) { return times_.intern(labels); }

const std::vector<Label>& AbsCtx::time_labels(AbsTimeId t) const { return times_.items[t]; }

AbsPidId AbsCtx::pid(Label spawn_loc, AbsTimeId t) { return pids_.intern({spawn_loc, t}); }

AbsPidId AbsCtx::initial_pid() { return pid(prog.root, 0); }

bool AbsCtx::pid_is_initial(AbsPidId p) const {
    return pids_.items[p] == std::pair<Label, AbsTimeId>{prog.root, 0};
}

const std::pair<Label, AbsTimeId>& AbsCtx::pid_parts(AbsPidId p) const { return pids_.items[p]; }

AbsPidId AbsCtx::new_pid(AbsPidId parent, Label spawn_loc, AbsTimeId t) {
    auto [pl, pt] = pids_.items[parent];
    AbsTimeId birth = config.time.tick_star(*this, t, config.time.tick(*this, pl, pt));
    return pid(spawn_loc, birth);
}

std::string AbsCtx::pid_name(AbsPidId p) const {
    if (pid_is_initial(p)) return "main";
    const auto& [l, t] = pids_.items[p];
    const auto& sp = prog.nodes[l].span;
    std::string out = "spawn@" + std::to_string(sp.line) + ":" + std::to_string(sp.col);
    for (Label x : times_.items[t]) out += "." + std::to_string(x);
    return out;
}

AbsDataId AbsCtx::data_ctor(Symbol c, std::vector<AbsDataId> args) {
    AbsData d;
    d.wild = false;
    d.ctor = c;
    d.args = std::move(args);
    return data_.intern(d);
}

const AbsData& AbsCtx::data(AbsDataId d) const { return data_.items[d]; }

std::string AbsCtx::data_to_string(AbsDataId d) const {
    const AbsData& ad = data_.items[d];
    if (ad.wild) return "_";
    const std::string& name = prog.syms.name(ad.ctor);
    if (ad.args.empty()) return name;
    bool tuple = name.rfind("tuple", 0) == 0;
    std::string out = tuple ? "{" : name + "(";
    for (size_t i = 0; i < ad.args.size(); i++) {
        if (i) out += ",";
        out += data_to_string(ad.args[i]);
    }
    out += tuple ? "}" : ")";
    return out;
}

AbsEnvId AbsCtx::env_extend(AbsEnvId base,
                            const std::vector<std::pair<Symbol, AbsVAddrId>>& binds) {
    auto entries = envs_.items[base];
    for (const auto& [x, b] : binds) {
        auto it = std::lower_bound(entries.begin(), entries.end(), x,
                                   [](const auto& e, Symbol s) { return e.first < s; });
        if (it != entries.end() && it->first == x)
            it->second = b;
        else
            entries.insert(it, {x, b});
    }
    return envs_.intern(entries);
}

AbsEnvId AbsCtx::env_restrict(AbsEnvId e, const std::vector<Symbol>& fv) {
    const auto& entries = envs_.items[e];
    std::vector<std::pair<Symbol, AbsVAddrId>> out;
    for (const auto& [x, b] : entries)
        if (std::binary_search(fv.begin(), fv.end(), x)) out.push_back({x, b});
    return envs_.intern(out);
}

std::optional<AbsVAddrId> AbsCtx::env_lookup(AbsEnvId e, Symbol x) const {
    const auto& entries = envs_.items[e];
    auto it = std::lower_bound(entries.begin(), entries.end(), x,
                               [](const auto& en, Symbol s) { return en.first < s; });
    if (it != entries.end() && it->first == x) return it->second;
    return std::nullopt;
}

const std::vector<std::pair<Symbol, AbsVAddrId>>& AbsCtx::env_entries(AbsEnvId e) const {
    return envs_.items[e];
}

AbsVAddrId AbsCtx::vaddr(AbsPidId p, Symbol x, AbsDataId d, AbsTimeId t) {
    return vaddrs_.intern({p, x, d, t});
}

const std::tuple<AbsPidId, Symbol, AbsDataId, AbsTimeId>& AbsCtx::vaddr_parts(
    AbsVAddrId a) const {
    return vaddrs_.items[a];
}

AbsValueId AbsCtx::val_closure(Label loc, AbsEnvId env) {
    AbsValue v;
    v.kind = AbsValueKind::Closure;
    v.loc = loc;
    v.env = env;
    return values_.intern(v);
}

AbsValueId AbsCtx::val_pid(AbsPidId p) {
    AbsValue v;
    v.kind = AbsValueKind::Pid;
    v.pid = p;
    return values_.intern(v);
}

const AbsValue& AbsCtx::value(AbsValueId v) const { return values_.items[v]; }

AbsValueId AbsCtx::value_of(Label l, AbsEnvId env) {
    return val_closure(l, env_restrict(env, prog.nodes[l].fv));
}

AbsValueId AbsCtx::sub_value(const AbsValue& parent, Label arg_var) {
    const Node& n = prog.nodes[arg_var];
    auto addr = env_lookup(parent.env, n.name);
    if (!addr) throw machine::DanglingAddress("unbound constructor argument (abstract)");
    return val_closure(arg_var, env_extend(env_empty(), {{n.name, *addr}}));
}

std::string AbsCtx::value_to_string(AbsValueId v) const {
    const AbsValue& av = values_.items[v];
    if (av.kind == AbsValueKind::Pid) return pid_name(av.pid);
    return syntax::node_brief(prog, av.loc);
}

AbsKAddrId AbsCtx::kaddr(AbsPidId p, Label l, AbsEnvId env, AbsTimeId t) {
    return kaddrs_.intern({p, l + 1, env, t});
}

AbsKontId AbsCtx::kont_arg(uint32_t index, Label call, std::vector<AbsValueId> done,
                           AbsEnvId env, AbsKAddrId next) {
    AbsKont k;
    k.stop = false;
    k.index = index;
    k.call = call;
    k.done = std::move(done);
    k.env = env;
    k.next = next;
    return konts_.intern(k);
}

const AbsKont& AbsCtx::kont(AbsKontId k) const { return konts_.items[k]; }

AbsPSId AbsCtx::ps(const AbsProcState& q) { return pss_.intern(q); }

const AbsProcState& AbsCtx::ps_parts(AbsPSId id) const { return pss_.items[id]; }

std::string AbsCtx::ps_name(AbsPSId id) const {
    const AbsProcState& q = pss_.items[id];
    switch (q.control) {
        case AbsControl::Expr: return syntax::node_brief(prog, q.label);
        case AbsControl::PidVal: return "pid:" + pid_name(q.pid_value);
        case AbsControl::Error: return std::string("error:") + machine::error_reason_name(q.err);
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Abstraction maps

AbsTimeId AbsCtx::alpha_time(const machine::Ctx& m, machine::ContourId t) {
    auto it = time_memo_.find(t);
    if (it != time_memo_.end()) return it->second;
    std::vector<Label> ls = m.contour_labels(t);
    if (ls.size() > config.time.k) ls.resize(config.time.k);
    AbsTimeId out = time_of(ls);
    time_memo_.emplace(t, out);
    return out;
}

AbsPidId AbsCtx::alpha_pid(const machine::Ctx& m, machine::PidId p) {
    auto it = pid_memo_.find(p);
    if (it != pid_memo_.end()) return it->second;
    const auto& [l, t] = m.pid_parts(p);
    AbsPidId out = pid(l, alpha_time(m, t));
    pid_memo_.emplace(p, out);
    return out;
}

AbsDataId AbsCtx::alpha_data_at(const machine::Ctx& m, machine::TermId t, uint32_t depth) {
    auto key = std::make_pair(t, depth);
    auto it = data_memo_.find(key);
    if (it != data_memo_.end()) return it->second;
    const machine::Term& tm = m.term(t);
    AbsDataId out = 0;
    if (depth > 0 && tm.kind == TermKind::Ctor) {
        std::vector<AbsDataId> args;
        for (machine::TermId a : tm.args) args.push_back(alpha_data_at(m, a, depth - 1));
        out = data_ctor(tm.ctor, std::move(args));
    }
    // pids and functions are discarded at every depth
    data_memo_.emplace(key, out);
    return out;
}

AbsDataId AbsCtx::alpha_data(const machine::Ctx& m, machine::TermId t) {
    return alpha_data_at(m, t, config.data.depth);
}

AbsDataId AbsCtx::alpha_msg(const machine::Ctx& m, machine::TermId t) {
    return alpha_data_at(m, t, config.msg_data.depth);
}

AbsEnvId AbsCtx::alpha_env(const machine::Ctx& m, machine::EnvId e) {
    auto it = env_memo_.find(e);
    if (it != env_memo_.end()) return it->second;
    std::vector<std::pair<Symbol, AbsVAddrId>> out;
    for (const auto& [x, b] : m.env_entries(e)) out.push_back({x, alpha_vaddr(m, b)});
    AbsEnvId id = envs_.intern(out);
    env_memo_.emplace(e, id);
    return id;
}

AbsVAddrId AbsCtx::alpha_vaddr(const machine::Ctx& m, machine::VAddrId a) {
    auto it = vaddr_memo_.find(a);
    if (it != vaddr_memo_.end()) return it->second;
    const auto& [p, x, d, t] = m.vaddr_parts(a);
    AbsVAddrId out = vaddr(alpha_pid(m, p), x, alpha_data(m, d), alpha_time(m, t));
    vaddr_memo_.emplace(a, out);
    return out;
}

AbsValueId AbsCtx::alpha_value(const machine::Ctx& m, machine::ValueId v) {
    auto it = value_memo_.find(v);
    if (it != value_memo_.end()) return it->second;
    const machine::Value& mv = m.value(v);
    AbsValueId out = mv.kind == machine::ValueKind::Pid
                         ? val_pid(alpha_pid(m, mv.pid))
                         : val_closure(mv.loc, alpha_env(m, mv.env));
    value_memo_.emplace(v, out);
    return out;
}

AbsKAddrId AbsCtx::alpha_kaddr(const machine::Ctx& m, machine::KAddrId a) {
    if (a == m.kaddr_halt()) return kaddr_halt();
    auto it = kaddr_memo_.find(a);
    if (it != kaddr_memo_.end()) return it->second;
    const auto& [p, l1, e, t] = m.kaddr_parts(a);
    AbsKAddrId out = kaddr(alpha_pid(m, p), l1 - 1, alpha_env(m, e), alpha_time(m, t));
    kaddr_memo_.emplace(a, out);
    return out;
}

AbsKontId AbsCtx::alpha_kont(const machine::Ctx& m, machine::KontId k) {
    if (k == m.kont_stop()) return kont_stop();
    auto it = kont_memo_.find(k);
    if (it != kont_memo_.end()) return it->second;
    const machine::Kont& mk = m.kont(k);
    std::vector<AbsValueId> done;
    for (machine::ValueId d : mk.done) done.push_back(alpha_value(m, d));
    AbsKontId out =
        kont_arg(mk.index, mk.call, std::move(done), alpha_env(m, mk.env), alpha_kaddr(m, mk.next));
    kont_memo_.emplace(k, out);
    return out;
}

AbsPSId AbsCtx::alpha_ps(const machine::Ctx& m, const machine::ProcState& q) {
    AbsProcState aq;
    switch (q.control) {
        case machine::Control::Expr: aq.control = AbsControl::Expr; break;
        case machine::Control::PidVal: aq.control = AbsControl::PidVal; break;
        case machine::Control::Error: aq.control = AbsControl::Error; break;
    }
    aq.label = q.label;
    if (q.control == machine::Control::PidVal) aq.pid_value = alpha_pid(m, q.pid_value);
    aq.err = q.err;
    aq.env = alpha_env(m, q.env);
    aq.kont = alpha_kaddr(m, q.kont);
    aq.time = alpha_time(m, q.time);
    return ps(aq);
}

// ---------------------------------------------------------------------------
// TimeAbstraction (k-CFA)

AbsTimeId TimeAbstraction::alpha(AbsCtx& cx, const machine::Ctx& m, machine::ContourId t) const {
    return cx.alpha_time(m, t);
}

AbsTimeId TimeAbstraction::tick(AbsCtx& cx, Label l, AbsTimeId t) const {
    if (k == 0) return 0;
    std::vector<Label> ls = cx.time_labels(t);
    ls.insert(ls.begin(), l);
    if (ls.size() > k) ls.resize(k);
    return cx.time_of(ls);
}

AbsTimeId TimeAbstraction::tick_star(AbsCtx& cx, AbsTimeId prefix, AbsTimeId base) const {
    if (k == 0) return 0;
    std::vector<Label> ls = cx.time_labels(prefix);
    const std::vector<Label>& bs = cx.time_labels(base);
    ls.insert(ls.end(), bs.begin(), bs.end());
    if (ls.size() > k) ls.resize(k);
    return cx.time_of(ls);
}

uint64_t TimeAbstraction::carrier_size(const Program& p, uint64_t cap) const {
    uint64_t labels = p.nodes.size();
    uint64_t total = 0, pow = 1;
    for (uint32_t i = 0; i <= k; i++) {
        total += pow;
        if (total > cap) return cap + 1;
        if (i < k) {
            if (labels != 0 && pow > cap / labels) return cap + 1;
            pow *= labels;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// DataAbstraction (depth-D)

DataAbstraction data_trivial() { return DataAbstraction{0, 10000}; }
DataAbstraction data_depth(uint32_t D) { return DataAbstraction{D, 10000}; }
TimeAbstraction time_kcfa(uint32_t k) { return TimeAbstraction{k}; }
MailboxAbstraction mailbox_set() { return MailboxAbstraction{}; }

AbsDataId DataAbstraction::alpha(AbsCtx& cx, const machine::Ctx& m, machine::TermId t) const {
    struct Rec {
        AbsCtx& cx;
        const machine::Ctx& m;
        AbsDataId go(machine::TermId t, uint32_t d) {
            const machine::Term& tm = m.term(t);
            if (d == 0 || tm.kind != TermKind::Ctor) return cx.data_wild();
            std::vector<AbsDataId> args;
            for (machine::TermId a : tm.args) args.push_back(go(a, d - 1));
            return cx.data_ctor(tm.ctor, std::move(args));
        }
    };
    Rec r{cx, m};
    return r.go(t, depth);
}

namespace {

// Depth-bounded resolution through the abstract store. Cycles through
// conflated addresses contribute nothing (least fixpoint of the recursive
// union); blowing the result budget widens the whole call to {_}.
struct AbsResolver {
    AbsCtx& cx;
    const StoreView& sv;
    uint32_t limit;
    bool overflow = false;
    std::set<std::pair<AbsValueId, uint32_t>> visiting;

    std::vector<AbsDataId> go(AbsValueId v, uint32_t d) {
        if (overflow) return {};
        const AbsValue& av = cx.value(v);
        if (av.kind == AbsValueKind::Pid) return {cx.data_wild()};
        const Node& n = cx.prog.nodes[av.loc];
        switch (n.kind) {
            case NodeKind::Var: {
                auto key = std::make_pair(v, d);
                if (!visiting.insert(key).second) return {};
                auto addr = cx.env_lookup(av.env, n.name);
                std::set<AbsDataId> out;
                if (addr) {
                    const auto* vals = sv.lookup_v(*addr);
                    if (vals)
                        for (AbsValueId w : *vals) {
                            auto sub = go(w, d);
                            out.insert(sub.begin(), sub.end());
                            if (overflow) break;
                        }
                }
                visiting.erase(key);
                return {out.begin(), out.end()};
            }
            case NodeKind::Fun:
            case NodeKind::Prim:
                return {cx.data_wild()};
            case NodeKind::Ctor: {
                if (d == 0) return {cx.data_wild()};
                if (n.kids.empty()) return {cx.data_ctor(n.name, {})};
                std::vector<std::vector<AbsDataId>> choices;
                for (Label kl : n.kids) {
                    AbsValueId sub = cx.sub_value(av, kl);
                    choices.push_back(go(sub, d - 1));
                    if (overflow || choices.back().empty()) return {};
                }
                std::set<AbsDataId> out;
                std::vector<size_t> idx(choices.size(), 0);
                while (true) {
                    std::vector<AbsDataId> args;
                    for (size_t i = 0; i < choices.size(); i++) args.push_back(choices[i][idx[i]]);
                    out.insert(cx.data_ctor(n.name, std::move(args)));
                    if (out.size() > limit) {
                        overflow = true;
                        return {};
                    }
                    size_t i = 0;
                    while (i < idx.size() && ++idx[i] == choices[i].size()) idx[i++] = 0;
                    if (i == idx.size()) break;
                }
                return {out.begin(), out.end()};
            }
            default:
                throw machine::DanglingAddress("abstract closure of a non-value term");
        }
    }
};

} // namespace

std::vector<AbsDataId> DataAbstraction::resolve(AbsCtx& cx, const StoreView& sv,
                                                AbsValueId v) const {
    AbsResolver r{cx, sv, resolve_limit, false, {}};
    std::vector<AbsDataId> out = r.go(v, depth);
    if (r.overflow) return {cx.data_wild()};
    return out;
}

uint64_t DataAbstraction::carrier_size(const Program& p, uint64_t cap) const {
    // N_0 = 1; N_{d+1} = 1 + sum over constructors of N_d^arity.
    uint64_t n = 1;
    for (uint32_t d = 0; d < depth; d++) {
        uint64_t next = 1;
        for (const auto& [c, arity] : p.sigma) {
            uint64_t term = 1;
            for (uint32_t i = 0; i < arity; i++) {
                if (n != 0 && term > cap / n) return cap + 1;
                term *= n;
            }
            next += term;
            if (next > cap) return cap + 1;
        }
        n = next;
    }
    return n;
}

// ---------------------------------------------------------------------------
// MailboxAbstraction (unordered set)

AbsMailbox MailboxAbstraction::alpha(AbsCtx& cx, const machine::Ctx& m, const machine::State&,
                                     const std::vector<machine::ValueId>& mailbox) const {
    AbsMailbox out;
    for (machine::ValueId v : mailbox) out.insert(cx.alpha_value(m, v));
    return out;
}

AbsMailbox MailboxAbstraction::enq(AbsValueId v, const AbsMailbox& m) const {
    AbsMailbox out = m;
    out.insert(v);
    return out;
}

bool MailboxAbstraction::leq(const AbsMailbox& a, const AbsMailbox& b) const {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

AbsMailbox MailboxAbstraction::join(const AbsMailbox& a, const AbsMailbox& b) const {
    AbsMailbox out = a;
    out.insert(b.begin(), b.end());
    return out;
}

std::vector<MMatchHat> MailboxAbstraction::mmatch(AbsCtx& cx, const std::vector<PatternId>& pats,
                                                  const AbsMailbox& m, AbsEnvId,
                                                  const StoreView& sv) const {
    std::vector<MMatchHat> out;
    for (AbsValueId d : m) {
        for (uint32_t i = 0; i < pats.size(); i++) {
            for (AbsSubst& th : abs_match(cx, sv, pats[i], d)) {
                MMatchHat r;
                r.index = i;
                r.theta = std::move(th);
                r.matched = d;
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Abstract match

namespace {

struct AbsMatcher {
    AbsCtx& cx;
    const StoreView& sv;
    std::set<std::pair<PatternId, AbsValueId>> visiting;

    std::vector<AbsSubst> go(PatternId pat, AbsValueId d) {
        const AbsValue& dv = cx.value(d);
        if (dv.kind == AbsValueKind::Closure) {
            const Node& dn = cx.prog.nodes[dv.loc];
            if (dn.kind == NodeKind::Var) {
                auto key = std::make_pair(pat, d);
                if (!visiting.insert(key).second) return {};
                std::vector<AbsSubst> out;
                auto addr = cx.env_lookup(dv.env, dn.name);
                if (addr) {
                    const auto* vals = sv.lookup_v(*addr);
                    if (vals)
                        for (AbsValueId w : *vals) {
                            auto sub = go(pat, w);
                            out.insert(out.end(), sub.begin(), sub.end());
                        }
                }
                visiting.erase(key);
                dedup(out);
                return out;
            }
        }
        const PatternNode& p = cx.prog.patterns[pat];
        if (p.is_var) return {AbsSubst{{p.name, d}}};
        if (dv.kind != AbsValueKind::Closure) return {};
        const Node& dn = cx.prog.nodes[dv.loc];
        if (dn.kind != NodeKind::Ctor || dn.name != p.name || dn.kids.size() != p.args.size())
            return {};
        std::vector<AbsSubst> acc = {AbsSubst{}};
        for (size_t i = 0; i < p.args.size(); i++) {
            AbsValueId sub = cx.sub_value(dv, dn.kids[i]);
            std::vector<AbsSubst> thetas = go(p.args[i], sub);
            std::vector<AbsSubst> next;
            for (const AbsSubst& a : acc)
                for (const AbsSubst& b : thetas) {
                    AbsSubst m = a;
                    if (merge(m, b)) next.push_back(std::move(m));
                }
            acc = std::move(next);
            if (acc.empty()) return {};
        }
        dedup(acc);
        return acc;
    }

    // theta (x) theta': conflicting bindings drop the combination.
    static bool merge(AbsSubst& into, const AbsSubst& from) {
        for (const auto& [x, v] : from) {
            auto it = std::lower_bound(into.begin(), into.end(), x,
                                       [](const auto& e, Symbol s) { return e.first < s; });
            if (it != into.end() && it->first == x) {
                if (it->second != v) return false;
            } else {
                into.insert(it, {x, v});
            }
        }
        return true;
    }

    static void dedup(std::vector<AbsSubst>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
};

} // namespace

std::vector<AbsSubst> abs_match(AbsCtx& cx, const StoreView& sv, PatternId pat, AbsValueId d) {
    AbsMatcher m{cx, sv, {}};
    return m.go(pat, d);
}

// ---------------------------------------------------------------------------
// Configuration

void AbstractionConfig::validate(const Program& p) const {
    if (time.carrier_size(p, carrier_limit) > carrier_limit)
        throw AbstractionNotFinite("time abstraction carrier exceeds the configured bound");
    if (data.carrier_size(p, carrier_limit) > carrier_limit)
        throw AbstractionNotFinite("data abstraction carrier exceeds the configured bound");
    if (msg_data.carrier_size(p, carrier_limit) > carrier_limit)
        throw AbstractionNotFinite("message abstraction carrier exceeds the configured bound");
}

AbstractionConfig default_config(const Program& p, uint32_t k, uint32_t D, int M) {
    AbstractionConfig cfg;
    cfg.time = time_kcfa(k);
    cfg.data = data_depth(D);
    uint32_t m = M >= 0 ? static_cast<uint32_t>(M) : p.max_receive_pattern_depth;
    cfg.msg_data = data_depth(m);
    cfg.mailbox = mailbox_set();
    return cfg;
}

} // namespace lactor::absdomains
