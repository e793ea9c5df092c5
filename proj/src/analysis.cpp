#include "lactor/analysis.hpp"

#include "json.hpp"

#include <algorithm>
#include <deque>

namespace lactor::analysis {

using machine::ErrorReason;
using syntax::Node;
using syntax::NodeKind;
using syntax::PrimOp;

const char* rule_tag_name(RuleTag t) {
    switch (t) {
        case RuleTag::FunEval: return "FunEval";
        case RuleTag::ArgEval: return "ArgEval";
        case RuleTag::Apply: return "Apply";
        case RuleTag::Vars: return "Vars";
        case RuleTag::Letrec: return "Letrec";
        case RuleTag::Case: return "Case";
        case RuleTag::Choice: return "Choice";
        case RuleTag::Probe: return "Probe";
        case RuleTag::Self: return "Self";
        case RuleTag::Receive: return "Receive";
        case RuleTag::Send: return "Send";
        case RuleTag::Spawn: return "Spawn";
    }
    return "?";
}

RuleTag tag_of(machine::Rule r) {
    switch (r) {
        case machine::Rule::FunEval: return RuleTag::FunEval;
        case machine::Rule::ArgEval: return RuleTag::ArgEval;
        case machine::Rule::Apply: return RuleTag::Apply;
        case machine::Rule::Vars: return RuleTag::Vars;
        case machine::Rule::Letrec: return RuleTag::Letrec;
        case machine::Rule::Case: return RuleTag::Case;
        case machine::Rule::Choice: return RuleTag::Choice;
        case machine::Rule::Probe: return RuleTag::Probe;
        case machine::Rule::Self: return RuleTag::Self;
        case machine::Rule::Receive: return RuleTag::Receive;
        case machine::Rule::Send: return RuleTag::Send;
        case machine::Rule::Spawn: return RuleTag::Spawn;
    }
    return RuleTag::FunEval;
}

bool leq(const MailboxAbstraction& mb, const GlobalAbsState& a, const GlobalAbsState& b) {
    for (const auto& [p, qs] : a.procs) {
        auto it = b.procs.find(p);
        if (it == b.procs.end()) {
            if (!qs.empty()) return false;
            continue;
        }
        if (!std::includes(it->second.begin(), it->second.end(), qs.begin(), qs.end()))
            return false;
    }
    for (const auto& [p, m] : a.mailboxes) {
        auto it = b.mailboxes.find(p);
        if (it == b.mailboxes.end()) {
            if (!m.empty()) return false;
            continue;
        }
        if (!mb.leq(m, it->second)) return false;
    }
    for (const auto& [addr, vs] : a.store.v) {
        auto it = b.store.v.find(addr);
        if (it == b.store.v.end()) {
            if (!vs.empty()) return false;
            continue;
        }
        if (!std::includes(it->second.begin(), it->second.end(), vs.begin(), vs.end()))
            return false;
    }
    for (const auto& [addr, ks] : a.store.k) {
        auto it = b.store.k.find(addr);
        if (it == b.store.k.end()) {
            if (!ks.empty()) return false;
            continue;
        }
        if (!std::includes(it->second.begin(), it->second.end(), ks.begin(), ks.end()))
            return false;
    }
    return true;
}

namespace {

struct RawTransition {
    AbsPidId pid = 0;
    AbsPSId from = 0, to = 0;
    RuleTag rule = RuleTag::FunEval;
    EffectKind effect = EffectKind::None;
    AbsValueId payload = 0; // Receive: matched value; Send: sent value
    AbsPidId target = 0;
    AbsPidId child = 0;
    AbsPSId child_state = 0;
    auto operator<=>(const RawTransition&) const = default;
};

struct Facts {
    std::vector<std::pair<AbsPidId, AbsPSId>> procs;
    std::vector<std::pair<AbsVAddrId, AbsValueId>> vjoins;
    std::vector<std::pair<AbsKAddrId, AbsKontId>> kjoins;
    std::vector<std::pair<AbsPidId, AbsValueId>> menq;
    std::vector<AbsPidId> mtouch;
    std::vector<RawTransition> trans;
};

// Address-binding choices for one substitution: one variant per combination
// of data-abstraction choices for the bound values.
struct BindVariant {
    std::vector<std::pair<syntax::Symbol, AbsVAddrId>> binds;
};

constexpr size_t kBindComboLimit = 1024;

std::vector<BindVariant> bind_variants(AbsCtx& cx, const StoreView& sv, AbsPidId pid,
                                       AbsTimeId time, const AbsSubst& theta, Facts& out) {
    std::vector<std::vector<AbsDataId>> choices;
    for (const auto& [x, d] : theta) {
        choices.push_back(cx.config.data.resolve(cx, sv, d));
        if (choices.back().empty()) return {};
    }
    size_t total = 1;
    bool overflow = false;
    for (const auto& c : choices) {
        total *= c.size();
        if (total > kBindComboLimit) {
            overflow = true;
            break;
        }
    }
    std::vector<BindVariant> variants;
    if (overflow) {
        BindVariant v;
        for (const auto& [x, d] : theta) {
            AbsVAddrId b = cx.vaddr(pid, x, cx.data_wild(), time);
            v.binds.push_back({x, b});
            out.vjoins.push_back({b, d});
        }
        variants.push_back(std::move(v));
        return variants;
    }
    std::vector<size_t> idx(choices.size(), 0);
    while (true) {
        BindVariant v;
        for (size_t j = 0; j < theta.size(); j++) {
            AbsVAddrId b = cx.vaddr(pid, theta[j].first, choices[j][idx[j]], time);
            v.binds.push_back({theta[j].first, b});
            out.vjoins.push_back({b, theta[j].second});
        }
        variants.push_back(std::move(v));
        size_t i = 0;
        while (i < idx.size() && ++idx[i] == choices[i].size()) idx[i++] = 0;
        if (i == idx.size() || idx.empty()) break;
    }
    return variants;
}

struct Firer {
    AbsCtx& cx;
    const GlobalAbsState& g;
    Facts& out;
    StoreView sv;
    bool* mailbox_read = nullptr;

    const syntax::Program& prog() const { return cx.prog; }

    void add_trans(AbsPidId pid, AbsPSId from, const AbsProcState& to, RuleTag rule,
                   EffectKind effect = EffectKind::None, AbsValueId payload = 0,
                   AbsPidId target = 0, AbsPidId child = 0, AbsPSId child_state = 0) {
        AbsPSId toid = cx.ps(to);
        out.procs.push_back({pid, toid});
        RawTransition t;
        t.pid = pid;
        t.from = from;
        t.to = toid;
        t.rule = rule;
        t.effect = effect;
        t.payload = payload;
        t.target = target;
        t.child = child;
        t.child_state = child_state;
        out.trans.push_back(t);
    }

    void error_to(AbsPidId pid, AbsPSId from, const AbsProcState& q, RuleTag rule,
                  ErrorReason reason, syntax::Label at) {
        AbsProcState e;
        e.control = AbsControl::Error;
        e.err = reason;
        e.label = at;
        e.env = q.env;
        e.kont = q.kont;
        e.time = q.time;
        add_trans(pid, from, e, rule);
    }

    void value_position(AbsPidId pid, AbsPSId qid, const AbsProcState& q, AbsValueId dval) {
        const auto* konts = sv.lookup_k(q.kont);
        if (!konts) return;
        std::vector<AbsKontId> klist(konts->begin(), konts->end());
        for (AbsKontId kid : klist) {
            const AbsKont k = cx.kont(kid); // copy: pools may grow while firing
            if (k.stop) continue;
            uint32_t n = prog().len(k.call);
            if (k.index < n) {
                syntax::Label next_arg = prog().arg(k.call, k.index + 1);
                AbsKAddrId b = cx.kaddr(pid, next_arg, k.env, q.time);
                std::vector<AbsValueId> done = k.done;
                done.push_back(dval);
                out.kjoins.push_back(
                    {b, cx.kont_arg(k.index + 1, k.call, std::move(done), k.env, k.next)});
                AbsProcState q2;
                q2.control = AbsControl::Expr;
                q2.label = next_arg;
                q2.env = k.env;
                q2.kont = b;
                q2.time = q.time;
                add_trans(pid, qid, q2, RuleTag::ArgEval);
                continue;
            }
            std::vector<AbsValueId> vals = k.done;
            vals.push_back(dval);
            const AbsValue d0 = cx.value(vals[0]);
            if (d0.kind == AbsValueKind::Pid) {
                error_to(pid, qid, q, RuleTag::Apply, ErrorReason::ApplyNonFunction, k.call);
                continue;
            }
            const Node& fn = prog().nodes[d0.loc];
            if (fn.kind == NodeKind::Fun) {
                if (fn.params.size() != n) {
                    error_to(pid, qid, q, RuleTag::Apply, ErrorReason::WrongArity, k.call);
                    continue;
                }
                AbsSubst theta;
                for (uint32_t i = 0; i < n; i++) theta.push_back({fn.params[i], vals[i + 1]});
                std::sort(theta.begin(), theta.end());
                for (const BindVariant& bv : bind_variants(cx, sv, pid, q.time, theta, out)) {
                    AbsProcState q2;
                    q2.control = AbsControl::Expr;
                    q2.label = fn.kids[0];
                    q2.env = cx.env_extend(d0.env, bv.binds);
                    q2.kont = k.next;
                    q2.time = cx.config.time.tick(cx, k.call, q.time);
                    add_trans(pid, qid, q2, RuleTag::Apply);
                }
                continue;
            }
            if (fn.kind == NodeKind::Prim &&
                fn.name == static_cast<syntax::Symbol>(PrimOp::Send)) {
                const AbsValue target = cx.value(vals[1]);
                if (target.kind != AbsValueKind::Pid) {
                    error_to(pid, qid, q, RuleTag::Send, ErrorReason::SendToNonPid, k.call);
                    continue;
                }
                out.menq.push_back({target.pid, vals[2]});
                AbsProcState q2 = q;
                q2.kont = k.next;
                add_trans(pid, qid, q2, RuleTag::Send, EffectKind::Send, vals[2], target.pid);
                continue;
            }
            if (fn.kind == NodeKind::Prim &&
                fn.name == static_cast<syntax::Symbol>(PrimOp::Spawn)) {
                const AbsValue thunk = cx.value(vals[1]);
                bool ok = thunk.kind == AbsValueKind::Closure &&
                          prog().nodes[thunk.loc].kind == NodeKind::Fun &&
                          prog().nodes[thunk.loc].params.empty();
                if (!ok) {
                    error_to(pid, qid, q, RuleTag::Spawn, ErrorReason::SpawnNonFunction, k.call);
                    continue;
                }
                AbsPidId child = cx.new_pid(pid, k.call, q.time);
                AbsProcState qc;
                qc.control = AbsControl::Expr;
                qc.label = prog().nodes[thunk.loc].kids[0];
                qc.env = thunk.env;
                qc.kont = cx.kaddr_halt();
                qc.time = cx.config.time.t0();
                AbsPSId qcid = cx.ps(qc);
                out.procs.push_back({child, qcid});
                out.mtouch.push_back(child);
                AbsProcState q2;
                q2.control = AbsControl::PidVal;
                q2.pid_value = child;
                q2.env = k.env;
                q2.kont = k.next;
                q2.time = q.time;
                add_trans(pid, qid, q2, RuleTag::Spawn, EffectKind::Spawn, 0, 0, child, qcid);
                continue;
            }
            error_to(pid, qid, q, RuleTag::Apply, ErrorReason::ApplyNonFunction, k.call);
        }
    }

    void fire(AbsPidId pid, AbsPSId qid) {
        const AbsProcState q = cx.ps_parts(qid);
        if (q.control == AbsControl::Error) return;
        if (q.control == AbsControl::PidVal) {
            value_position(pid, qid, q, cx.val_pid(q.pid_value));
            return;
        }
        const Node& node = prog().nodes[q.label];
        if (node.kind == NodeKind::Fun || node.kind == NodeKind::Ctor ||
            node.kind == NodeKind::Prim) {
            value_position(pid, qid, q, cx.value_of(q.label, q.env));
            return;
        }
        switch (node.kind) {
            case NodeKind::Var: {
                auto addr = cx.env_lookup(q.env, node.name);
                if (!addr)
                    throw machine::DanglingAddress("unbound variable (abstract) " +
                                                   prog().syms.name(node.name));
                const auto* vals = sv.lookup_v(*addr);
                if (!vals) return;
                std::vector<AbsValueId> vlist(vals->begin(), vals->end());
                for (AbsValueId vid : vlist) {
                    const AbsValue v = cx.value(vid);
                    AbsProcState q2 = q;
                    if (v.kind == AbsValueKind::Closure) {
                        q2.control = AbsControl::Expr;
                        q2.label = v.loc;
                        q2.env = v.env;
                    } else {
                        q2.control = AbsControl::PidVal;
                        q2.pid_value = v.pid;
                    }
                    add_trans(pid, qid, q2, RuleTag::Vars);
                }
                return;
            }
            case NodeKind::App: {
                syntax::Label fn = prog().arg(q.label, 0);
                AbsKAddrId b = cx.kaddr(pid, fn, q.env, q.time);
                out.kjoins.push_back({b, cx.kont_arg(0, q.label, {}, q.env, q.kont)});
                AbsProcState q2 = q;
                q2.label = fn;
                q2.kont = b;
                add_trans(pid, qid, q2, RuleTag::FunEval);
                return;
            }
            case NodeKind::Letrec: {
                size_t nb = node.params.size();
                std::vector<std::pair<syntax::Symbol, AbsVAddrId>> binds;
                for (size_t i = 0; i < nb; i++) {
                    AbsVAddrId b = cx.vaddr(pid, node.params[i], cx.data_wild(), q.time);
                    binds.push_back({node.params[i], b});
                }
                std::sort(binds.begin(), binds.end());
                AbsEnvId rho = cx.env_extend(q.env, binds);
                for (size_t i = 0; i < nb; i++) {
                    AbsVAddrId b = 0;
                    for (const auto& [x, a] : binds)
                        if (x == node.params[i]) b = a;
                    out.vjoins.push_back({b, cx.value_of(node.kids[i], rho)});
                }
                AbsProcState q2 = q;
                q2.label = node.kids.back();
                q2.env = rho;
                add_trans(pid, qid, q2, RuleTag::Letrec);
                return;
            }
            case NodeKind::Case: {
                const Node& scrut = prog().nodes[node.kids[0]];
                auto addr = cx.env_lookup(q.env, scrut.name);
                if (!addr) throw machine::DanglingAddress("unbound case scrutinee (abstract)");
                const auto* vals = sv.lookup_v(*addr);
                if (!vals) return;
                std::vector<AbsValueId> vlist(vals->begin(), vals->end());
                for (AbsValueId d : vlist) {
                    bool matched = false;
                    for (const auto& cl : node.clauses) {
                        for (const AbsSubst& th : abs_match(cx, sv, cl.pat, d)) {
                            matched = true;
                            for (const BindVariant& bv :
                                 bind_variants(cx, sv, pid, q.time, th, out)) {
                                AbsProcState q2 = q;
                                q2.label = cl.body;
                                q2.env = cx.env_extend(q.env, bv.binds);
                                add_trans(pid, qid, q2, RuleTag::Case);
                            }
                        }
                    }
                    if (!matched)
                        error_to(pid, qid, q, RuleTag::Case, ErrorReason::CaseNoMatch, q.label);
                }
                return;
            }
            case NodeKind::Receive: {
                if (mailbox_read) *mailbox_read = true;
                std::vector<syntax::PatternId> pats;
                for (const auto& cl : node.clauses) pats.push_back(cl.pat);
                auto mit = g.mailboxes.find(pid);
                static const AbsMailbox empty;
                const AbsMailbox& mb = mit == g.mailboxes.end() ? empty : mit->second;
                for (const MMatchHat& mm :
                     cx.config.mailbox.mmatch(cx, pats, mb, q.env, sv)) {
                    for (const BindVariant& bv :
                         bind_variants(cx, sv, pid, q.time, mm.theta, out)) {
                        AbsProcState q2 = q;
                        q2.label = node.clauses[mm.index].body;
                        q2.env = cx.env_extend(q.env, bv.binds);
                        add_trans(pid, qid, q2, RuleTag::Receive, EffectKind::Receive,
                                  mm.matched);
                    }
                }
                return;
            }
            case NodeKind::SelfPid: {
                AbsProcState q2 = q;
                q2.control = AbsControl::PidVal;
                q2.pid_value = pid;
                add_trans(pid, qid, q2, RuleTag::Self);
                return;
            }
            case NodeKind::Choice: {
                for (syntax::Label alt : node.kids) {
                    AbsProcState q2 = q;
                    q2.label = alt;
                    add_trans(pid, qid, q2, RuleTag::Choice);
                }
                return;
            }
            case NodeKind::Probe: {
                AbsProcState q2 = q;
                q2.label = node.kids[0];
                add_trans(pid, qid, q2, RuleTag::Probe);
                return;
            }
            default:
                throw machine::DanglingAddress("unexpected abstract control node");
        }
    }
};

GlobalAbsState abs_init(AbsCtx& cx) {
    GlobalAbsState g;
    AbsPidId i0 = cx.initial_pid();
    AbsProcState q;
    q.control = AbsControl::Expr;
    q.label = cx.prog.root;
    q.env = cx.env_empty();
    q.kont = cx.kaddr_halt();
    q.time = cx.config.time.t0();
    g.procs[i0] = {cx.ps(q)};
    g.mailboxes[i0] = {};
    g.store.k[cx.kaddr_halt()] = {cx.kont_stop()};
    return g;
}

std::vector<AbsTransition> decorate(AbsCtx& cx, const AbsStore& store,
                                    const std::set<RawTransition>& raw) {
    StoreView sv{store, nullptr, nullptr};
    std::set<AbsTransition> out;
    for (const RawTransition& r : raw) {
        AbsTransition t;
        t.pid = r.pid;
        t.from = r.from;
        t.to = r.to;
        t.rule = r.rule;
        t.effect = r.effect;
        t.target = r.target;
        t.child = r.child;
        t.child_state = r.child_state;
        if (r.effect == EffectKind::Receive || r.effect == EffectKind::Send) {
            for (AbsDataId m : cx.config.msg_data.resolve(cx, sv, r.payload)) {
                t.msg = m;
                out.insert(t);
            }
        } else {
            out.insert(t);
        }
    }
    return {out.begin(), out.end()};
}

class Engine {
  public:
    explicit Engine(AbsCtx& cx) : cx_(cx) {}

    void run() {
        g_ = abs_init(cx_);
        for (const auto& [p, qs] : g_.procs)
            for (AbsPSId q : qs) enqueue(p, q);
        while (!queue_.empty()) {
            auto [p, q] = queue_.front();
            queue_.pop_front();
            inqueue_.erase({p, q});
            iterations_++;
            Facts f;
            std::set<AbsVAddrId> vlog;
            std::set<AbsKAddrId> klog;
            bool mread = false;
            Firer firer{cx_, g_, f, StoreView{g_.store, &vlog, &klog}, &mread};
            firer.fire(p, q);
            for (AbsVAddrId a : vlog) vdeps_[a].insert({p, q});
            for (AbsKAddrId a : klog) kdeps_[a].insert({p, q});
            if (mread) mdeps_[p].insert({p, q});
            apply(f);
        }
    }

    GlobalAbsState& state() { return g_; }
    std::set<RawTransition>& raw() { return raw_; }
    uint64_t iterations() const { return iterations_; }

  private:
    void enqueue(AbsPidId p, AbsPSId q) {
        if (inqueue_.insert({p, q}).second) queue_.push_back({p, q});
    }

    void apply(Facts& f) {
        for (AbsPidId p : f.mtouch) g_.mailboxes.try_emplace(p);
        for (const auto& [p, q] : f.procs)
            if (g_.procs[p].insert(q).second) enqueue(p, q);
        for (const auto& [a, v] : f.vjoins)
            if (g_.store.v[a].insert(v).second)
                for (const auto& [p, q] : vdeps_[a]) enqueue(p, q);
        for (const auto& [a, k] : f.kjoins)
            if (g_.store.k[a].insert(k).second)
                for (const auto& [p, q] : kdeps_[a]) enqueue(p, q);
        for (const auto& [p, v] : f.menq)
            if (g_.mailboxes[p].insert(v).second)
                for (const auto& [dp, dq] : mdeps_[p]) enqueue(dp, dq);
        for (const RawTransition& t : f.trans) raw_.insert(t);
    }

    AbsCtx& cx_;
    GlobalAbsState g_;
    std::set<RawTransition> raw_;
    std::deque<std::pair<AbsPidId, AbsPSId>> queue_;
    std::set<std::pair<AbsPidId, AbsPSId>> inqueue_;
    std::map<AbsVAddrId, std::set<std::pair<AbsPidId, AbsPSId>>> vdeps_;
    std::map<AbsKAddrId, std::set<std::pair<AbsPidId, AbsPSId>>> kdeps_;
    std::map<AbsPidId, std::set<std::pair<AbsPidId, AbsPSId>>> mdeps_;
    uint64_t iterations_ = 0;
};

} // namespace

std::pair<GlobalAbsState, std::vector<AbsTransition>> abstract_step(AbsCtx& cx,
                                                                    const GlobalAbsState& g) {
    Facts f;
    std::set<RawTransition> raw;
    for (const auto& [p, qs] : g.procs) {
        for (AbsPSId q : qs) {
            Firer firer{cx, g, f, StoreView{g.store, nullptr, nullptr}, nullptr};
            firer.fire(p, q);
        }
    }
    GlobalAbsState out = g;
    for (AbsPidId p : f.mtouch) out.mailboxes.try_emplace(p);
    for (const auto& [p, q] : f.procs) out.procs[p].insert(q);
    for (const auto& [a, v] : f.vjoins) out.store.v[a].insert(v);
    for (const auto& [a, k] : f.kjoins) out.store.k[a].insert(k);
    for (const auto& [p, v] : f.menq) out.mailboxes[p].insert(v);
    for (const RawTransition& t : f.trans) raw.insert(t);
    return {std::move(out), decorate(cx, g.store, raw)};
}

AnalysisResult analyze(const Program& prog, const AbstractionConfig& cfg) {
    cfg.validate(prog);
    auto cx = std::make_shared<AbsCtx>(prog, cfg);
    Engine engine(*cx);
    engine.run();

    // One verification sweep at the fixpoint also yields the canonical
    // decorated transition set.
    auto [g2, transitions] = abstract_step(*cx, engine.state());
    if (!(g2 == engine.state()))
        throw std::logic_error("analysis fixpoint is not closed under abstract_step");

    AnalysisResult r;
    r.ctx = cx;
    r.fixpoint = engine.state();
    r.transitions = std::move(transitions);
    r.iterations = engine.iterations();
    r.init_pid = cx->initial_pid();
    AbsProcState q0;
    q0.control = AbsControl::Expr;
    q0.label = prog.root;
    q0.env = cx->env_empty();
    q0.kont = cx->kaddr_halt();
    q0.time = cfg.time.t0();
    r.init_state = cx->ps(q0);
    return r;
}

GlobalAbsState alpha_cfa(AbsCtx& cx, const machine::Ctx& m, const machine::State& s) {
    GlobalAbsState g;
    for (const auto& [pid, q] : s.procs) {
        g.procs[cx.alpha_pid(m, pid)].insert(cx.alpha_ps(m, q));
    }
    for (const auto& [pid, mbox] : s.mailboxes) {
        AbsPidId ap = cx.alpha_pid(m, pid);
        AbsMailbox am = cx.config.mailbox.alpha(cx, m, s, mbox);
        auto it = g.mailboxes.find(ap);
        if (it == g.mailboxes.end())
            g.mailboxes[ap] = std::move(am);
        else
            it->second = cx.config.mailbox.join(it->second, am);
    }
    for (const auto& [a, v] : s.vstore)
        g.store.v[cx.alpha_vaddr(m, a)].insert(cx.alpha_value(m, v));
    for (const auto& [a, k] : s.kstore)
        g.store.k[cx.alpha_kaddr(m, a)].insert(cx.alpha_kont(m, k));
    return g;
}

std::optional<syntax::Symbol> AnalysisResult::probe_tag(AbsPSId s) const {
    const AbsProcState& q = ctx->ps_parts(s);
    if (q.control != AbsControl::Expr) return std::nullopt;
    const Node& n = ctx->prog.nodes[q.label];
    if (n.kind != NodeKind::Probe) return std::nullopt;
    return n.name;
}

bool AnalysisResult::reaches_probe(syntax::Symbol tag) const {
    for (const auto& [p, qs] : fixpoint.procs)
        for (AbsPSId q : qs)
            if (probe_tag(q) == std::optional<syntax::Symbol>(tag)) return true;
    return false;
}

std::string to_json(const AnalysisResult& r) {
    nlohmann::json j;
    AbsCtx& cx = *r.ctx;
    std::set<AbsPidId> pids;
    std::set<AbsPSId> states;
    for (const auto& [p, qs] : r.fixpoint.procs) {
        pids.insert(p);
        states.insert(qs.begin(), qs.end());
    }
    for (const AbsTransition& t : r.transitions) {
        pids.insert(t.pid);
        states.insert(t.from);
        states.insert(t.to);
        if (t.effect == EffectKind::Spawn) {
            pids.insert(t.child);
            states.insert(t.child_state);
        }
        if (t.effect == EffectKind::Send) pids.insert(t.target);
    }
    j["pid_classes"] = nlohmann::json::array();
    for (AbsPidId p : pids)
        j["pid_classes"].push_back({{"id", p}, {"name", cx.pid_name(p)}});
    j["states"] = nlohmann::json::array();
    for (AbsPSId s : states) {
        nlohmann::json js{{"id", s}, {"name", cx.ps_name(s)}};
        const AbsProcState& q = cx.ps_parts(s);
        if (q.control == AbsControl::Expr) js["label"] = q.label;
        auto tag = r.probe_tag(s);
        if (tag) js["probe_tag"] = cx.prog.syms.name(*tag);
        j["states"].push_back(js);
    }
    j["transitions"] = nlohmann::json::array();
    for (const AbsTransition& t : r.transitions) {
        nlohmann::json jt{{"pid_class", t.pid},
                          {"from", t.from},
                          {"to", t.to},
                          {"rule", rule_tag_name(t.rule)}};
        switch (t.effect) {
            case EffectKind::None: break;
            case EffectKind::Receive: jt["effect"] = {{"kind", "receive"}, {"msg", cx.data_to_string(t.msg)}}; break;
            case EffectKind::Send:
                jt["effect"] = {{"kind", "send"},
                                {"msg", cx.data_to_string(t.msg)},
                                {"target", t.target}};
                break;
            case EffectKind::Spawn:
                jt["effect"] = {{"kind", "spawn"},
                                {"child", t.child},
                                {"child_state", t.child_state}};
                break;
        }
        j["transitions"].push_back(jt);
    }
    j["init"] = {{"pid_class", r.init_pid}, {"state", r.init_state}};
    j["stats"] = {{"iterations", r.iterations},
                  {"pid_classes", pids.size()},
                  {"states", states.size()},
                  {"transitions", r.transitions.size()}};
    return j.dump(2);
}

} // namespace lactor::analysis
