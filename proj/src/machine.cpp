#include "lactor/machine.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace lactor::machine {

using syntax::Node;
using syntax::NodeKind;
using syntax::PatternNode;
using syntax::PrimOp;

const char* rule_name(Rule r) {
    switch (r) {
        case Rule::FunEval: return "FunEval";
        case Rule::ArgEval: return "ArgEval";
        case Rule::Apply: return "Apply";
        case Rule::Vars: return "Vars";
        case Rule::Letrec: return "Letrec";
        case Rule::Case: return "Case";
        case Rule::Choice: return "Choice";
        case Rule::Probe: return "Probe";
        case Rule::Self: return "Self";
        case Rule::Receive: return "Receive";
        case Rule::Send: return "Send";
        case Rule::Spawn: return "Spawn";
    }
    return "?";
}

const char* error_reason_name(ErrorReason r) {
    switch (r) {
        case ErrorReason::None: return "none";
        case ErrorReason::ApplyNonFunction: return "apply-non-function";
        case ErrorReason::WrongArity: return "wrong-arity";
        case ErrorReason::CaseNoMatch: return "case-no-match";
        case ErrorReason::SendToNonPid: return "send-to-non-pid";
        case ErrorReason::SpawnNonFunction: return "spawn-non-function";
    }
    return "?";
}

Ctx::Ctx(const Program& p) : prog(p) {
    contours_.intern({0, 0});                 // id 0: empty contour sentinel
    envs_.intern({});                         // id 0: empty env
    kaddrs_.intern({0, 0, 0, 0});             // id 0: the halt address
    konts_.intern(Kont{});                    // id 0: Stop
}

ContourId Ctx::tick(Label l, ContourId t) const { return contours_.intern({l + 1, t}); }

ContourId Ctx::tick_star(ContourId prefix, ContourId base) const {
    std::vector<Label> ls = contour_labels(prefix);
    ContourId out = base;
    for (size_t i = ls.size(); i-- > 0;) out = tick(ls[i], out);
    return out;
}

std::pair<Label, ContourId> Ctx::contour_parts(ContourId t) const {
    const auto& c = contours_.items[t];
    return {c.first - 1, c.second};
}

std::vector<Label> Ctx::contour_labels(ContourId t) const {
    std::vector<Label> out;
    while (t != 0) {
        auto [l, rest] = contour_parts(t);
        out.push_back(l);
        t = rest;
    }
    return out;
}

ContourId Ctx::contour_of(const std::vector<Label>& ls) const {
    ContourId out = 0;
    for (size_t i = ls.size(); i-- > 0;) out = tick(ls[i], out);
    return out;
}

PidId Ctx::pid(Label spawn_loc, ContourId birth) const { return pids_.intern({spawn_loc, birth}); }

PidId Ctx::initial_pid() const { return pid(prog.root, 0); }

PidId Ctx::new_pid(PidId parent, Label spawn_loc, ContourId t) const {
    auto [pl, pt] = pids_.items[parent];
    return pid(spawn_loc, tick_star(t, tick(pl, pt)));
}

const std::pair<Label, ContourId>& Ctx::pid_parts(PidId p) const { return pids_.items[p]; }

std::string Ctx::pid_name(PidId p) const {
    const auto& [l, t] = pids_.items[p];
    std::ostringstream os;
    os << "<" << l;
    for (Label x : contour_labels(t)) os << "." << x;
    os << ">";
    return os.str();
}

TermId Ctx::term_ctor(Symbol c, std::vector<TermId> args) const {
    Term t;
    t.kind = TermKind::Ctor;
    t.ctor = c;
    t.args = std::move(args);
    return terms_.intern(t);
}

TermId Ctx::term_pid(PidId p) const {
    Term t;
    t.kind = TermKind::Pid;
    t.pid = p;
    return terms_.intern(t);
}

TermId Ctx::term_fun(Label l) const {
    Term t;
    t.kind = TermKind::Fun;
    t.fun = l;
    return terms_.intern(t);
}

const Term& Ctx::term(TermId t) const { return terms_.items[t]; }

std::string Ctx::term_to_string(TermId t) const {
    const Term& tm = terms_.items[t];
    switch (tm.kind) {
        case TermKind::Pid: return pid_name(tm.pid);
        case TermKind::Fun: return "<fun@" + std::to_string(tm.fun) + ">";
        case TermKind::Ctor: {
            const std::string& name = prog.syms.name(tm.ctor);
            if (tm.args.empty()) return name;
            if (name.rfind("tuple", 0) == 0) {
                std::string out = "{";
                for (size_t i = 0; i < tm.args.size(); i++) {
                    if (i) out += ",";
                    out += term_to_string(tm.args[i]);
                }
                return out + "}";
            }
            std::string out = name + "(";
            for (size_t i = 0; i < tm.args.size(); i++) {
                if (i) out += ",";
                out += term_to_string(tm.args[i]);
            }
            return out + ")";
        }
    }
    return "?";
}

EnvId Ctx::env_extend(EnvId base, const Subst& binds) const {
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

EnvId Ctx::env_extend1(EnvId base, Symbol x, VAddrId b) const { return env_extend(base, {{x, b}}); }

EnvId Ctx::env_restrict(EnvId e, const std::vector<Symbol>& fv) const {
    const auto& entries = envs_.items[e];
    std::vector<std::pair<Symbol, VAddrId>> out;
    for (const auto& [x, b] : entries)
        if (std::binary_search(fv.begin(), fv.end(), x)) out.push_back({x, b});
    return envs_.intern(out);
}

std::optional<VAddrId> Ctx::env_lookup(EnvId e, Symbol x) const {
    const auto& entries = envs_.items[e];
    auto it = std::lower_bound(entries.begin(), entries.end(), x,
                               [](const auto& en, Symbol s) { return en.first < s; });
    if (it != entries.end() && it->first == x) return it->second;
    return std::nullopt;
}

const std::vector<std::pair<Symbol, VAddrId>>& Ctx::env_entries(EnvId e) const {
    return envs_.items[e];
}

ValueId Ctx::val_closure(Label loc, EnvId env) const {
    Value v;
    v.kind = ValueKind::Closure;
    v.loc = loc;
    v.env = env;
    return values_.intern(v);
}

ValueId Ctx::val_pid(PidId p) const {
    Value v;
    v.kind = ValueKind::Pid;
    v.pid = p;
    return values_.intern(v);
}

const Value& Ctx::value(ValueId v) const { return values_.items[v]; }

ValueId Ctx::value_of(Label l, EnvId env) const {
    return val_closure(l, env_restrict(env, prog.nodes[l].fv));
}

VAddrId Ctx::vaddr(PidId p, Symbol x, TermId data, ContourId t) const {
    return vaddrs_.intern({p, x, data, t});
}

KAddrId Ctx::kaddr(PidId p, Label l, EnvId env, ContourId t) const {
    return kaddrs_.intern({p, l + 1, env, t});
}

KontId Ctx::kont_arg(uint32_t index, Label call, std::vector<ValueId> done, EnvId env,
                     KAddrId next) const {
    Kont k;
    k.stop = false;
    k.index = index;
    k.call = call;
    k.done = std::move(done);
    k.env = env;
    k.next = next;
    return konts_.intern(k);
}

const Kont& Ctx::kont(KontId k) const { return konts_.items[k]; }

bool Ctx::is_value_term(Label l) const {
    NodeKind k = prog.nodes[l].kind;
    return k == NodeKind::Fun || k == NodeKind::Ctor || k == NodeKind::Prim;
}

TermId Ctx::resolve(const State& s, ValueId v) const {
    struct Rec {
        const Ctx& ctx;
        const State& s;
        int depth = 0;
        TermId go(ValueId v) {
            if (++depth > 100000) throw DanglingAddress("resolve recursion limit");
            const Value& val = ctx.values_.items[v];
            if (val.kind == ValueKind::Pid) return ctx.term_pid(val.pid);
            const Node& n = ctx.prog.nodes[val.loc];
            switch (n.kind) {
                case NodeKind::Var: {
                    auto addr = ctx.env_lookup(val.env, n.name);
                    if (!addr) throw DanglingAddress("unbound variable in closure");
                    auto it = s.vstore.find(*addr);
                    if (it == s.vstore.end()) throw DanglingAddress("unmapped value address");
                    return go(it->second);
                }
                case NodeKind::Fun:
                case NodeKind::Prim:
                    return ctx.term_fun(val.loc);
                case NodeKind::Ctor: {
                    std::vector<TermId> args;
                    for (Label kl : n.kids) {
                        const Node& kn = ctx.prog.nodes[kl];
                        auto addr = ctx.env_lookup(val.env, kn.name);
                        if (!addr) throw DanglingAddress("unbound constructor argument");
                        auto it = s.vstore.find(*addr);
                        if (it == s.vstore.end()) throw DanglingAddress("unmapped value address");
                        args.push_back(go(it->second));
                        depth--;
                    }
                    return ctx.term_ctor(n.name, std::move(args));
                }
                default:
                    throw DanglingAddress("closure of a non-value term");
            }
        }
    };
    Rec r{*this, s};
    return r.go(v);
}

ValueId Ctx::deref_var_closure(const State& s, ValueId d) const {
    int guard = 0;
    while (true) {
        const Value& v = values_.items[d];
        if (v.kind != ValueKind::Closure) return d;
        const Node& n = prog.nodes[v.loc];
        if (n.kind != NodeKind::Var) return d;
        auto addr = env_lookup(v.env, n.name);
        if (!addr) throw DanglingAddress("unbound variable in value");
        auto it = s.vstore.find(*addr);
        if (it == s.vstore.end()) throw DanglingAddress("unmapped value address");
        d = it->second;
        if (++guard > 100000) throw DanglingAddress("value dereference loop");
    }
}

// Matching a pattern variable that is already bound compares the stored value
// against the candidate, structurally through the store.
bool Ctx::value_matches(const State& s, ValueId stored, ValueId d, int depth) const {
    if (depth > 100000) throw DanglingAddress("match recursion limit");
    stored = deref_var_closure(s, stored);
    d = deref_var_closure(s, d);
    const Value& sv = values_.items[stored];
    const Value& dv = values_.items[d];
    if (sv.kind == ValueKind::Pid || dv.kind == ValueKind::Pid)
        return sv.kind == ValueKind::Pid && dv.kind == ValueKind::Pid && sv.pid == dv.pid;
    const Node& sn = prog.nodes[sv.loc];
    const Node& dn = prog.nodes[dv.loc];
    if (sn.kind != NodeKind::Ctor || dn.kind != NodeKind::Ctor) return false;
    if (sn.name != dn.name || sn.kids.size() != dn.kids.size()) return false;
    for (size_t i = 0; i < sn.kids.size(); i++) {
        ValueId sub_s = sub_value(sv, sn.kids[i]);
        ValueId sub_d = sub_value(dv, dn.kids[i]);
        if (!value_matches(s, sub_s, sub_d, depth + 1)) return false;
    }
    return true;
}

ValueId Ctx::sub_value(const Value& parent, Label arg_var) const {
    const Node& n = prog.nodes[arg_var];
    auto addr = env_lookup(parent.env, n.name);
    if (!addr) throw DanglingAddress("unbound constructor argument");
    return val_closure(arg_var, env_extend1(env_empty(), n.name, *addr));
}

const std::tuple<PidId, Symbol, TermId, ContourId>& Ctx::vaddr_parts(VAddrId a) const {
    return vaddrs_.items[a];
}

const std::tuple<PidId, Label, EnvId, ContourId>& Ctx::kaddr_parts(KAddrId a) const {
    return kaddrs_.items[a];
}

std::optional<Subst> Ctx::match(const State& s, EnvId rho, PatternId pat, ValueId d) const {
    d = deref_var_closure(s, d);
    const PatternNode& p = prog.patterns[pat];
    if (p.is_var) {
        auto bound = env_lookup(rho, p.name);
        if (bound) {
            auto it = s.vstore.find(*bound);
            if (it == s.vstore.end()) throw DanglingAddress("unmapped value address");
            if (!value_matches(s, it->second, d, 0)) return std::nullopt;
        }
        return Subst{{p.name, d}};
    }
    const Value& dv = values_.items[d];
    if (dv.kind != ValueKind::Closure) return std::nullopt;
    const Node& dn = prog.nodes[dv.loc];
    if (dn.kind != NodeKind::Ctor || dn.name != p.name || dn.kids.size() != p.args.size())
        return std::nullopt;
    Subst theta;
    for (size_t i = 0; i < p.args.size(); i++) {
        ValueId sub = sub_value(dv, dn.kids[i]);
        auto si = match(s, rho, p.args[i], sub);
        if (!si) return std::nullopt;
        // theta (x) merge: conflicting bindings make the whole match fail.
        for (const auto& [x, v] : *si) {
            auto it = std::lower_bound(theta.begin(), theta.end(), x,
                                       [](const auto& e, Symbol sym) { return e.first < sym; });
            if (it != theta.end() && it->first == x) {
                if (it->second != v) return std::nullopt;
            } else {
                theta.insert(it, {x, v});
            }
        }
    }
    return theta;
}

std::optional<Ctx::MMatch> Ctx::mmatch(const State& s, const std::vector<PatternId>& pats,
                                       const std::vector<ValueId>& mailbox, EnvId rho) const {
    for (uint32_t mi = 0; mi < mailbox.size(); mi++) {
        for (uint32_t pi = 0; pi < pats.size(); pi++) {
            auto theta = match(s, rho, pats[pi], mailbox[mi]);
            if (theta) {
                MMatch out;
                out.index = pi;
                out.theta = std::move(*theta);
                out.mailbox = mailbox;
                out.mailbox.erase(out.mailbox.begin() + mi);
                out.message = mailbox[mi];
                out.message_pos = mi;
                return out;
            }
        }
    }
    return std::nullopt;
}

State init(Ctx& ctx) {
    State s;
    PidId i0 = ctx.initial_pid();
    ProcState q;
    q.control = Control::Expr;
    q.label = ctx.prog.root;
    q.env = ctx.env_empty();
    q.kont = ctx.kaddr_halt();
    q.time = 0;
    s.procs[i0] = q;
    s.mailboxes[i0] = {};
    s.kstore[ctx.kaddr_halt()] = ctx.kont_stop();
    return s;
}

namespace {

struct Stepper {
    Ctx& ctx;
    const State& s;
    std::vector<Successor>& out;

    const Program& prog() const { return ctx.prog; }

    Successor& emit(PidId pid, Rule rule, const ProcState& from) {
        out.emplace_back();
        Successor& succ = out.back();
        succ.state = s;
        succ.pid = pid;
        succ.rule = rule;
        succ.from = from;
        return succ;
    }

    void finish(Successor& succ) {
        succ.to = succ.state.procs[succ.pid];
    }

    void error_succ(PidId pid, Rule rule, const ProcState& q, ErrorReason reason, Label at) {
        Successor& succ = emit(pid, rule, q);
        ProcState e;
        e.control = Control::Error;
        e.err = reason;
        e.label = at;
        e.env = q.env;
        e.kont = q.kont;
        e.time = q.time;
        succ.state.procs[pid] = e;
        finish(succ);
    }

    void bind_subst(State& st, PidId pid, const ProcState& q, const Subst& theta, EnvId& rho_out) {
        Subst addr_binds;
        for (const auto& [x, d] : theta) {
            TermId delta = ctx.resolve(st, d);
            VAddrId b = ctx.vaddr(pid, x, delta, q.time);
            st.vstore[b] = d;
            addr_binds.push_back({x, b});
        }
        rho_out = ctx.env_extend(rho_out, addr_binds);
    }

    void value_position(PidId pid, const ProcState& q, ValueId dval) {
        auto kit = s.kstore.find(q.kont);
        if (kit == s.kstore.end()) throw DanglingAddress("unmapped continuation address");
        const Kont k = ctx.kont(kit->second);
        if (k.stop) return; // terminated process
        uint32_t n = prog().len(k.call);
        if (k.index < n) {
            // ArgEval: collect this value, move to the next argument.
            Label next_arg = prog().arg(k.call, k.index + 1);
            KAddrId b = ctx.kaddr(pid, next_arg, k.env, q.time);
            std::vector<ValueId> done = k.done;
            done.push_back(dval);
            Successor& succ = emit(pid, Rule::ArgEval, q);
            succ.state.kstore[b] = ctx.kont_arg(k.index + 1, k.call, std::move(done), k.env, k.next);
            ProcState q2 = q;
            q2.control = Control::Expr;
            q2.label = next_arg;
            q2.env = k.env;
            q2.kont = b;
            succ.state.procs[pid] = q2;
            finish(succ);
            return;
        }
        // index == n: the call is fully evaluated; dispatch on the function.
        std::vector<ValueId> vals = k.done; // d_0 .. d_{n-1}
        vals.push_back(dval);               // d_n
        const Value& d0 = ctx.value(vals[0]);
        if (d0.kind == ValueKind::Pid) {
            error_succ(pid, Rule::Apply, q, ErrorReason::ApplyNonFunction, k.call);
            return;
        }
        const Node& fn = prog().nodes[d0.loc];
        if (fn.kind == NodeKind::Fun) {
            if (fn.params.size() != n) {
                error_succ(pid, Rule::Apply, q, ErrorReason::WrongArity, k.call);
                return;
            }
            std::vector<ValueId> args(vals.begin() + 1, vals.end());
            Successor& succ = emit(pid, Rule::Apply, q);
            EnvId rho = d0.env;
            Subst binds;
            for (uint32_t i = 0; i < n; i++) {
                TermId delta = ctx.resolve(succ.state, args[i]);
                VAddrId b = ctx.vaddr(pid, fn.params[i], delta, q.time);
                succ.state.vstore[b] = args[i];
                binds.push_back({fn.params[i], b});
            }
            std::sort(binds.begin(), binds.end());
            rho = ctx.env_extend(rho, binds);
            ProcState q2;
            q2.control = Control::Expr;
            q2.label = fn.kids[0];
            q2.env = rho;
            q2.kont = k.next;
            q2.time = ctx.tick(k.call, q.time);
            succ.state.procs[pid] = q2;
            finish(succ);
            return;
        }
        if (fn.kind == NodeKind::Prim && fn.name == static_cast<Symbol>(PrimOp::Send)) {
            // vals = [send, target, message]
            const Value& target = ctx.value(vals[1]);
            if (target.kind != ValueKind::Pid) {
                error_succ(pid, Rule::Send, q, ErrorReason::SendToNonPid, k.call);
                return;
            }
            Successor& succ = emit(pid, Rule::Send, q);
            succ.state.mailboxes[target.pid].push_back(dval);
            ProcState q2 = q;
            q2.kont = k.next;
            succ.state.procs[pid] = q2;
            finish(succ);
            succ.sent_msg = dval;
            succ.send_target = target.pid;
            return;
        }
        if (fn.kind == NodeKind::Prim && fn.name == static_cast<Symbol>(PrimOp::Spawn)) {
            const Value& thunk = ctx.value(dval);
            bool ok = thunk.kind == ValueKind::Closure &&
                      prog().nodes[thunk.loc].kind == NodeKind::Fun &&
                      prog().nodes[thunk.loc].params.empty();
            if (!ok) {
                error_succ(pid, Rule::Spawn, q, ErrorReason::SpawnNonFunction, k.call);
                return;
            }
            PidId child = ctx.new_pid(pid, k.call, q.time);
            Successor& succ = emit(pid, Rule::Spawn, q);
            ProcState qc;
            qc.control = Control::Expr;
            qc.label = prog().nodes[thunk.loc].kids[0];
            qc.env = thunk.env;
            qc.kont = ctx.kaddr_halt();
            qc.time = 0;
            succ.state.procs[child] = qc;
            succ.state.mailboxes[child] = {};
            ProcState q2;
            q2.control = Control::PidVal;
            q2.pid_value = child;
            q2.env = k.env;
            q2.kont = k.next;
            q2.time = q.time;
            succ.state.procs[pid] = q2;
            finish(succ);
            succ.spawn_child = child;
            succ.spawn_child_state = qc;
            return;
        }
        // Applying a constructor value or a primitive at the wrong arity.
        error_succ(pid, Rule::Apply, q, ErrorReason::ApplyNonFunction, k.call);
    }

    void step_pid(PidId pid, const ProcState& q) {
        if (q.control == Control::Error) return; // error states are sinks
        if (q.control == Control::PidVal) {
            value_position(pid, q, ctx.val_pid(q.pid_value));
            return;
        }
        const Node& node = prog().nodes[q.label];
        if (ctx.is_value_term(q.label)) {
            value_position(pid, q, ctx.value_of(q.label, q.env));
            return;
        }
        switch (node.kind) {
            case NodeKind::Var: {
                auto addr = ctx.env_lookup(q.env, node.name);
                if (!addr) throw DanglingAddress("unbound variable " + prog().syms.name(node.name));
                auto it = s.vstore.find(*addr);
                if (it == s.vstore.end()) throw DanglingAddress("unmapped value address");
                const Value& v = ctx.value(it->second);
                Successor& succ = emit(pid, Rule::Vars, q);
                ProcState q2 = q;
                if (v.kind == ValueKind::Closure) {
                    q2.control = Control::Expr;
                    q2.label = v.loc;
                    q2.env = v.env;
                } else {
                    q2.control = Control::PidVal;
                    q2.pid_value = v.pid;
                }
                succ.state.procs[pid] = q2;
                finish(succ);
                return;
            }
            case NodeKind::App: {
                Label fn = prog().arg(q.label, 0);
                KAddrId b = ctx.kaddr(pid, fn, q.env, q.time);
                Successor& succ = emit(pid, Rule::FunEval, q);
                succ.state.kstore[b] = ctx.kont_arg(0, q.label, {}, q.env, q.kont);
                ProcState q2 = q;
                q2.label = fn;
                q2.kont = b;
                succ.state.procs[pid] = q2;
                finish(succ);
                return;
            }
            case NodeKind::Letrec: {
                size_t nb = node.params.size();
                Successor& succ = emit(pid, Rule::Letrec, q);
                Subst binds;
                for (size_t i = 0; i < nb; i++) {
                    Label fl = node.kids[i];
                    VAddrId b = ctx.vaddr(pid, node.params[i], ctx.term_fun(fl), q.time);
                    binds.push_back({node.params[i], b});
                }
                std::sort(binds.begin(), binds.end());
                EnvId rho = ctx.env_extend(q.env, binds);
                for (size_t i = 0; i < nb; i++) {
                    Label fl = node.kids[i];
                    VAddrId b = binds[i].second;
                    succ.state.vstore[b] = ctx.value_of(fl, rho);
                }
                ProcState q2 = q;
                q2.label = node.kids.back();
                q2.env = rho;
                succ.state.procs[pid] = q2;
                finish(succ);
                return;
            }
            case NodeKind::Case: {
                const Node& sv = prog().nodes[node.kids[0]];
                auto addr = ctx.env_lookup(q.env, sv.name);
                if (!addr) throw DanglingAddress("unbound case scrutinee");
                auto it = s.vstore.find(*addr);
                if (it == s.vstore.end()) throw DanglingAddress("unmapped value address");
                ValueId d = it->second;
                for (const auto& cl : node.clauses) {
                    auto theta = ctx.match(s, q.env, cl.pat, d);
                    if (!theta) continue;
                    Successor& succ = emit(pid, Rule::Case, q);
                    EnvId rho = q.env;
                    bind_subst(succ.state, pid, q, *theta, rho);
                    ProcState q2 = q;
                    q2.label = cl.body;
                    q2.env = rho;
                    succ.state.procs[pid] = q2;
                    finish(succ);
                    return; // first matching clause wins
                }
                error_succ(pid, Rule::Case, q, ErrorReason::CaseNoMatch, q.label);
                return;
            }
            case NodeKind::Receive: {
                std::vector<PatternId> pats;
                for (const auto& cl : node.clauses) pats.push_back(cl.pat);
                auto mit = s.mailboxes.find(pid);
                if (mit == s.mailboxes.end()) throw DanglingAddress("missing mailbox");
                auto mm = ctx.mmatch(s, pats, mit->second, q.env);
                if (!mm) return; // blocked
                Successor& succ = emit(pid, Rule::Receive, q);
                EnvId rho = q.env;
                bind_subst(succ.state, pid, q, mm->theta, rho);
                succ.state.mailboxes[pid] = mm->mailbox;
                ProcState q2 = q;
                q2.label = node.clauses[mm->index].body;
                q2.env = rho;
                succ.state.procs[pid] = q2;
                finish(succ);
                succ.recv_msg = mm->message;
                return;
            }
            case NodeKind::SelfPid: {
                Successor& succ = emit(pid, Rule::Self, q);
                ProcState q2 = q;
                q2.control = Control::PidVal;
                q2.pid_value = pid;
                succ.state.procs[pid] = q2;
                finish(succ);
                return;
            }
            case NodeKind::Choice: {
                for (Label alt : node.kids) {
                    Successor& succ = emit(pid, Rule::Choice, q);
                    ProcState q2 = q;
                    q2.label = alt;
                    succ.state.procs[pid] = q2;
                    finish(succ);
                }
                return;
            }
            case NodeKind::Probe: {
                Successor& succ = emit(pid, Rule::Probe, q);
                ProcState q2 = q;
                q2.label = node.kids[0];
                succ.state.procs[pid] = q2;
                finish(succ);
                return;
            }
            default:
                throw DanglingAddress("unexpected control node");
        }
    }
};

} // namespace

std::vector<Successor> step(Ctx& ctx, const State& s) {
    std::vector<Successor> out;
    Stepper st{ctx, s, out};
    for (const auto& [pid, q] : s.procs) st.step_pid(pid, q);
    return out;
}

Trace run(Ctx& ctx, uint64_t seed, uint32_t max_steps) {
    Trace t;
    t.states.push_back(init(ctx));
    std::mt19937_64 rng(seed);
    for (uint32_t i = 0; i < max_steps; i++) {
        std::vector<Successor> succs = step(ctx, t.states.back());
        if (succs.empty()) {
            t.deadlocked = true;
            break;
        }
        size_t pick = static_cast<size_t>(rng() % succs.size());
        t.states.push_back(succs[pick].state);
        t.steps.push_back(std::move(succs[pick]));
    }
    return t;
}

std::string trace_to_jsonl(const Ctx& ctx, const Trace& t) {
    std::ostringstream os;
    for (size_t i = 0; i < t.steps.size(); i++) {
        const Successor& st = t.steps[i];
        os << "{\"step\":" << i << ",\"pid\":\"" << ctx.pid_name(st.pid) << "\",\"rule\":\""
           << rule_name(st.rule) << "\",\"control_label\":";
        if (st.from.control == Control::Expr)
            os << st.from.label;
        else
            os << -1;
        if (st.rule == Rule::Probe) {
            const auto& node = ctx.prog.nodes[st.from.label];
            os << ",\"probe_tag\":\"" << ctx.prog.syms.name(node.name) << "\"";
        }
        os << "}\n";
    }
    return os.str();
}

} // namespace lactor::machine
