#include "lactor/acsgen.hpp"

#include "json.hpp"

#include <algorithm>
#include <sstream>

namespace lactor::acsgen {

using analysis::AbsTransition;
using analysis::EffectKind;

namespace {

template <typename T>
std::optional<uint32_t> index_of(const std::vector<T>& v, T x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) return std::nullopt;
    return static_cast<uint32_t>(it - v.begin());
}

} // namespace

std::optional<uint32_t> Acs::pid_index(AbsPidId p) const { return index_of(pid_classes, p); }
std::optional<uint32_t> Acs::state_index(AbsPSId s) const { return index_of(states, s); }
std::optional<uint32_t> Acs::msg_index(AbsDataId m) const { return index_of(messages, m); }

std::string Acs::pid_name(uint32_t i) const { return ctx->pid_name(pid_classes[i]); }

std::string Acs::state_name(uint32_t i) const {
    return "q" + std::to_string(i) + ":" + ctx->ps_name(states[i]);
}

std::string Acs::msg_name(uint32_t i) const { return ctx->data_to_string(messages[i]); }

std::optional<syntax::Symbol> Acs::state_probe(uint32_t i) const {
    const AbsProcState& q = ctx->ps_parts(states[i]);
    if (q.control != AbsControl::Expr) return std::nullopt;
    const syntax::Node& n = ctx->prog.nodes[q.label];
    if (n.kind != syntax::NodeKind::Probe) return std::nullopt;
    return n.name;
}

uint32_t Acs::place_of_state(uint32_t pid, uint32_t state) const {
    return pid * static_cast<uint32_t>(states.size() + messages.size()) + state;
}

uint32_t Acs::place_of_msg(uint32_t pid, uint32_t msg) const {
    return pid * static_cast<uint32_t>(states.size() + messages.size()) +
           static_cast<uint32_t>(states.size()) + msg;
}

std::string Acs::rule_label(const AcsRule& r) const {
    switch (r.kind) {
        case RuleKind::Tau: return "tau";
        case RuleKind::Recv: return "?" + msg_name(r.msg);
        case RuleKind::Send: return pid_name(r.target) + "!" + msg_name(r.msg);
        case RuleKind::Nu:
            return "nu " + pid_name(r.child_pid) + "." + state_name(r.child_state);
    }
    return "?";
}

Acs generate_acs(const analysis::AnalysisResult& res) {
    Acs acs;
    acs.ctx = res.ctx;

    std::set<AbsPidId> pids{res.init_pid};
    std::set<AbsPSId> states{res.init_state};
    std::set<AbsDataId> msgs;
    for (const AbsTransition& t : res.transitions) {
        pids.insert(t.pid);
        states.insert(t.from);
        states.insert(t.to);
        if (t.effect == EffectKind::Receive || t.effect == EffectKind::Send) msgs.insert(t.msg);
        if (t.effect == EffectKind::Send) pids.insert(t.target);
        if (t.effect == EffectKind::Spawn) {
            pids.insert(t.child);
            states.insert(t.child_state);
        }
    }
    acs.pid_classes.assign(pids.begin(), pids.end());
    acs.states.assign(states.begin(), states.end());
    acs.messages.assign(msgs.begin(), msgs.end());

    std::set<AcsRule> rules;
    for (const AbsTransition& t : res.transitions) {
        AcsRule r;
        r.pid = *acs.pid_index(t.pid);
        r.from = *acs.state_index(t.from);
        r.to = *acs.state_index(t.to);
        switch (t.effect) {
            case EffectKind::None: r.kind = RuleKind::Tau; break;
            case EffectKind::Receive:
                r.kind = RuleKind::Recv;
                r.msg = *acs.msg_index(t.msg);
                break;
            case EffectKind::Send:
                r.kind = RuleKind::Send;
                r.msg = *acs.msg_index(t.msg);
                r.target = *acs.pid_index(t.target);
                break;
            case EffectKind::Spawn:
                r.kind = RuleKind::Nu;
                r.child_pid = *acs.pid_index(t.child);
                r.child_state = *acs.state_index(t.child_state);
                break;
        }
        rules.insert(r);
    }
    acs.rules.assign(rules.begin(), rules.end());
    acs.init_pid = *acs.pid_index(res.init_pid);
    acs.init_state = *acs.state_index(res.init_state);
    return acs;
}

std::vector<vas::SumInvariant> token_invariants(const Acs& acs) {
    size_t nc = acs.pid_classes.size();
    size_t nq = acs.states.size();
    constexpr int64_t kInf = -1;
    constexpr int64_t kCap = 1000000;

    // Per class: which states lie on a directed cycle of its rule graph.
    std::vector<std::vector<bool>> on_cycle(nc, std::vector<bool>(nq, false));
    for (uint32_t c = 0; c < nc; c++) {
        std::vector<std::vector<uint32_t>> succ(nq);
        for (const AcsRule& r : acs.rules)
            if (r.pid == c) succ[r.from].push_back(r.to);
        for (uint32_t s = 0; s < nq; s++) {
            // s on a cycle iff s is reachable from one of its successors.
            std::vector<bool> seen(nq, false);
            std::vector<uint32_t> stack(succ[s].begin(), succ[s].end());
            bool found = false;
            while (!stack.empty() && !found) {
                uint32_t x = stack.back();
                stack.pop_back();
                if (x == s) found = true;
                if (seen[x]) continue;
                seen[x] = true;
                for (uint32_t y : succ[x]) stack.push_back(y);
            }
            on_cycle[c][s] = found;
        }
    }

    // Total tokens ever created per class, saturating to "unbounded".
    std::vector<int64_t> total(nc, 0);
    total[acs.init_pid] = 1;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int64_t> next(nc, 0);
        next[acs.init_pid] = 1;
        for (const AcsRule& r : acs.rules) {
            if (r.kind != RuleKind::Nu) continue;
            int64_t& tgt = next[r.child_pid];
            if (tgt == kInf) continue;
            int64_t add = (total[r.pid] == kInf || on_cycle[r.pid][r.from]) ? kInf : total[r.pid];
            if (add == kInf)
                tgt = kInf;
            else {
                tgt += add;
                if (tgt > kCap) tgt = kInf;
            }
        }
        if (next != total) {
            total = next;
            changed = true;
        }
    }

    std::vector<vas::SumInvariant> out;
    for (uint32_t c = 0; c < nc; c++) {
        if (total[c] == kInf) continue;
        vas::SumInvariant inv;
        for (uint32_t q = 0; q < nq; q++) inv.places.push_back(acs.place_of_state(c, q));
        inv.bound = total[c];
        out.push_back(std::move(inv));
    }

    // Message bounds: current count <= total sends into the place.
    std::map<uint32_t, int64_t> msg_total; // place -> bound
    for (const AcsRule& r : acs.rules) {
        if (r.kind != RuleKind::Send) continue;
        uint32_t place = acs.place_of_msg(r.target, r.msg);
        auto [it, fresh] = msg_total.try_emplace(place, 0);
        if (it->second == kInf) continue;
        int64_t add = (total[r.pid] == kInf || on_cycle[r.pid][r.from]) ? kInf : total[r.pid];
        if (add == kInf)
            it->second = kInf;
        else {
            it->second += add;
            if (it->second > kCap) it->second = kInf;
        }
    }
    for (const auto& [place, bound] : msg_total) {
        if (bound == kInf) continue;
        out.push_back({{place}, bound});
    }
    // Messages never sent at all are empty forever.
    for (uint32_t c = 0; c < nc; c++)
        for (uint32_t m = 0; m < acs.messages.size(); m++) {
            uint32_t place = acs.place_of_msg(c, m);
            if (!msg_total.count(place)) out.push_back({{place}, 0});
        }
    return out;
}

vas::Marking alpha_acs(const Acs& acs, const machine::Ctx& m, const machine::State& s) {
    AbsCtx& cx = *acs.ctx;
    vas::Marking out;
    for (const auto& [pid, q] : s.procs) {
        auto pi = acs.pid_index(cx.alpha_pid(m, pid));
        auto qi = acs.state_index(cx.alpha_ps(m, q));
        if (!pi || !qi) throw std::out_of_range("alpha_acs: process state outside the ACS");
        vas::add(out, acs.place_of_state(*pi, *qi), 1);
    }
    for (const auto& [pid, mbox] : s.mailboxes) {
        auto pi = acs.pid_index(cx.alpha_pid(m, pid));
        if (!pi) throw std::out_of_range("alpha_acs: pid class outside the ACS");
        for (machine::ValueId v : mbox) {
            AbsDataId msg = cx.alpha_msg(m, m.resolve(s, v));
            auto mi = acs.msg_index(msg);
            if (!mi) throw std::out_of_range("alpha_acs: message outside the ACS");
            vas::add(out, acs.place_of_msg(*pi, *mi), 1);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Simplification

Acs simplify(const Acs& acs, const std::set<uint32_t>& extra_protected) {
    // Protected: probe-tagged states, the initial state, every target of a
    // non-tau rule (including spawn-child entry states), plus the caller's.
    std::set<uint32_t> prot = extra_protected;
    prot.insert(acs.init_state);
    for (uint32_t i = 0; i < acs.states.size(); i++)
        if (acs.state_probe(i)) prot.insert(i);
    for (const AcsRule& r : acs.rules) {
        if (r.kind != RuleKind::Tau) prot.insert(r.to);
        if (r.kind == RuleKind::Nu) prot.insert(r.child_state);
    }

    std::set<AcsRule> rules(acs.rules.begin(), acs.rules.end());
    size_t nclasses = acs.pid_classes.size();
    bool changed = true;
    while (changed) {
        changed = false;
        for (uint32_t pid = 0; pid < nclasses && !changed; pid++) {
            for (uint32_t q = 0; q < acs.states.size() && !changed; q++) {
                if (prot.count(q)) continue;
                // Incoming: same-class rules into q and spawns injecting q.
                std::vector<AcsRule> in, out_rules;
                bool spawn_target = false;
                for (const AcsRule& r : rules) {
                    if (r.pid == pid && r.to == q) in.push_back(r);
                    if (r.kind == RuleKind::Nu && r.child_pid == pid && r.child_state == q)
                        spawn_target = true;
                    if (r.pid == pid && r.from == q) out_rules.push_back(r);
                }
                if (spawn_target) continue; // guarded by prot already
                if (in.size() != 1 || in[0].kind != RuleKind::Tau || in[0].from == q) continue;
                rules.erase(in[0]);
                for (const AcsRule& o : out_rules) {
                    rules.erase(o);
                    AcsRule n = o;
                    n.from = in[0].from;
                    rules.insert(n);
                }
                changed = true;
            }
        }
    }

    // Rebuild with only the referenced states and messages.
    Acs out;
    out.ctx = acs.ctx;
    out.pid_classes = acs.pid_classes;
    std::set<uint32_t> used_states{acs.init_state};
    std::set<uint32_t> used_msgs;
    for (const AcsRule& r : rules) {
        used_states.insert(r.from);
        used_states.insert(r.to);
        if (r.kind == RuleKind::Recv || r.kind == RuleKind::Send) used_msgs.insert(r.msg);
        if (r.kind == RuleKind::Nu) used_states.insert(r.child_state);
    }
    std::map<uint32_t, uint32_t> smap, mmap;
    for (uint32_t s : used_states) {
        smap[s] = static_cast<uint32_t>(out.states.size());
        out.states.push_back(acs.states[s]);
    }
    for (uint32_t m : used_msgs) {
        mmap[m] = static_cast<uint32_t>(out.messages.size());
        out.messages.push_back(acs.messages[m]);
    }
    for (AcsRule r : rules) {
        r.from = smap.at(r.from);
        r.to = smap.at(r.to);
        if (r.kind == RuleKind::Recv || r.kind == RuleKind::Send) r.msg = mmap.at(r.msg);
        if (r.kind == RuleKind::Nu) r.child_state = smap.at(r.child_state);
        out.rules.push_back(r);
    }
    std::sort(out.rules.begin(), out.rules.end());
    out.rules.erase(std::unique(out.rules.begin(), out.rules.end()), out.rules.end());
    out.init_pid = acs.init_pid;
    out.init_state = smap.at(acs.init_state);
    return out;
}

// ---------------------------------------------------------------------------
// Exports

std::string to_dot(const Acs& acs) {
    std::ostringstream os;
    os << "digraph acs {\n  rankdir=LR;\n  node [shape=box, style=rounded];\n";
    for (uint32_t p = 0; p < acs.pid_classes.size(); p++) {
        os << "  subgraph cluster_" << p << " {\n    label=\"" << acs.pid_name(p) << "\";\n";
        std::set<uint32_t> used;
        for (const AcsRule& r : acs.rules) {
            if (r.pid == p) {
                used.insert(r.from);
                used.insert(r.to);
            }
            if (r.kind == RuleKind::Nu && r.child_pid == p) used.insert(r.child_state);
        }
        if (p == acs.init_pid) used.insert(acs.init_state);
        for (uint32_t q : used) {
            os << "    \"" << p << "." << q << "\" [label=\"" << acs.state_name(q);
            auto tag = acs.state_probe(q);
            if (tag) os << "\\nprobe:" << acs.ctx->prog.syms.name(*tag);
            os << "\"";
            if (p == acs.init_pid && q == acs.init_state) os << ", peripheries=2";
            os << "];\n";
        }
        os << "  }\n";
    }
    for (const AcsRule& r : acs.rules) {
        os << "  \"" << r.pid << "." << r.from << "\" -> \"" << r.pid << "." << r.to
           << "\" [label=\"";
        switch (r.kind) {
            case RuleKind::Tau: os << "t"; break;
            case RuleKind::Recv: os << "?" << acs.msg_name(r.msg); break;
            case RuleKind::Send: os << acs.pid_name(r.target) << "!" << acs.msg_name(r.msg); break;
            case RuleKind::Nu: os << "nu " << acs.pid_name(r.child_pid); break;
        }
        os << "\"];\n";
        if (r.kind == RuleKind::Nu) {
            os << "  \"" << r.pid << "." << r.from << "\" -> \"" << r.child_pid << "."
               << r.child_state << "\" [style=dashed];\n";
        }
    }
    os << "}\n";
    return os.str();
}

std::string to_json(const Acs& acs) {
    nlohmann::json j;
    j["pid_classes"] = nlohmann::json::array();
    for (uint32_t p = 0; p < acs.pid_classes.size(); p++)
        j["pid_classes"].push_back({{"id", p}, {"name", acs.pid_name(p)}});
    j["states"] = nlohmann::json::array();
    for (uint32_t q = 0; q < acs.states.size(); q++) {
        nlohmann::json js{{"id", q}, {"name", acs.state_name(q)}};
        auto tag = acs.state_probe(q);
        if (tag) js["probe_tag"] = acs.ctx->prog.syms.name(*tag);
        j["states"].push_back(js);
    }
    j["messages"] = nlohmann::json::array();
    for (uint32_t m = 0; m < acs.messages.size(); m++)
        j["messages"].push_back({{"id", m}, {"name", acs.msg_name(m)}});
    j["rules"] = nlohmann::json::array();
    for (const AcsRule& r : acs.rules) {
        nlohmann::json jr{{"pid_class", r.pid}, {"from", r.from}, {"to", r.to}};
        switch (r.kind) {
            case RuleKind::Tau: jr["label"] = {{"kind", "tau"}}; break;
            case RuleKind::Recv: jr["label"] = {{"kind", "recv"}, {"msg", r.msg}}; break;
            case RuleKind::Send:
                jr["label"] = {{"kind", "send"}, {"msg", r.msg}, {"target", r.target}};
                break;
            case RuleKind::Nu:
                jr["label"] = {{"kind", "spawn"},
                               {"child_pid", r.child_pid},
                               {"child_state", r.child_state}};
                break;
        }
        j["rules"].push_back(jr);
    }
    j["init"] = {{"pid_class", acs.init_pid}, {"state", acs.init_state}};
    j["dimension"] = acs.dimension();
    return j.dump(2);
}

} // namespace lactor::acsgen
