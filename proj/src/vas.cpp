#include "lactor/vas.hpp"

#include "lactor/acsgen.hpp"

#include "json.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <cstdio>
#include <cstdlib>

namespace lactor::vas {

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Coverable: return "COVERABLE";
        case Verdict::Uncoverable: return "UNCOVERABLE";
        case Verdict::Unknown: return "UNKNOWN";
    }
    return "?";
}

int64_t get(const Marking& m, uint32_t place) {
    auto it = std::lower_bound(m.begin(), m.end(), place,
                               [](const auto& e, uint32_t p) { return e.first < p; });
    if (it != m.end() && it->first == place) return it->second;
    return 0;
}

void add(Marking& m, uint32_t place, int64_t delta) {
    auto it = std::lower_bound(m.begin(), m.end(), place,
                               [](const auto& e, uint32_t p) { return e.first < p; });
    if (it != m.end() && it->first == place) {
        it->second += delta;
        if (it->second == 0) m.erase(it);
    } else if (delta != 0) {
        m.insert(it, {place, delta});
    }
}

bool geq(const Marking& a, const Marking& b) {
    // Entries are sorted; b's positives must be covered, a's negatives none.
    size_t i = 0;
    for (const auto& [p, n] : b) {
        while (i < a.size() && a[i].first < p) {
            if (a[i].second < 0) return false;
            i++;
        }
        int64_t av = (i < a.size() && a[i].first == p) ? a[i].second : 0;
        if (av < n) return false;
        if (i < a.size() && a[i].first == p) i++;
    }
    while (i < a.size()) {
        if (a[i].second < 0) return false;
        i++;
    }
    return true;
}

std::optional<Marking> step(const Vas& v, const Marking& m, uint32_t rule) {
    if (rule >= v.rules.size()) return std::nullopt;
    Marking out = m;
    for (const auto& [p, d] : v.rules[rule].deltas) add(out, p, d);
    for (const auto& [p, n] : out)
        if (n < 0) return std::nullopt;
    return out;
}

// ---------------------------------------------------------------------------
// Backward coverability

namespace {

// Minimal pre-marking from which rule r reaches a marking >= b.
Marking pred_basis(const Marking& b, const Marking& r) {
    Marking out;
    size_t i = 0, j = 0;
    while (i < b.size() || j < r.size()) {
        uint32_t p;
        int64_t bv = 0, rv = 0;
        if (i < b.size() && (j >= r.size() || b[i].first <= r[j].first)) p = b[i].first;
        else p = r[j].first;
        if (i < b.size() && b[i].first == p) bv = b[i++].second;
        if (j < r.size() && r[j].first == p) rv = r[j++].second;
        int64_t need = std::max<int64_t>({0, -rv, bv - rv});
        if (need > 0) out.push_back({p, need});
    }
    return out;
}

} // namespace

CoverResult coverable(const Vas& v, const Marking& init, const CoverQuery& q,
                      const Limits& limits, const std::vector<SumInvariant>& invariants) {
    CoverResult res;

    struct Elem {
        Marking m;
        int32_t rule = -1; // pred edge: fire rule to move toward...
        int32_t succ = -1; // ...this element (-1: the target itself)
    };
    std::vector<Elem> elems;
    std::deque<size_t> work;

    // Rules whose firing produces tokens into a place: only those can shrink
    // a basis element there; for every other rule the pred dominates the
    // element itself and is pruned immediately.
    std::map<uint32_t, std::vector<uint32_t>> producers;
    for (uint32_t r = 0; r < v.rules.size(); r++)
        for (const auto& [p, d] : v.rules[r].deltas)
            if (d > 0) producers[p].push_back(r);

    // Elements are grouped by exact support; a dominator of m has a support
    // that is a subset of m's, so domination checks enumerate the subsets.
    // Elements are never removed (the upward closure is unchanged by keeping
    // a dominated element); the certificate is minimized at the end.
    std::map<std::vector<uint32_t>, std::vector<size_t>> by_support;
    constexpr size_t kSubsetSupportLimit = 16;

    auto support_of = [](const Marking& m) {
        std::vector<uint32_t> s;
        s.reserve(m.size());
        for (const auto& [p, n] : m) s.push_back(p);
        return s;
    };

    // exclude: skip this element id (pop-time staleness re-validation).
    auto dominated = [&](const Marking& m, size_t exclude) {
        std::vector<uint32_t> supp = support_of(m);
        if (supp.size() <= kSubsetSupportLimit) {
            size_t subsets = size_t(1) << supp.size();
            std::vector<uint32_t> sub;
            for (size_t mask = 0; mask < subsets; mask++) {
                sub.clear();
                for (size_t i = 0; i < supp.size(); i++)
                    if (mask & (size_t(1) << i)) sub.push_back(supp[i]);
                auto it = by_support.find(sub);
                if (it == by_support.end()) continue;
                for (size_t a : it->second)
                    if (a != exclude && geq(m, elems[a].m)) return true;
            }
            return false;
        }
        for (const auto& [s, ids] : by_support) {
            if (!std::includes(supp.begin(), supp.end(), s.begin(), s.end())) continue;
            for (size_t a : ids)
                if (a != exclude && geq(m, elems[a].m)) return true;
        }
        return false;
    };

    auto violates_invariant = [&](const Marking& m) {
        for (const SumInvariant& inv : invariants) {
            int64_t sum = 0;
            size_t i = 0;
            for (const auto& [p, n] : m) {
                while (i < inv.places.size() && inv.places[i] < p) i++;
                if (i < inv.places.size() && inv.places[i] == p) sum += n;
            }
            if (sum > inv.bound) return true;
        }
        return false;
    };

    auto insert = [&](Marking m, int32_t rule, int32_t succ) -> std::optional<size_t> {
        if (violates_invariant(m)) return std::nullopt;
        if (dominated(m, elems.size())) return std::nullopt;
        size_t id = elems.size();
        std::vector<uint32_t> supp = support_of(m);
        elems.push_back({std::move(m), rule, succ});
        by_support[std::move(supp)].push_back(id);
        work.push_back(id);
        return id;
    };

    auto build_witness = [&](size_t start) {
        std::vector<uint32_t> w;
        int32_t cur = static_cast<int32_t>(start);
        while (cur >= 0 && elems[cur].rule >= 0) {
            w.push_back(static_cast<uint32_t>(elems[cur].rule));
            cur = elems[cur].succ;
        }
        return w;
    };

    auto finish_coverable = [&](size_t start) {
        res.verdict = Verdict::Coverable;
        res.witness = build_witness(start);
        res.basis_size = elems.size();
        // Witnesses must replay from the initial marking and cover the target.
        Marking m = init;
        for (uint32_t r : res.witness) {
            auto next = step(v, m, r);
            if (!next) throw std::logic_error("coverability witness does not replay");
            m = *next;
        }
        if (!geq(m, q.target)) throw std::logic_error("coverability witness misses the target");
        return res;
    };

    auto first = insert(q.target, -1, -1);
    if (first && geq(init, q.target)) return finish_coverable(*first);

    const bool debug = getenv("LACTOR_COVER_DEBUG") != nullptr;
    while (!work.empty()) {
        if (debug && res.iterations % 20000 == 0)
            fprintf(stderr, "[cover] iters=%llu elems=%zu work=%zu\n",
                    (unsigned long long)res.iterations, elems.size(), work.size());
        if (++res.iterations > limits.max_iterations) {
            res.verdict = Verdict::Unknown;
            res.basis_size = elems.size();
            return res;
        }
        size_t cur = work.front();
        work.pop_front();
        // A later, smaller element supersedes this one; its expansion covers
        // everything this one would contribute.
        if (dominated(elems[cur].m, cur)) continue;
        Marking base = elems[cur].m;
        std::set<uint32_t> candidates;
        for (const auto& [p, n] : base) {
            auto it = producers.find(p);
            if (it != producers.end()) candidates.insert(it->second.begin(), it->second.end());
        }
        for (uint32_t r : candidates) {
            Marking p = pred_basis(base, v.rules[r].deltas);
            auto id = insert(std::move(p), static_cast<int32_t>(r), static_cast<int32_t>(cur));
            if (id && geq(init, elems[*id].m)) return finish_coverable(*id);
            if (elems.size() > limits.max_basis) {
                res.verdict = Verdict::Unknown;
                res.basis_size = elems.size();
                return res;
            }
        }
    }

    res.verdict = Verdict::Uncoverable;
    res.basis_size = elems.size();
    // Minimal elements only: the certificate is the canonical basis.
    for (size_t i = 0; i < elems.size(); i++)
        if (!dominated(elems[i].m, i)) res.certificate.push_back(elems[i].m);
    std::sort(res.certificate.begin(), res.certificate.end());
    res.certificate.erase(std::unique(res.certificate.begin(), res.certificate.end()),
                          res.certificate.end());
    return res;
}

Explore forward_explore(const Vas& v, const Marking& init, uint64_t node_budget) {
    Explore out;
    std::set<Marking> seen;
    std::deque<Marking> frontier;
    seen.insert(init);
    frontier.push_back(init);
    while (!frontier.empty()) {
        Marking m = frontier.front();
        frontier.pop_front();
        out.reachable.push_back(m);
        for (uint32_t r = 0; r < v.rules.size(); r++) {
            auto next = step(v, m, r);
            if (!next) continue;
            if (seen.size() >= node_budget && !seen.count(*next)) {
                out.exhausted = false;
                return out;
            }
            if (seen.insert(*next).second) frontier.push_back(*next);
        }
    }
    out.exhausted = true;
    return out;
}

// ---------------------------------------------------------------------------
// ACS encoding

std::pair<Vas, Marking> acs_to_vas(const acsgen::Acs& acs) {
    Vas v;
    size_t nq = acs.states.size(), nm = acs.messages.size();
    v.places.reserve(acs.pid_classes.size() * (nq + nm));
    for (uint32_t p = 0; p < acs.pid_classes.size(); p++) {
        for (uint32_t q = 0; q < nq; q++)
            v.places.push_back(acs.pid_name(p) + "|" + acs.state_name(q));
        for (uint32_t m = 0; m < nm; m++)
            v.places.push_back(acs.pid_name(p) + "|msg:" + acs.msg_name(m));
    }
    uint32_t i = 0;
    for (const acsgen::AcsRule& r : acs.rules) {
        Rule vr;
        vr.name = "r" + std::to_string(i++) + ":" + acs.pid_name(r.pid) + ":" +
                  acs.rule_label(r);
        add(vr.deltas, acs.place_of_state(r.pid, r.from), -1);
        add(vr.deltas, acs.place_of_state(r.pid, r.to), +1);
        switch (r.kind) {
            case acsgen::RuleKind::Tau: break;
            case acsgen::RuleKind::Recv: add(vr.deltas, acs.place_of_msg(r.pid, r.msg), -1); break;
            case acsgen::RuleKind::Send: add(vr.deltas, acs.place_of_msg(r.target, r.msg), +1); break;
            case acsgen::RuleKind::Nu:
                add(vr.deltas, acs.place_of_state(r.child_pid, r.child_state), +1);
                break;
        }
        v.rules.push_back(std::move(vr));
    }
    Marking init;
    add(init, acs.place_of_state(acs.init_pid, acs.init_state), 1);
    return {std::move(v), std::move(init)};
}

// ---------------------------------------------------------------------------
// Formats

namespace {

void write_entries(std::ostringstream& os, const Vas& v, const Marking& m) {
    for (const auto& [p, n] : m)
        os << " " << v.places[p] << (n >= 0 ? "+" : "") << n;
}

// <place><+|-><int>, parsed from the right so names may contain signs.
bool parse_entry(const std::string& tok, std::string& name, int64_t& val) {
    size_t end = tok.size();
    if (end == 0) return false;
    size_t d = end;
    while (d > 0 && isdigit(static_cast<unsigned char>(tok[d - 1]))) d--;
    if (d == end || d == 0) return false;
    char sign = tok[d - 1];
    if (sign != '+' && sign != '-') return false;
    name = tok.substr(0, d - 1);
    val = std::stoll(tok.substr(d));
    if (sign == '-') val = -val;
    return !name.empty();
}

} // namespace

std::string to_text(const Vas& v, const Marking& init, const Marking* target) {
    std::ostringstream os;
    for (const std::string& p : v.places) os << "place " << p << "\n";
    for (const Rule& r : v.rules) {
        os << "rule " << r.name << ":";
        write_entries(os, v, r.deltas);
        os << "\n";
    }
    os << "init:";
    write_entries(os, v, init);
    os << "\n";
    if (target) {
        os << "target:";
        write_entries(os, v, *target);
        os << "\n";
    }
    return os.str();
}

std::optional<Parsed> from_text(std::string_view text, std::string* error) {
    Parsed out;
    std::map<std::string, uint32_t> places;
    std::istringstream is{std::string(text)};
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        if (error) *error = "line " + std::to_string(lineno) + ": " + msg;
        return std::nullopt;
    };
    auto parse_marking = [&](std::istringstream& ls, Marking& m) {
        std::string tok;
        while (ls >> tok) {
            std::string name;
            int64_t val;
            if (!parse_entry(tok, name, val)) return false;
            auto it = places.find(name);
            if (it == places.end()) return false;
            add(m, it->second, val);
        }
        return true;
    };
    while (std::getline(is, line)) {
        lineno++;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw.empty()) continue;
        if (kw == "place") {
            std::string name;
            ls >> name;
            if (name.empty()) return fail("place needs a name");
            if (places.count(name)) return fail("duplicate place " + name);
            places[name] = static_cast<uint32_t>(out.vas.places.size());
            out.vas.places.push_back(name);
        } else if (kw == "rule") {
            std::string name;
            ls >> name;
            if (name.empty() || name.back() != ':') return fail("rule needs 'name:'");
            name.pop_back();
            Rule r;
            r.name = name;
            if (!parse_marking(ls, r.deltas)) return fail("bad rule entry");
            out.vas.rules.push_back(std::move(r));
        } else if (kw == "init:") {
            if (!parse_marking(ls, out.init)) return fail("bad init entry");
        } else if (kw == "target:") {
            Marking t;
            if (!parse_marking(ls, t)) return fail("bad target entry");
            out.target = std::move(t);
        } else {
            return fail("unknown directive " + kw);
        }
    }
    return out;
}

std::string to_json(const Vas& v, const Marking& init, const Marking* target) {
    nlohmann::json j;
    j["places"] = v.places;
    j["rules"] = nlohmann::json::array();
    for (const Rule& r : v.rules) {
        nlohmann::json d = nlohmann::json::object();
        for (const auto& [p, n] : r.deltas) d[v.places[p]] = n;
        j["rules"].push_back({{"name", r.name}, {"deltas", d}});
    }
    auto mark = [&](const Marking& m) {
        nlohmann::json d = nlohmann::json::object();
        for (const auto& [p, n] : m) d[v.places[p]] = n;
        return d;
    };
    j["init"] = mark(init);
    if (target) j["target"] = mark(*target);
    return j.dump(2);
}

std::optional<Parsed> from_json(std::string_view text, std::string* error) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        if (error) *error = "invalid JSON";
        return std::nullopt;
    }
    Parsed out;
    std::map<std::string, uint32_t> places;
    auto fail = [&](const std::string& msg) {
        if (error) *error = msg;
        return std::nullopt;
    };
    if (!j.contains("places") || !j["places"].is_array()) return fail("missing places");
    for (const auto& p : j["places"]) {
        std::string name = p.get<std::string>();
        if (places.count(name)) return fail("duplicate place " + name);
        places[name] = static_cast<uint32_t>(out.vas.places.size());
        out.vas.places.push_back(name);
    }
    auto parse_marking = [&](const nlohmann::json& d, Marking& m) {
        if (!d.is_object()) return false;
        for (auto it = d.begin(); it != d.end(); ++it) {
            auto pit = places.find(it.key());
            if (pit == places.end()) return false;
            add(m, pit->second, it.value().get<int64_t>());
        }
        return true;
    };
    if (j.contains("rules"))
        for (const auto& r : j["rules"]) {
            Rule vr;
            vr.name = r.value("name", "");
            if (!parse_marking(r["deltas"], vr.deltas)) return fail("bad rule deltas");
            out.vas.rules.push_back(std::move(vr));
        }
    if (j.contains("init") && !parse_marking(j["init"], out.init)) return fail("bad init");
    if (j.contains("target")) {
        Marking t;
        if (!parse_marking(j["target"], t)) return fail("bad target");
        out.target = std::move(t);
    }
    return out;
}

} // namespace lactor::vas
