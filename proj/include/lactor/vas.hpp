#pragma once

// Vector addition systems: markings, forward bounded exploration, and a
// sound-and-complete backward coverability decision procedure.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lactor::acsgen {
struct Acs;
}

namespace lactor::vas {

// Sparse vectors over the place universe, sorted by place, no zero entries.
using Marking = std::vector<std::pair<uint32_t, int64_t>>;

int64_t get(const Marking& m, uint32_t place);
void add(Marking& m, uint32_t place, int64_t delta);
bool geq(const Marking& a, const Marking& b); // componentwise a >= b

struct Rule {
    std::string name;
    Marking deltas; // integer-valued
};

struct Vas {
    std::vector<std::string> places;
    std::vector<Rule> rules;
};

// marking + rule if componentwise nonnegative.
std::optional<Marking> step(const Vas& v, const Marking& m, uint32_t rule);

enum class Verdict : uint8_t { Coverable, Uncoverable, Unknown };
const char* verdict_name(Verdict v);

struct Limits {
    uint64_t max_basis = 1000000;     // active minimal elements
    uint64_t max_iterations = 50000000;
};

struct CoverQuery {
    Marking target; // >= 0, at least one positive entry
    std::optional<Verdict> expectation; // used by test harnesses
};

// A proven invariant of the reachable markings: the sum over `places` never
// exceeds `bound`. Backward elements demanding more are pruned.
struct SumInvariant {
    std::vector<uint32_t> places; // sorted
    int64_t bound = 0;
};

struct CoverResult {
    Verdict verdict = Verdict::Unknown;
    std::vector<uint32_t> witness;     // Coverable: replayable rule sequence
    std::vector<Marking> certificate;  // Uncoverable: final minimal basis
    uint64_t basis_size = 0;
    uint64_t iterations = 0;
};

// Backward coverability over upward-closed sets represented by finite
// antichains of minimal markings. Every Coverable answer's witness is
// replayed through step() before being returned. Invariants must hold of
// every reachable marking; they only prune the search.
CoverResult coverable(const Vas& v, const Marking& init, const CoverQuery& q,
                      const Limits& limits = {},
                      const std::vector<SumInvariant>& invariants = {});

struct Explore {
    std::vector<Marking> reachable;
    bool exhausted = false;
};

// BFS over step() up to node_budget distinct markings.
Explore forward_explore(const Vas& v, const Marking& init, uint64_t node_budget);

// The ACS -> VAS encoding: places P x (Q ⊎ M), one vector per ACS rule,
// initial marking a unit at the initial pid-class and state.
std::pair<Vas, Marking> acs_to_vas(const acsgen::Acs& acs);

// Textual format: place/rule/init/target lines; round-trips with from_text.
std::string to_text(const Vas& v, const Marking& init, const Marking* target = nullptr);

struct Parsed {
    Vas vas;
    Marking init;
    std::optional<Marking> target;
};

std::optional<Parsed> from_text(std::string_view text, std::string* error = nullptr);

std::string to_json(const Vas& v, const Marking& init, const Marking* target = nullptr);
std::optional<Parsed> from_json(std::string_view text, std::string* error = nullptr);

} // namespace lactor::vas
