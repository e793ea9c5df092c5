#pragma once

// Labelled abstract syntax for lActor programs: parsing, desugaring,
// normalization and the compiled (flat, label-indexed) program form
// consumed by the interpreter and the analysis.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lactor::syntax {

using Label = uint32_t;
using Symbol = uint32_t;
using PatternId = uint32_t;

struct Span {
    uint32_t line = 0;
    uint32_t col = 0;
    bool operator==(const Span&) const = default;
};

struct Diagnostic {
    std::string message;
    Span span;
};

// ---------------------------------------------------------------------------
// Parsed tree (sugar still present). Normalization rewrites it away.

enum class ExprKind : uint8_t {
    Var,       // name
    Ctor,      // name, kids = args
    App,       // kids = [fn, args...]
    Fun,       // params, kids = [body]
    Letrec,    // bindings, kids = [body]
    Case,      // kids = [scrutinee], clauses
    Receive,   // clauses
    Send,      // kids = [target, payload]
    Spawn,     // kids = [thunk]
    SelfPid,
    Choice,    // kids = thunk exprs (wrapped into nullary calls by desugar)
    Probe,     // name = tag, kids = [body]
    Seq,       // kids = [first, rest]              (sugar)
    Bind,      // name = var, kids = [rhs, rest]    (sugar: Var = e, rest)
    Tuple,     // kids = elements                   (sugar)
    List,      // kids = elements, tail_cons        (sugar)
};

struct Pattern;
struct Expr;
using ExprPtr = std::unique_ptr<Expr>;
using PatternPtr = std::unique_ptr<Pattern>;

enum class PatternKind : uint8_t { Var, Wildcard, Ctor, Tuple, List };

struct Pattern {
    PatternKind kind;
    Span span;
    std::string name;                 // Var / Ctor
    std::vector<PatternPtr> args;
    bool has_tail = false;            // List: last arg is the tail
};

struct Clause {
    PatternPtr pat;
    ExprPtr body;
};

struct Expr {
    ExprKind kind;
    Span span;
    std::string name;                                      // Var/Ctor/Bind/Probe
    std::vector<ExprPtr> kids;
    std::vector<std::string> params;                       // Fun
    std::vector<std::pair<std::string, ExprPtr>> bindings; // Letrec
    std::vector<Clause> clauses;                           // Case/Receive
    bool list_has_tail = false;                            // List sugar
};

struct ParseResult {
    ExprPtr ast;                      // null on failure
    std::vector<Diagnostic> errors;
};

ParseResult parse(std::string_view source);

// Structural equality ignoring spans (round-trip tests).
bool same_ast(const Expr& a, const Expr& b);

ExprPtr clone(const Expr& e);

// Rewrites sequencing, match-bindings, tuple/list literals and wildcards.
// Choice arguments are wrapped into nullary applications.
ExprPtr desugar(ExprPtr ast);

// Free variables; patterns bind their variables in clause bodies.
std::set<std::string> free_vars(const Expr& e);

// Prints a parseable rendering of the tree (any stage).
std::string pretty(const Expr& e);

// ---------------------------------------------------------------------------
// Compiled program: dense preorder labels over a flat node pool.

enum class NodeKind : uint8_t {
    Var,
    Ctor,     // kids = arg labels (all Var nodes after normalization)
    App,      // kids = [fn, args...]
    Fun,      // params, kids = [body]
    Letrec,   // params = binder symbols, kids = [fun..., body]
    Case,     // kids = [scrutinee (Var node)], clauses
    Receive,  // clauses
    SelfPid,
    Choice,   // kids = nullary App wrappers
    Probe,    // name = tag symbol, kids = [body]
    Prim,     // name = prim op: function position of send/spawn applications
};

enum class PrimOp : uint32_t { Send = 0, Spawn = 1 };

struct FlatClause {
    PatternId pat;
    Label body;
};

struct PatternNode {
    bool is_var;
    Symbol name;                 // var or ctor symbol
    std::vector<PatternId> args; // Ctor
    uint32_t depth;              // Var = 0, Ctor = 1 + max(args)
    Span span;
};

struct Node {
    NodeKind kind;
    Span span;
    Symbol name = 0;                  // Var/Ctor/Probe tag/Prim op
    std::vector<Label> kids;
    std::vector<Symbol> params;       // Fun params / Letrec binders
    std::vector<FlatClause> clauses;  // Case / Receive
    std::vector<Symbol> fv;           // sorted free variables of this subterm
};

class SymbolTable {
  public:
    Symbol intern(std::string_view s);
    const std::string& name(Symbol s) const { return names_.at(s); }
    std::optional<Symbol> lookup(std::string_view s) const;
    size_t size() const { return names_.size(); }

  private:
    std::vector<std::string> names_;
    std::map<std::string, Symbol, std::less<>> index_;
};

struct Program {
    std::vector<Node> nodes;
    Label root = 0;
    SymbolTable syms;
    std::map<Symbol, uint32_t> sigma;       // constructor arities
    std::map<Symbol, Label> probes;         // probe tag -> probe node
    std::vector<PatternNode> patterns;
    uint32_t max_receive_pattern_depth = 0;

    const Node& node(Label l) const { return nodes[l]; }
    // arg(l, i) and len(l) of application-shaped labels.
    Label arg(Label l, uint32_t i) const { return nodes[l].kids[i]; }
    uint32_t len(Label l) const {
        return static_cast<uint32_t>(nodes[l].kids.size()) - 1;
    }
};

struct NormalizeResult {
    std::optional<Program> program;
    std::vector<Diagnostic> errors;       // FreeVariable, UnknownArity, ...
};

// Alpha-renames for global uniqueness, forces constructor arguments and case
// scrutinees to variables, assigns preorder labels, computes probe map and
// constructor alphabet, and checks closedness.
NormalizeResult normalize(const Expr& desugared);

// parse + desugar + normalize.
NormalizeResult compile(std::string_view source, std::vector<Diagnostic>* parse_errors = nullptr);

std::string pattern_to_string(const Program& p, PatternId id);
std::string node_brief(const Program& p, Label l);

} // namespace lactor::syntax
