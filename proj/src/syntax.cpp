#include "lactor/syntax.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace lactor::syntax {

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok : uint8_t {
    Atom, Var, Wild,
    LParen, RParen, LBrace, RBrace, LBrack, RBrack,
    Comma, Semi, Dot, Arrow, Eq, Pipe,
    KwFun, KwReceive, KwCase, KwOf, KwEnd, KwLetrec, KwIn,
    KwSend, KwSpawn, KwSelf, KwChoice, KwProbe,
    Eof, Error,
};

struct Token {
    Tok kind;
    std::string text;
    Span span;
};

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_cont(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '\'';
}

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run(std::vector<Diagnostic>& errors) {
        std::vector<Token> out;
        while (true) {
            skip_ws_and_comments();
            Span sp{line_, col_};
            if (pos_ >= src_.size()) {
                out.push_back({Tok::Eof, "", sp});
                break;
            }
            char c = src_[pos_];
            if (ident_start(c)) {
                size_t start = pos_;
                while (pos_ < src_.size() && ident_cont(src_[pos_])) advance();
                std::string text(src_.substr(start, pos_ - start));
                out.push_back({classify(text), text, sp});
                continue;
            }
            switch (c) {
                case '(': push(out, Tok::LParen, sp); break;
                case ')': push(out, Tok::RParen, sp); break;
                case '{': push(out, Tok::LBrace, sp); break;
                case '}': push(out, Tok::RBrace, sp); break;
                case '[': push(out, Tok::LBrack, sp); break;
                case ']': push(out, Tok::RBrack, sp); break;
                case ',': push(out, Tok::Comma, sp); break;
                case ';': push(out, Tok::Semi, sp); break;
                case '.': push(out, Tok::Dot, sp); break;
                case '=': push(out, Tok::Eq, sp); break;
                case '|': push(out, Tok::Pipe, sp); break;
                case '-':
                    if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
                        advance();
                        push(out, Tok::Arrow, sp);
                    } else {
                        errors.push_back({"unexpected character '-'", sp});
                        advance();
                    }
                    break;
                default:
                    errors.push_back({std::string("unexpected character '") + c + "'", sp});
                    advance();
                    break;
            }
        }
        return out;
    }

  private:
    void push(std::vector<Token>& out, Tok k, Span sp) {
        out.push_back({k, std::string(src_.substr(pos_, 1)), sp});
        advance();
    }

    static Tok classify(const std::string& text) {
        if (text == "fun") return Tok::KwFun;
        if (text == "receive") return Tok::KwReceive;
        if (text == "case") return Tok::KwCase;
        if (text == "of") return Tok::KwOf;
        if (text == "end") return Tok::KwEnd;
        if (text == "letrec") return Tok::KwLetrec;
        if (text == "in") return Tok::KwIn;
        if (text == "send") return Tok::KwSend;
        if (text == "spawn") return Tok::KwSpawn;
        if (text == "self") return Tok::KwSelf;
        if (text == "choice") return Tok::KwChoice;
        if (text == "probe") return Tok::KwProbe;
        if (text == "_") return Tok::Wild;
        char c = text[0];
        return (c >= 'A' && c <= 'Z') || c == '_' ? Tok::Var : Tok::Atom;
    }

    void skip_ws_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '%') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    void advance() {
        if (src_[pos_] == '\n') {
            line_++;
            col_ = 1;
        } else {
            col_++;
        }
        pos_++;
    }

    std::string_view src_;
    size_t pos_ = 0;
    uint32_t line_ = 1, col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser
//
// Commas are overloaded: inside argument lists, tuples and list literals they
// separate elements; elsewhere they build sequences. A fun body parsed inside
// a separator context stops at the first comma, which keeps listings like
// choice(fun() -> zero, fun() -> {succ, any_num()}) unambiguous.

ExprPtr mk(ExprKind k, Span sp) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->span = sp;
    return e;
}

class Parser {
  public:
    Parser(std::vector<Token> toks, std::vector<Diagnostic>& errors)
        : toks_(std::move(toks)), errors_(errors) {}

    ExprPtr parse_program() {
        ExprPtr e = parse_expr(/*seq=*/true);
        if (!e) return nullptr;
        if (peek().kind == Tok::Dot) next();
        if (peek().kind != Tok::Eof) {
            error("expected end of input", peek().span);
            return nullptr;
        }
        return e;
    }

    bool failed() const { return failed_; }

  private:
    const Token& peek(size_t k = 0) const {
        size_t i = std::min(pos_ + k, toks_.size() - 1);
        return toks_[i];
    }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) pos_++;
        return t;
    }
    bool accept(Tok k) {
        if (peek().kind == k) {
            next();
            return true;
        }
        return false;
    }
    bool expect(Tok k, const char* what) {
        if (accept(k)) return true;
        error(std::string("expected ") + what, peek().span);
        return false;
    }
    void error(std::string msg, Span sp) {
        if (!failed_) errors_.push_back({std::move(msg), sp});
        failed_ = true;
    }

    // seq=true: commas extend the expression into a sequence and `V = e`
    // match-bindings are allowed, scoping over the rest of the sequence.
    // A fun literal in a sequence position takes the rest of the sequence as
    // its body; in separator positions (argument lists, tuples, binding right
    // hand sides) its body stops before the comma.
    ExprPtr parse_expr(bool seq) {
        if (!seq) return parse_item(false);
        Span sp = peek().span;
        std::vector<std::pair<std::string, ExprPtr>> binds; // "" = plain item
        while (true) {
            if (peek().kind == Tok::Var && peek(1).kind == Tok::Eq) {
                std::string name = next().text;
                next(); // '='
                ExprPtr rhs = parse_item(false);
                if (!rhs) return nullptr;
                binds.emplace_back(std::move(name), std::move(rhs));
            } else {
                ExprPtr item = parse_item(true);
                if (!item) return nullptr;
                binds.emplace_back("", std::move(item));
            }
            if (!accept(Tok::Comma)) break;
        }
        if (binds.back().first != "") {
            error("a match binding cannot end a sequence", sp);
            return nullptr;
        }
        // Fold right: X = e scopes over the rest; plain items sequence.
        ExprPtr acc = std::move(binds.back().second);
        for (size_t i = binds.size() - 1; i-- > 0;) {
            if (binds[i].first.empty()) {
                auto s = mk(ExprKind::Seq, binds[i].second->span);
                s->kids.push_back(std::move(binds[i].second));
                s->kids.push_back(std::move(acc));
                acc = std::move(s);
            } else {
                auto b = mk(ExprKind::Bind, binds[i].second->span);
                b->name = binds[i].first;
                b->kids.push_back(std::move(binds[i].second));
                b->kids.push_back(std::move(acc));
                acc = std::move(b);
            }
        }
        return acc;
    }

    // One sequence item: a primary expression with applied argument lists.
    ExprPtr parse_item(bool seq_body) {
        ExprPtr e = parse_primary(seq_body);
        if (!e) return nullptr;
        while (peek().kind == Tok::LParen) {
            next();
            auto app = mk(ExprKind::App, e->span);
            app->kids.push_back(std::move(e));
            if (!parse_args(app->kids)) return nullptr;
            e = std::move(app);
        }
        return e;
    }

    bool parse_args(std::vector<ExprPtr>& out) {
        if (accept(Tok::RParen)) return true;
        while (true) {
            ExprPtr a = parse_item(false);
            if (!a) return false;
            out.push_back(std::move(a));
            if (accept(Tok::RParen)) return true;
            if (!expect(Tok::Comma, "',' or ')' in argument list")) return false;
        }
    }

    ExprPtr parse_primary(bool seq_body) {
        const Token& t = peek();
        Span sp = t.span;
        switch (t.kind) {
            case Tok::Var: {
                next();
                auto e = mk(ExprKind::Var, sp);
                e->name = t.text;
                return e;
            }
            case Tok::Atom: {
                next();
                if (in_scope(t.text)) {
                    auto e = mk(ExprKind::Var, sp);
                    e->name = t.text;
                    return e;
                }
                auto e = mk(ExprKind::Ctor, sp);
                e->name = t.text;
                // constructor application: c(e1, ..., en)
                if (peek().kind == Tok::LParen) {
                    next();
                    if (!parse_args(e->kids)) return nullptr;
                }
                return e;
            }
            case Tok::KwFun: {
                next();
                auto e = mk(ExprKind::Fun, sp);
                if (!expect(Tok::LParen, "'(' after fun")) return nullptr;
                if (!accept(Tok::RParen)) {
                    while (true) {
                        const Token& p = peek();
                        if (p.kind == Tok::Var) {
                            e->params.push_back(next().text);
                        } else if (p.kind == Tok::Wild) {
                            next();
                            e->params.push_back("_");
                        } else {
                            error("expected parameter name", p.span);
                            return nullptr;
                        }
                        if (accept(Tok::RParen)) break;
                        if (!expect(Tok::Comma, "',' in parameter list")) return nullptr;
                    }
                }
                if (!expect(Tok::Arrow, "'->' after fun parameters")) return nullptr;
                ExprPtr body = parse_expr(seq_body);
                if (!body) return nullptr;
                e->kids.push_back(std::move(body));
                return e;
            }
            case Tok::KwLetrec: return parse_letrec(seq_body);
            case Tok::KwCase: {
                next();
                auto e = mk(ExprKind::Case, sp);
                ExprPtr scrut = parse_expr(true);
                if (!scrut) return nullptr;
                e->kids.push_back(std::move(scrut));
                if (!expect(Tok::KwOf, "'of' in case")) return nullptr;
                if (!parse_clauses(e->clauses)) return nullptr;
                return e;
            }
            case Tok::KwReceive: {
                next();
                auto e = mk(ExprKind::Receive, sp);
                if (!parse_clauses(e->clauses)) return nullptr;
                return e;
            }
            case Tok::KwSend: {
                next();
                auto e = mk(ExprKind::Send, sp);
                if (!expect(Tok::LParen, "'(' after send")) return nullptr;
                ExprPtr a = parse_item(false);
                if (!a) return nullptr;
                if (!expect(Tok::Comma, "',' between send arguments")) return nullptr;
                ExprPtr b = parse_item(false);
                if (!b) return nullptr;
                if (!expect(Tok::RParen, "')' after send arguments")) return nullptr;
                e->kids.push_back(std::move(a));
                e->kids.push_back(std::move(b));
                return e;
            }
            case Tok::KwSpawn: {
                next();
                auto e = mk(ExprKind::Spawn, sp);
                if (!expect(Tok::LParen, "'(' after spawn")) return nullptr;
                ExprPtr a = parse_item(false);
                if (!a) return nullptr;
                if (!expect(Tok::RParen, "')' after spawn argument")) return nullptr;
                e->kids.push_back(std::move(a));
                return e;
            }
            case Tok::KwSelf: {
                next();
                if (!expect(Tok::LParen, "'(' after self")) return nullptr;
                if (!expect(Tok::RParen, "')' after self(")) return nullptr;
                return mk(ExprKind::SelfPid, sp);
            }
            case Tok::KwChoice: {
                next();
                auto e = mk(ExprKind::Choice, sp);
                if (!expect(Tok::LParen, "'(' after choice")) return nullptr;
                if (!parse_args(e->kids)) return nullptr;
                if (e->kids.empty()) {
                    error("choice needs at least one alternative", sp);
                    return nullptr;
                }
                return e;
            }
            case Tok::KwProbe: {
                next();
                auto e = mk(ExprKind::Probe, sp);
                if (!expect(Tok::LParen, "'(' after probe")) return nullptr;
                if (peek().kind != Tok::Atom) {
                    error("probe tag must be a lowercase atom", peek().span);
                    return nullptr;
                }
                e->name = next().text;
                if (!expect(Tok::Comma, "',' after probe tag")) return nullptr;
                ExprPtr body = parse_item(false);
                if (!body) return nullptr;
                if (!expect(Tok::RParen, "')' after probe body")) return nullptr;
                e->kids.push_back(std::move(body));
                return e;
            }
            case Tok::LParen: {
                next();
                ExprPtr e = parse_expr(true); // group: sequencing allowed
                if (!e) return nullptr;
                if (!expect(Tok::RParen, "')'")) return nullptr;
                return e;
            }
            case Tok::LBrace: {
                next();
                auto e = mk(ExprKind::Tuple, sp);
                if (!accept(Tok::RBrace)) {
                    while (true) {
                        ExprPtr a = parse_item(false);
                        if (!a) return nullptr;
                        e->kids.push_back(std::move(a));
                        if (accept(Tok::RBrace)) break;
                        if (!expect(Tok::Comma, "',' or '}' in tuple")) return nullptr;
                    }
                }
                return e;
            }
            case Tok::LBrack: {
                next();
                auto e = mk(ExprKind::List, sp);
                if (accept(Tok::RBrack)) return e;
                while (true) {
                    ExprPtr a = parse_item(false);
                    if (!a) return nullptr;
                    e->kids.push_back(std::move(a));
                    if (accept(Tok::RBrack)) break;
                    if (accept(Tok::Pipe)) {
                        ExprPtr tail = parse_item(false);
                        if (!tail) return nullptr;
                        e->kids.push_back(std::move(tail));
                        e->list_has_tail = true;
                        if (!expect(Tok::RBrack, "']' after list tail")) return nullptr;
                        break;
                    }
                    if (!expect(Tok::Comma, "',' '|' or ']' in list")) return nullptr;
                }
                return e;
            }
            default:
                error("expected an expression", sp);
                return nullptr;
        }
    }

    ExprPtr parse_letrec(bool) {
        Span sp = next().span; // letrec
        auto e = mk(ExprKind::Letrec, sp);
        // Binder names scope over every right hand side and the body, so
        // collect them first with a cheap token scan.
        size_t save = pos_;
        std::vector<std::string> names;
        int depth = 0;
        while (peek().kind != Tok::Eof) {
            const Token& t = peek();
            if (depth == 0 && t.kind == Tok::KwIn) break;
            if (t.kind == Tok::KwLetrec || t.kind == Tok::KwCase || t.kind == Tok::KwReceive)
                depth++;
            if (t.kind == Tok::KwEnd || (t.kind == Tok::KwIn && depth > 0)) depth--;
            if (depth == 0 && t.kind == Tok::Atom &&
                (peek(1).kind == Tok::Eq ||
                 (peek(1).kind == Tok::LParen && is_binder_header(pos_ + 1)))) {
                names.push_back(t.text);
            }
            next();
        }
        pos_ = save;
        scopes_.push_back({names.begin(), names.end()});

        bool ok = true;
        while (peek().kind != Tok::KwIn && peek().kind != Tok::Eof) {
            if (peek().kind != Tok::Atom) {
                error("expected a letrec binding name", peek().span);
                ok = false;
                break;
            }
            std::string name = next().text;
            std::vector<std::string> sugar_params;
            bool has_sugar = false;
            if (peek().kind == Tok::LParen) { // name(Params) = body sugar
                has_sugar = true;
                next();
                if (!accept(Tok::RParen)) {
                    while (true) {
                        const Token& p = peek();
                        if (p.kind == Tok::Var) {
                            sugar_params.push_back(next().text);
                        } else if (p.kind == Tok::Wild) {
                            next();
                            sugar_params.push_back("_");
                        } else {
                            error("expected parameter name", p.span);
                            ok = false;
                            break;
                        }
                        if (accept(Tok::RParen)) break;
                        if (!expect(Tok::Comma, "',' in parameter list")) {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if (!ok) break;
            Span eq_sp = peek().span;
            if (!expect(Tok::Eq, "'=' in letrec binding")) {
                ok = false;
                break;
            }
            ExprPtr rhs = parse_expr(true);
            if (!rhs) {
                ok = false;
                break;
            }
            if (!expect(Tok::Dot, "'.' after letrec binding")) {
                ok = false;
                break;
            }
            if (has_sugar) {
                auto f = mk(ExprKind::Fun, eq_sp);
                f->params = std::move(sugar_params);
                f->kids.push_back(std::move(rhs));
                rhs = std::move(f);
            }
            if (rhs->kind != ExprKind::Fun) {
                error("letrec bindings must be functions", rhs->span);
                ok = false;
                break;
            }
            e->bindings.emplace_back(std::move(name), std::move(rhs));
        }
        if (ok && expect(Tok::KwIn, "'in' after letrec bindings")) {
            ExprPtr body = parse_expr(true);
            if (body)
                e->kids.push_back(std::move(body));
            else
                ok = false;
        }
        scopes_.pop_back();
        return ok ? std::move(e) : nullptr;
    }

    // Lookahead after an atom's '(': a parameter list followed by '='.
    bool is_binder_header(size_t lparen) const {
        size_t i = lparen + 1;
        while (i < toks_.size()) {
            Tok k = toks_[i].kind;
            if (k == Tok::Var || k == Tok::Wild || k == Tok::Comma) {
                i++;
                continue;
            }
            if (k == Tok::RParen) return i + 1 < toks_.size() && toks_[i + 1].kind == Tok::Eq;
            return false;
        }
        return false;
    }

    bool parse_clauses(std::vector<Clause>& out) {
        while (true) {
            PatternPtr pat = parse_pattern();
            if (!pat) return false;
            if (!expect(Tok::Arrow, "'->' after pattern")) return false;
            ExprPtr body = parse_expr(true);
            if (!body) return false;
            out.push_back({std::move(pat), std::move(body)});
            if (accept(Tok::Semi)) {
                if (accept(Tok::KwEnd)) return true; // tolerate trailing ';'
                continue;
            }
            return expect(Tok::KwEnd, "'end' after clauses");
        }
    }

    PatternPtr parse_pattern() {
        const Token& t = peek();
        Span sp = t.span;
        auto p = std::make_unique<Pattern>();
        p->span = sp;
        switch (t.kind) {
            case Tok::Var:
                next();
                p->kind = PatternKind::Var;
                p->name = t.text;
                return p;
            case Tok::Wild:
                next();
                p->kind = PatternKind::Wildcard;
                return p;
            case Tok::Atom: {
                next();
                p->kind = PatternKind::Ctor;
                p->name = t.text;
                if (accept(Tok::LParen)) {
                    if (!accept(Tok::RParen)) {
                        while (true) {
                            PatternPtr a = parse_pattern();
                            if (!a) return nullptr;
                            p->args.push_back(std::move(a));
                            if (accept(Tok::RParen)) break;
                            if (!expect(Tok::Comma, "',' in pattern arguments")) return nullptr;
                        }
                    }
                }
                return p;
            }
            case Tok::LBrace: {
                next();
                p->kind = PatternKind::Tuple;
                if (!accept(Tok::RBrace)) {
                    while (true) {
                        PatternPtr a = parse_pattern();
                        if (!a) return nullptr;
                        p->args.push_back(std::move(a));
                        if (accept(Tok::RBrace)) break;
                        if (!expect(Tok::Comma, "',' or '}' in tuple pattern")) return nullptr;
                    }
                }
                return p;
            }
            case Tok::LBrack: {
                next();
                p->kind = PatternKind::List;
                if (accept(Tok::RBrack)) return p;
                while (true) {
                    PatternPtr a = parse_pattern();
                    if (!a) return nullptr;
                    p->args.push_back(std::move(a));
                    if (accept(Tok::RBrack)) break;
                    if (accept(Tok::Pipe)) {
                        PatternPtr tail = parse_pattern();
                        if (!tail) return nullptr;
                        p->args.push_back(std::move(tail));
                        p->has_tail = true;
                        if (!expect(Tok::RBrack, "']' after list pattern tail")) return nullptr;
                        break;
                    }
                    if (!expect(Tok::Comma, "',' '|' or ']' in list pattern")) return nullptr;
                }
                return p;
            }
            default:
                error("expected a pattern", sp);
                return nullptr;
        }
    }

    bool in_scope(const std::string& name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
            if (it->count(name)) return true;
        return false;
    }

    std::vector<Token> toks_;
    std::vector<Diagnostic>& errors_;
    size_t pos_ = 0;
    bool failed_ = false;
    std::vector<std::set<std::string>> scopes_;
};

} // namespace

ParseResult parse(std::string_view source) {
    ParseResult res;
    Lexer lex(source);
    std::vector<Token> toks = lex.run(res.errors);
    if (!res.errors.empty()) return res;
    Parser p(std::move(toks), res.errors);
    ExprPtr ast = p.parse_program();
    if (!p.failed()) res.ast = std::move(ast);
    return res;
}

// ---------------------------------------------------------------------------

static PatternPtr clone_pattern(const Pattern& p) {
    auto c = std::make_unique<Pattern>();
    c->kind = p.kind;
    c->span = p.span;
    c->name = p.name;
    c->has_tail = p.has_tail;
    for (const auto& a : p.args) c->args.push_back(clone_pattern(*a));
    return c;
}

ExprPtr clone(const Expr& e) {
    auto c = mk(e.kind, e.span);
    c->name = e.name;
    c->params = e.params;
    c->list_has_tail = e.list_has_tail;
    for (const auto& k : e.kids) c->kids.push_back(clone(*k));
    for (const auto& [n, b] : e.bindings) c->bindings.emplace_back(n, clone(*b));
    for (const auto& cl : e.clauses) {
        Clause copy;
        copy.pat = clone_pattern(*cl.pat);
        copy.body = clone(*cl.body);
        c->clauses.push_back(std::move(copy));
    }
    return c;
}

static bool same_pattern(const Pattern& a, const Pattern& b) {
    if (a.kind != b.kind || a.name != b.name || a.has_tail != b.has_tail ||
        a.args.size() != b.args.size())
        return false;
    for (size_t i = 0; i < a.args.size(); i++)
        if (!same_pattern(*a.args[i], *b.args[i])) return false;
    return true;
}

bool same_ast(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.name != b.name || a.params != b.params ||
        a.list_has_tail != b.list_has_tail || a.kids.size() != b.kids.size() ||
        a.bindings.size() != b.bindings.size() || a.clauses.size() != b.clauses.size())
        return false;
    for (size_t i = 0; i < a.kids.size(); i++)
        if (!same_ast(*a.kids[i], *b.kids[i])) return false;
    for (size_t i = 0; i < a.bindings.size(); i++) {
        if (a.bindings[i].first != b.bindings[i].first) return false;
        if (!same_ast(*a.bindings[i].second, *b.bindings[i].second)) return false;
    }
    for (size_t i = 0; i < a.clauses.size(); i++) {
        if (!same_pattern(*a.clauses[i].pat, *b.clauses[i].pat)) return false;
        if (!same_ast(*a.clauses[i].body, *b.clauses[i].body)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Desugaring

namespace {

class Desugarer {
  public:
    ExprPtr expr(ExprPtr e) {
        switch (e->kind) {
            case ExprKind::Seq: {
                // (e1, e2) is shorthand for (fun(_) -> e2)(e1)
                auto fn = mk(ExprKind::Fun, e->span);
                fn->params.push_back(fresh());
                fn->kids.push_back(expr(std::move(e->kids[1])));
                auto app = mk(ExprKind::App, e->span);
                app->kids.push_back(std::move(fn));
                app->kids.push_back(expr(std::move(e->kids[0])));
                return app;
            }
            case ExprKind::Bind: {
                auto fn = mk(ExprKind::Fun, e->span);
                fn->params.push_back(e->name);
                fn->kids.push_back(expr(std::move(e->kids[1])));
                auto app = mk(ExprKind::App, e->span);
                app->kids.push_back(std::move(fn));
                app->kids.push_back(expr(std::move(e->kids[0])));
                return app;
            }
            case ExprKind::Tuple: {
                auto c = mk(ExprKind::Ctor, e->span);
                c->name = "tuple" + std::to_string(e->kids.size());
                for (auto& k : e->kids) c->kids.push_back(expr(std::move(k)));
                return c;
            }
            case ExprKind::List: {
                ExprPtr acc;
                size_t n = e->kids.size();
                size_t first_elem = n;
                if (e->list_has_tail) {
                    acc = expr(std::move(e->kids[n - 1]));
                    first_elem = n - 1;
                } else {
                    acc = mk(ExprKind::Ctor, e->span);
                    acc->name = "nil";
                }
                for (size_t i = first_elem; i-- > 0;) {
                    auto c = mk(ExprKind::Ctor, e->kids[i]->span);
                    c->name = "cons";
                    c->kids.push_back(expr(std::move(e->kids[i])));
                    c->kids.push_back(std::move(acc));
                    acc = std::move(c);
                }
                return acc;
            }
            case ExprKind::Choice: {
                // choice non-deterministically calls one of its arguments.
                for (auto& k : e->kids) {
                    auto call = mk(ExprKind::App, k->span);
                    call->kids.push_back(expr(std::move(k)));
                    k = std::move(call);
                }
                return e;
            }
            default:
                for (auto& k : e->kids) k = expr(std::move(k));
                for (auto& [n, b] : e->bindings) b = expr(std::move(b));
                for (auto& cl : e->clauses) {
                    cl.pat = pattern(std::move(cl.pat));
                    cl.body = expr(std::move(cl.body));
                }
                for (auto& p : e->params)
                    if (p == "_") p = fresh();
                return e;
        }
    }

    PatternPtr pattern(PatternPtr p) {
        switch (p->kind) {
            case PatternKind::Wildcard: {
                p->kind = PatternKind::Var;
                p->name = fresh();
                return p;
            }
            case PatternKind::Tuple: {
                p->kind = PatternKind::Ctor;
                p->name = "tuple" + std::to_string(p->args.size());
                for (auto& a : p->args) a = pattern(std::move(a));
                return p;
            }
            case PatternKind::List: {
                std::vector<PatternPtr> args = std::move(p->args);
                PatternPtr acc;
                size_t n = args.size();
                size_t first_elem = n;
                if (p->has_tail) {
                    acc = pattern(std::move(args[n - 1]));
                    first_elem = n - 1;
                } else {
                    acc = std::make_unique<Pattern>();
                    acc->kind = PatternKind::Ctor;
                    acc->span = p->span;
                    acc->name = "nil";
                }
                for (size_t i = first_elem; i-- > 0;) {
                    auto c = std::make_unique<Pattern>();
                    c->kind = PatternKind::Ctor;
                    c->span = args[i]->span;
                    c->name = "cons";
                    c->args.push_back(pattern(std::move(args[i])));
                    c->args.push_back(std::move(acc));
                    acc = std::move(c);
                }
                return acc;
            }
            default:
                for (auto& a : p->args) a = pattern(std::move(a));
                return p;
        }
    }

  private:
    std::string fresh() { return "_W" + std::to_string(counter_++); }
    uint32_t counter_ = 0;
};

} // namespace

ExprPtr desugar(ExprPtr ast) {
    Desugarer d;
    return d.expr(std::move(ast));
}

// ---------------------------------------------------------------------------
// Free variables

static void fv_pattern(const Pattern& p, std::set<std::string>& out) {
    if (p.kind == PatternKind::Var)
        out.insert(p.name);
    else
        for (const auto& a : p.args) fv_pattern(*a, out);
}

static void fv_walk(const Expr& e, std::set<std::string>& bound, std::set<std::string>& out) {
    auto with_bound = [&](const std::vector<std::string>& names, const Expr& body) {
        std::vector<std::string> added;
        for (const auto& n : names)
            if (bound.insert(n).second) added.push_back(n);
        fv_walk(body, bound, out);
        for (const auto& n : added) bound.erase(n);
    };
    switch (e.kind) {
        case ExprKind::Var:
            if (!bound.count(e.name)) out.insert(e.name);
            return;
        case ExprKind::Fun:
            with_bound(e.params, *e.kids[0]);
            return;
        case ExprKind::Letrec: {
            std::vector<std::string> names;
            for (const auto& [n, b] : e.bindings) names.push_back(n);
            std::vector<std::string> added;
            for (const auto& n : names)
                if (bound.insert(n).second) added.push_back(n);
            for (const auto& [n, b] : e.bindings) fv_walk(*b, bound, out);
            fv_walk(*e.kids[0], bound, out);
            for (const auto& n : added) bound.erase(n);
            return;
        }
        case ExprKind::Case:
        case ExprKind::Receive: {
            for (const auto& k : e.kids) fv_walk(*k, bound, out);
            for (const auto& cl : e.clauses) {
                std::set<std::string> pv;
                fv_pattern(*cl.pat, pv);
                with_bound({pv.begin(), pv.end()}, *cl.body);
            }
            return;
        }
        case ExprKind::Bind: {
            fv_walk(*e.kids[0], bound, out);
            with_bound({e.name}, *e.kids[1]);
            return;
        }
        default:
            for (const auto& k : e.kids) fv_walk(*k, bound, out);
            return;
    }
}

std::set<std::string> free_vars(const Expr& e) {
    std::set<std::string> bound, out;
    fv_walk(e, bound, out);
    return out;
}

// ---------------------------------------------------------------------------
// Pretty printer

namespace {

void print_pattern(const Pattern& p, std::ostringstream& os) {
    switch (p.kind) {
        case PatternKind::Var: os << p.name; return;
        case PatternKind::Wildcard: os << "_"; return;
        case PatternKind::Ctor:
            os << p.name;
            if (!p.args.empty()) {
                os << "(";
                for (size_t i = 0; i < p.args.size(); i++) {
                    if (i) os << ", ";
                    print_pattern(*p.args[i], os);
                }
                os << ")";
            }
            return;
        case PatternKind::Tuple: {
            os << "{";
            for (size_t i = 0; i < p.args.size(); i++) {
                if (i) os << ", ";
                print_pattern(*p.args[i], os);
            }
            os << "}";
            return;
        }
        case PatternKind::List: {
            os << "[";
            size_t n = p.args.size();
            size_t elems = p.has_tail ? n - 1 : n;
            for (size_t i = 0; i < elems; i++) {
                if (i) os << ", ";
                print_pattern(*p.args[i], os);
            }
            if (p.has_tail) {
                os << " | ";
                print_pattern(*p.args[n - 1], os);
            }
            os << "]";
            return;
        }
    }
}

void print_expr(const Expr& e, std::ostringstream& os);

void print_arg(const Expr& e, std::ostringstream& os) {
    // Inside separator contexts anything that could swallow a comma or
    // continue past the argument gets wrapped.
    bool wrap = e.kind == ExprKind::Fun || e.kind == ExprKind::Letrec ||
                e.kind == ExprKind::Seq || e.kind == ExprKind::Bind;
    if (wrap) os << "(";
    print_expr(e, os);
    if (wrap) os << ")";
}

void print_seq(const Expr& e, std::ostringstream& os) {
    const Expr* cur = &e;
    while (true) {
        if (cur->kind == ExprKind::Seq) {
            print_arg(*cur->kids[0], os);
            os << ", ";
            cur = cur->kids[1].get();
        } else if (cur->kind == ExprKind::Bind) {
            os << cur->name << " = ";
            print_arg(*cur->kids[0], os);
            os << ", ";
            cur = cur->kids[1].get();
        } else {
            print_arg(*cur, os);
            return;
        }
    }
}

void print_expr(const Expr& e, std::ostringstream& os) {
    switch (e.kind) {
        case ExprKind::Var: os << e.name; return;
        case ExprKind::Ctor:
            os << e.name;
            if (!e.kids.empty()) {
                os << "(";
                for (size_t i = 0; i < e.kids.size(); i++) {
                    if (i) os << ", ";
                    print_arg(*e.kids[i], os);
                }
                os << ")";
            }
            return;
        case ExprKind::App: {
            const Expr& fn = *e.kids[0];
            bool wrap = fn.kind != ExprKind::Var;
            if (wrap) os << "(";
            print_expr(fn, os);
            if (wrap) os << ")";
            os << "(";
            for (size_t i = 1; i < e.kids.size(); i++) {
                if (i > 1) os << ", ";
                print_arg(*e.kids[i], os);
            }
            os << ")";
            return;
        }
        case ExprKind::Fun:
            os << "fun(";
            for (size_t i = 0; i < e.params.size(); i++) {
                if (i) os << ", ";
                os << e.params[i];
            }
            os << ") -> ";
            print_seq(*e.kids[0], os);
            return;
        case ExprKind::Letrec:
            os << "letrec ";
            for (const auto& [n, b] : e.bindings) {
                os << n << " = ";
                print_seq(*b, os);
                os << ". ";
            }
            os << "in ";
            print_seq(*e.kids[0], os);
            return;
        case ExprKind::Case:
            os << "case ";
            print_seq(*e.kids[0], os);
            os << " of ";
            for (size_t i = 0; i < e.clauses.size(); i++) {
                if (i) os << "; ";
                print_pattern(*e.clauses[i].pat, os);
                os << " -> ";
                print_seq(*e.clauses[i].body, os);
            }
            os << " end";
            return;
        case ExprKind::Receive:
            os << "receive ";
            for (size_t i = 0; i < e.clauses.size(); i++) {
                if (i) os << "; ";
                print_pattern(*e.clauses[i].pat, os);
                os << " -> ";
                print_seq(*e.clauses[i].body, os);
            }
            os << " end";
            return;
        case ExprKind::Send:
            os << "send(";
            print_arg(*e.kids[0], os);
            os << ", ";
            print_arg(*e.kids[1], os);
            os << ")";
            return;
        case ExprKind::Spawn:
            os << "spawn(";
            print_arg(*e.kids[0], os);
            os << ")";
            return;
        case ExprKind::SelfPid: os << "self()"; return;
        case ExprKind::Choice:
            os << "choice(";
            for (size_t i = 0; i < e.kids.size(); i++) {
                if (i) os << ", ";
                // Print the bare thunk when desugaring wrapped it.
                const Expr* k = e.kids[i].get();
                if (k->kind == ExprKind::App && k->kids.size() == 1)
                    print_arg(*k->kids[0], os);
                else
                    print_arg(*k, os);
            }
            os << ")";
            return;
        case ExprKind::Probe:
            os << "probe(" << e.name << ", ";
            print_arg(*e.kids[0], os);
            os << ")";
            return;
        case ExprKind::Seq:
        case ExprKind::Bind:
            os << "(";
            print_seq(e, os);
            os << ")";
            return;
        case ExprKind::Tuple:
            os << "{";
            for (size_t i = 0; i < e.kids.size(); i++) {
                if (i) os << ", ";
                print_arg(*e.kids[i], os);
            }
            os << "}";
            return;
        case ExprKind::List: {
            os << "[";
            size_t n = e.kids.size();
            size_t elems = e.list_has_tail ? n - 1 : n;
            for (size_t i = 0; i < elems; i++) {
                if (i) os << ", ";
                print_arg(*e.kids[i], os);
            }
            if (e.list_has_tail) {
                os << " | ";
                print_arg(*e.kids[n - 1], os);
            }
            os << "]";
            return;
        }
    }
}

} // namespace

std::string pretty(const Expr& e) {
    std::ostringstream os;
    print_expr(e, os);
    return os.str();
}

// ---------------------------------------------------------------------------
// Symbol table

Symbol SymbolTable::intern(std::string_view s) {
    auto it = index_.find(s);
    if (it != index_.end()) return it->second;
    Symbol id = static_cast<Symbol>(names_.size());
    names_.emplace_back(s);
    index_.emplace(names_.back(), id);
    return id;
}

std::optional<Symbol> SymbolTable::lookup(std::string_view s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// Normalization: alpha-renaming, binding insertion, flattening.

namespace {

class Normalizer {
  public:
    explicit Normalizer(const Expr& ast) : ast_(clone(ast)) {}

    NormalizeResult run() {
        collect_names(*ast_);
        rename(*ast_, {});
        force_variable_args(ast_);
        std::set<std::string> fv = free_vars(*ast_);
        if (!fv.empty()) {
            report_free(*ast_, fv);
            for (const auto& n : fv)
                if (!reported_.count(n))
                    errors_.push_back({"free variable " + n, ast_->span});
        }
        if (!errors_.empty()) return {std::nullopt, std::move(errors_)};

        Program prog;
        flatten(*ast_, prog);
        prog.root = 0;
        compute_fv(prog);
        if (!errors_.empty()) return {std::nullopt, std::move(errors_)};
        return {std::move(prog), {}};
    }

  private:
    void collect_names(const Expr& e) {
        for (const auto& p : e.params) used_.insert(p);
        for (const auto& [n, b] : e.bindings) used_.insert(n);
        if (e.kind == ExprKind::Var) used_.insert(e.name);
        for (const auto& k : e.kids) collect_names(*k);
        for (const auto& [n, b] : e.bindings) collect_names(*b);
        for (const auto& cl : e.clauses) {
            collect_pattern_names(*cl.pat);
            collect_names(*cl.body);
        }
    }

    void collect_pattern_names(const Pattern& p) {
        if (p.kind == PatternKind::Var) used_.insert(p.name);
        for (const auto& a : p.args) collect_pattern_names(*a);
    }

    // First binder of a name keeps it; later ones get a fresh suffix that
    // collides with nothing in the program.
    std::string fresh(const std::string& base) {
        if (!taken_.count(base)) {
            taken_.insert(base);
            return base;
        }
        for (uint32_t i = 1;; i++) {
            std::string cand = base + "_" + std::to_string(i);
            if (!taken_.count(cand) && !used_.count(cand)) {
                taken_.insert(cand);
                return cand;
            }
        }
    }

    using Scope = std::map<std::string, std::string>;

    void rename(Expr& e, Scope scope) {
        switch (e.kind) {
            case ExprKind::Var: {
                auto it = scope.find(e.name);
                if (it != scope.end()) e.name = it->second;
                // Unbound lowercase identifiers are constructors.
                else if (!e.name.empty() && e.name[0] >= 'a' && e.name[0] <= 'z')
                    e.kind = ExprKind::Ctor;
                return;
            }
            case ExprKind::Fun: {
                std::set<std::string> seen;
                for (auto& p : e.params) {
                    if (!seen.insert(p).second)
                        errors_.push_back({"duplicate parameter " + p, e.span});
                    std::string nn = fresh(p);
                    scope[p] = nn;
                    p = nn;
                }
                rename(*e.kids[0], scope);
                return;
            }
            case ExprKind::Letrec: {
                for (auto& [n, b] : e.bindings) {
                    std::string nn = fresh(n);
                    scope[n] = nn;
                    n = nn;
                }
                for (auto& [n, b] : e.bindings) rename(*b, scope);
                rename(*e.kids[0], scope);
                return;
            }
            case ExprKind::Case:
            case ExprKind::Receive: {
                for (auto& k : e.kids) rename(*k, scope);
                for (auto& cl : e.clauses) {
                    Scope inner = scope;
                    rename_pattern(*cl.pat, inner);
                    rename(*cl.body, inner);
                }
                return;
            }
            default:
                for (auto& k : e.kids) rename(*k, scope);
                return;
        }
    }

    // A pattern variable already bound in the surrounding scope matches the
    // bound value instead of binding fresh (Erlang-style), so it keeps the
    // outer binding's name.
    void rename_pattern(Pattern& p, Scope& scope) {
        if (p.kind == PatternKind::Var) {
            auto it = scope.find(p.name);
            if (it != scope.end()) {
                p.name = it->second;
                return;
            }
            std::string nn = fresh(p.name);
            scope[p.name] = nn;
            p.name = nn;
            return;
        }
        for (auto& a : p.args) rename_pattern(*a, scope);
    }

    // Constructor arguments and case scrutinees must be variables; wrap
    // anything else in an immediate function application.
    void force_variable_args(ExprPtr& e) {
        for (auto& k : e->kids) force_variable_args(k);
        for (auto& [n, b] : e->bindings) force_variable_args(b);
        for (auto& cl : e->clauses) force_variable_args(cl.body);

        if (e->kind == ExprKind::Ctor && !e->kids.empty()) {
            std::vector<size_t> bad;
            for (size_t i = 0; i < e->kids.size(); i++)
                if (e->kids[i]->kind != ExprKind::Var) bad.push_back(i);
            if (bad.empty()) return;
            auto fn = mk(ExprKind::Fun, e->span);
            auto app = mk(ExprKind::App, e->span);
            std::vector<ExprPtr> args;
            for (size_t i : bad) {
                std::string v = fresh("_V");
                fn->params.push_back(v);
                args.push_back(std::move(e->kids[i]));
                auto var = mk(ExprKind::Var, args.back()->span);
                var->name = v;
                e->kids[i] = std::move(var);
            }
            fn->kids.push_back(std::move(e));
            app->kids.push_back(std::move(fn));
            for (auto& a : args) app->kids.push_back(std::move(a));
            e = std::move(app);
            return;
        }
        if (e->kind == ExprKind::Case && e->kids[0]->kind != ExprKind::Var) {
            std::string v = fresh("_S");
            auto var = mk(ExprKind::Var, e->kids[0]->span);
            var->name = v;
            ExprPtr scrut = std::move(e->kids[0]);
            e->kids[0] = std::move(var);
            auto fn = mk(ExprKind::Fun, e->span);
            fn->params.push_back(v);
            Span sp = e->span;
            fn->kids.push_back(std::move(e));
            auto app = mk(ExprKind::App, sp);
            app->kids.push_back(std::move(fn));
            app->kids.push_back(std::move(scrut));
            e = std::move(app);
            return;
        }
    }

    void report_free(const Expr& e, const std::set<std::string>& fv) {
        if (e.kind == ExprKind::Var && fv.count(e.name) && !reported_.count(e.name)) {
            errors_.push_back({"free variable " + e.name, e.span});
            reported_.insert(e.name);
        }
        for (const auto& k : e.kids) report_free(*k, fv);
        for (const auto& [n, b] : e.bindings) report_free(*b, fv);
        for (const auto& cl : e.clauses) report_free(*cl.body, fv);
    }

    void note_ctor(Program& prog, Symbol name, uint32_t arity, Span sp) {
        auto it = prog.sigma.find(name);
        if (it == prog.sigma.end())
            prog.sigma.emplace(name, arity);
        else if (it->second != arity)
            errors_.push_back({"constructor " + prog.syms.name(name) + " used at arities " +
                                   std::to_string(it->second) + " and " + std::to_string(arity),
                               sp});
    }

    PatternId flatten_pattern(const Pattern& p, Program& prog) {
        PatternNode node;
        node.span = p.span;
        if (p.kind == PatternKind::Var) {
            node.is_var = true;
            node.name = prog.syms.intern(p.name);
            node.depth = 0;
        } else {
            node.is_var = false;
            node.name = prog.syms.intern(p.name);
            note_ctor(prog, node.name, static_cast<uint32_t>(p.args.size()), p.span);
            uint32_t d = 0;
            for (const auto& a : p.args) {
                PatternId id = flatten_pattern(*a, prog);
                node.args.push_back(id);
                d = std::max(d, prog.patterns[id].depth);
            }
            node.depth = 1 + d;
        }
        prog.patterns.push_back(std::move(node));
        return static_cast<PatternId>(prog.patterns.size() - 1);
    }

    Label flatten(const Expr& e, Program& prog) {
        Label l = static_cast<Label>(prog.nodes.size());
        prog.nodes.emplace_back();
        prog.nodes[l].span = e.span;
        switch (e.kind) {
            case ExprKind::Var:
                prog.nodes[l].kind = NodeKind::Var;
                prog.nodes[l].name = prog.syms.intern(e.name);
                break;
            case ExprKind::Ctor: {
                prog.nodes[l].kind = NodeKind::Ctor;
                Symbol s = prog.syms.intern(e.name);
                prog.nodes[l].name = s;
                note_ctor(prog, s, static_cast<uint32_t>(e.kids.size()), e.span);
                for (const auto& k : e.kids) {
                    Label kl = flatten(*k, prog);
                    prog.nodes[l].kids.push_back(kl);
                }
                break;
            }
            case ExprKind::App:
                prog.nodes[l].kind = NodeKind::App;
                for (const auto& k : e.kids) {
                    Label kl = flatten(*k, prog);
                    prog.nodes[l].kids.push_back(kl);
                }
                break;
            case ExprKind::Send:
            case ExprKind::Spawn: {
                // Compiled as an application whose function position is the
                // primitive, so argument evaluation uses the plain machinery.
                prog.nodes[l].kind = NodeKind::App;
                Label pl = static_cast<Label>(prog.nodes.size());
                prog.nodes.emplace_back();
                prog.nodes[pl].kind = NodeKind::Prim;
                prog.nodes[pl].span = e.span;
                prog.nodes[pl].name =
                    static_cast<Symbol>(e.kind == ExprKind::Send ? PrimOp::Send : PrimOp::Spawn);
                prog.nodes[l].kids.push_back(pl);
                for (const auto& k : e.kids) {
                    Label kl = flatten(*k, prog);
                    prog.nodes[l].kids.push_back(kl);
                }
                break;
            }
            case ExprKind::Fun: {
                prog.nodes[l].kind = NodeKind::Fun;
                for (const auto& p : e.params) {
                    Symbol ps = prog.syms.intern(p);
                    prog.nodes[l].params.push_back(ps);
                }
                Label bl = flatten(*e.kids[0], prog);
                prog.nodes[l].kids.push_back(bl);
                break;
            }
            case ExprKind::Letrec: {
                prog.nodes[l].kind = NodeKind::Letrec;
                for (const auto& [n, b] : e.bindings) {
                    Symbol bs = prog.syms.intern(n);
                    prog.nodes[l].params.push_back(bs);
                }
                for (const auto& [n, b] : e.bindings) {
                    Label bl = flatten(*b, prog);
                    prog.nodes[l].kids.push_back(bl);
                }
                Label body = flatten(*e.kids[0], prog);
                prog.nodes[l].kids.push_back(body);
                break;
            }
            case ExprKind::Case: {
                prog.nodes[l].kind = NodeKind::Case;
                Label scrut = flatten(*e.kids[0], prog);
                prog.nodes[l].kids.push_back(scrut);
                for (const auto& cl : e.clauses) {
                    PatternId pid = flatten_pattern(*cl.pat, prog);
                    Label bl = flatten(*cl.body, prog);
                    prog.nodes[l].clauses.push_back({pid, bl});
                }
                break;
            }
            case ExprKind::Receive: {
                prog.nodes[l].kind = NodeKind::Receive;
                for (const auto& cl : e.clauses) {
                    PatternId pid = flatten_pattern(*cl.pat, prog);
                    prog.max_receive_pattern_depth =
                        std::max(prog.max_receive_pattern_depth, prog.patterns[pid].depth);
                    Label bl = flatten(*cl.body, prog);
                    prog.nodes[l].clauses.push_back({pid, bl});
                }
                break;
            }
            case ExprKind::SelfPid:
                prog.nodes[l].kind = NodeKind::SelfPid;
                break;
            case ExprKind::Choice:
                prog.nodes[l].kind = NodeKind::Choice;
                for (const auto& k : e.kids) prog.nodes[l].kids.push_back(flatten(*k, prog));
                break;
            case ExprKind::Probe: {
                prog.nodes[l].kind = NodeKind::Probe;
                Symbol tag = prog.syms.intern(e.name);
                prog.nodes[l].name = tag;
                if (prog.probes.count(tag))
                    errors_.push_back({"duplicate probe tag " + e.name, e.span});
                prog.probes[tag] = l;
                Label bl = flatten(*e.kids[0], prog);
                prog.nodes[l].kids.push_back(bl);
                break;
            }
            case ExprKind::Seq:
            case ExprKind::Bind:
            case ExprKind::Tuple:
            case ExprKind::List:
                errors_.push_back({"internal: sugar reached normalization", e.span});
                break;
        }
        return l;
    }

    void compute_fv(Program& prog) {
        // Nodes are in preorder, so children follow parents; a reverse sweep
        // sees children before parents.
        for (size_t i = prog.nodes.size(); i-- > 0;) {
            Node& n = prog.nodes[i];
            std::set<Symbol> fv;
            auto add_kid = [&](Label k) {
                for (Symbol s : prog.nodes[k].fv) fv.insert(s);
            };
            switch (n.kind) {
                case NodeKind::Var: fv.insert(n.name); break;
                case NodeKind::Fun: {
                    add_kid(n.kids[0]);
                    for (Symbol p : n.params) fv.erase(p);
                    break;
                }
                case NodeKind::Letrec: {
                    for (Label k : n.kids) add_kid(k);
                    for (Symbol p : n.params) fv.erase(p);
                    break;
                }
                case NodeKind::Case:
                case NodeKind::Receive: {
                    for (Label k : n.kids) add_kid(k);
                    for (const auto& cl : n.clauses) {
                        std::set<Symbol> body(prog.nodes[cl.body].fv.begin(),
                                              prog.nodes[cl.body].fv.end());
                        remove_pattern_vars(prog, cl.pat, body);
                        fv.insert(body.begin(), body.end());
                    }
                    break;
                }
                default:
                    for (Label k : n.kids) add_kid(k);
                    break;
            }
            n.fv.assign(fv.begin(), fv.end());
        }
    }

    void remove_pattern_vars(const Program& prog, PatternId id, std::set<Symbol>& s) {
        const PatternNode& p = prog.patterns[id];
        if (p.is_var)
            s.erase(p.name);
        else
            for (PatternId a : p.args) remove_pattern_vars(prog, a, s);
    }

    ExprPtr ast_;
    std::set<std::string> used_;   // every name occurring anywhere
    std::set<std::string> taken_;  // names already assigned by renaming
    std::set<std::string> reported_;
    std::vector<Diagnostic> errors_;
};

} // namespace

NormalizeResult normalize(const Expr& desugared) {
    Normalizer n(desugared);
    return n.run();
}

NormalizeResult compile(std::string_view source, std::vector<Diagnostic>* parse_errors) {
    ParseResult pr = parse(source);
    if (!pr.ast) {
        if (parse_errors) *parse_errors = pr.errors;
        return {std::nullopt, std::move(pr.errors)};
    }
    ExprPtr ds = desugar(std::move(pr.ast));
    return normalize(*ds);
}

std::string pattern_to_string(const Program& p, PatternId id) {
    const PatternNode& n = p.patterns[id];
    if (n.is_var) return p.syms.name(n.name);
    std::string out = p.syms.name(n.name);
    if (!n.args.empty()) {
        out += "(";
        for (size_t i = 0; i < n.args.size(); i++) {
            if (i) out += ", ";
            out += pattern_to_string(p, n.args[i]);
        }
        out += ")";
    }
    return out;
}

std::string node_brief(const Program& p, Label l) {
    const Node& n = p.nodes[l];
    std::string kind;
    switch (n.kind) {
        case NodeKind::Var: kind = "var:" + p.syms.name(n.name); break;
        case NodeKind::Ctor: kind = "ctor:" + p.syms.name(n.name); break;
        case NodeKind::App: kind = "app"; break;
        case NodeKind::Fun: kind = "fun"; break;
        case NodeKind::Letrec: kind = "letrec"; break;
        case NodeKind::Case: kind = "case"; break;
        case NodeKind::Receive: kind = "receive"; break;
        case NodeKind::SelfPid: kind = "self"; break;
        case NodeKind::Choice: kind = "choice"; break;
        case NodeKind::Probe: kind = "probe:" + p.syms.name(n.name); break;
        case NodeKind::Prim:
            kind = n.name == static_cast<Symbol>(PrimOp::Send) ? "send" : "spawn";
            break;
    }
    return kind + "@" + std::to_string(n.span.line) + ":" + std::to_string(n.span.col);
}

} // namespace lactor::syntax
