#include "ivl/parser.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace ivl {

namespace {

enum class Tk {
    Ident, Int, Str, Punct, KwTrue, KwFalse, End,
};

struct Token {
    Tk kind;
    std::string text;
    int64_t ival = 0;
    int line = 1, col = 1;
};

const std::set<std::string> kKeywords = {
    "class", "interface", "implements", "capability", "uniform", "static",
    "method", "mut", "imm", "capsule", "read", "new", "try", "catch",
    "throw", "throws", "return", "if", "else", "for", "main",
};

struct Lexer {
    const std::string& src;
    size_t pos = 0;
    int line = 1, col = 1;

    explicit Lexer(const std::string& s) : src(s) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(ParseError::Syntax, line, col, msg);
    }

    char peek() const { return pos < src.size() ? src[pos] : '\0'; }
    char peek2() const { return pos + 1 < src.size() ? src[pos + 1] : '\0'; }

    void advance() {
        if (pos >= src.size()) return;
        if (src[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_ws() {
        for (;;) {
            while (std::isspace(static_cast<unsigned char>(peek()))) advance();
            if (peek() == '/' && peek2() == '/') {
                while (peek() != '\n' && peek() != '\0') advance();
            } else if (peek() == '/' && peek2() == '*') {
                advance();
                advance();
                while (!(peek() == '*' && peek2() == '/')) {
                    if (peek() == '\0') fail("unterminated block comment");
                    advance();
                }
                advance();
                advance();
            } else {
                return;
            }
        }
    }

    Token next() {
        skip_ws();
        Token t;
        t.line = line;
        t.col = col;
        char c = peek();
        if (c == '\0') {
            t.kind = Tk::End;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
            c == '$') {
            std::string id;
            while (std::isalnum(static_cast<unsigned char>(peek())) ||
                   peek() == '_' || peek() == '$') {
                id += peek();
                advance();
            }
            if (id == "true") {
                t.kind = Tk::KwTrue;
            } else if (id == "false") {
                t.kind = Tk::KwFalse;
            } else {
                t.kind = Tk::Ident;
            }
            t.text = id;
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            int64_t v = 0;
            std::string digits;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                digits += peek();
                advance();
            }
            try {
                v = std::stoll(digits);
            } catch (...) {
                fail("integer literal out of range");
            }
            t.kind = Tk::Int;
            t.ival = v;
            t.text = digits;
            return t;
        }
        if (c == '"') {
            advance();
            std::string s;
            while (peek() != '"') {
                if (peek() == '\0') fail("unterminated string literal");
                if (peek() == '\\') {
                    advance();
                    char e = peek();
                    switch (e) {
                        case 'n': s += '\n'; break;
                        case 't': s += '\t'; break;
                        case '\\': s += '\\'; break;
                        case '"': s += '"'; break;
                        default: fail("unknown escape sequence");
                    }
                    advance();
                } else {
                    s += peek();
                    advance();
                }
            }
            advance();
            t.kind = Tk::Str;
            t.text = s;
            return t;
        }
        // multi-char punctuation first
        static const char* two[] = {":=", "==", "!=", "<=", ">=", "&&",
                                    "||", "+=", "++"};
        for (const char* p : two) {
            if (c == p[0] && peek2() == p[1]) {
                advance();
                advance();
                t.kind = Tk::Punct;
                t.text = p;
                return t;
            }
        }
        static const std::string singles = "{}()<>;,.:=+-*/%!";
        if (singles.find(c) != std::string::npos) {
            advance();
            t.kind = Tk::Punct;
            t.text = std::string(1, c);
            return t;
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

std::vector<Token> tokenize(const std::string& src) {
    Lexer lx(src);
    std::vector<Token> out;
    for (;;) {
        Token t = lx.next();
        bool end = t.kind == Tk::End;
        out.push_back(std::move(t));
        if (end) return out;
    }
}

// ---------------------------------------------------------------------------
// Statement forms, desugared into core expressions below.

struct Stmt;
using StmtPtr = std::shared_ptr<Stmt>;

struct Stmt {
    enum K { LocalDecl, ExprStmt, Return, If, ForEach, ForRange, TryS, ThrowS } k;
    Span span;
    // LocalDecl
    TypeRef decl_type;
    std::string name;
    ExprPtr expr;           // init / expr / return value / condition / throw
    ExprPtr expr2;          // ForRange upper bound
    std::vector<StmtPtr> body;   // if-then / loop body / try body
    std::vector<StmtPtr> body2;  // else / catch
    bool has_value = false;      // Return with value
};

struct Parser {
    std::vector<Token> toks;
    size_t i = 0;
    std::set<std::string> class_names;

    explicit Parser(std::vector<Token> t) : toks(std::move(t)) {
        // pre-scan class names so static calls can be recognised
        for (size_t j = 0; j + 1 < toks.size(); ++j) {
            if (toks[j].kind == Tk::Ident &&
                (toks[j].text == "class" || toks[j].text == "interface") &&
                toks[j + 1].kind == Tk::Ident) {
                class_names.insert(toks[j + 1].text);
            }
        }
        class_names.insert("List");
    }

    const Token& cur() const { return toks[i]; }
    Span span() const { return Span{cur().line, cur().col}; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(ParseError::Syntax, cur().line, cur().col, msg);
    }

    bool is_punct(const std::string& p) const {
        return cur().kind == Tk::Punct && cur().text == p;
    }
    bool is_kw(const std::string& k) const {
        return cur().kind == Tk::Ident && cur().text == k &&
               kKeywords.count(k) > 0;
    }
    bool is_ident() const {
        return cur().kind == Tk::Ident && kKeywords.count(cur().text) == 0;
    }

    void expect_punct(const std::string& p) {
        if (!is_punct(p)) fail("expected '" + p + "'");
        ++i;
    }
    void expect_kw(const std::string& k) {
        if (!is_kw(k)) fail("expected '" + k + "'");
        ++i;
    }
    std::string expect_ident(const char* what) {
        if (!is_ident()) fail(std::string("expected ") + what);
        std::string s = cur().text;
        ++i;
        return s;
    }

    std::optional<Mdf> try_mdf() {
        if (is_kw("mut")) { ++i; return Mdf::Mut; }
        if (is_kw("imm")) { ++i; return Mdf::Imm; }
        if (is_kw("capsule")) { ++i; return Mdf::Capsule; }
        if (is_kw("read")) { ++i; return Mdf::Read; }
        return std::nullopt;
    }

    TypeRef parse_type() {
        TypeRef t;
        t.mdf = try_mdf().value_or(Mdf::Imm);
        t.cls = expect_ident("type name");
        if (t.cls == "List" && is_punct("<")) {
            ++i;
            t.elem = std::make_shared<TypeRef>(parse_type());
            if (!is_punct(">")) fail("expected '>' in List type");
            ++i;
        }
        return t;
    }

    // ---- expressions ------------------------------------------------------

    ExprPtr parse_expr() { return parse_assign(); }

    ExprPtr parse_assign() {
        ExprPtr lhs = parse_or();
        if (is_punct(":=") || is_punct("=")) {
            Span sp = span();
            ++i;
            ExprPtr rhs = parse_assign();
            if (lhs->kind != Ek::FieldAcc)
                throw ParseError(ParseError::Syntax, sp.line, sp.col,
                                 "only fields can be assigned; locals are "
                                 "single-assignment");
            auto upd = make_expr(Ek::FieldUpd, sp);
            upd->name = lhs->name;
            upd->kids = {lhs->kids[0], rhs};
            return upd;
        }
        if (is_punct("+=")) {
            Span sp = span();
            ++i;
            ExprPtr rhs = parse_assign();
            if (lhs->kind != Ek::FieldAcc)
                throw ParseError(ParseError::Syntax, sp.line, sp.col,
                                 "'+=' applies to fields only");
            auto add = make_expr(Ek::Prim, sp);
            add->prim = PrimOp::Add;
            add->kids = {lhs, rhs};
            auto upd = make_expr(Ek::FieldUpd, sp);
            upd->name = lhs->name;
            upd->kids = {lhs->kids[0], add};
            return upd;
        }
        return lhs;
    }

    ExprPtr parse_or() {
        ExprPtr e = parse_and();
        while (is_punct("||")) {
            Span sp = span();
            ++i;
            auto n = make_expr(Ek::Or, sp);
            n->kids = {e, parse_and()};
            e = n;
        }
        return e;
    }

    ExprPtr parse_and() {
        ExprPtr e = parse_cmp();
        while (is_punct("&&")) {
            Span sp = span();
            ++i;
            auto n = make_expr(Ek::And, sp);
            n->kids = {e, parse_cmp()};
            e = n;
        }
        return e;
    }

    ExprPtr parse_cmp() {
        ExprPtr e = parse_add();
        static const std::pair<const char*, PrimOp> ops[] = {
            {"==", PrimOp::Eq}, {"!=", PrimOp::Ne}, {"<=", PrimOp::Le},
            {">=", PrimOp::Ge}, {"<", PrimOp::Lt},  {">", PrimOp::Gt},
        };
        for (const auto& [txt, op] : ops) {
            if (is_punct(txt)) {
                Span sp = span();
                ++i;
                auto n = make_expr(Ek::Prim, sp);
                n->prim = op;
                n->kids = {e, parse_add()};
                return n;
            }
        }
        return e;
    }

    ExprPtr parse_add() {
        ExprPtr e = parse_mul();
        while (is_punct("+") || is_punct("-")) {
            PrimOp op = is_punct("+") ? PrimOp::Add : PrimOp::Sub;
            Span sp = span();
            ++i;
            auto n = make_expr(Ek::Prim, sp);
            n->prim = op;
            n->kids = {e, parse_mul()};
            e = n;
        }
        return e;
    }

    ExprPtr parse_mul() {
        ExprPtr e = parse_unary();
        while (is_punct("*") || is_punct("/") || is_punct("%")) {
            PrimOp op = is_punct("*")   ? PrimOp::Mul
                        : is_punct("/") ? PrimOp::Div
                                        : PrimOp::Mod;
            Span sp = span();
            ++i;
            auto n = make_expr(Ek::Prim, sp);
            n->prim = op;
            n->kids = {e, parse_unary()};
            e = n;
        }
        return e;
    }

    ExprPtr parse_unary() {
        if (is_punct("!")) {
            Span sp = span();
            ++i;
            auto n = make_expr(Ek::Prim, sp);
            n->prim = PrimOp::Not;
            n->kids = {parse_unary()};
            return n;
        }
        if (is_punct("-")) {
            Span sp = span();
            ++i;
            ExprPtr e = parse_unary();
            if (e->kind == Ek::IntLit) return expr_int(-e->ival);
            auto n = make_expr(Ek::Prim, sp);
            n->prim = PrimOp::Neg;
            n->kids = {e};
            return n;
        }
        return parse_postfix();
    }

    std::vector<ExprPtr> parse_args() {
        expect_punct("(");
        std::vector<ExprPtr> args;
        if (!is_punct(")")) {
            for (;;) {
                args.push_back(parse_expr());
                if (is_punct(",")) {
                    ++i;
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        return args;
    }

    ExprPtr parse_postfix() {
        ExprPtr e = parse_primary();
        for (;;) {
            if (!is_punct(".")) return e;
            Span sp = span();
            ++i;
            std::string member = expect_ident("member name");
            if (is_punct("(")) {
                auto call = make_expr(Ek::MCall, sp);
                call->name = member;
                call->flag = !(e->kind == Ek::Var && e->name == "this");
                call->kids.push_back(e);
                for (auto& a : parse_args()) call->kids.push_back(a);
                e = call;
            } else {
                auto acc = make_expr(Ek::FieldAcc, sp);
                acc->name = member;
                acc->kids = {e};
                e = acc;
            }
        }
    }

    ExprPtr parse_primary() {
        Span sp = span();
        if (is_punct("(")) {
            ++i;
            ExprPtr e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (cur().kind == Tk::KwTrue) {
            ++i;
            return expr_bool(true);
        }
        if (cur().kind == Tk::KwFalse) {
            ++i;
            return expr_bool(false);
        }
        if (cur().kind == Tk::Int) {
            int64_t v = cur().ival;
            ++i;
            return expr_int(v);
        }
        if (cur().kind == Tk::Str) {
            std::string s = cur().text;
            ++i;
            return expr_str(s);
        }
        if (is_kw("new")) {
            ++i;
            auto n = make_expr(Ek::New, sp);
            n->name = expect_ident("class name");
            if (n->name == "List" && is_punct("<")) {
                ++i;
                TypeRef elem = parse_type();
                if (!is_punct(">")) fail("expected '>'");
                ++i;
                n->name = "List<" + elem.str() + ">";
                n->tref = std::make_shared<TypeRef>(elem);
            }
            for (auto& a : parse_args()) n->kids.push_back(a);
            return n;
        }
        if (is_kw("try")) {
            ++i;
            auto t = make_expr(Ek::Try, sp);
            auto body = parse_block();
            expect_kw("catch");
            auto handler = parse_block();
            t->kids = {desugar_block(body, /*value_tail=*/true),
                       desugar_block(handler, true)};
            return t;
        }
        if (is_ident()) {
            std::string id = cur().text;
            // Static call: Class.method(...), including List.of / List<T>.of
            if (class_names.count(id) > 0) {
                size_t save = i;
                ++i;
                std::string mangled = id;
                std::shared_ptr<TypeRef> elem_ty;
                if (id == "List" && is_punct("<")) {
                    ++i;
                    TypeRef elem = parse_type();
                    if (!is_punct(">")) fail("expected '>'");
                    ++i;
                    mangled = "List<" + elem.str() + ">";
                    elem_ty = std::make_shared<TypeRef>(elem);
                }
                if (is_punct(".")) {
                    ++i;
                    std::string m = expect_ident("method name");
                    if (is_punct("(")) {
                        auto c = make_expr(Ek::SCall, sp);
                        c->name = mangled;
                        c->name2 = m;
                        c->tref = elem_ty;
                        for (auto& a : parse_args()) c->kids.push_back(a);
                        return c;
                    }
                }
                i = save;  // plain identifier after all
            }
            ++i;
            return expr_var(id, sp);
        }
        fail("expected expression");
    }

    // ---- statements -------------------------------------------------------

    bool looks_like_local_decl() {
        // [mdf] Ident [<...>] Ident '='
        size_t j = i;
        auto is_mdf_tok = [&](const Token& t) {
            return t.kind == Tk::Ident &&
                   (t.text == "mut" || t.text == "imm" || t.text == "capsule" ||
                    t.text == "read");
        };
        if (j < toks.size() && is_mdf_tok(toks[j])) ++j;
        if (j >= toks.size() || toks[j].kind != Tk::Ident ||
            kKeywords.count(toks[j].text))
            return false;
        std::string tyname = toks[j].text;
        ++j;
        if (tyname == "List" && j < toks.size() && toks[j].kind == Tk::Punct &&
            toks[j].text == "<") {
            int depth = 0;
            while (j < toks.size()) {
                if (toks[j].kind == Tk::Punct && toks[j].text == "<") ++depth;
                if (toks[j].kind == Tk::Punct && toks[j].text == ">") {
                    --depth;
                    if (depth == 0) {
                        ++j;
                        break;
                    }
                }
                ++j;
            }
        }
        if (j >= toks.size() || toks[j].kind != Tk::Ident ||
            kKeywords.count(toks[j].text))
            return false;
        ++j;
        return j < toks.size() && toks[j].kind == Tk::Punct &&
               toks[j].text == "=";
    }

    StmtPtr parse_stmt() {
        auto st = std::make_shared<Stmt>();
        st->span = span();
        if (is_kw("return")) {
            ++i;
            st->k = Stmt::Return;
            if (!is_punct(";")) {
                st->expr = parse_expr();
                st->has_value = true;
            }
            expect_punct(";");
            return st;
        }
        if (is_kw("throw")) {
            ++i;
            st->k = Stmt::ThrowS;
            st->expr = parse_expr();
            expect_punct(";");
            return st;
        }
        if (is_kw("if")) {
            ++i;
            st->k = Stmt::If;
            expect_punct("(");
            st->expr = parse_expr();
            expect_punct(")");
            st->body = parse_block();
            if (is_kw("else")) {
                ++i;
                st->body2 = parse_block();
            }
            return st;
        }
        if (is_kw("for")) {
            ++i;
            expect_punct("(");
            TypeRef ty = parse_type();
            std::string var = expect_ident("loop variable");
            if (is_punct(":")) {
                ++i;
                st->k = Stmt::ForEach;
                st->decl_type = ty;
                st->name = var;
                st->expr = parse_expr();
                expect_punct(")");
                st->body = parse_block();
                return st;
            }
            // counted loop: for (Int i = lo; i < hi; i++) / i += 1
            expect_punct("=");
            st->k = Stmt::ForRange;
            st->decl_type = ty;
            st->name = var;
            st->expr = parse_expr();
            expect_punct(";");
            std::string v2 = expect_ident("loop variable");
            if (v2 != var) fail("counted loop must test its own variable");
            expect_punct("<");
            st->expr2 = parse_expr();
            expect_punct(";");
            std::string v3 = expect_ident("loop variable");
            if (v3 != var) fail("counted loop must step its own variable");
            if (is_punct("++")) {
                ++i;
            } else if (is_punct("+=")) {
                ++i;
                if (cur().kind != Tk::Int || cur().ival != 1)
                    fail("counted loop step must be 1");
                ++i;
            } else {
                fail("expected '++' or '+= 1'");
            }
            expect_punct(")");
            st->body = parse_block();
            return st;
        }
        if (is_kw("try")) {
            // try as a statement; also reachable through expressions
            ++i;
            st->k = Stmt::TryS;
            st->body = parse_block();
            expect_kw("catch");
            st->body2 = parse_block();
            if (is_punct(";")) ++i;
            return st;
        }
        if (looks_like_local_decl()) {
            st->k = Stmt::LocalDecl;
            st->decl_type = parse_type();
            st->name = expect_ident("variable name");
            expect_punct("=");
            st->expr = parse_expr();
            expect_punct(";");
            return st;
        }
        st->k = Stmt::ExprStmt;
        st->expr = parse_expr();
        expect_punct(";");
        return st;
    }

    std::vector<StmtPtr> parse_block() {
        expect_punct("{");
        std::vector<StmtPtr> out;
        while (!is_punct("}")) out.push_back(parse_stmt());
        ++i;
        return out;
    }

    // ---- desugaring -------------------------------------------------------

    static bool stmt_terminates(const StmtPtr& s) {
        if (s->k == Stmt::Return || s->k == Stmt::ThrowS) return true;
        if (s->k == Stmt::If && !s->body2.empty()) {
            return !s->body.empty() && stmt_terminates(s->body.back()) &&
                   stmt_terminates(s->body2.back());
        }
        return false;
    }

    static bool contains_return(const std::vector<StmtPtr>& stmts) {
        for (const auto& s : stmts) {
            if (s->k == Stmt::Return) return true;
            if (contains_return(s->body) || contains_return(s->body2))
                return true;
        }
        return false;
    }

    // Bool-fold loop bodies: every statement is either
    //   if (cond) { return false; }       (contributes !(cond))
    //   a nested fold loop
    // The loop desugars to an all-of fold over the per-iteration predicate.
    ExprPtr fold_loop_pred(const StmtPtr& loop) {
        ExprPtr pred;
        auto conjoin = [&](ExprPtr p) {
            if (!pred) {
                pred = p;
            } else {
                auto n = make_expr(Ek::And, p->span);
                n->kids = {pred, p};
                pred = n;
            }
        };
        for (const auto& s : loop->body) {
            if (s->k == Stmt::If && s->body2.empty() && s->body.size() == 1 &&
                s->body[0]->k == Stmt::Return && s->body[0]->has_value &&
                s->body[0]->expr->kind == Ek::BoolLit) {
                if (s->body[0]->expr->ival != 0)
                    throw ParseError(ParseError::Syntax, s->span.line,
                                     s->span.col,
                                     "early 'return true' inside loops is not "
                                     "supported; negate the condition");
                auto n = make_expr(Ek::Prim, s->expr->span);
                n->prim = PrimOp::Not;
                n->kids = {s->expr};
                conjoin(n);
            } else if (s->k == Stmt::ForEach && contains_return(s->body)) {
                conjoin(desugar_fold(s));
            } else {
                throw ParseError(
                    ParseError::Syntax, s->span.line, s->span.col,
                    "loops containing 'return' may only mix guarded "
                    "'return false' statements and nested such loops");
            }
        }
        if (!pred)
            throw ParseError(ParseError::Syntax, loop->span.line,
                             loop->span.col, "empty fold loop");
        return pred;
    }

    ExprPtr desugar_fold(const StmtPtr& loop) {
        ExprPtr pred = fold_loop_pred(loop);
        if (loop->k != Stmt::ForEach)
            throw ParseError(ParseError::Syntax, loop->span.line,
                             loop->span.col,
                             "counted loops cannot contain 'return'");
        auto n = make_expr(Ek::ForEachAll, loop->span);
        n->name = loop->name;
        n->tref = std::make_shared<TypeRef>(loop->decl_type);
        n->kids = {loop->expr, pred};
        return n;
    }

    ExprPtr desugar_block(const std::vector<StmtPtr>& stmts, bool value_tail) {
        return desugar_stmts(stmts, 0, value_tail);
    }

    ExprPtr desugar_stmts(const std::vector<StmtPtr>& stmts, size_t at,
                          bool value_tail) {
        if (at >= stmts.size()) return expr_unit();
        const StmtPtr& s = stmts[at];
        bool last = at + 1 == stmts.size();
        auto rest = [&]() { return desugar_stmts(stmts, at + 1, value_tail); };
        switch (s->k) {
            case Stmt::LocalDecl: {
                auto n = make_expr(Ek::Let, s->span);
                n->name = s->name;
                n->tref = std::make_shared<TypeRef>(s->decl_type);
                n->kids = {s->expr, rest()};
                return n;
            }
            case Stmt::Return:
                if (!last)
                    throw ParseError(ParseError::Syntax, s->span.line,
                                     s->span.col, "unreachable code after return");
                return s->has_value ? s->expr : expr_unit();
            case Stmt::ThrowS: {
                if (!last)
                    throw ParseError(ParseError::Syntax, s->span.line,
                                     s->span.col, "unreachable code after throw");
                auto n = make_expr(Ek::Throw, s->span);
                n->kids = {s->expr};
                return n;
            }
            case Stmt::If: {
                bool a_term = !s->body.empty() && stmt_terminates(s->body.back());
                bool b_term = !s->body2.empty() && stmt_terminates(s->body2.back());
                auto n = make_expr(Ek::If, s->span);
                if (a_term && b_term) {
                    if (!last)
                        throw ParseError(ParseError::Syntax, s->span.line,
                                         s->span.col,
                                         "unreachable code after if/else");
                    n->kids = {s->expr, desugar_block(s->body, value_tail),
                               desugar_block(s->body2, value_tail)};
                    return n;
                }
                if (a_term) {
                    // else-branch (possibly empty) falls through to the rest
                    std::vector<StmtPtr> cont = s->body2;
                    for (size_t j = at + 1; j < stmts.size(); ++j)
                        cont.push_back(stmts[j]);
                    n->kids = {s->expr, desugar_block(s->body, value_tail),
                               desugar_stmts(cont, 0, value_tail)};
                    return n;
                }
                if (contains_return(s->body) || contains_return(s->body2))
                    throw ParseError(ParseError::Syntax, s->span.line,
                                     s->span.col,
                                     "'return' must be the last statement of "
                                     "its branch");
                n->kids = {s->expr, desugar_block(s->body, false),
                           desugar_block(s->body2, false)};
                if (last && !value_tail) return n;
                auto sq = make_expr(Ek::Seq, s->span);
                sq->kids = {n, rest()};
                return sq;
            }
            case Stmt::ForEach:
            case Stmt::ForRange: {
                ExprPtr loop;
                if (contains_return(s->body)) {
                    loop = desugar_fold(s);
                    // fold loops are Bool-valued; they terminate the block
                    ExprPtr tail = rest();
                    if (tail->kind == Ek::BoolLit && tail->ival == 1)
                        return loop;
                    auto n = make_expr(Ek::And, s->span);
                    n->kids = {loop, tail};
                    return n;
                }
                if (s->k == Stmt::ForEach) {
                    auto n = make_expr(Ek::ForEachUnit, s->span);
                    n->name = s->name;
                    n->tref = std::make_shared<TypeRef>(s->decl_type);
                    n->kids = {s->expr, desugar_block(s->body, false)};
                    loop = n;
                } else {
                    auto n = make_expr(Ek::ForRange, s->span);
                    n->name = s->name;
                    n->tref = std::make_shared<TypeRef>(s->decl_type);
                    n->kids = {s->expr, s->expr2, desugar_block(s->body, false)};
                    loop = n;
                }
                if (last && !value_tail) return loop;
                auto sq = make_expr(Ek::Seq, s->span);
                sq->kids = {loop, rest()};
                return sq;
            }
            case Stmt::TryS: {
                if (contains_return(s->body) || contains_return(s->body2))
                    throw ParseError(ParseError::Syntax, s->span.line,
                                     s->span.col,
                                     "'return' inside try/catch statements is "
                                     "not supported");
                auto t = make_expr(Ek::Try, s->span);
                t->kids = {desugar_block(s->body, false),
                           desugar_block(s->body2, false)};
                if (last && !value_tail) return t;
                auto sq = make_expr(Ek::Seq, s->span);
                sq->kids = {t, rest()};
                return sq;
            }
            case Stmt::ExprStmt: {
                if (last && value_tail) return s->expr;
                // in unit position the value is discarded
                auto sq = make_expr(Ek::Seq, s->span);
                sq->kids = {s->expr, rest()};
                return sq;
            }
        }
        fail("unreachable");
    }

    // ---- declarations -----------------------------------------------------

    MethodDecl parse_method(bool in_interface, bool is_static, std::optional<Mdf> recv) {
        MethodDecl m;
        m.span = span();
        m.is_static = is_static;
        if (!is_static) {
            if (!recv) fail("instance methods need a receiver modifier "
                            "(mut/imm/capsule/read)");
            m.receiver = *recv;
        } else if (recv) {
            fail("static methods take no receiver modifier");
        }
        if (is_kw("method")) ++i;
        m.ret = parse_type();
        m.name = expect_ident("method name");
        expect_punct("(");
        if (!is_punct(")")) {
            for (;;) {
                Param p;
                p.type = parse_type();
                p.name = expect_ident("parameter name");
                m.params.push_back(std::move(p));
                if (is_punct(",")) {
                    ++i;
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        if (is_kw("throws")) {
            ++i;
            m.declares_throws = true;
        }
        if (is_punct(";")) {
            if (!in_interface) fail("only interface methods may be abstract");
            ++i;
            return m;
        }
        if (in_interface) fail("interface methods must be abstract");
        auto body = parse_block();
        bool wants_value = !(m.ret.cls == "Void" && !m.ret.elem);
        m.body = desugar_block(body, wants_value);
        if (m.name.rfind('$', 0) == 0) m.is_capability = true;
        return m;
    }

    void parse_ctor(ClassDecl& cd) {
        // standard form only: C(T1 f1, ..., Tn fn) { this.f1 = f1; ... }
        Span sp = span();
        ++i;  // class name
        std::vector<Param> params;
        expect_punct("(");
        if (!is_punct(")")) {
            for (;;) {
                Param p;
                p.type = parse_type();
                p.name = expect_ident("parameter name");
                params.push_back(std::move(p));
                if (is_punct(",")) {
                    ++i;
                    continue;
                }
                break;
            }
        }
        expect_punct(")");
        auto body = parse_block();
        cd.has_explicit_ctor = true;
        // validation happens after the whole class is parsed; stash the
        // pieces in a synthetic method slot
        MethodDecl ctor;
        ctor.name = "$ctor";
        ctor.is_static = true;
        ctor.span = sp;
        ctor.params = std::move(params);
        std::vector<ExprPtr> assigns;
        for (const auto& st : body) {
            if (st->k != Stmt::ExprStmt || st->expr->kind != Ek::FieldUpd)
                throw ParseError(ParseError::StandardForm, st->span.line,
                                 st->span.col,
                                 "constructor bodies may only contain "
                                 "this.f = f assignments");
            assigns.push_back(st->expr);
        }
        auto holder = make_expr(Ek::Seq, sp);
        holder->kids = assigns;
        ctor.body = holder;
        cd.methods.push_back(std::move(ctor));
    }

    void validate_ctor(ClassDecl& cd) {
        auto it = std::find_if(cd.methods.begin(), cd.methods.end(),
                               [](const MethodDecl& m) { return m.name == "$ctor"; });
        if (it == cd.methods.end()) return;
        MethodDecl ctor = *it;
        cd.methods.erase(it);
        auto bad = [&](const std::string& msg) {
            throw ParseError(ParseError::StandardForm, ctor.span.line,
                             ctor.span.col, "constructor of " + cd.name +
                                                " is not in standard form: " + msg);
        };
        if (ctor.params.size() != cd.fields.size())
            bad("parameter count differs from field count");
        for (size_t j = 0; j < cd.fields.size(); ++j) {
            if (!same_type(ctor.params[j].type, cd.fields[j].type))
                bad("parameter type mismatch for field " + cd.fields[j].name);
            if (ctor.params[j].name != cd.fields[j].name)
                bad("parameter names must match field names in order");
        }
        const auto& assigns = ctor.body->kids;
        if (assigns.size() != cd.fields.size())
            bad("body must initialise every field exactly once");
        for (size_t j = 0; j < assigns.size(); ++j) {
            const Expr& a = *assigns[j];
            bool ok = a.kind == Ek::FieldUpd && a.name == cd.fields[j].name &&
                      a.kids[0]->kind == Ek::Var && a.kids[0]->name == "this" &&
                      a.kids[1]->kind == Ek::Var &&
                      a.kids[1]->name == cd.fields[j].name;
            if (!ok) bad("assignment " + std::to_string(j + 1) +
                         " must be this." + cd.fields[j].name + " = " +
                         cd.fields[j].name);
        }
    }

    ClassDecl parse_class() {
        ClassDecl cd;
        cd.span = span();
        while (is_kw("capability") || is_kw("uniform")) {
            if (is_kw("capability")) cd.is_capability = true;
            if (is_kw("uniform")) cd.uniform_access = true;
            ++i;
        }
        bool iface = is_kw("interface");
        if (iface) {
            cd.kind = ClassKind::Interface;
            ++i;
        } else {
            expect_kw("class");
        }
        cd.name = expect_ident("class name");
        if (is_kw("implements")) {
            ++i;
            for (;;) {
                cd.implements.push_back(expect_ident("interface name"));
                if (is_punct(",")) {
                    ++i;
                    continue;
                }
                break;
            }
        }
        expect_punct("{");
        while (!is_punct("}")) {
            // constructor?
            if (!iface && is_ident() && cur().text == cd.name &&
                i + 1 < toks.size() && toks[i + 1].kind == Tk::Punct &&
                toks[i + 1].text == "(") {
                parse_ctor(cd);
                continue;
            }
            bool is_static = false;
            if (is_kw("static")) {
                is_static = true;
                ++i;
            }
            std::optional<Mdf> recv = try_mdf();
            if (is_kw("method")) {
                cd.methods.push_back(parse_method(iface, is_static, recv));
                continue;
            }
            // disambiguate field vs method: type ident then '(' or ';'
            size_t save = i;
            Span member_span = span();
            TypeRef ty = parse_type();
            std::string nm = expect_ident("member name");
            if (is_punct("(")) {
                i = save;
                cd.methods.push_back(parse_method(iface, is_static, recv));
                continue;
            }
            if (is_static) fail("fields cannot be static");
            expect_punct(";");
            if (iface) fail("interfaces cannot declare fields");
            FieldDecl fd;
            fd.type = ty;
            if (recv) fd.type.mdf = *recv;  // consumed before parse_type
            fd.name = nm;
            fd.span = member_span;
            cd.fields.push_back(std::move(fd));
        }
        ++i;
        validate_ctor(cd);
        return cd;
    }

    Program parse() {
        Program p;
        bool have_main = false;
        while (cur().kind != Tk::End) {
            if (is_kw("main")) {
                if (have_main) fail("duplicate main block");
                ++i;
                auto body = parse_block();
                p.main = desugar_block(body, true);
                have_main = true;
                continue;
            }
            ClassDecl cd = parse_class();
            if (p.classes.count(cd.name))
                fail("duplicate class " + cd.name);
            std::string name = cd.name;
            p.classes.emplace(name, std::move(cd));
        }
        if (!have_main) p.main = expr_bool(true);
        finalize(p);
        return p;
    }

    // Synthesizes trivial invariants, the default Cap, and checks basic
    // table-level uniqueness rules the grammar cannot express.
    void finalize(Program& p) {
        if (!p.classes.count("Cap")) {
            ClassDecl cap;
            cap.name = "Cap";
            cap.is_capability = true;
            p.classes.emplace("Cap", std::move(cap));
        }
        for (auto& [name, cd] : p.classes) {
            std::set<std::string> fnames;
            for (const auto& f : cd.fields) {
                if (!fnames.insert(f.name).second)
                    throw ParseError(ParseError::Syntax, f.span.line,
                                     f.span.col,
                                     "duplicate field " + f.name + " in " + name);
            }
            std::set<std::string> mnames;
            for (const auto& m : cd.methods) {
                if (!mnames.insert(m.name).second)
                    throw ParseError(ParseError::Syntax, m.span.line, m.span.col,
                                     "duplicate method " + m.name + " in " +
                                         name + " (no overloading)");
            }
            if (cd.kind == ClassKind::Class && !cd.find_method("invariant")) {
                MethodDecl inv;
                inv.receiver = Mdf::Read;
                inv.ret = TypeRef{Mdf::Imm, "Bool", nullptr};
                inv.name = "invariant";
                inv.body = expr_bool(true);
                inv.synthesized = true;
                cd.methods.push_back(std::move(inv));
            }
            // Cap's invariant is definitionally trivial: it never fires
            // checks even when written out explicitly.
            if (cd.name == "Cap") {
                for (auto& m : cd.methods)
                    if (m.name == "invariant") m.synthesized = true;
            }
        }
    }
};

}  // namespace

Program parse_program(const std::string& source) {
    Parser p(tokenize(source));
    return p.parse();
}

}  // namespace ivl
