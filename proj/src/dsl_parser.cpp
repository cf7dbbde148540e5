#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "domino/chain_dsl.hpp"

namespace domino {

SpecError::SpecError(const std::string& message, SourceLoc loc)
    : std::runtime_error(fmt::format("line {}, column {}: {}", loc.line, loc.column, message)),
      loc_(loc),
      message_(message) {}

namespace {

enum class Tok { IDENT, NUMBER, PARAM, PUNCT, END };

struct Token {
    Tok kind = Tok::END;
    std::string text;
    double number = 0;
    SourceLoc loc;
};

constexpr std::array<std::string_view, 12> kReserved{"event", "node", "edge",  "chain", "on",    "and",
                                                      "or",    "not",  "where", "true",  "false", "all"};

bool is_reserved(std::string_view s) { return std::find(kReserved.begin(), kReserved.end(), s) != kReserved.end(); }

bool is_statement_keyword(const Token& t) {
    return t.kind == Tok::IDENT && (t.text == "event" || t.text == "node" || t.text == "edge" || t.text == "chain");
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    auto ident_char = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    };
    while (i < src.size()) {
        const char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        const SourceLoc loc{line, col};
        if ((c >= 'a' && c <= 'z') || c == '_') {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            if (j < src.size() && std::isupper(static_cast<unsigned char>(src[j])))
                throw SpecError("identifiers are lowercase ([a-z_][a-z0-9_]*)", SourceLoc{line, col + static_cast<int>(j - i)});
            out.push_back({Tok::IDENT, std::string(src.substr(i, j - i)), 0, loc});
            advance(j - i);
            continue;
        }
        if (c == '$') {
            std::size_t j = i + 1;
            while (j < src.size() && ident_char(src[j])) ++j;
            if (j == i + 1) throw SpecError("expected parameter name after '$'", loc);
            out.push_back({Tok::PARAM, std::string(src.substr(i + 1, j - i - 1)), 0, loc});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() &&
                                                            std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    j = k;
                    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                }
            }
            double v = 0;
            auto [p, ec] = std::from_chars(src.data() + i, src.data() + j, v);
            if (ec != std::errc{} || p != src.data() + j)
                throw SpecError(fmt::format("malformed number '{}'", src.substr(i, j - i)), loc);
            if (j < src.size() && (std::isalpha(static_cast<unsigned char>(src[j])) || src[j] == '_'))
                throw SpecError(fmt::format("unexpected character '{}' after number", src[j]),
                                SourceLoc{line, col + static_cast<int>(j - i)});
            out.push_back({Tok::NUMBER, std::string(src.substr(i, j - i)), v, loc});
            advance(j - i);
            continue;
        }
        static constexpr std::array<std::string_view, 7> two{"->", "==", "!=", "<=", ">=", "&&", "||"};
        bool matched = false;
        for (auto p : two) {
            if (src.substr(i, 2) == p) {
                if (p == "&&" || p == "||")
                    throw SpecError(fmt::format("use '{}' instead of '{}'", p == "&&" ? "and" : "or", p), loc);
                out.push_back({Tok::PUNCT, std::string(p), 0, loc});
                advance(2);
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::string_view(":,()=<>+-*/").find(c) != std::string_view::npos) {
            out.push_back({Tok::PUNCT, std::string(1, c), 0, loc});
            advance(1);
            continue;
        }
        if (std::isupper(static_cast<unsigned char>(c)))
            throw SpecError("identifiers are lowercase ([a-z_][a-z0-9_]*)", loc);
        throw SpecError(fmt::format("unexpected character '{}'", c), loc);
    }
    out.push_back({Tok::END, "", 0, SourceLoc{line, col}});
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    SpecAst spec() {
        SpecAst ast;
        while (peek().kind != Tok::END) {
            const auto& t = peek();
            if (t.kind != Tok::IDENT) throw SpecError(fmt::format("expected a statement, found '{}'", t.text), t.loc);
            if (t.text == "event") ast.statements.emplace_back(event());
            else if (t.text == "node") ast.statements.emplace_back(node());
            else if (t.text == "edge") ast.statements.emplace_back(edge());
            else if (t.text == "chain") ast.statements.emplace_back(chain());
            else
                throw SpecError(fmt::format("expected 'event', 'node', 'edge' or 'chain', found '{}'", t.text), t.loc);
        }
        return ast;
    }

private:
    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    bool at_punct(std::string_view p) const { return peek().kind == Tok::PUNCT && peek().text == p; }
    bool at_word(std::string_view w) const { return peek().kind == Tok::IDENT && peek().text == w; }

    static std::string describe(const Token& t) {
        return t.kind == Tok::END ? std::string("end of input") : fmt::format("'{}'", t.text);
    }

    void expect_punct(std::string_view p) {
        if (!at_punct(p)) throw SpecError(fmt::format("expected '{}', found {}", p, describe(peek())), peek().loc);
        next();
    }

    void expect_word(std::string_view w) {
        if (!at_word(w)) throw SpecError(fmt::format("expected '{}', found {}", w, describe(peek())), peek().loc);
        next();
    }

    NameRef name(std::string_view what) {
        const auto& t = peek();
        if (t.kind != Tok::IDENT || is_reserved(t.text))
            throw SpecError(fmt::format("expected {} name, found {}", what, describe(t)), t.loc);
        next();
        return {t.text, t.loc};
    }

    std::string choice(std::initializer_list<std::string_view> options, std::string_view what) {
        const auto& t = peek();
        for (auto o : options) {
            if (t.kind == Tok::IDENT && t.text == o) {
                next();
                return t.text;
            }
        }
        std::string list;
        for (auto o : options) list += (list.empty() ? "" : "|") + std::string(o);
        throw SpecError(fmt::format("expected {} ({}), found {}", what, list, describe(t)), t.loc);
    }

    EventDef event() {
        EventDef def;
        def.loc = next().loc;
        auto n = name("event");
        def.name = n.name;
        def.loc = n.loc;
        expect_word("on");
        auto s = name("stream");
        def.stream = s.name;
        def.stream_loc = s.loc;
        if (at_word("side")) {
            next();
            const auto v = choice({"local", "remote", "each"}, "side");
            def.side = v == "local" ? SideSpec::LOCAL : v == "remote" ? SideSpec::REMOTE : SideSpec::EACH;
        }
        if (at_word("dir")) {
            next();
            const auto v = choice({"ul", "dl", "each", "any"}, "direction");
            def.dir = v == "ul" ? DirSpec::UL : v == "dl" ? DirSpec::DL : v == "each" ? DirSpec::EACH : DirSpec::ANY;
        }
        expect_punct(":");
        def.condition = expr();
        if (peek().kind != Tok::END && !is_statement_keyword(peek()))
            throw SpecError(fmt::format("unexpected {} after condition", describe(peek())), peek().loc);
        return def;
    }

    NodeDef node() {
        NodeDef def;
        next();
        auto n = name("node");
        def.name = n.name;
        def.loc = n.loc;
        expect_punct(":");
        const auto kind = choice({"cause", "intermediate", "consequence"}, "node kind");
        def.kind = kind == "cause" ? NodeKind::CAUSE : kind == "consequence" ? NodeKind::CONSEQUENCE : NodeKind::INTERMEDIATE;
        auto e = name("event");
        def.event = e.name;
        def.event_loc = e.loc;
        if (at_word("side")) {
            next();
            const auto v = choice({"sender", "receiver", "local", "remote"}, "side binding");
            def.binding = v == "sender"     ? Binding::SIDE_SENDER
                          : v == "receiver" ? Binding::SIDE_RECEIVER
                          : v == "local"    ? Binding::SIDE_LOCAL
                                            : Binding::SIDE_REMOTE;
        } else if (at_word("dir")) {
            next();
            const auto v = choice({"path", "ul", "dl"}, "direction binding");
            def.binding = v == "path" ? Binding::DIR_PATH : v == "ul" ? Binding::DIR_UL : Binding::DIR_DL;
        }
        if (at_word("flip")) {
            next();
            def.flip = true;
        }
        return def;
    }

    EdgeDef edge() {
        EdgeDef def;
        def.loc = next().loc;
        def.from = name("node");
        expect_punct("->");
        def.to.push_back(name("node"));
        while (at_punct(",")) {
            next();
            def.to.push_back(name("node"));
        }
        return def;
    }

    ChainDef chain() {
        ChainDef def;
        next();
        auto n = name("chain");
        def.name = n.name;
        def.loc = n.loc;
        expect_punct(":");
        if (at_word("all")) {
            next();
            def.all = true;
            return def;
        }
        def.nodes.push_back(name("node"));
        if (!at_punct("->"))
            throw SpecError(fmt::format("expected '->', found {}", describe(peek())), peek().loc);
        while (at_punct("->")) {
            next();
            def.nodes.push_back(name("node"));
        }
        return def;
    }

    static ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

    static ExprPtr binary(std::string op, SourceLoc loc, ExprPtr a, ExprPtr b) {
        Expr e;
        e.kind = Expr::Kind::BINARY;
        e.loc = loc;
        e.text = std::move(op);
        e.args = {std::move(a), std::move(b)};
        return make(std::move(e));
    }

    ExprPtr expr() {
        auto lhs = or_expr();
        while (at_word("where")) {
            const auto loc = next().loc;
            lhs = binary("where", loc, lhs, or_expr());
        }
        return lhs;
    }

    ExprPtr or_expr() {
        auto lhs = and_expr();
        while (at_word("or")) {
            const auto loc = next().loc;
            lhs = binary("or", loc, lhs, and_expr());
        }
        return lhs;
    }

    ExprPtr and_expr() {
        auto lhs = not_expr();
        while (at_word("and")) {
            const auto loc = next().loc;
            lhs = binary("and", loc, lhs, not_expr());
        }
        return lhs;
    }

    ExprPtr not_expr() {
        if (at_word("not")) {
            Expr e;
            e.kind = Expr::Kind::UNARY;
            e.loc = next().loc;
            e.text = "not";
            e.args = {not_expr()};
            return make(std::move(e));
        }
        return comparison();
    }

    ExprPtr comparison() {
        auto lhs = additive();
        for (auto op : {"==", "!=", "<=", ">=", "<", ">"}) {
            if (at_punct(op)) {
                const auto loc = next().loc;
                auto rhs = additive();
                for (auto op2 : {"==", "!=", "<=", ">=", "<", ">"})
                    if (at_punct(op2))
                        throw SpecError("comparisons do not chain; use 'and'", peek().loc);
                return binary(op, loc, lhs, rhs);
            }
        }
        return lhs;
    }

    ExprPtr additive() {
        auto lhs = multiplicative();
        while (at_punct("+") || at_punct("-")) {
            const auto& t = next();
            lhs = binary(t.text, t.loc, lhs, multiplicative());
        }
        return lhs;
    }

    ExprPtr multiplicative() {
        auto lhs = unary();
        while (at_punct("*") || at_punct("/")) {
            const auto& t = next();
            lhs = binary(t.text, t.loc, lhs, unary());
        }
        return lhs;
    }

    ExprPtr unary() {
        if (at_punct("-")) {
            Expr e;
            e.kind = Expr::Kind::UNARY;
            e.loc = next().loc;
            e.text = "-";
            e.args = {unary()};
            return make(std::move(e));
        }
        return primary();
    }

    ExprPtr primary() {
        const auto& t = peek();
        Expr e;
        e.loc = t.loc;
        switch (t.kind) {
            case Tok::NUMBER:
                next();
                e.kind = Expr::Kind::NUMBER;
                e.number = t.number;
                return make(std::move(e));
            case Tok::PARAM:
                next();
                e.kind = Expr::Kind::PARAM;
                e.text = t.text;
                return make(std::move(e));
            case Tok::PUNCT:
                if (t.text == "(") {
                    next();
                    auto inner = expr();
                    expect_punct(")");
                    return inner;
                }
                break;
            case Tok::IDENT:
                if (t.text == "true" || t.text == "false") {
                    next();
                    e.kind = Expr::Kind::BOOLEAN;
                    e.boolean = t.text == "true";
                    return make(std::move(e));
                }
                if (is_reserved(t.text)) break;
                next();
                e.text = t.text;
                if (!at_punct("(")) {
                    e.kind = Expr::Kind::NAME;
                    return make(std::move(e));
                }
                next();
                e.kind = Expr::Kind::CALL;
                if (!at_punct(")")) {
                    while (true) {
                        std::string arg_name;
                        if (peek().kind == Tok::IDENT && peek(1).kind == Tok::PUNCT && peek(1).text == "=") {
                            arg_name = next().text;
                            next();
                        }
                        e.args.push_back(expr());
                        e.arg_names.push_back(std::move(arg_name));
                        if (!at_punct(",")) break;
                        next();
                    }
                }
                expect_punct(")");
                return make(std::move(e));
            case Tok::END:
                break;
        }
        throw SpecError(fmt::format("expected an expression, found {}", describe(t)), t.loc);
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

int precedence(const Expr& e) {
    if (e.kind == Expr::Kind::BINARY) {
        const auto& op = e.text;
        if (op == "where") return 1;
        if (op == "or") return 2;
        if (op == "and") return 3;
        if (op == "+" || op == "-") return 6;
        if (op == "*" || op == "/") return 7;
        return 5;  // comparisons
    }
    if (e.kind == Expr::Kind::UNARY) return e.text == "not" ? 4 : 8;
    return 9;
}

}  // namespace

SpecAst parse(std::string_view source) { return Parser(lex(source)).spec(); }

std::string render(const Expr& e) {
    auto wrap = [](const Expr& child, bool parens) {
        auto s = render(child);
        return parens ? "(" + s + ")" : s;
    };
    switch (e.kind) {
        case Expr::Kind::NUMBER: return format_double(e.number);
        case Expr::Kind::BOOLEAN: return e.boolean ? "true" : "false";
        case Expr::Kind::NAME: return e.text;
        case Expr::Kind::PARAM: return "$" + e.text;
        case Expr::Kind::UNARY: {
            const auto& a = *e.args[0];
            if (e.text == "not") return "not " + wrap(a, precedence(a) < 4);
            return "-" + wrap(a, precedence(a) < 8 || (a.kind == Expr::Kind::NUMBER && a.number < 0));
        }
        case Expr::Kind::BINARY: {
            const int p = precedence(e);
            const auto& a = *e.args[0];
            const auto& b = *e.args[1];
            const bool cmp = p == 5;
            const bool left_parens = precedence(a) < p || (cmp && precedence(a) == p);
            const bool right_parens = precedence(b) <= p;
            return wrap(a, left_parens) + " " + e.text + " " + wrap(b, right_parens);
        }
        case Expr::Kind::CALL: {
            std::string s = e.text + "(";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                if (!e.arg_names[i].empty()) s += e.arg_names[i] + "=";
                s += render(*e.args[i]);
            }
            return s + ")";
        }
    }
    return "";
}

}  // namespace domino
