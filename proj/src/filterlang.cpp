#include "crowdtrend/filterlang.hpp"

#include "crowdtrend/text.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>

namespace crowdtrend {

namespace {

bool keeps_edge(UChar32 c) {
    return c == '#' || c == '@' || u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || u_isdigit(c);
}

// Code point boundaries of a UTF-8 string.
struct CodePoint {
    std::int32_t begin;
    std::int32_t end;
    UChar32 value;
};

std::vector<CodePoint> decode(std::string_view s) {
    std::vector<CodePoint> out;
    std::int32_t i = 0;
    const auto len = static_cast<std::int32_t>(s.size());
    while (i < len) {
        std::int32_t start = i;
        UChar32 c;
        U8_NEXT(s.data(), i, len, c);
        out.push_back({start, i, c});
    }
    return out;
}

bool is_operator_word(std::string_view w) {
    auto eq = [&](std::string_view op) {
        return w.size() == op.size() && std::equal(w.begin(), w.end(), op.begin(), [](char a, char b) {
                   return (a >= 'a' && a <= 'z' ? a - 32 : a) == b;
               });
    };
    return eq("AND") || eq("OR") || eq("NOT");
}

bool is_valid_token(const std::string& tok) {
    auto t = tokenize(tok);
    return t.tokens.size() == 1 && t.tokens.front() == tok;
}

}  // namespace

std::string strip_token(std::string_view chunk) {
    auto cps = decode(chunk);
    std::size_t first = 0;
    std::size_t last = cps.size();
    while (first < last && !keeps_edge(cps[first].value)) ++first;
    while (last > first && !keeps_edge(cps[last - 1].value)) --last;
    if (first == last) return {};
    return std::string(chunk.substr(static_cast<std::size_t>(cps[first].begin),
                                    static_cast<std::size_t>(cps[last - 1].end - cps[first].begin)));
}

TokenizedText tokenize(std::string_view input) {
    TokenizedText out;
    const std::string lowered = text::to_lower(input);
    auto cps = decode(lowered);
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && u_isUWhiteSpace(cps[i].value)) ++i;
        if (i == cps.size()) break;
        std::size_t j = i;
        while (j < cps.size() && !u_isUWhiteSpace(cps[j].value)) ++j;
        std::string_view chunk(lowered.data() + cps[i].begin, static_cast<std::size_t>(cps[j - 1].end - cps[i].begin));
        std::string tok = strip_token(chunk);
        if (!tok.empty()) out.tokens.push_back(std::move(tok));
        i = j;
    }
    return out;
}

QueryParseError::QueryParseError(std::size_t offset, const std::string& message)
    : std::runtime_error("query parse error at offset " + std::to_string(offset) + ": " + message),
      offset_(offset),
      detail_(message) {}

// ---------------------------------------------------------------------------
// Construction and equality

FilterQuery FilterQuery::keyword(std::vector<std::string> phrase) {
    if (phrase.empty()) throw std::invalid_argument("keyword phrase must have at least one token");
    for (const auto& tok : phrase) {
        if (!is_valid_token(tok)) throw std::invalid_argument("not a normalized token: '" + tok + "'");
    }
    return FilterQuery(Keyword{std::move(phrase)});
}

FilterQuery FilterQuery::all_of(std::vector<FilterQuery> children) {
    if (children.size() < 2) throw std::invalid_argument("AND needs at least two operands");
    return FilterQuery(And{std::move(children)});
}

FilterQuery FilterQuery::any_of(std::vector<FilterQuery> children) {
    if (children.size() < 2) throw std::invalid_argument("OR needs at least two operands");
    return FilterQuery(Or{std::move(children)});
}

FilterQuery FilterQuery::negate(FilterQuery child) {
    return FilterQuery(Not{{std::move(child)}});
}

bool operator==(const FilterQuery::Keyword& a, const FilterQuery::Keyword& b) { return a.phrase == b.phrase; }
bool operator==(const FilterQuery::And& a, const FilterQuery::And& b) { return a.children == b.children; }
bool operator==(const FilterQuery::Or& a, const FilterQuery::Or& b) { return a.children == b.children; }
bool operator==(const FilterQuery::Not& a, const FilterQuery::Not& b) { return a.child == b.child; }

bool operator==(const FilterQuery& a, const FilterQuery& b) {
    return a.node_ == b.node_ || *a.node_ == *b.node_;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class TokKind { Word, Phrase, LParen, RParen, And, Or, Not, End };

struct Lexeme {
    TokKind kind;
    std::size_t offset;
    std::string text;
};

bool ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<Lexeme> lex(std::string_view src) {
    std::vector<Lexeme> out;
    std::size_t i = 0;
    while (true) {
        while (i < src.size() && ascii_space(src[i])) ++i;
        if (i == src.size()) break;
        const char c = src[i];
        if (c == '(') {
            out.push_back({TokKind::LParen, i, {}});
            ++i;
        } else if (c == ')') {
            out.push_back({TokKind::RParen, i, {}});
            ++i;
        } else if (c == '"') {
            const std::size_t start = i++;
            std::string body;
            bool closed = false;
            while (i < src.size()) {
                if (src[i] == '\\' && i + 1 < src.size()) {
                    body.push_back(src[i + 1]);
                    i += 2;
                } else if (src[i] == '"') {
                    closed = true;
                    ++i;
                    break;
                } else {
                    body.push_back(src[i++]);
                }
            }
            if (!closed) throw QueryParseError(start, "unterminated quoted phrase");
            out.push_back({TokKind::Phrase, start, std::move(body)});
        } else {
            const std::size_t start = i;
            while (i < src.size() && !ascii_space(src[i]) && src[i] != '(' && src[i] != ')' && src[i] != '"') ++i;
            std::string word(src.substr(start, i - start));
            TokKind kind = TokKind::Word;
            if (is_operator_word(word)) {
                const char u = static_cast<char>(word[0] & ~0x20);
                kind = u == 'A' ? TokKind::And : u == 'O' ? TokKind::Or : TokKind::Not;
            }
            out.push_back({kind, start, std::move(word)});
        }
    }
    out.push_back({TokKind::End, src.size(), {}});
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view src) : lexemes_(lex(src)) {}

    FilterQuery parse() {
        if (peek().kind == TokKind::End) throw QueryParseError(peek().offset, "empty query");
        FilterQuery q = parse_or();
        if (peek().kind == TokKind::RParen) throw QueryParseError(peek().offset, "unbalanced ')'");
        if (peek().kind != TokKind::End) throw QueryParseError(peek().offset, "expected AND, OR or end of query");
        return q;
    }

private:
    const Lexeme& peek() const { return lexemes_[pos_]; }
    const Lexeme& take() { return lexemes_[pos_++]; }

    FilterQuery parse_or() {
        std::vector<FilterQuery> parts;
        parts.push_back(parse_and());
        while (peek().kind == TokKind::Or) {
            take();
            parts.push_back(parse_and());
        }
        return parts.size() == 1 ? std::move(parts.front()) : FilterQuery::any_of(std::move(parts));
    }

    FilterQuery parse_and() {
        std::vector<FilterQuery> parts;
        parts.push_back(parse_unary());
        while (peek().kind == TokKind::And) {
            take();
            parts.push_back(parse_unary());
        }
        return parts.size() == 1 ? std::move(parts.front()) : FilterQuery::all_of(std::move(parts));
    }

    FilterQuery parse_unary() {
        if (peek().kind == TokKind::Not) {
            take();
            return FilterQuery::negate(parse_unary());
        }
        return parse_atom();
    }

    FilterQuery parse_atom() {
        const Lexeme& lx = take();
        switch (lx.kind) {
            case TokKind::LParen: {
                FilterQuery inner = parse_or();
                if (peek().kind != TokKind::RParen) throw QueryParseError(peek().offset, "expected ')'");
                take();
                return inner;
            }
            case TokKind::Word:
            case TokKind::Phrase: {
                auto toks = tokenize(lx.text).tokens;
                if (toks.empty()) throw QueryParseError(lx.offset, "keyword has no searchable characters");
                return FilterQuery::keyword(std::move(toks));
            }
            case TokKind::RParen:
                throw QueryParseError(lx.offset, "unexpected ')'");
            case TokKind::End:
                throw QueryParseError(lx.offset, "expected a keyword, phrase or '('");
            default:
                throw QueryParseError(lx.offset, "unexpected operator '" + lx.text + "'");
        }
    }

    std::vector<Lexeme> lexemes_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Printing

bool printable_bare(const std::string& tok) {
    if (is_operator_word(tok)) return false;
    return tok.find_first_of("()\"\\") == std::string::npos;
}

void print_into(const FilterQuery& q, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, FilterQuery::Keyword>) {
                if (n.phrase.size() == 1 && printable_bare(n.phrase.front())) {
                    out += n.phrase.front();
                    return;
                }
                out += '"';
                for (std::size_t i = 0; i < n.phrase.size(); ++i) {
                    if (i) out += ' ';
                    for (char c : n.phrase[i]) {
                        if (c == '"' || c == '\\') out += '\\';
                        out += c;
                    }
                }
                out += '"';
            } else if constexpr (std::is_same_v<T, FilterQuery::Not>) {
                out += "(NOT ";
                print_into(n.child.front(), out);
                out += ')';
            } else {
                const char* op = std::is_same_v<T, FilterQuery::And> ? " AND " : " OR ";
                out += '(';
                for (std::size_t i = 0; i < n.children.size(); ++i) {
                    if (i) out += op;
                    print_into(n.children[i], out);
                }
                out += ')';
            }
        },
        q.node());
}

bool contains_phrase(const std::vector<std::string>& phrase, const std::vector<std::string>& tokens) {
    if (phrase.size() > tokens.size()) return false;
    return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

}  // namespace

FilterQuery parse_query(std::string_view source) { return Parser(source).parse(); }

std::string print_query(const FilterQuery& query) {
    std::string out;
    print_into(query, out);
    return out;
}

bool matches(const FilterQuery& query, const TokenizedText& text) {
    return std::visit(
        [&](const auto& n) -> bool {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, FilterQuery::Keyword>) {
                return contains_phrase(n.phrase, text.tokens);
            } else if constexpr (std::is_same_v<T, FilterQuery::And>) {
                return std::all_of(n.children.begin(), n.children.end(),
                                   [&](const FilterQuery& c) { return matches(c, text); });
            } else if constexpr (std::is_same_v<T, FilterQuery::Or>) {
                return std::any_of(n.children.begin(), n.children.end(),
                                   [&](const FilterQuery& c) { return matches(c, text); });
            } else {
                return !matches(n.child.front(), text);
            }
        },
        query.node());
}

FilterQuery compile_filter(std::string_view query, std::span<const std::string> keywords) {
    std::vector<FilterQuery> kws;
    for (const auto& k : keywords) {
        auto toks = tokenize(k).tokens;
        if (toks.empty()) throw std::invalid_argument("keyword '" + k + "' has no searchable characters");
        kws.push_back(FilterQuery::keyword(std::move(toks)));
    }
    const bool has_query = !text::is_blank(query);
    if (!has_query && kws.empty()) throw std::invalid_argument("project needs a query or a keyword list");

    std::vector<FilterQuery> parts;
    if (has_query) parts.push_back(parse_query(query));
    if (kws.size() == 1) {
        parts.push_back(std::move(kws.front()));
    } else if (kws.size() > 1) {
        parts.push_back(FilterQuery::any_of(std::move(kws)));
    }
    return parts.size() == 1 ? std::move(parts.front()) : FilterQuery::all_of(std::move(parts));
}

}  // namespace crowdtrend
