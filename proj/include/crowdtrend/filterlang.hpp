#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace crowdtrend {

/// Lowercased tokens of a document, in order.
struct TokenizedText {
    std::vector<std::string> tokens;
};

/// Lowercases, splits on unicode whitespace and strips leading/trailing
/// characters that are not letters, digits, '#' or '@'. Empty tokens are
/// dropped. Input is expected to be NFC already.
TokenizedText tokenize(std::string_view text);

/// Strips one whitespace-free chunk the same way tokenize() does.
std::string strip_token(std::string_view chunk);

class QueryParseError : public std::runtime_error {
public:
    QueryParseError(std::size_t offset, const std::string& message);
    std::size_t offset() const noexcept { return offset_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t offset_;
    std::string detail_;
};

/// Immutable boolean keyword expression.
class FilterQuery {
public:
    struct Keyword {
        std::vector<std::string> phrase;
    };
    struct And {
        std::vector<FilterQuery> children;
    };
    struct Or {
        std::vector<FilterQuery> children;
    };
    struct Not {
        std::vector<FilterQuery> child;  // exactly one element
    };
    using Node = std::variant<Keyword, And, Or, Not>;

    static FilterQuery keyword(std::vector<std::string> phrase);
    static FilterQuery all_of(std::vector<FilterQuery> children);
    static FilterQuery any_of(std::vector<FilterQuery> children);
    static FilterQuery negate(FilterQuery child);

    const Node& node() const { return *node_; }

    friend bool operator==(const FilterQuery& a, const FilterQuery& b);

private:
    explicit FilterQuery(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}
    std::shared_ptr<const Node> node_;
};

bool operator==(const FilterQuery::Keyword& a, const FilterQuery::Keyword& b);
bool operator==(const FilterQuery::And& a, const FilterQuery::And& b);
bool operator==(const FilterQuery::Or& a, const FilterQuery::Or& b);
bool operator==(const FilterQuery::Not& a, const FilterQuery::Not& b);

/// Grammar:
///   expr    := and_expr (OR and_expr)*
///   and_expr:= unary (AND unary)*
///   unary   := NOT unary | atom
///   atom    := '(' expr ')' | "quoted phrase" | bare-word
/// Operators are case-insensitive. Throws QueryParseError with a byte offset.
FilterQuery parse_query(std::string_view source);

/// Fully parenthesized canonical form; parse_query(print_query(q)) == q.
std::string print_query(const FilterQuery& query);

/// Keywords match as contiguous token subsequences.
bool matches(const FilterQuery& query, const TokenizedText& text);

/// Builds the effective project filter: the optional query AND the
/// top-level OR of the plain keyword list. At least one must be given.
FilterQuery compile_filter(std::string_view query, std::span<const std::string> keywords);

}  // namespace crowdtrend
