#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Structured query grammar:
//
//   cat:<token> [ | attr:<key>=<value> | range:<key>=<lo>..<hi>
//                | neg:<key>=<value>   | soft:<token> ]...
//
// Canonical form sorts clauses by (kind, key, value), collapses duplicates
// and joins them with " | ".

namespace broadrefine {

// Declaration order is the canonical clause order.
enum class ConstraintKind : std::uint8_t {
    HardEquality = 0,
    NumericRange = 1,
    Negation = 2,
    SoftDescriptor = 3,
};

struct Constraint {
    ConstraintKind kind = ConstraintKind::HardEquality;
    std::string key;    // empty for soft descriptors
    std::string value;  // token; empty for numeric ranges
    double lo = 0.0;    // numeric ranges only
    double hi = 0.0;

    static Constraint hard(std::string key, std::string value);
    static Constraint range(std::string key, double lo, double hi);
    static Constraint negation(std::string key, std::string value);
    static Constraint soft(std::string token);

    friend bool operator==(const Constraint&, const Constraint&) = default;
    friend std::partial_ordering operator<=>(const Constraint&, const Constraint&) = default;
};

// A conversational query decomposed into its core product and constraint set.
struct ParsedQuery {
    std::string core;
    std::vector<Constraint> constraints;

    friend bool operator==(const ParsedQuery&, const ParsedQuery&) = default;
};

// A rewrite keeps the core and a subset of the source query's constraints.
struct RewriteSpec {
    std::string core;
    std::vector<Constraint> constraints;

    // Subset of q selected by `mask` (bit j keeps q.constraints[j]).
    static RewriteSpec from_mask(const ParsedQuery& q, std::uint64_t mask);
    static RewriteSpec identity(const ParsedQuery& q);
    static RewriteSpec core_only(const ParsedQuery& q);

    friend bool operator==(const RewriteSpec&, const RewriteSpec&) = default;
};

// Throws ParseError with the byte offset of the offending clause.
ParsedQuery parse(std::string_view text);
RewriteSpec parse_rewrite(std::string_view text);

std::string serialize(const ParsedQuery& q);
std::string serialize(const RewriteSpec& r);
std::string serialize(const Constraint& c);

// Sorts and deduplicates in place.
void canonicalize(std::vector<Constraint>& constraints);

std::pair<std::string, std::vector<Constraint>> decompose(const ParsedQuery& q);

// Concat(p, A') as a query.
ParsedQuery concat(std::string core, std::vector<Constraint> constraints);

bool is_equivalent(const RewriteSpec& a, const RewriteSpec& b);

// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

bool is_valid_token(std::string_view token);

}  // namespace broadrefine
