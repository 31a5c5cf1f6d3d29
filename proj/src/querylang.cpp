#include "broadrefine/querylang.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <system_error>

#include "broadrefine/errors.hpp"

namespace broadrefine {

namespace {

constexpr std::string_view kSeparator = " | ";

bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string normalize_token(std::string_view raw, std::size_t offset, std::string_view what) {
    std::string out(trim(raw));
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    });
    if (!is_valid_token(out)) {
        throw ParseError("invalid " + std::string(what) + " token '" + std::string(raw) + "'", offset);
    }
    return out;
}

double parse_number(std::string_view raw, std::size_t offset) {
    const auto text = trim(raw);
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw ParseError("invalid number '" + std::string(raw) + "'", offset);
    }
    return v;
}

// Splits "<key>=<rest>".
std::pair<std::string_view, std::string_view> split_assignment(std::string_view body, std::size_t offset) {
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
        throw ParseError("expected '<key>=<value>'", offset);
    }
    return {body.substr(0, eq), body.substr(eq + 1)};
}

Constraint parse_clause(std::string_view clause, std::size_t offset) {
    const auto colon = clause.find(':');
    if (colon == std::string_view::npos) {
        throw ParseError("clause without kind prefix '" + std::string(clause) + "'", offset);
    }
    const auto kind = trim(clause.substr(0, colon));
    const auto body = clause.substr(colon + 1);

    if (kind == "attr" || kind == "neg") {
        const auto [k, v] = split_assignment(body, offset);
        auto key = normalize_token(k, offset, "key");
        auto value = normalize_token(v, offset, "value");
        return kind == "attr" ? Constraint::hard(std::move(key), std::move(value))
                              : Constraint::negation(std::move(key), std::move(value));
    }
    if (kind == "range") {
        const auto [k, v] = split_assignment(body, offset);
        const auto dots = v.find("..");
        if (dots == std::string_view::npos) {
            throw ParseError("expected '<lo>..<hi>'", offset);
        }
        const double lo = parse_number(v.substr(0, dots), offset);
        const double hi = parse_number(v.substr(dots + 2), offset);
        if (lo > hi) {
            throw ParseError("inverted interval " + format_number(lo) + ".." + format_number(hi), offset);
        }
        return Constraint::range(normalize_token(k, offset, "key"), lo, hi);
    }
    if (kind == "soft") {
        return Constraint::soft(normalize_token(body, offset, "soft descriptor"));
    }
    if (kind == "cat") {
        throw ParseError("duplicate or misplaced cat: clause", offset);
    }
    throw ParseError("unknown clause kind '" + std::string(kind) + "'", offset);
}

template <typename Out>
Out parse_into(std::string_view text) {
    Out out;
    std::size_t pos = 0;
    bool first = true;
    while (true) {
        const auto bar = text.find('|', pos);
        const auto end = bar == std::string_view::npos ? text.size() : bar;
        const auto raw = text.substr(pos, end - pos);
        const auto clause = trim(raw);
        const auto lead = raw.find_first_not_of(" \t\r\n");
        const std::size_t offset = pos + (lead == std::string_view::npos ? 0 : lead);
        if (clause.empty()) {
            throw ParseError("empty clause", offset);
        }
        if (first) {
            if (clause.substr(0, 4) != "cat:") {
                throw ParseError("query must start with a cat: clause", offset);
            }
            out.core = normalize_token(clause.substr(4), offset, "category");
            first = false;
        } else {
            out.constraints.push_back(parse_clause(clause, offset));
        }
        if (bar == std::string_view::npos) break;
        pos = bar + 1;
    }
    canonicalize(out.constraints);
    return out;
}

std::string serialize_parts(const std::string& core, const std::vector<Constraint>& constraints) {
    std::string out = "cat:" + core;
    for (const auto& c : constraints) {
        out += kSeparator;
        out += serialize(c);
    }
    return out;
}

}  // namespace

Constraint Constraint::hard(std::string key, std::string value) {
    return {ConstraintKind::HardEquality, std::move(key), std::move(value), 0.0, 0.0};
}

Constraint Constraint::range(std::string key, double lo, double hi) {
    return {ConstraintKind::NumericRange, std::move(key), {}, lo, hi};
}

Constraint Constraint::negation(std::string key, std::string value) {
    return {ConstraintKind::Negation, std::move(key), std::move(value), 0.0, 0.0};
}

Constraint Constraint::soft(std::string token) {
    return {ConstraintKind::SoftDescriptor, {}, std::move(token), 0.0, 0.0};
}

RewriteSpec RewriteSpec::from_mask(const ParsedQuery& q, std::uint64_t mask) {
    RewriteSpec r{q.core, {}};
    for (std::size_t j = 0; j < q.constraints.size(); ++j) {
        if (mask >> j & 1U) r.constraints.push_back(q.constraints[j]);
    }
    return r;
}

RewriteSpec RewriteSpec::identity(const ParsedQuery& q) { return {q.core, q.constraints}; }

RewriteSpec RewriteSpec::core_only(const ParsedQuery& q) { return {q.core, {}}; }

bool is_valid_token(std::string_view token) {
    return !token.empty() && std::all_of(token.begin(), token.end(), is_token_char);
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void canonicalize(std::vector<Constraint>& constraints) {
    std::sort(constraints.begin(), constraints.end(),
              [](const Constraint& a, const Constraint& b) { return a < b; });
    constraints.erase(std::unique(constraints.begin(), constraints.end()), constraints.end());
}

ParsedQuery parse(std::string_view text) { return parse_into<ParsedQuery>(text); }

RewriteSpec parse_rewrite(std::string_view text) { return parse_into<RewriteSpec>(text); }

std::string serialize(const Constraint& c) {
    switch (c.kind) {
        case ConstraintKind::HardEquality:
            return "attr:" + c.key + "=" + c.value;
        case ConstraintKind::NumericRange:
            return "range:" + c.key + "=" + format_number(c.lo) + ".." + format_number(c.hi);
        case ConstraintKind::Negation:
            return "neg:" + c.key + "=" + c.value;
        case ConstraintKind::SoftDescriptor:
            return "soft:" + c.value;
    }
    return {};
}

std::string serialize(const ParsedQuery& q) {
    auto constraints = q.constraints;
    canonicalize(constraints);
    return serialize_parts(q.core, constraints);
}

std::string serialize(const RewriteSpec& r) {
    auto constraints = r.constraints;
    canonicalize(constraints);
    return serialize_parts(r.core, constraints);
}

std::pair<std::string, std::vector<Constraint>> decompose(const ParsedQuery& q) {
    return {q.core, q.constraints};
}

ParsedQuery concat(std::string core, std::vector<Constraint> constraints) {
    canonicalize(constraints);
    return {std::move(core), std::move(constraints)};
}

bool is_equivalent(const RewriteSpec& a, const RewriteSpec& b) {
    return serialize(a) == serialize(b);
}

}  // namespace broadrefine
