#pragma once

// Multimodal boolean functions f(t, v) with n bits per modality, stored as a
// 2^n x 2^n truth table (rows indexed by t, columns by v; bit k-1 of an index
// is variable k). A table is additively representable when some real tau, phi
// and theta satisfy  table(i, j) = 1  <=>  tau_i + phi_j > theta.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emap/error.hpp"
#include "emap/rng.hpp"

namespace emap::logic {

/// Largest n for which tables are materialized (256 x 256 cells).
inline constexpr int kMaxBits = 8;

struct BooleanTable {
    int n = 1;
    std::vector<std::uint8_t> cells;  // side() * side(), row-major

    BooleanTable() = default;
    explicit BooleanTable(int bits) : n(bits) {
        if (bits < 1 || bits > kMaxBits) throw CapabilityError("table bits per modality must lie in [1, 8]");
        cells.assign(side() * side(), 0);
    }

    std::size_t side() const { return std::size_t{1} << n; }
    std::uint8_t at(std::size_t i, std::size_t j) const { return cells[i * side() + j]; }
    void set(std::size_t i, std::size_t j, bool value) { cells[i * side() + j] = value ? 1 : 0; }

    std::size_t ones() const {
        std::size_t k = 0;
        for (auto c : cells) k += c;
        return k;
    }
    bool constant() const { return ones() == 0 || ones() == cells.size(); }

    BooleanTable transposed() const {
        BooleanTable out(n);
        for (std::size_t i = 0; i < side(); ++i)
            for (std::size_t j = 0; j < side(); ++j) out.set(j, i, at(i, j));
        return out;
    }

    BooleanTable complemented() const {
        BooleanTable out = *this;
        for (auto& c : out.cells) c ^= 1;
        return out;
    }

    /// Table from a row-major 0/1 list of 4^n entries.
    static BooleanTable from_cells(int bits, std::vector<std::uint8_t> values) {
        BooleanTable out(bits);
        if (values.size() != out.cells.size()) throw InputError("table needs 4^n cells");
        for (auto v : values)
            if (v > 1) throw InputError("table cells must be 0 or 1");
        out.cells = std::move(values);
        return out;
    }

    /// n = 1 table for code in [0, 16): cell k = bit k of code.
    static BooleanTable from_code(int bits, std::uint64_t code) {
        BooleanTable out(bits);
        for (std::size_t k = 0; k < out.cells.size(); ++k) out.cells[k] = (code >> k) & 1;
        return out;
    }

    bool operator==(const BooleanTable&) const = default;
};

// ---- formulas ----------------------------------------------------------------

struct FormulaAst {
    enum class Kind : std::uint8_t { variable, negation, conjunction, disjunction };
    struct Node {
        Kind kind = Kind::variable;
        char modality = 't';  // 't' or 'v' for variables
        int index = 0;        // 1-based variable index
        int lhs = -1;
        int rhs = -1;
    };

    std::vector<Node> nodes;
    int root = -1;

    /// Largest variable index used.
    int max_index() const {
        int m = 0;
        for (const auto& n : nodes)
            if (n.kind == Kind::variable) m = std::max(m, n.index);
        return m;
    }

    bool evaluate(std::uint64_t t_bits, std::uint64_t v_bits) const { return eval(root, t_bits, v_bits); }

    /// Prefix rendering such as AND(t1,NOT(v1)).
    std::string to_string() const { return render(root); }

    /// Operands of the top-level OR chain (1 when the root is not an OR).
    std::size_t disjunct_count() const { return count_chain(root, Kind::disjunction); }

private:
    bool eval(int k, std::uint64_t t, std::uint64_t v) const {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        switch (n.kind) {
            case Kind::variable: return ((n.modality == 't' ? t : v) >> (n.index - 1)) & 1;
            case Kind::negation: return !eval(n.lhs, t, v);
            case Kind::conjunction: return eval(n.lhs, t, v) && eval(n.rhs, t, v);
            case Kind::disjunction: return eval(n.lhs, t, v) || eval(n.rhs, t, v);
        }
        return false;
    }

    std::string render(int k) const {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        switch (n.kind) {
            case Kind::variable: return std::string(1, n.modality) + std::to_string(n.index);
            case Kind::negation: return "NOT(" + render(n.lhs) + ")";
            case Kind::conjunction: return "AND(" + render(n.lhs) + "," + render(n.rhs) + ")";
            case Kind::disjunction: return "OR(" + render(n.lhs) + "," + render(n.rhs) + ")";
        }
        return "?";
    }

    std::size_t count_chain(int k, Kind kind) const {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        if (n.kind != kind) return 1;
        return count_chain(n.lhs, kind) + count_chain(n.rhs, kind);
    }
};

namespace detail {

/// Recursive-descent parser: or := and ('|' and)*, and := unary ('&' unary)*,
/// unary := '!' unary | atom, atom := var | '(' or ')'.
class FormulaParser {
public:
    FormulaParser(std::string_view text, int max_bits) : s_(text), max_bits_(max_bits) {}

    FormulaAst parse() {
        ast_.root = parse_or();
        skip_space();
        if (pos_ != s_.size()) throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
        return std::move(ast_);
    }

private:
    enum class Tok { end, lparen, rparen, op_not, op_and, op_or, var, bad };

    void skip_space() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r'))
            ++pos_;
    }

    bool match_utf8(std::string_view sym) {
        if (s_.substr(pos_, sym.size()) == sym) {
            pos_ += sym.size();
            return true;
        }
        return false;
    }

    /// Consumes an operator if it is next; returns which.
    Tok peek_operator() {
        skip_space();
        const std::size_t save = pos_;
        last_ = save;
        if (pos_ >= s_.size()) return Tok::end;
        Tok t = Tok::bad;
        switch (s_[pos_]) {
            case '!': case '~': t = Tok::op_not; ++pos_; break;
            case '&': t = Tok::op_and; ++pos_; break;
            case '|': t = Tok::op_or; ++pos_; break;
            case '(': t = Tok::lparen; ++pos_; break;
            case ')': t = Tok::rparen; ++pos_; break;
            case 't': case 'v': t = Tok::var; break;
            default:
                if (match_utf8("¬")) t = Tok::op_not;       // ¬
                else if (match_utf8("∧")) t = Tok::op_and;  // ∧
                else if (match_utf8("∨")) t = Tok::op_or;   // ∨
        }
        if (t == Tok::var || t == Tok::bad) pos_ = save;
        return t;
    }

    void unread() { pos_ = last_; }

    int add(FormulaAst::Node n) {
        ast_.nodes.push_back(n);
        return static_cast<int>(ast_.nodes.size() - 1);
    }

    int parse_or() {
        int lhs = parse_and();
        while (true) {
            if (peek_operator() != Tok::op_or) {
                unread();
                return lhs;
            }
            const int rhs = parse_and();
            lhs = add({FormulaAst::Kind::disjunction, 0, 0, lhs, rhs});
        }
    }

    int parse_and() {
        int lhs = parse_unary();
        while (true) {
            if (peek_operator() != Tok::op_and) {
                unread();
                return lhs;
            }
            const int rhs = parse_unary();
            lhs = add({FormulaAst::Kind::conjunction, 0, 0, lhs, rhs});
        }
    }

    int parse_unary() {
        const Tok t = peek_operator();
        if (t == Tok::op_not) return add({FormulaAst::Kind::negation, 0, 0, parse_unary(), -1});
        if (t == Tok::lparen) {
            const int inner = parse_or();
            if (peek_operator() != Tok::rparen) {
                unread();
                throw ParseError(pos_ >= s_.size() ? "missing ')' at end of input" : "expected ')'", pos_);
            }
            return inner;
        }
        if (t == Tok::var) return parse_variable();
        unread();
        if (t == Tok::end) throw ParseError("unexpected end of input", pos_);
        throw ParseError("expected a variable, '!' or '('", pos_);
    }

    int parse_variable() {
        const std::size_t start = pos_;
        const char modality = s_[pos_++];
        std::size_t digits = 0;
        long index = 0;
        while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') {
            index = index * 10 + (s_[pos_] - '0');
            ++pos_;
            if (++digits > 6) throw ParseError("variable index too long", start);
        }
        if (digits == 0) throw ParseError("expected a variable index after '" + std::string(1, modality) + "'", pos_);
        if (index < 1) throw ParseError("variable indices start at 1", start);
        if (max_bits_ > 0 && index > max_bits_)
            throw InputError("undeclared variable " + std::string(1, modality) + std::to_string(index) +
                             " (n = " + std::to_string(max_bits_) + ")");
        return add({FormulaAst::Kind::variable, modality, static_cast<int>(index), -1, -1});
    }

    std::string_view s_;
    int max_bits_;
    std::size_t pos_ = 0;
    std::size_t last_ = 0;
    FormulaAst ast_;
};

}  // namespace detail

/// Parses t<k>, v<k>, !, &, | and parentheses (also ¬, ∧, ∨). Precedence is
/// NOT > AND > OR, binary operators left-associative. With max_bits > 0, a
/// variable index above it is rejected as undeclared.
inline FormulaAst parse_formula(std::string_view text, int max_bits = 0) {
    return detail::FormulaParser(text, max_bits).parse();
}

inline BooleanTable table_from_formula(const FormulaAst& ast, int n) {
    if (ast.max_index() > n) throw InputError("formula uses variables beyond n = " + std::to_string(n));
    BooleanTable out(n);
    for (std::size_t i = 0; i < out.side(); ++i)
        for (std::size_t j = 0; j < out.side(); ++j) out.set(i, j, ast.evaluate(i, j));
    return out;
}

// ---- representability ------------------------------------------------------

/// True iff no 2x2 submatrix is [[1,0],[0,1]] or [[0,1],[1,0]]. Equivalently the
/// rows, viewed as sets of columns, form a chain under inclusion.
inline bool is_representable(const BooleanTable& table) {
    const std::size_t m = table.side();
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            bool a_only = false, b_only = false;
            for (std::size_t j = 0; j < m && !(a_only && b_only); ++j) {
                const auto x = table.at(a, j), y = table.at(b, j);
                a_only |= (x && !y);
                b_only |= (!x && y);
            }
            if (a_only && b_only) return false;
        }
    }
    return true;
}

struct ThresholdWitness {
    std::vector<double> tau;
    std::vector<double> phi;
    double theta = 0.0;
};

/// Largest side accepted by the oracle (n <= 4).
inline constexpr std::size_t kOracleMaxSide = 16;

/// Decides the threshold system exactly as a linear feasibility problem with
/// unit margin. With theta absorbed into tau and psi = -phi the constraints
///     tau_i + phi_j >= 1   (cell = 1)     tau_i + phi_j <= -1   (cell = 0)
/// become difference constraints psi_j - tau_i <= -1 and tau_i - psi_j <= -1,
/// feasible iff the constraint graph has no negative cycle (Bellman-Ford). A
/// feasible system yields a witness from the shortest-path potentials.
inline std::optional<ThresholdWitness> representable_witness(const BooleanTable& table) {
    const std::size_t m = table.side();
    if (m > kOracleMaxSide) throw CapabilityError("representable_oracle supports at most 16 rows/columns (n <= 4)");
    struct Edge {
        std::size_t from, to;
        long weight;
    };
    // Nodes 0..m-1: tau_i; m..2m-1: psi_j; 2m: virtual source.
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (table.at(i, j)) edges.push_back({i, m + j, -1});  // psi_j <= tau_i - 1
            else edges.push_back({m + j, i, -1});                 // tau_i <= psi_j - 1
        }
    const std::size_t nodes = 2 * m + 1;
    for (std::size_t k = 0; k < 2 * m; ++k) edges.push_back({2 * m, k, 0});
    std::vector<long> dist(nodes, 0);  // source distances; 0 is exact for the source edges
    for (std::size_t round = 0; round + 1 < nodes; ++round) {
        bool changed = false;
        for (const auto& e : edges)
            if (dist[e.from] + e.weight < dist[e.to]) {
                dist[e.to] = dist[e.from] + e.weight;
                changed = true;
            }
        if (!changed) break;
    }
    for (const auto& e : edges)
        if (dist[e.from] + e.weight < dist[e.to]) return std::nullopt;

    ThresholdWitness w;
    for (std::size_t i = 0; i < m; ++i) w.tau.push_back(static_cast<double>(dist[i]));
    for (std::size_t j = 0; j < m; ++j) w.phi.push_back(-static_cast<double>(dist[m + j]));
    w.theta = 0.0;
    return w;
}

/// Checks a witness cell by cell.
inline bool witness_fits(const BooleanTable& table, const ThresholdWitness& w) {
    for (std::size_t i = 0; i < table.side(); ++i)
        for (std::size_t j = 0; j < table.side(); ++j)
            if ((w.tau[i] + w.phi[j] > w.theta) != static_cast<bool>(table.at(i, j))) return false;
    return true;
}

/// Exact feasibility decision, independent of the 2x2-pattern check.
inline bool representable_oracle(const BooleanTable& table) {
    const auto w = representable_witness(table);
    if (w && !witness_fits(table, *w)) throw NumericError("oracle produced an invalid threshold witness");
    return w.has_value();
}

// ---- sampling ----------------------------------------------------------------

inline constexpr int kMaxResamples = 1000;

/// Uniform random table; with require_nonconstant, redraws (up to 1000 times)
/// until both classes appear.
inline BooleanTable sample_table(int n, Rng& rng, bool require_nonconstant) {
    BooleanTable t(n);
    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        for (std::size_t k = 0; k < t.cells.size(); k += 64) {
            const std::uint64_t bits = rng.next_u64();
            for (std::size_t b = 0; b < 64 && k + b < t.cells.size(); ++b) t.cells[k + b] = (bits >> b) & 1;
        }
        if (!require_nonconstant || !t.constant()) return t;
    }
    throw NumericError("could not sample a nonconstant table in 1000 attempts");
}

inline BooleanTable sample_table(int n, std::uint64_t seed, bool require_nonconstant) {
    Rng rng(stream_seed(seed, streams::kTable));
    return sample_table(n, rng, require_nonconstant);
}

/// Random AND/OR/NOT formula tree of bounded depth over t1..tn, v1..vn.
inline FormulaAst sample_circuit(int n, int max_depth, Rng& rng) {
    FormulaAst ast;
    auto add = [&](FormulaAst::Node node) {
        ast.nodes.push_back(node);
        return static_cast<int>(ast.nodes.size() - 1);
    };
    auto grow = [&](auto&& self, int depth) -> int {
        int k;
        if (depth >= max_depth || (depth > 0 && rng.uniform() < 0.3)) {
            const auto var = rng.below(2 * static_cast<std::uint64_t>(n));
            k = add({FormulaAst::Kind::variable, var < static_cast<std::uint64_t>(n) ? 't' : 'v',
                     static_cast<int>(var % static_cast<std::uint64_t>(n)) + 1, -1, -1});
        } else {
            const int lhs = self(self, depth + 1);
            const int rhs = self(self, depth + 1);
            k = add({rng.bit() ? FormulaAst::Kind::conjunction : FormulaAst::Kind::disjunction, 0, 0, lhs, rhs});
        }
        if (rng.uniform() < 0.5) k = add({FormulaAst::Kind::negation, 0, 0, k, -1});
        return k;
    };
    ast.root = grow(grow, 0);
    return ast;
}

enum class Sampler { truth_table, circuit };

inline const char* sampler_name(Sampler s) { return s == Sampler::truth_table ? "table" : "circuit"; }

inline BooleanTable sample_function(int n, Rng& rng, bool require_nonconstant, Sampler sampler,
                                    int circuit_depth = 6) {
    if (sampler == Sampler::truth_table) return sample_table(n, rng, require_nonconstant);
    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
        auto t = table_from_formula(sample_circuit(n, circuit_depth, rng), n);
        if (!require_nonconstant || !t.constant()) return t;
    }
    throw NumericError("could not sample a nonconstant circuit in 1000 attempts");
}

struct Census {
    std::size_t total = 0;
    std::size_t representable = 0;
    std::vector<std::uint64_t> failures;  // table codes that are not representable
};

/// Exhaustive census over all 2^(4^n) tables (n <= 2).
inline Census representability_census(int n) {
    if (n < 1 || n > 2) throw CapabilityError("census enumerates all tables only for n = 1 or 2");
    const std::size_t cells = std::size_t{1} << (2 * n);
    Census c;
    c.total = std::size_t{1} << cells;
    for (std::uint64_t code = 0; code < c.total; ++code) {
        if (is_representable(BooleanTable::from_code(n, code))) ++c.representable;
        else c.failures.push_back(code);
    }
    return c;
}

}  // namespace emap::logic
