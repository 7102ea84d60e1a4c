#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qcard/errors.hpp"
#include "qcard/vqc.hpp"

// Workload ingestion: a small SQL subset (conjunctive joins + filters), CSV
// table scans for exact selectivities, and the line-delimited digested format
// that carries (table id, selectivity, cardinality) records.
namespace qcard::workload {

// ---------------------------------------------------------------------------
// Catalog

enum class ColumnType { Int, Float, Text };

inline const char* column_type_name(ColumnType t) {
    switch (t) {
        case ColumnType::Int: return "int";
        case ColumnType::Float: return "float";
        case ColumnType::Text: return "text";
    }
    throw ConfigError("unknown column type");
}

struct ColumnDef {
    std::string name;
    ColumnType type = ColumnType::Text;
};

struct TableDef {
    std::string name;
    int id = 0; // dense, starting at 1
    std::vector<ColumnDef> columns;

    int column_index(std::string_view column) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i].name == column) return static_cast<int>(i);
        }
        return -1;
    }
};

struct SchemaCatalog {
    std::vector<TableDef> tables;

    const TableDef* find(std::string_view name) const {
        for (const auto& t : tables) {
            if (t.name == name) return &t;
        }
        return nullptr;
    }
    int table_count() const { return static_cast<int>(tables.size()); }
};

// ---------------------------------------------------------------------------
// Filters

enum class FilterOp { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* filter_op_name(FilterOp op) {
    switch (op) {
        case FilterOp::Eq: return "=";
        case FilterOp::Ne: return "<>";
        case FilterOp::Lt: return "<";
        case FilterOp::Le: return "<=";
        case FilterOp::Gt: return ">";
        case FilterOp::Ge: return ">=";
    }
    throw ConfigError("unknown filter op");
}

struct FilterPredicate {
    std::string table;   // real table name, aliases already resolved
    std::string column;
    FilterOp op = FilterOp::Eq;
    std::string constant;   // literal text, quotes stripped
    bool quoted = false;    // came from a string literal

    bool operator==(const FilterPredicate&) const = default;
};

struct ParsedQuery {
    std::vector<std::string> tables;       // real names in FROM order
    std::vector<FilterPredicate> filters;  // join conditions are dropped
};

// ---------------------------------------------------------------------------
// SQL subset parser

namespace detail {

struct Token {
    enum class Kind { Ident, Number, String, Star, Comma, Dot, Op, Semicolon, End };
    Kind kind = Kind::End;
    std::string text;
    std::size_t pos = 0;
};

inline std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

inline bool is_keyword(const Token& tok, std::string_view kw) {
    return tok.kind == Token::Kind::Ident && upper(tok.text) == kw;
}

inline std::vector<Token> lex(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();
    while (i < n) {
        const char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) ||
                             sql[i] == '_')) {
                ++i;
            }
            out.push_back({Token::Kind::Ident,
                           std::string(sql.substr(start, i - start)), start});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && i + 1 < n &&
             std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            ++i;
            while (i < n && (std::isdigit(static_cast<unsigned char>(sql[i])) ||
                             sql[i] == '.' || sql[i] == 'e' || sql[i] == 'E' ||
                             ((sql[i] == '+' || sql[i] == '-') &&
                              (sql[i - 1] == 'e' || sql[i - 1] == 'E')))) {
                ++i;
            }
            out.push_back({Token::Kind::Number,
                           std::string(sql.substr(start, i - start)), start});
            continue;
        }
        if (c == '\'') {
            std::string text;
            ++i;
            bool closed = false;
            while (i < n) {
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') { // '' escapes a quote
                        text += '\'';
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                text += sql[i++];
            }
            if (!closed) throw ParseError("unterminated string literal", start);
            out.push_back({Token::Kind::String, text, start});
            continue;
        }
        switch (c) {
            case '*': out.push_back({Token::Kind::Star, "*", start}); ++i; break;
            case ',': out.push_back({Token::Kind::Comma, ",", start}); ++i; break;
            case '.': out.push_back({Token::Kind::Dot, ".", start}); ++i; break;
            case ';': out.push_back({Token::Kind::Semicolon, ";", start}); ++i; break;
            case '=': out.push_back({Token::Kind::Op, "=", start}); ++i; break;
            case '<':
                if (i + 1 < n && (sql[i + 1] == '=' || sql[i + 1] == '>')) {
                    out.push_back({Token::Kind::Op,
                                   std::string(sql.substr(start, 2)), start});
                    i += 2;
                } else {
                    out.push_back({Token::Kind::Op, "<", start});
                    ++i;
                }
                break;
            case '>':
                if (i + 1 < n && sql[i + 1] == '=') {
                    out.push_back({Token::Kind::Op, ">=", start});
                    i += 2;
                } else {
                    out.push_back({Token::Kind::Op, ">", start});
                    ++i;
                }
                break;
            default:
                throw ParseError("unexpected character '" + std::string(1, c) + "'",
                                 start);
        }
    }
    out.push_back({Token::Kind::End, "", n});
    return out;
}

inline FilterOp parse_filter_op(const Token& tok) {
    if (tok.text == "=") return FilterOp::Eq;
    if (tok.text == "<>") return FilterOp::Ne;
    if (tok.text == "<") return FilterOp::Lt;
    if (tok.text == "<=") return FilterOp::Le;
    if (tok.text == ">") return FilterOp::Gt;
    if (tok.text == ">=") return FilterOp::Ge;
    throw ParseError("unsupported operator '" + tok.text + "'", tok.pos);
}

class QueryParser {
  public:
    explicit QueryParser(std::string_view sql) : tokens_(lex(sql)) {}

    ParsedQuery parse() {
        expect_keyword("SELECT");
        parse_select_list();
        expect_keyword("FROM");
        parse_from_list();
        if (is_keyword(peek(), "WHERE")) {
            advance();
            parse_condition();
            while (is_keyword(peek(), "AND")) {
                advance();
                parse_condition();
            }
        }
        if (peek().kind == Token::Kind::Semicolon) advance();
        if (peek().kind != Token::Kind::End) {
            throw ParseError("unexpected '" + peek().text + "'", peek().pos);
        }
        return std::move(result_);
    }

  private:
    const Token& peek() const { return tokens_[cursor_]; }
    const Token& advance() { return tokens_[cursor_++]; }

    void expect_keyword(std::string_view kw) {
        const Token& tok = peek();
        if (!is_keyword(tok, kw)) {
            throw ParseError("expected " + std::string(kw) + ", found '" +
                                 (tok.kind == Token::Kind::End ? "end of input"
                                                               : tok.text) +
                                 "'",
                             tok.pos);
        }
        advance();
    }

    // The selected columns never affect cardinality; accept and drop them.
    void parse_select_list() {
        while (true) {
            const Token& tok = peek();
            if (tok.kind == Token::Kind::Star) {
                advance();
            } else if (tok.kind == Token::Kind::Ident) {
                if (is_keyword(tok, "FROM")) {
                    throw ParseError("empty select list", tok.pos);
                }
                advance();
                if (peek().kind == Token::Kind::Dot) {
                    advance();
                    expect_column_name();
                }
            } else {
                throw ParseError("expected column or *, found '" + tok.text + "'",
                                 tok.pos);
            }
            if (peek().kind == Token::Kind::Comma) {
                advance();
                continue;
            }
            break;
        }
    }

    void expect_column_name() {
        const Token& tok = peek();
        if (tok.kind == Token::Kind::Star) {
            advance();
            return;
        }
        if (tok.kind != Token::Kind::Ident) {
            throw ParseError("expected column name, found '" + tok.text + "'",
                             tok.pos);
        }
        advance();
    }

    void parse_from_list() {
        while (true) {
            const Token& tok = peek();
            if (tok.kind != Token::Kind::Ident || is_keyword(tok, "WHERE")) {
                throw ParseError("expected table name", tok.pos);
            }
            const std::string table = advance().text;
            std::string alias = table;
            if (is_keyword(peek(), "AS")) {
                advance();
                if (peek().kind != Token::Kind::Ident) {
                    throw ParseError("expected alias after AS", peek().pos);
                }
                alias = advance().text;
            } else if (peek().kind == Token::Kind::Ident &&
                       !is_keyword(peek(), "WHERE")) {
                alias = advance().text;
            }
            if (std::find(result_.tables.begin(), result_.tables.end(), table) !=
                result_.tables.end()) {
                throw WorkloadError("self-joins unsupported: table '" + table +
                                    "' appears twice in FROM");
            }
            for (const auto& [known_alias, _] : aliases_) {
                if (known_alias == alias) {
                    throw ParseError("duplicate name '" + alias + "' in FROM",
                                     tok.pos);
                }
            }
            result_.tables.push_back(table);
            aliases_.emplace_back(alias, table);
            if (alias != table) aliases_.emplace_back(table, table);
            if (peek().kind == Token::Kind::Comma) {
                advance();
                continue;
            }
            break;
        }
    }

    struct ColumnRef {
        std::string table;
        std::string column;
        std::size_t pos;
    };

    ColumnRef parse_column_ref() {
        const Token& first = peek();
        if (first.kind != Token::Kind::Ident) {
            throw ParseError("expected table.column, found '" + first.text + "'",
                             first.pos);
        }
        const std::string qualifier = advance().text;
        if (peek().kind != Token::Kind::Dot) {
            throw ParseError("column '" + qualifier +
                                 "' must be qualified as table.column",
                             first.pos);
        }
        advance();
        if (peek().kind != Token::Kind::Ident) {
            throw ParseError("expected column name after '.'", peek().pos);
        }
        const std::string column = advance().text;
        for (const auto& [alias, table] : aliases_) {
            if (alias == qualifier) return {table, column, first.pos};
        }
        throw ParseError("unknown table '" + qualifier + "'", first.pos);
    }

    void parse_condition() {
        const ColumnRef lhs = parse_column_ref();
        const Token& op_tok = peek();
        if (op_tok.kind != Token::Kind::Op) {
            throw ParseError("expected comparison operator, found '" +
                                 (op_tok.kind == Token::Kind::End ? "end of input"
                                                                  : op_tok.text) +
                                 "'",
                             op_tok.pos);
        }
        const FilterOp op = parse_filter_op(advance());
        const Token& rhs = peek();
        if (rhs.kind == Token::Kind::Ident) {
            // table.column on the right makes this a join condition.
            const ColumnRef join_rhs = parse_column_ref();
            (void)join_rhs;
            if (op != FilterOp::Eq) {
                throw ParseError("join conditions must use =", op_tok.pos);
            }
            return; // joins carry no selectivity information here
        }
        if (rhs.kind == Token::Kind::Number || rhs.kind == Token::Kind::String) {
            advance();
            result_.filters.push_back({lhs.table, lhs.column, op, rhs.text,
                                       rhs.kind == Token::Kind::String});
            return;
        }
        throw ParseError("expected constant or table.column, found '" + rhs.text +
                             "'",
                         rhs.pos);
    }

    std::vector<Token> tokens_;
    std::size_t cursor_ = 0;
    ParsedQuery result_;
    std::vector<std::pair<std::string, std::string>> aliases_; // alias -> table
};

} // namespace detail

inline ParsedQuery parse_query(std::string_view sql) {
    return detail::QueryParser(sql).parse();
}

// ---------------------------------------------------------------------------
// CSV tables

struct TableData {
    TableDef def;
    std::vector<std::vector<std::string>> rows; // row-major cell text
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            cells.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(trim(cell));
    return cells;
}

inline bool parse_int_cell(std::string_view text, long long& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && !text.empty();
}

inline bool parse_float_cell(std::string_view text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && !text.empty();
}

inline ColumnType infer_column_type(const std::vector<std::vector<std::string>>& rows,
                                    std::size_t col) {
    bool all_int = true;
    bool all_float = true;
    for (const auto& row : rows) {
        const std::string& cell = row[col];
        long long iv;
        double fv;
        if (!parse_int_cell(cell, iv)) all_int = false;
        if (!parse_float_cell(cell, fv)) all_float = false;
        if (!all_float) break;
    }
    if (rows.empty()) return ColumnType::Text;
    if (all_int) return ColumnType::Int;
    if (all_float) return ColumnType::Float;
    return ColumnType::Text;
}

} // namespace detail

inline TableData load_csv(const std::filesystem::path& path,
                          const std::string& table_name) {
    std::ifstream in(path);
    if (!in) throw WorkloadError("cannot open table file " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw WorkloadError("table file " + path.string() + " is empty");
    }
    TableData data;
    data.def.name = table_name;
    for (const std::string& name : detail::split_csv_line(line)) {
        if (name.empty()) {
            throw WorkloadError("table " + table_name + ": empty column name");
        }
        if (data.def.column_index(name) >= 0) {
            throw WorkloadError("table " + table_name + ": duplicate column '" +
                                name + "'");
        }
        data.def.columns.push_back({name, ColumnType::Text});
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != data.def.columns.size()) {
            throw WorkloadError("table " + table_name + " line " +
                                std::to_string(line_no) + ": expected " +
                                std::to_string(data.def.columns.size()) +
                                " cells, found " + std::to_string(cells.size()));
        }
        data.rows.push_back(std::move(cells));
    }
    for (std::size_t c = 0; c < data.def.columns.size(); ++c) {
        data.def.columns[c].type = detail::infer_column_type(data.rows, c);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Selectivity

namespace detail {

struct TypedConstant {
    ColumnType type;
    long long int_value = 0;
    double float_value = 0.0;
    std::string text_value;
};

inline TypedConstant type_constant(const TableData& table,
                                   const FilterPredicate& pred, int col) {
    const ColumnDef& def = table.def.columns[static_cast<std::size_t>(col)];
    TypedConstant out{def.type};
    switch (def.type) {
        case ColumnType::Int:
            if (pred.quoted || !parse_int_cell(pred.constant, out.int_value)) {
                throw WorkloadError("filter " + pred.table + "." + pred.column +
                                    ": constant '" + pred.constant +
                                    "' is not an int");
            }
            break;
        case ColumnType::Float:
            if (pred.quoted || !parse_float_cell(pred.constant, out.float_value)) {
                throw WorkloadError("filter " + pred.table + "." + pred.column +
                                    ": constant '" + pred.constant +
                                    "' is not a float");
            }
            break;
        case ColumnType::Text:
            out.text_value = pred.constant;
            break;
    }
    return out;
}

template <typename T>
inline bool compare(const T& lhs, FilterOp op, const T& rhs) {
    switch (op) {
        case FilterOp::Eq: return lhs == rhs;
        case FilterOp::Ne: return lhs != rhs;
        case FilterOp::Lt: return lhs < rhs;
        case FilterOp::Le: return lhs <= rhs;
        case FilterOp::Gt: return lhs > rhs;
        case FilterOp::Ge: return lhs >= rhs;
    }
    throw ConfigError("unknown filter op");
}

} // namespace detail

// Fraction of rows passing every predicate; an empty table scans to 1.0 so a
// filterless slot stays neutral (callers may warn).
inline double compute_selectivity(const TableData& table,
                                  const std::vector<FilterPredicate>& preds) {
    if (table.rows.empty()) return 1.0;
    struct Prepared {
        int col;
        FilterOp op;
        detail::TypedConstant constant;
    };
    std::vector<Prepared> prepared;
    for (const auto& pred : preds) {
        const int col = table.def.column_index(pred.column);
        if (col < 0) {
            throw WorkloadError("table " + table.def.name + " has no column '" +
                                pred.column + "'");
        }
        prepared.push_back({col, pred.op, detail::type_constant(table, pred, col)});
    }
    std::size_t passing = 0;
    for (const auto& row : table.rows) {
        bool pass = true;
        for (const auto& p : prepared) {
            const std::string& cell = row[static_cast<std::size_t>(p.col)];
            bool ok = false;
            switch (p.constant.type) {
                case ColumnType::Int: {
                    long long v = 0;
                    detail::parse_int_cell(cell, v);
                    ok = detail::compare(v, p.op, p.constant.int_value);
                    break;
                }
                case ColumnType::Float: {
                    double v = 0.0;
                    detail::parse_float_cell(cell, v);
                    ok = detail::compare(v, p.op, p.constant.float_value);
                    break;
                }
                case ColumnType::Text:
                    ok = detail::compare(cell, p.op, p.constant.text_value);
                    break;
            }
            if (!ok) {
                pass = false;
                break;
            }
        }
        if (pass) ++passing;
    }
    return static_cast<double>(passing) / static_cast<double>(table.rows.size());
}

// ---------------------------------------------------------------------------
// Canonical feature records

struct QueryFeature {
    std::string query_id;
    std::vector<vqc::TableSlot> slots; // sorted ascending by table_id
    std::uint64_t true_card = 1;
    std::optional<std::uint64_t> classical_card;

    bool operator==(const QueryFeature&) const = default;
};

struct Workload {
    int schema_table_count = 0;
    std::vector<QueryFeature> queries;

    bool operator==(const Workload&) const = default;
};

namespace detail {

inline void canonicalize_feature(QueryFeature& feature, int schema_table_count) {
    std::sort(feature.slots.begin(), feature.slots.end(),
              [](const vqc::TableSlot& a, const vqc::TableSlot& b) {
                  return a.table_id < b.table_id;
              });
    for (std::size_t i = 0; i < feature.slots.size(); ++i) {
        const auto& slot = feature.slots[i];
        if (slot.table_id < 1 || slot.table_id > schema_table_count) {
            throw WorkloadError("query '" + feature.query_id + "': table id " +
                                std::to_string(slot.table_id) +
                                " outside 1.." +
                                std::to_string(schema_table_count));
        }
        if (i > 0 && feature.slots[i - 1].table_id == slot.table_id) {
            throw WorkloadError("query '" + feature.query_id +
                                "': duplicate table id " +
                                std::to_string(slot.table_id));
        }
        if (slot.selectivity < 0.0 || slot.selectivity > 1.0) {
            throw WorkloadError("query '" + feature.query_id +
                                "': selectivity outside [0, 1]");
        }
    }
    if (feature.true_card < 1) {
        throw WorkloadError("query '" + feature.query_id +
                            "': true cardinality must be at least 1");
    }
    if (feature.classical_card && *feature.classical_card < 1) {
        throw WorkloadError("query '" + feature.query_id +
                            "': classical estimate must be at least 1");
    }
}

} // namespace detail

// Every query must fit the encoding register.
inline void check_encoding_fit(const Workload& workload, int n_qubits) {
    for (const auto& q : workload.queries) {
        if (q.slots.size() > static_cast<std::size_t>(n_qubits)) {
            throw WorkloadError("query '" + q.query_id + "': " +
                                std::to_string(q.slots.size()) +
                                " tables exceed " + std::to_string(n_qubits) +
                                " encoding slots");
        }
    }
}

// Correction mode trains against the classical estimate, so it must exist.
inline void require_classical(const Workload& workload) {
    for (const auto& q : workload.queries) {
        if (!q.classical_card) {
            throw WorkloadError("query '" + q.query_id +
                                "' has no classical estimate");
        }
    }
}

// ---------------------------------------------------------------------------
// Digested format: one JSON object per line, header first.

inline Workload load_digested(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw WorkloadError("cannot open workload file " + path.string());
    Workload out;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw WorkloadError("workload line " + std::to_string(line_no) +
                                ": " + e.what());
        }
        try {
            if (!have_header) {
                out.schema_table_count = record.at("schema_table_count").get<int>();
                if (out.schema_table_count < 1) {
                    throw WorkloadError("schema_table_count must be positive");
                }
                have_header = true;
                continue;
            }
            QueryFeature feature;
            feature.query_id = record.at("id").get<std::string>();
            for (const auto& pair : record.at("slots")) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw WorkloadError("workload line " + std::to_string(line_no) +
                                        ": slot must be a [table_id, selectivity] "
                                        "pair");
                }
                feature.slots.push_back(
                    {pair[0].get<int>(), pair[1].get<double>()});
            }
            feature.true_card = record.at("true_card").get<std::uint64_t>();
            if (record.contains("classical_card")) {
                feature.classical_card =
                    record.at("classical_card").get<std::uint64_t>();
            }
            detail::canonicalize_feature(feature, out.schema_table_count);
            out.queries.push_back(std::move(feature));
        } catch (const nlohmann::json::exception& e) {
            throw WorkloadError("workload line " + std::to_string(line_no) +
                                ": " + e.what());
        }
    }
    if (!have_header) {
        throw WorkloadError("workload file " + path.string() +
                            " has no header record");
    }
    return out;
}

inline void save_digested(const Workload& workload,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw WorkloadError("cannot write workload file " + path.string());
    nlohmann::ordered_json header;
    header["schema_table_count"] = workload.schema_table_count;
    out << header.dump() << '\n';
    for (const auto& q : workload.queries) {
        nlohmann::ordered_json record;
        record["id"] = q.query_id;
        auto slots = nlohmann::ordered_json::array();
        for (const auto& slot : q.slots) {
            slots.push_back({slot.table_id, slot.selectivity});
        }
        record["slots"] = std::move(slots);
        record["true_card"] = q.true_card;
        if (q.classical_card) record["classical_card"] = *q.classical_card;
        out << record.dump() << '\n';
    }
    if (!out) throw WorkloadError("failed writing workload file " + path.string());
}

// ---------------------------------------------------------------------------
// sql+data ingestion

struct IngestResult {
    Workload workload;
    SchemaCatalog catalog;
    std::vector<std::string> rejects;      // "<query_id>: reason" per failure
    std::vector<std::string> empty_tables; // scanned with zero data rows
};

namespace detail {

struct TruthRecord {
    std::uint64_t true_card = 1;
    std::optional<std::uint64_t> classical_card;
};

inline std::vector<std::optional<TruthRecord>> load_truths(
    const std::filesystem::path& path, std::size_t query_count) {
    std::ifstream in(path);
    if (!in) throw WorkloadError("cannot open truths file " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw WorkloadError("truths file " + path.string() + " is empty");
    }
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "query" || header[1] != "true_card" ||
        (header.size() == 3 && header[2] != "classical_card") ||
        header.size() > 3) {
        throw WorkloadError(
            "truths header must be query,true_card[,classical_card]");
    }
    std::vector<std::optional<TruthRecord>> out(query_count);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw WorkloadError("truths line " + std::to_string(line_no) +
                                ": wrong cell count");
        }
        long long query_no = 0;
        long long true_card = 0;
        if (!parse_int_cell(cells[0], query_no) || query_no < 1) {
            throw WorkloadError("truths line " + std::to_string(line_no) +
                                ": bad query number '" + cells[0] + "'");
        }
        if (static_cast<std::size_t>(query_no) > query_count) {
            throw WorkloadError("truths line " + std::to_string(line_no) +
                                ": query " + std::to_string(query_no) +
                                " does not exist");
        }
        if (!parse_int_cell(cells[1], true_card) || true_card < 1) {
            throw WorkloadError("truths line " + std::to_string(line_no) +
                                ": bad true cardinality '" + cells[1] + "'");
        }
        TruthRecord record;
        record.true_card = static_cast<std::uint64_t>(true_card);
        if (cells.size() == 3 && !cells[2].empty()) {
            long long classical = 0;
            if (!parse_int_cell(cells[2], classical) || classical < 1) {
                throw WorkloadError("truths line " + std::to_string(line_no) +
                                    ": bad classical estimate '" + cells[2] + "'");
            }
            record.classical_card = static_cast<std::uint64_t>(classical);
        }
        auto& slot = out[static_cast<std::size_t>(query_no - 1)];
        if (slot) {
            throw WorkloadError("truths line " + std::to_string(line_no) +
                                ": duplicate entry for query " +
                                std::to_string(query_no));
        }
        slot = record;
    }
    return out;
}

} // namespace detail

// Layout: <dir>/<table>.csv per table, queries.sql (one statement per line,
// '--' comments and blank lines skipped), truths.csv keyed by statement index.
inline IngestResult ingest_sql_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw WorkloadError("not a directory: " + dir.string());
    }

    IngestResult result;
    std::vector<std::string> table_names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        if (p.extension() != ".csv" || p.filename() == "truths.csv") continue;
        table_names.push_back(p.stem().string());
    }
    if (table_names.empty()) {
        throw WorkloadError("no table files in " + dir.string());
    }
    std::sort(table_names.begin(), table_names.end());

    std::vector<TableData> tables;
    for (std::size_t i = 0; i < table_names.size(); ++i) {
        TableData data = load_csv(dir / (table_names[i] + ".csv"), table_names[i]);
        data.def.id = static_cast<int>(i + 1);
        if (data.rows.empty()) result.empty_tables.push_back(table_names[i]);
        result.catalog.tables.push_back(data.def);
        tables.push_back(std::move(data));
    }

    std::ifstream queries_in(dir / "queries.sql");
    if (!queries_in) {
        throw WorkloadError("cannot open " + (dir / "queries.sql").string());
    }
    std::vector<std::string> statements;
    std::string line;
    while (std::getline(queries_in, line)) {
        const std::string text = detail::trim(line);
        if (text.empty() || text.starts_with("--")) continue;
        statements.push_back(text);
    }
    if (statements.empty()) throw WorkloadError("no queries");

    const auto truths = detail::load_truths(dir / "truths.csv", statements.size());

    result.workload.schema_table_count = result.catalog.table_count();
    for (std::size_t qi = 0; qi < statements.size(); ++qi) {
        const std::string query_id = "q" + std::to_string(qi + 1);
        try {
            const ParsedQuery parsed = parse_query(statements[qi]);
            QueryFeature feature;
            feature.query_id = query_id;
            for (const auto& table_name : parsed.tables) {
                const TableData* table = nullptr;
                for (const auto& t : tables) {
                    if (t.def.name == table_name) {
                        table = &t;
                        break;
                    }
                }
                if (!table) {
                    throw WorkloadError("unknown table '" + table_name + "'");
                }
                std::vector<FilterPredicate> preds;
                for (const auto& f : parsed.filters) {
                    if (f.table == table_name) preds.push_back(f);
                }
                feature.slots.push_back(
                    {table->def.id, compute_selectivity(*table, preds)});
            }
            if (!truths[qi]) {
                throw WorkloadError("no truths entry");
            }
            feature.true_card = truths[qi]->true_card;
            feature.classical_card = truths[qi]->classical_card;
            detail::canonicalize_feature(feature,
                                         result.workload.schema_table_count);
            result.workload.queries.push_back(std::move(feature));
        } catch (const Error& e) {
            result.rejects.push_back(query_id + ": " + e.what());
        }
    }
    return result;
}

// Parameters for a generated benchmark stand-in: random slot subsets with
// random selectivities and log-uniform true cardinalities. When `bias` is
// set, classical estimates are the truth shifted by bias +- jitter in log
// space, so a positive bias minus jitter forces strict overestimation.
struct SynthSpec {
    int queries = 50;
    int tables = 4;
    int max_slots = 0; // tables joined per query; 0 picks min(tables, 6)
    std::uint64_t seed = 1;
    std::uint64_t min_card = 100;
    std::uint64_t max_card = 1000000;
    std::optional<double> bias; // log-space offset of the classical estimate
    double jitter = 0.0;        // uniform log-space half-width around bias
};

inline Workload synth_workload(const SynthSpec& spec) {
    if (spec.queries < 1) {
        throw ConfigError("synthetic workload needs at least one query");
    }
    if (spec.tables < 1) {
        throw ConfigError("synthetic workload needs at least one table");
    }
    if (spec.min_card < 1 || spec.max_card < spec.min_card) {
        throw ConfigError("cardinality range [" + std::to_string(spec.min_card) +
                          ", " + std::to_string(spec.max_card) + "] is empty");
    }
    if (spec.jitter < 0.0) throw ConfigError("jitter must be non-negative");
    const int max_slots =
        spec.max_slots == 0 ? std::min(spec.tables, 6) : spec.max_slots;
    if (max_slots < 1 || max_slots > spec.tables) {
        throw ConfigError("queries cannot join " + std::to_string(max_slots) +
                          " of " + std::to_string(spec.tables) + " tables");
    }

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> slot_count(1, max_slots);
    std::uniform_real_distribution<double> selectivity(0.01, 1.0);
    std::uniform_real_distribution<double> log_card(
        std::log(static_cast<double>(spec.min_card)),
        std::log(static_cast<double>(spec.max_card)));

    Workload out;
    out.schema_table_count = spec.tables;
    std::vector<int> ids(static_cast<std::size_t>(spec.tables));
    std::iota(ids.begin(), ids.end(), 1);
    for (int q = 1; q <= spec.queries; ++q) {
        QueryFeature feature;
        feature.query_id = "q" + std::to_string(q);
        const int k = slot_count(rng);
        for (int j = 0; j < k; ++j) {
            std::uniform_int_distribution<int> pick(j, spec.tables - 1);
            std::swap(ids[static_cast<std::size_t>(j)],
                      ids[static_cast<std::size_t>(pick(rng))]);
        }
        std::sort(ids.begin(), ids.begin() + k);
        for (int j = 0; j < k; ++j) {
            feature.slots.push_back(
                {ids[static_cast<std::size_t>(j)], selectivity(rng)});
        }
        feature.true_card = std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(std::llround(std::exp(log_card(rng)))));
        if (spec.bias) {
            double shift = *spec.bias;
            if (spec.jitter > 0.0) {
                std::uniform_real_distribution<double> wobble(-spec.jitter,
                                                              spec.jitter);
                shift += wobble(rng);
            }
            feature.classical_card = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(std::llround(
                       static_cast<double>(feature.true_card) * std::exp(shift))));
        }
        out.queries.push_back(std::move(feature));
    }
    return out;
}

} // namespace qcard::workload
