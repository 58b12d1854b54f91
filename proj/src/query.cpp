#include "sigmacount/query.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <json.hpp>

#include "sigmacount/errors.hpp"

namespace sigmacount {

Query Query::make(const Schema& schema,
                  std::vector<std::pair<int, std::vector<std::uint16_t>>> constraints) {
    // Merge repeated columns by intersection, then canonicalize.
    std::vector<std::pair<int, std::vector<std::uint16_t>>> merged;
    for (auto& [col, codes] : constraints) {
        if (col < 0 || col >= schema.p()) {
            throw ValidationError("query: column index " + std::to_string(col) +
                                  " out of range");
        }
        const int domain = schema.columns[col].domain_size();
        std::sort(codes.begin(), codes.end());
        codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
        for (std::uint16_t code : codes) {
            if (static_cast<int>(code) >= domain) {
                throw ValidationError("query: code " + std::to_string(code) +
                                      " out of range for column '" +
                                      schema.columns[col].name + "'");
            }
        }
        auto it = std::find_if(merged.begin(), merged.end(),
                               [col = col](const auto& m) { return m.first == col; });
        if (it == merged.end()) {
            merged.emplace_back(col, std::move(codes));
        } else {
            std::vector<std::uint16_t> both;
            std::set_intersection(it->second.begin(), it->second.end(), codes.begin(),
                                  codes.end(), std::back_inserter(both));
            it->second = std::move(both);
        }
    }

    Query q;
    for (auto& [col, codes] : merged) {
        if (codes.empty()) {
            throw ValidationError("query: constraints on column '" +
                                  schema.columns[col].name +
                                  "' have an empty intersection");
        }
        // A full-domain constraint restricts nothing; dropping it keeps the
        // constrained set equal to the active set.
        if (static_cast<int>(codes.size()) == schema.columns[col].domain_size()) continue;
        q.constraints_.emplace_back(col, std::move(codes));
    }
    std::sort(q.constraints_.begin(), q.constraints_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return q;
}

std::vector<int> Query::active_set() const {
    std::vector<int> out;
    out.reserve(constraints_.size());
    for (const auto& c : constraints_) out.push_back(c.first);
    return out;
}

std::vector<bool> Query::embedding(const Schema& schema) const {
    std::vector<bool> out(schema.p(), false);
    for (const auto& c : constraints_) {
        if (c.first >= schema.p()) {
            throw ValidationError("query: constraint column " + std::to_string(c.first) +
                                  " is out of range for the given schema");
        }
        out[c.first] = true;
    }
    return out;
}

const std::vector<std::uint16_t>* Query::allowed(int col) const {
    for (const auto& c : constraints_) {
        if (c.first == col) return &c.second;
        if (c.first > col) break;
    }
    return nullptr;
}

bool Query::row_matches(const std::uint16_t* row) const {
    for (const auto& c : constraints_) {
        if (!std::binary_search(c.second.begin(), c.second.end(), row[c.first])) {
            return false;
        }
    }
    return true;
}

std::string Query::key() const {
    std::ostringstream out;
    for (const auto& c : constraints_) {
        out << c.first << ':';
        for (std::uint16_t code : c.second) out << code << ',';
        out << ';';
    }
    return out.str();
}

namespace {

void skip_ws(const std::string& s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

std::string read_token(const std::string& s, std::size_t& i) {
    skip_ws(s, i);
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) &&
           s[i] != '{' && s[i] != '}' && s[i] != ',') {
        ++i;
    }
    return s.substr(start, i - start);
}

bool keyword_is(const std::string& tok, const std::string& kw) {
    if (tok.size() != kw.size()) return false;
    for (std::size_t i = 0; i < tok.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(tok[i])) != kw[i]) return false;
    }
    return true;
}

}  // namespace

Query parse_query(const std::string& text, const Schema& schema) {
    std::size_t i = 0;
    skip_ws(text, i);
    if (i >= text.size()) return Query();
    if (text[i] == '*') {
        ++i;
        skip_ws(text, i);
        if (i < text.size()) {
            throw ParseError("query: unexpected text after '*': '" + text.substr(i) + "'");
        }
        return Query();
    }

    std::vector<std::pair<int, std::vector<std::uint16_t>>> constraints;
    while (true) {
        const std::string col_name = read_token(text, i);
        if (col_name.empty()) throw ParseError("query: expected a column name");
        const int col = schema.index_of(col_name);
        if (col < 0) throw ParseError("query: unknown column '" + col_name + "'");

        const std::string in_kw = read_token(text, i);
        if (!keyword_is(in_kw, "IN")) {
            throw ParseError("query: expected IN after column '" + col_name +
                             "', found '" + in_kw + "'");
        }
        skip_ws(text, i);
        if (i >= text.size() || text[i] != '{') {
            throw ParseError("query: expected { after IN for column '" + col_name + "'");
        }
        ++i;

        std::vector<std::uint16_t> codes;
        while (true) {
            const std::string label = read_token(text, i);
            if (label.empty()) {
                throw ParseError("query: empty label in the set for column '" + col_name +
                                 "'");
            }
            const int code = schema.columns[col].code_of(label);
            if (code < 0) {
                throw ParseError("query: label '" + label +
                                 "' is not in the domain of column '" + col_name + "'");
            }
            codes.push_back(static_cast<std::uint16_t>(code));
            skip_ws(text, i);
            if (i < text.size() && text[i] == ',') {
                ++i;
                continue;
            }
            if (i < text.size() && text[i] == '}') {
                ++i;
                break;
            }
            throw ParseError("query: expected , or } in the set for column '" + col_name +
                             "'");
        }
        constraints.emplace_back(col, std::move(codes));

        skip_ws(text, i);
        if (i >= text.size()) break;
        const std::string and_kw = read_token(text, i);
        if (!keyword_is(and_kw, "AND")) {
            throw ParseError("query: expected AND between constraints, found '" + and_kw +
                             "'");
        }
    }
    return Query::make(schema, std::move(constraints));
}

std::string render_query(const Query& q, const Schema& schema) {
    if (q.unconstrained()) return "*";
    std::ostringstream out;
    bool first = true;
    for (const auto& [col, codes] : q.constraints()) {
        if (!first) out << " AND ";
        first = false;
        out << schema.columns[col].name << " IN {";
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (i) out << ",";
            out << schema.columns[col].labels[codes[i]];
        }
        out << "}";
    }
    return out.str();
}

Query query_from_json(const std::string& json_text, const Schema& schema) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("query json: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("query json: top level must be an object");
    std::vector<std::pair<int, std::vector<std::uint16_t>>> constraints;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const int col = schema.index_of(it.key());
        if (col < 0) throw ParseError("query json: unknown column '" + it.key() + "'");
        if (!it.value().is_array()) {
            throw ParseError("query json: value of '" + it.key() + "' must be an array");
        }
        std::vector<std::uint16_t> codes;
        for (const auto& v : it.value()) {
            if (!v.is_string()) {
                throw ParseError("query json: labels of '" + it.key() +
                                 "' must be strings");
            }
            const int code = schema.columns[col].code_of(v.get<std::string>());
            if (code < 0) {
                throw ParseError("query json: label '" + v.get<std::string>() +
                                 "' is not in the domain of column '" + it.key() + "'");
            }
            codes.push_back(static_cast<std::uint16_t>(code));
        }
        constraints.emplace_back(col, std::move(codes));
    }
    return Query::make(schema, std::move(constraints));
}

std::string query_to_json(const Query& q, const Schema& schema) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [col, codes] : q.constraints()) {
        nlohmann::ordered_json labels = nlohmann::ordered_json::array();
        for (std::uint16_t code : codes) labels.push_back(schema.columns[col].labels[code]);
        j[schema.columns[col].name] = std::move(labels);
    }
    return j.dump();
}

bool is_subset(const Query& q1, const Query& q2) {
    // Rows of q1 are rows of q2 exactly when, per column q2 restricts, q1
    // restricts to a subset. Columns q2 leaves free never disqualify.
    for (const auto& [col, codes2] : q2.constraints()) {
        const std::vector<std::uint16_t>* codes1 = q1.allowed(col);
        if (!codes1) return false;
        if (!std::includes(codes2.begin(), codes2.end(), codes1->begin(), codes1->end())) {
            return false;
        }
    }
    return true;
}

std::int64_t exact_count(const Database& db, const Query& q) {
    std::int64_t n = 0;
    for (std::int64_t r = 0; r < db.n(); ++r) {
        if (q.row_matches(db.row_ptr(r))) ++n;
    }
    return n;
}

}  // namespace sigmacount
