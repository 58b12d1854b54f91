#include "sigmacount/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sigmacount/errors.hpp"

namespace sigmacount {

int Column::code_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    return -1;
}

int Schema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

void Schema::validate() const {
    std::set<std::string> seen;
    for (const auto& col : columns) {
        if (col.name.empty()) throw ValidationError("schema: empty column name");
        if (!seen.insert(col.name).second) {
            throw ValidationError("schema: duplicate column name '" + col.name + "'");
        }
        if (col.labels.empty()) {
            throw ValidationError("schema: column '" + col.name + "' has an empty domain");
        }
        std::set<std::string> labels(col.labels.begin(), col.labels.end());
        if (labels.size() != col.labels.size()) {
            throw ValidationError("schema: column '" + col.name + "' has duplicate labels");
        }
    }
}

bool Schema::operator==(const Schema& other) const {
    if (columns.size() != other.columns.size()) return false;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name != other.columns[i].name) return false;
        if (columns[i].labels != other.columns[i].labels) return false;
    }
    return true;
}

SchemaPtr schema_from_json(const std::string& json_text) {
    // ordered_json keeps object keys in file order; column order is part of
    // the schema identity, so a plain parse would silently alphabetize it.
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("schema json: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("schema json: top level must be an object");
    auto schema = std::make_shared<Schema>();
    for (auto it = j.begin(); it != j.end(); ++it) {
        Column col;
        col.name = it.key();
        if (!it.value().is_array()) {
            throw ParseError("schema json: domain of '" + col.name + "' must be an array");
        }
        for (const auto& v : it.value()) {
            if (!v.is_string()) {
                throw ParseError("schema json: labels of '" + col.name + "' must be strings");
            }
            col.labels.push_back(v.get<std::string>());
        }
        schema->columns.push_back(std::move(col));
    }
    schema->validate();
    return schema;
}

std::string schema_to_json(const Schema& schema) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& col : schema.columns) j[col.name] = col.labels;
    return j.dump();
}

Database::Database(SchemaPtr schema, std::vector<std::uint16_t> cells)
    : schema_(std::move(schema)),
      cells_(std::make_shared<const std::vector<std::uint16_t>>(std::move(cells))) {
    schema_->validate();
    const int p = schema_->p();
    if (p == 0) throw ValidationError("database: schema has no columns");
    if (cells_->size() % p != 0) {
        throw ValidationError("database: cell count is not a multiple of the column count");
    }
    n_ = static_cast<std::int64_t>(cells_->size()) / p;
    for (std::size_t i = 0; i < cells_->size(); ++i) {
        const int domain = schema_->columns[i % p].domain_size();
        if (static_cast<int>((*cells_)[i]) >= domain) {
            throw ValidationError("database: cell code " + std::to_string((*cells_)[i]) +
                                  " is outside the domain of column '" +
                                  schema_->columns[i % p].name + "'");
        }
    }
}

Database Database::with_cells(std::vector<std::uint16_t> cells) const {
    Database out(schema_, std::move(cells));
    out.version_ = version_ + 1;
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

Database load_csv_stream(std::istream& in, SchemaPtr schema) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("csv: missing header line");
    const std::vector<std::string> header = split_line(line);

    if (schema) {
        if (static_cast<int>(header.size()) != schema->p()) {
            throw ParseError("csv line 1: header has " + std::to_string(header.size()) +
                             " columns, schema expects " + std::to_string(schema->p()));
        }
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] != schema->columns[i].name) {
                throw ParseError("csv line 1: header column '" + header[i] +
                                 "' does not match schema column '" +
                                 schema->columns[i].name + "'");
            }
        }
        std::vector<std::uint16_t> cells;
        std::int64_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() && in.eof()) break;
            const auto fields = split_line(line);
            if (fields.size() != header.size()) {
                throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()));
            }
            for (std::size_t c = 0; c < fields.size(); ++c) {
                const int code = schema->columns[c].code_of(fields[c]);
                if (code < 0) {
                    throw ValidationError("csv line " + std::to_string(line_no) + ": label '" +
                                          fields[c] + "' is not in the domain of column '" +
                                          schema->columns[c].name + "'");
                }
                cells.push_back(static_cast<std::uint16_t>(code));
            }
        }
        return Database(std::move(schema), std::move(cells));
    }

    // No schema given: two passes over buffered rows, domains are the
    // distinct observed values sorted lexicographically.
    std::vector<std::vector<std::string>> rows;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && in.eof()) break;
        auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw ParseError("csv line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        }
        rows.push_back(std::move(fields));
    }

    auto inferred = std::make_shared<Schema>();
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::set<std::string> domain;
        for (const auto& r : rows) domain.insert(r[c]);
        if (domain.empty()) domain.insert("0");  // empty table still needs a domain
        Column col;
        col.name = header[c];
        col.labels.assign(domain.begin(), domain.end());
        inferred->columns.push_back(std::move(col));
    }
    inferred->validate();

    std::vector<std::uint16_t> cells;
    cells.reserve(rows.size() * header.size());
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            cells.push_back(static_cast<std::uint16_t>(inferred->columns[c].code_of(r[c])));
        }
    }
    return Database(std::move(inferred), std::move(cells));
}

}  // namespace

Database load_csv(const std::string& path, SchemaPtr schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("csv: cannot open '" + path + "'");
    return load_csv_stream(in, std::move(schema));
}

Database load_csv_text(const std::string& text, SchemaPtr schema) {
    std::istringstream in(text);
    return load_csv_stream(in, std::move(schema));
}

std::string write_csv(const Database& db) {
    std::ostringstream out;
    const Schema& s = db.schema();
    for (int c = 0; c < s.p(); ++c) {
        if (c) out << ',';
        out << s.columns[c].name;
    }
    out << '\n';
    for (std::int64_t r = 0; r < db.n(); ++r) {
        const std::uint16_t* row = db.row_ptr(r);
        for (int c = 0; c < s.p(); ++c) {
            if (c) out << ',';
            out << s.columns[c].labels[row[c]];
        }
        out << '\n';
    }
    return out.str();
}

Database encode_binary(const Database& db) {
    const Schema& s = db.schema();
    bool all_binary = true;
    for (const auto& col : s.columns) {
        if (!col.is_binary01()) {
            all_binary = false;
            break;
        }
    }
    if (all_binary) return db;  // pass-through, same snapshot

    auto out_schema = std::make_shared<Schema>();
    // For each source column: either the passthrough target index, or the
    // first of its k one-hot target columns.
    struct Map {
        bool passthrough;
        int first_target;
    };
    std::vector<Map> maps;
    for (const auto& col : s.columns) {
        Map m{col.is_binary01(), static_cast<int>(out_schema->columns.size())};
        if (m.passthrough) {
            out_schema->columns.push_back(col);
        } else {
            for (const auto& label : col.labels) {
                Column derived;
                derived.name = col.name + "=" + label;
                derived.labels = {"0", "1"};
                out_schema->columns.push_back(std::move(derived));
            }
        }
        maps.push_back(m);
    }
    out_schema->validate();

    const int out_p = out_schema->p();
    std::vector<std::uint16_t> cells(static_cast<std::size_t>(db.n()) * out_p, 0);
    for (std::int64_t r = 0; r < db.n(); ++r) {
        const std::uint16_t* row = db.row_ptr(r);
        std::uint16_t* out_row = cells.data() + static_cast<std::size_t>(r) * out_p;
        for (int c = 0; c < s.p(); ++c) {
            if (maps[c].passthrough) {
                out_row[maps[c].first_target] = row[c];
            } else {
                out_row[maps[c].first_target + row[c]] = 1;
            }
        }
    }
    return Database(std::move(out_schema), std::move(cells));
}

Database apply_delta(const Database& db, const RowDelta& delta) {
    const Schema& s = db.schema();
    if (static_cast<int>(delta.row.size()) != s.p()) {
        throw ValidationError("delta: row has " + std::to_string(delta.row.size()) +
                              " fields, schema expects " + std::to_string(s.p()));
    }
    std::vector<std::uint16_t> coded(s.p());
    for (int c = 0; c < s.p(); ++c) {
        const int code = s.columns[c].code_of(delta.row[c]);
        if (code < 0) {
            throw ValidationError("delta: label '" + delta.row[c] +
                                  "' is not in the domain of column '" + s.columns[c].name +
                                  "'");
        }
        coded[c] = static_cast<std::uint16_t>(code);
    }

    std::vector<std::uint16_t> cells = db.cells();
    if (delta.kind == RowDelta::Kind::Insert) {
        cells.insert(cells.end(), coded.begin(), coded.end());
        return db.with_cells(std::move(cells));
    }

    for (std::int64_t r = 0; r < db.n(); ++r) {
        if (std::equal(coded.begin(), coded.end(), db.row_ptr(r))) {
            cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(r) * s.p(),
                        cells.begin() + static_cast<std::ptrdiff_t>(r + 1) * s.p());
            return db.with_cells(std::move(cells));
        }
    }
    throw ValidationError("delta: no row matches the delete target at time step " +
                          std::to_string(delta.time_step));
}

}  // namespace sigmacount
