#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace sigmacount {

// One categorical column: a name and a finite, ordered label domain.
struct Column {
    std::string name;
    std::vector<std::string> labels;

    // Code of a label, or -1 if the label is not in the domain.
    int code_of(const std::string& label) const;
    int domain_size() const { return static_cast<int>(labels.size()); }
    bool is_binary01() const {
        return labels.size() == 2 && labels[0] == "0" && labels[1] == "1";
    }
};

struct Schema {
    std::vector<Column> columns;

    int p() const { return static_cast<int>(columns.size()); }
    // Index of a column name, or -1.
    int index_of(const std::string& name) const;
    // Throws ValidationError on duplicate or empty names, or empty domains.
    void validate() const;

    bool operator==(const Schema& other) const;
};

using SchemaPtr = std::shared_ptr<const Schema>;

// Sidecar JSON: {"col": ["label", ...], ...}. Column order in the file wins.
SchemaPtr schema_from_json(const std::string& json_text);
std::string schema_to_json(const Schema& schema);

// Immutable snapshot of a table. Cells hold label codes, row-major.
// Mutation goes through apply_delta, which returns a new snapshot with a
// strictly larger version; readers of the old snapshot are unaffected.
class Database {
  public:
    Database() = default;
    Database(SchemaPtr schema, std::vector<std::uint16_t> cells);

    const Schema& schema() const { return *schema_; }
    SchemaPtr schema_ptr() const { return schema_; }
    std::int64_t n() const { return n_; }
    int p() const { return schema_ ? schema_->p() : 0; }
    std::int64_t version() const { return version_; }

    std::uint16_t cell(std::int64_t row, int col) const {
        return (*cells_)[static_cast<std::size_t>(row) * p() + col];
    }
    const std::uint16_t* row_ptr(std::int64_t row) const {
        return cells_->data() + static_cast<std::size_t>(row) * p();
    }
    const std::vector<std::uint16_t>& cells() const { return *cells_; }

    Database with_cells(std::vector<std::uint16_t> cells) const;

  private:
    SchemaPtr schema_;
    std::shared_ptr<const std::vector<std::uint16_t>> cells_;
    std::int64_t n_ = 0;
    std::int64_t version_ = 1;
};

// Single timestamped row insertion or deletion.
struct RowDelta {
    enum class Kind { Insert, Delete };
    Kind kind = Kind::Insert;
    std::vector<std::string> row;  // one label per column
    std::int64_t time_step = 0;
};

// CSV loader: comma separator, first line is the header, UTF-8 passthrough,
// no quoting. With no explicit schema, domains are the distinct observed
// values per column, sorted lexicographically. With an explicit schema,
// header names and every cell are validated against it; errors carry the
// 1-based line number and the offending token.
Database load_csv(const std::string& path, SchemaPtr schema = nullptr);
Database load_csv_text(const std::string& text, SchemaPtr schema = nullptr);
std::string write_csv(const Database& db);

// One-hot encoding. A column whose domain is exactly {"0","1"} passes
// through unchanged; every other column with k labels becomes k binary
// columns named "col=label", and each row sets exactly one of them to "1".
Database encode_binary(const Database& db);

// Insert appends the row; delete removes the first row equal to the given
// one and throws ValidationError if no row matches. Version increases by
// one either way.
Database apply_delta(const Database& db, const RowDelta& delta);

}  // namespace sigmacount
