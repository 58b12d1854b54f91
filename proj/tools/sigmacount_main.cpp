// Command-line front end: table ingestion, one-shot private queries, the
// NDJSON serve loop, algebra materialization, the two reproduction studies,
// and offline budget accounting over persisted algebras.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigmacount/engine.hpp"
#include "sigmacount/errors.hpp"
#include "sigmacount/harness.hpp"
#include "sigmacount/kernels.hpp"
#include "sigmacount/mechanism.hpp"
#include "sigmacount/metrics.hpp"
#include "sigmacount/query.hpp"
#include "sigmacount/random.hpp"
#include "sigmacount/schema.hpp"
#include "sigmacount/sigma.hpp"

namespace {

using namespace sigmacount;

struct GlobalOpts {
    std::uint64_t seed = 0;
    double budget = 1.0;
    double eps = 0.01;
    int threshold_u = 2;
    bool round = false;
};

SchemaPtr load_schema_opt(const std::string& path) {
    if (path.empty()) return nullptr;
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open schema file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return schema_from_json(ss.str());
}

Database load_table(const std::string& path, const std::string& schema_path) {
    return load_csv(path, load_schema_opt(schema_path));
}

std::unique_ptr<Engine> make_engine(Database db, const GlobalOpts& g,
                                    const std::vector<std::string>& algebra_files) {
    EngineConfig cfg;
    cfg.epsilon_budget = g.budget;
    cfg.epsilon_per_query = g.eps;
    cfg.seed = g.seed;
    cfg.round_output = g.round;
    cfg.threshold_u = g.threshold_u;
    SchemaPtr schema = db.schema_ptr();
    auto engine = std::make_unique<Engine>(std::move(db), cfg);
    for (const auto& file : algebra_files) {
        std::ifstream in(file);
        if (!in) throw ParseError("cannot open algebra file '" + file + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        engine->add_algebra(std::make_shared<const SigmaAlgebra>(
            sigma_from_json(ss.str(), schema)));
    }
    return engine;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << text;
}

// Studies emit both formats beside each other when --out is given.
void emit_report(const metrics::Report& rep, const std::string& out_base) {
    if (out_base.empty()) {
        std::cout << rep.to_csv();
        return;
    }
    write_text(out_base + ".csv", rep.to_csv());
    write_text(out_base + ".json", rep.to_json());
    std::cout << "wrote " << out_base << ".csv and " << out_base << ".json\n";
}

std::vector<Query> read_query_file(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open query file '" + path + "'");
    std::vector<Query> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        }
        if (blank) continue;
        out.push_back(parse_query(line, schema));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sigma-counting private query engine"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master RNG seed");
    app.add_option("--budget", g.budget, "total privacy budget epsilon");
    app.add_option("--eps", g.eps, "per-query / per-atom epsilon");
    app.add_option("--threshold-u", g.threshold_u, "max active-set size for clustering");
    app.add_flag("--round", g.round, "round released values to integers at output");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "load a CSV table, optionally encode, write it back");
    std::string in_csv, in_schema, out_path, schema_out;
    int census_vars = 0;
    bool binary = false;
    ingest->add_option("input", in_csv, "input CSV path")->required();
    ingest->add_option("--schema", in_schema, "sidecar schema JSON (inferred when absent)");
    ingest->add_option("--out", out_path, "output CSV path")->required();
    ingest->add_option("--schema-out", schema_out, "write the resulting schema JSON here");
    ingest->add_flag("--binary", binary, "one-hot encode categorical columns to 0/1");
    ingest->add_option("--census", census_vars,
                       "treat input as the raw 15-field census export and select this many variables (5 or 9)");

    // query
    auto* queryc = app.add_subcommand("query", "answer one query privately");
    std::string q_csv, q_schema, q_text;
    std::vector<std::string> q_algebras;
    queryc->add_option("table", q_csv, "table CSV path")->required();
    queryc->add_option("--schema", q_schema, "sidecar schema JSON");
    queryc->add_option("-q,--query", q_text, "query text, e.g. \"age IN {60s} AND state IN {CA}\"")->required();
    queryc->add_option("--algebra", q_algebras, "persisted algebra JSON to route covered queries through");

    // serve
    auto* serve = app.add_subcommand("serve", "newline-delimited JSON request loop on stdio");
    std::string s_csv, s_schema;
    std::vector<std::string> s_algebras;
    serve->add_option("table", s_csv, "table CSV path")->required();
    serve->add_option("--schema", s_schema, "sidecar schema JSON");
    serve->add_option("--algebra", s_algebras, "persisted algebra JSON to preload");

    // materialize
    auto* mat = app.add_subcommand("materialize", "induce an algebra from a query file and perturb its atoms");
    std::string m_csv, m_schema, m_queries, m_out;
    std::uint64_t m_cell_cap = kDefaultCellCap;
    mat->add_option("table", m_csv, "table CSV path")->required();
    mat->add_option("--schema", m_schema, "sidecar schema JSON");
    mat->add_option("--queries", m_queries, "file with one query text per line")->required();
    mat->add_option("--out", m_out, "write the algebra JSON here")->required();
    mat->add_option("--cell-cap", m_cell_cap, "refuse algebras with more product cells than this");

    // study
    auto* study = app.add_subcommand("study", "reproduction studies");
    study->require_subcommand(1);

    auto* mono = study->add_subcommand("monotonicity", "nested-pair violation rates");
    harness::MonotonicityConfig mcfg;
    std::string mono_out, mono_real;
    bool mono_no_sigma = false;
    mono->add_option("--widths", mcfg.widths, "simulated column widths");
    mono->add_option("--budgets", mcfg.budgets, "total budgets");
    mono->add_option("--rows", mcfg.rows, "simulated row count");
    mono->add_option("--pairs", mcfg.pairs, "nested pairs per cell");
    mono->add_flag("--no-sigma", mono_no_sigma, "skip the per-atom arm");
    mono->add_option("--real", mono_real, "pre-encoded binary CSV to use instead of simulation");
    mono->add_option("--out", mono_out, "output basename (.csv and .json)");

    auto* util = study->add_subcommand("utility", "relative utility across u and workload size");
    harness::UtilityConfig ucfg;
    std::string util_out, util_real;
    util->add_option("--widths", ucfg.widths, "simulated column widths");
    util->add_option("--thresholds", ucfg.thresholds, "clustering thresholds u");
    util->add_option("--queries", ucfg.query_counts, "workload sizes");
    util->add_option("--rows", ucfg.rows, "simulated row count");
    util->add_option("--real", util_real, "pre-encoded binary CSV to use instead of simulation");
    util->add_option("--out", util_out, "output basename (.csv and .json)");

    // budget
    auto* budget = app.add_subcommand("budget", "budget accounting");
    auto* status = budget->add_subcommand("status", "account persisted algebras against the budget");
    std::vector<std::string> b_algebras;
    status->add_option("--algebra", b_algebras, "persisted algebra JSON files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            Database db = census_vars != 0
                              ? harness::load_census_binary(in_csv, census_vars)
                              : load_table(in_csv, in_schema);
            if (binary && census_vars == 0) db = encode_binary(db);
            write_text(out_path, write_csv(db));
            if (!schema_out.empty()) write_text(schema_out, schema_to_json(db.schema()));
            nlohmann::ordered_json summary;
            summary["rows"] = db.n();
            summary["columns"] = db.p();
            summary["out"] = out_path;
            std::cout << summary.dump() << "\n";
        } else if (*queryc) {
            Database db = load_table(q_csv, q_schema);
            const Query q = parse_query(q_text, db.schema());
            const auto engine = make_engine(std::move(db), g, q_algebras);
            const HandleResult r = engine->handle(q);
            nlohmann::ordered_json resp;
            resp["value"] = g.round ? std::nearbyint(r.count.value) : r.count.value;
            resp["charged"] = r.count.epsilon_charged;
            resp["path"] = r.path == ResponsePath::Sigma
                               ? "sigma"
                               : (r.path == ResponsePath::Benchmark ? "benchmark" : "refused");
            resp["remaining_budget"] = r.remaining_budget;
            std::cout << resp.dump() << "\n";
        } else if (*serve) {
            const auto engine = make_engine(load_table(s_csv, s_schema), g, s_algebras);
            serve_stdio(*engine, std::cin, std::cout);
        } else if (*mat) {
            Database db = load_table(m_csv, m_schema);
            const std::vector<Query> queries = read_query_file(m_queries, db.schema());
            SigmaAlgebra sa = induce(queries, db.schema_ptr(), m_cell_cap);
            PrivacyAccountant acct(g.budget);
            LaplaceSampler sampler(g.seed);
            sa = perturb_atoms(std::move(sa), db, g.eps, acct, sampler);
            write_text(m_out, sigma_to_json(sa));
            nlohmann::ordered_json summary;
            summary["omega"] = sa.omega_size();
            summary["cells"] = sa.n_cells;
            summary["eps_atom"] = sa.eps_atom;
            summary["charged"] = acct.spent();
            summary["remaining_budget"] = acct.remaining();
            summary["out"] = m_out;
            std::cout << summary.dump() << "\n";
        } else if (*mono) {
            if (app.count("--seed") > 0) mcfg.seed = g.seed;
            mcfg.include_sigma = !mono_no_sigma;
            if (!mono_real.empty()) mcfg.real_csv = mono_real;
            emit_report(harness::run_monotonicity_study(mcfg), mono_out);
        } else if (*util) {
            if (app.count("--seed") > 0) ucfg.seed = g.seed;
            ucfg.budget = g.budget;
            if (!util_real.empty()) ucfg.real_csv = util_real;
            emit_report(harness::run_utility_study(ucfg), util_out);
        } else if (*status) {
            double spent = 0.0;
            nlohmann::ordered_json items = nlohmann::ordered_json::array();
            for (const auto& file : b_algebras) {
                std::ifstream in(file);
                if (!in) throw ParseError("cannot open algebra file '" + file + "'");
                std::stringstream ss;
                ss << in.rdbuf();
                const SigmaAlgebra sa = sigma_from_json(ss.str(), nullptr);
                const double charged =
                    sa.eps_atom * static_cast<double>(sa.omega_size());
                spent += charged;
                nlohmann::ordered_json item;
                item["file"] = file;
                item["omega"] = sa.omega_size();
                item["eps_atom"] = sa.eps_atom;
                item["charged"] = charged;
                items.push_back(std::move(item));
            }
            nlohmann::ordered_json out;
            out["budget"] = g.budget;
            out["algebras"] = std::move(items);
            out["spent"] = spent;
            out["remaining"] = std::max(0.0, g.budget - spent);
            out["fallback_eps"] = g.eps;
            out["fallback_capacity"] =
                static_cast<std::int64_t>(std::floor(std::max(0.0, g.budget - spent) / g.eps));
            std::cout << out.dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
