#include "sigmacount/engine.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "sigmacount/errors.hpp"

namespace sigmacount {

Engine::Engine(Database db, EngineConfig cfg)
    : db_(std::move(db)),
      cfg_(cfg),
      acct_(cfg.epsilon_budget),
      fallback_(LaplaceSampler(cfg.seed).fork(1)),
      materialize_(LaplaceSampler(cfg.seed).fork(2)) {
    if (!(cfg_.epsilon_per_query > 0.0)) {
        throw ValidationError("engine: epsilon_per_query must be positive");
    }
}

void Engine::add_algebra(SigmaAlgebraPtr sa) {
    if (!sa || !sa->perturbed) {
        throw ValidationError("engine: only perturbed algebras can serve queries");
    }
    if (!(*sa->schema == db_.schema())) {
        throw ValidationError("engine: algebra schema does not match the table");
    }
    algebras_.push_back(std::move(sa));
}

void Engine::remember(const Query& q) {
    history_.push_back(q);
    if (history_.size() > kHistoryCap) history_.pop_front();
}

HandleResult Engine::handle(const Query& q) {
    HandleResult out;
    for (const auto& sa : algebras_) {
        try {
            out.count = respond(*sa, q, scratch_);
            out.path = ResponsePath::Sigma;
            ++stats_.covered;
            remember(q);
            out.remaining_budget = acct_.remaining();
            return out;
        } catch (const NotCoveredError&) {
            // next algebra
        }
    }
    try {
        out.count = benchmark_respond(db_, q, cfg_.epsilon_per_query, acct_, fallback_);
        out.path = ResponsePath::Benchmark;
        ++stats_.uncovered;
        remember(q);
    } catch (const BudgetExhaustedError&) {
        out.count = NoisyCount{};
        out.path = ResponsePath::Refused;
        ++stats_.rejected;
    }
    out.remaining_budget = acct_.remaining();
    return out;
}

RefreshResult Engine::refresh(int threshold_u) {
    RefreshResult out;
    // Queries the current algebras already cover need no new structure;
    // only the rest of the history is planned over.
    std::vector<Query> pending;
    for (const Query& q : history_) {
        bool covered = false;
        for (const auto& sa : algebras_) {
            try {
                cover(*sa, q, scratch_);
                covered = true;
                break;
            } catch (const NotCoveredError&) {
            }
        }
        if (!covered) pending.push_back(q);
    }
    if (pending.empty()) return out;

    ClusterPlan p = plan(pending, db_.schema(), threshold_u);
    if (p.clusters.empty()) return out;

    // Fresh stream per refresh epoch; the per-cluster forks inside
    // materialize never collide with an earlier epoch's.
    LaplaceSampler epoch = materialize_.fork(++materialize_epoch_);
    std::vector<SigmaAlgebra> made;
    try {
        made = materialize(p, db_, cfg_.epsilon_per_query, acct_, epoch, cfg_.cell_cap);
    } catch (const BudgetExhaustedError&) {
        out.budget_refused = true;
        return out;
    }
    for (auto& sa : made) {
        out.new_atoms += sa.omega_size();
        algebras_.push_back(std::make_shared<const SigmaAlgebra>(std::move(sa)));
        ++out.new_algebras;
    }
    out.charged = cfg_.epsilon_per_query * static_cast<double>(out.new_atoms);
    return out;
}

std::int64_t Engine::open_session(const Query& q, double eps, double rho,
                                  std::int64_t t_max) {
    EvolvingSession s =
        sigmacount::open_session(db_, q, eps, rho, t_max, acct_, fallback_);
    const std::int64_t id = next_session_++;
    sessions_.emplace(id, std::move(s));
    return id;
}

NoisyCount Engine::session_respond(std::int64_t session_id) {
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
        throw ValidationError("engine: unknown session " + std::to_string(session_id));
    }
    return respond_t(it->second, db_);
}

void Engine::apply_delta(const RowDelta& delta) {
    db_ = sigmacount::apply_delta(db_, delta);
}

bool Engine::online_advantage_condition(std::uint64_t q_count,
                                        const std::vector<std::int64_t>& omega_sizes,
                                        double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("advantage: p must lie in [0, 1]");
    }
    if (p == 1.0) return false;  // no covered traffic left to amortize over
    std::uint64_t total = 0;
    std::uint64_t biggest = 0;
    for (std::int64_t w : omega_sizes) {
        if (w < 0) throw ValidationError("advantage: negative atom count");
        total += static_cast<std::uint64_t>(w);
        biggest = std::max(biggest, static_cast<std::uint64_t>(w));
    }
    return static_cast<double>(q_count) * (1.0 - p) >
           static_cast<double>(total) * std::sqrt(static_cast<double>(biggest));
}

namespace {

const char* path_name(ResponsePath p) {
    switch (p) {
        case ResponsePath::Sigma:
            return "sigma";
        case ResponsePath::Benchmark:
            return "benchmark";
        default:
            return "refused";
    }
}

double maybe_round(const Engine& engine, double value) {
    return engine.config().round_output ? std::nearbyint(value) : value;
}

}  // namespace

std::string serve_one(Engine& engine, const std::string& request_line) {
    nlohmann::ordered_json res;
    try {
        nlohmann::json req = nlohmann::json::parse(request_line);
        if (!req.is_object()) throw ParseError("serve: request must be a JSON object");
        const Schema& schema = engine.db().schema();

        if (!req.contains("op")) {
            if (!req.contains("query")) {
                throw ParseError("serve: request carries neither 'op' nor 'query'");
            }
            const Query q = query_from_json(req["query"].dump(), schema);
            const HandleResult h = engine.handle(q);
            if (req.contains("id")) res["id"] = req["id"];
            res["value"] = maybe_round(engine, h.count.value);
            res["charged"] = h.count.epsilon_charged;
            res["path"] = path_name(h.path);
            res["remaining_budget"] = h.remaining_budget;
            return res.dump();
        }

        const std::string op = req["op"].get<std::string>();
        if (op == "refresh") {
            const int u = req.value("u", engine.config().threshold_u);
            const RefreshResult r = engine.refresh(u);
            res["op"] = "refresh";
            res["new_algebras"] = r.new_algebras;
            res["new_atoms"] = r.new_atoms;
            res["charged"] = r.charged;
            res["budget_refused"] = r.budget_refused;
        } else if (op == "stats") {
            const EngineStats& s = engine.stats();
            res["op"] = "stats";
            res["covered"] = s.covered;
            res["uncovered"] = s.uncovered;
            res["rejected"] = s.rejected;
            res["observed_uncovered_fraction"] = s.observed_uncovered_fraction();
            res["budget"] = engine.accountant().budget();
            res["spent"] = engine.accountant().spent();
            res["remaining"] = engine.accountant().remaining();
            res["algebras"] = engine.algebras().size();
            res["version"] = engine.db().version();
        } else if (op == "open_session") {
            const Query q = query_from_json(req.at("query").dump(), schema);
            const double eps = req.at("eps").get<double>();
            const double rho = req.at("rho").get<double>();
            const std::int64_t t_max = req.at("T").get<std::int64_t>();
            const std::int64_t id = engine.open_session(q, eps, rho, t_max);
            res["op"] = "open_session";
            res["session"] = id;
            res["epsilon0"] = engine.sessions().at(id).eps0_charged;
        } else if (op == "respond") {
            const std::int64_t id = req.at("session").get<std::int64_t>();
            const NoisyCount c = engine.session_respond(id);
            res["session"] = id;
            res["t"] = engine.sessions().at(id).t - 1;  // step just served
            res["value"] = maybe_round(engine, c.value);
        } else if (op == "delta") {
            RowDelta d;
            const std::string kind = req.at("kind").get<std::string>();
            if (kind == "insert") {
                d.kind = RowDelta::Kind::Insert;
            } else if (kind == "delete") {
                d.kind = RowDelta::Kind::Delete;
            } else {
                throw ParseError("serve: delta kind must be insert or delete");
            }
            for (const auto& v : req.at("row")) d.row.push_back(v.get<std::string>());
            d.time_step = req.value("time_step", std::int64_t{0});
            engine.apply_delta(d);
            res["op"] = "delta";
            res["version"] = engine.db().version();
        } else {
            throw ParseError("serve: unknown op '" + op + "'");
        }
        return res.dump();
    } catch (const std::exception& e) {
        nlohmann::ordered_json err;
        err["error"] = e.what();
        return err.dump();
    }
}

std::int64_t serve_stdio(Engine& engine, std::istream& in, std::ostream& out) {
    std::int64_t served = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out << serve_one(engine, line) << '\n';
        out.flush();
        ++served;
    }
    return served;
}

}  // namespace sigmacount
