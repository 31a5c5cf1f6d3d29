#include "broadrefine/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "broadrefine/catalog.hpp"
#include "broadrefine/engine.hpp"
#include "broadrefine/errors.hpp"
#include "broadrefine/expander.hpp"
#include "broadrefine/posterior.hpp"
#include "broadrefine/random.hpp"
#include "broadrefine/rlopt.hpp"
#include "broadrefine/serving.hpp"

namespace broadrefine {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// One document for every subcommand; sections a command does not use are
// still validated and echoed into the resolved copy.
struct RunConfig {
    std::string command;
    std::uint64_t seed = 0;
    std::string out = ".";

    std::size_t num_items = 10000;
    std::optional<std::uint64_t> corpus_seed;
    std::string catalog_path;
    std::string schema_path;

    std::size_t benchmark_count = 200;
    int benchmark_level = 3;
    std::optional<std::uint64_t> benchmark_seed;
    std::string benchmark_path;

    PipelineConfig pipeline;
    bool verifier_seed_given = false;
    OptimizerConfig optimizer;
    bool optimizer_seed_given = false;
    PosteriorConfig posterior;
    UserContext user;

    std::string query;
    std::size_t offset = 0;
    std::vector<std::string> variants{"identity", "enumerative"};
    std::string variant = "enumerative";
    std::string params_path;
    std::optional<std::uint64_t> policy_seed;
    std::size_t eval_samples = 8;
};

void read_posterior(const json& j, PosteriorConfig& p) {
    for (const auto& [key, value] : j.items()) {
        if (key == "k") p.k = value.get<std::size_t>();
        else if (key == "limit") p.limit = value.get<std::size_t>();
        else if (key == "candidate_cap") p.candidate_cap = value.get<std::size_t>();
        else throw ConfigError("unknown posterior key '" + key + "'");
    }
    if (p.k == 0 || p.limit == 0 || p.candidate_cap == 0) {
        throw ConfigError("posterior k, limit and candidate_cap must be positive");
    }
}

void check_variant(const std::string& v, const char* field) {
    if (v != "identity" && v != "enumerative" && v != "policy") {
        throw ConfigError(std::string(field) + ": unknown expander variant '" + v +
                          "' (identity|enumerative|policy)");
    }
}

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    for (const auto& [key, value] : doc.items()) {
        if (key == "seed") {
            c.seed = value.get<std::uint64_t>();
        } else if (key == "out") {
            c.out = value.get<std::string>();
        } else if (key == "corpus") {
            for (const auto& [k, v] : value.items()) {
                if (k == "num_items") c.num_items = v.get<std::size_t>();
                else if (k == "seed") c.corpus_seed = v.get<std::uint64_t>();
                else throw ConfigError("unknown corpus key '" + k + "'");
            }
        } else if (key == "catalog_path") {
            c.catalog_path = value.get<std::string>();
        } else if (key == "schema_path") {
            c.schema_path = value.get<std::string>();
        } else if (key == "benchmark") {
            for (const auto& [k, v] : value.items()) {
                if (k == "count") c.benchmark_count = v.get<std::size_t>();
                else if (k == "over_constraint_level") c.benchmark_level = v.get<int>();
                else if (k == "seed") c.benchmark_seed = v.get<std::uint64_t>();
                else throw ConfigError("unknown benchmark key '" + k + "'");
            }
            if (c.benchmark_level < 0) throw ConfigError("benchmark.over_constraint_level must be >= 0");
        } else if (key == "benchmark_path") {
            c.benchmark_path = value.get<std::string>();
        } else if (key == "pipeline") {
            c.pipeline = value.get<PipelineConfig>();
            c.verifier_seed_given = value.contains("verifier") && value.at("verifier").contains("seed");
        } else if (key == "optimizer") {
            c.optimizer = value.get<OptimizerConfig>();
            c.optimizer_seed_given = value.contains("seed");
        } else if (key == "posterior") {
            read_posterior(value, c.posterior);
        } else if (key == "user") {
            c.user = value.get<UserContext>();
        } else if (key == "query") {
            c.query = value.get<std::string>();
        } else if (key == "offset") {
            c.offset = value.get<std::size_t>();
        } else if (key == "variants") {
            c.variants = value.get<std::vector<std::string>>();
            for (const auto& v : c.variants) check_variant(v, "variants");
        } else if (key == "variant") {
            c.variant = value.get<std::string>();
            check_variant(c.variant, "variant");
        } else if (key == "params_path") {
            c.params_path = value.get<std::string>();
        } else if (key == "policy_seed") {
            c.policy_seed = value.get<std::uint64_t>();
        } else if (key == "command") {
            // echoed by resolved copies; the subcommand decides
        } else if (key == "eval_samples") {
            c.eval_samples = value.get<std::size_t>();
            if (c.eval_samples == 0) throw ConfigError("eval_samples must be positive");
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return c;
}

// Sub-seeds not pinned in the file follow the global seed.
void resolve_seeds(RunConfig& c) {
    if (!c.corpus_seed) c.corpus_seed = c.seed;
    if (!c.benchmark_seed) c.benchmark_seed = c.seed;
    if (!c.policy_seed) c.policy_seed = c.seed;
    if (!c.verifier_seed_given) c.pipeline.verifier.seed = c.seed;
    if (!c.optimizer_seed_given) c.optimizer.seed = c.seed;
}

json resolved_json(const RunConfig& c) {
    json p = {{"k", c.posterior.k}, {"limit", c.posterior.limit}, {"candidate_cap", c.posterior.candidate_cap}};
    return json{{"command", c.command},
                {"seed", c.seed},
                {"out", c.out},
                {"corpus", {{"num_items", c.num_items}, {"seed", *c.corpus_seed}}},
                {"catalog_path", c.catalog_path},
                {"schema_path", c.schema_path},
                {"benchmark",
                 {{"count", c.benchmark_count},
                  {"over_constraint_level", c.benchmark_level},
                  {"seed", *c.benchmark_seed}}},
                {"benchmark_path", c.benchmark_path},
                {"pipeline", c.pipeline},
                {"optimizer", c.optimizer},
                {"posterior", p},
                {"user", c.user},
                {"query", c.query},
                {"offset", c.offset},
                {"variants", c.variants},
                {"variant", c.variant},
                {"params_path", c.params_path},
                {"policy_seed", *c.policy_seed},
                {"eval_samples", c.eval_samples}};
}

std::ifstream open_input(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string("cannot open ") + what + " '" + path + "'");
    return in;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_output(path);
    out << text;
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

json read_json_file(const std::string& path, const char* what) {
    auto in = open_input(path, what);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(std::string(what) + " '" + path + "': " + e.what());
    }
}

// Loaded or generated inputs, kept alive together because the index and
// backend point into the catalog.
struct Workspace {
    Schema schema;
    Catalog catalog;
    std::unique_ptr<Index> index;
    std::unique_ptr<IndexBackend> backend;
};

Schema load_schema(const RunConfig& c) {
    if (c.schema_path.empty()) return reference_schema();
    auto j = read_json_file(c.schema_path, "schema");
    try {
        auto schema = j.get<Schema>();
        schema.validate();
        return schema;
    } catch (const json::exception& e) {
        throw DataError("schema '" + c.schema_path + "': " + e.what());
    } catch (const ConfigError& e) {
        throw DataError("schema '" + c.schema_path + "': " + e.what());
    }
}

Catalog load_catalog(const RunConfig& c, const Schema& schema) {
    if (c.catalog_path.empty()) {
        CatalogSpec spec;
        spec.num_items = c.num_items;
        spec.schema = schema;
        spec.seed = *c.corpus_seed;
        return generate_catalog(spec);
    }
    auto in = open_input(c.catalog_path, "catalog");
    return read_catalog_jsonl(in);
}

Workspace open_workspace(const RunConfig& c) {
    Workspace w;
    w.schema = load_schema(c);
    w.catalog = load_catalog(c, w.schema);
    w.index = std::make_unique<Index>(build_index(w.catalog));
    w.backend = std::make_unique<IndexBackend>(*w.index);
    return w;
}

std::vector<QueryRecord> load_benchmark(const RunConfig& c, const Workspace& w) {
    if (c.benchmark_path.empty()) {
        return build_query_benchmark(w.catalog, w.schema, c.benchmark_count, c.benchmark_level, *c.benchmark_seed);
    }
    auto in = open_input(c.benchmark_path, "benchmark");
    return read_benchmark_jsonl(in);
}

std::vector<ParsedQuery> parse_benchmark(const std::vector<QueryRecord>& records) {
    std::vector<ParsedQuery> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(parse(r.query_text));
    return out;
}

ParsedQuery config_query(const RunConfig& c) {
    if (c.query.empty()) throw ConfigError("'query' is required for " + c.command);
    try {
        return parse(c.query);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("query: ") + e.what());
    }
}

PolicyParams load_params(const RunConfig& c) {
    if (c.params_path.empty()) throw ConfigError("'params_path' is required for the policy variant");
    auto j = read_json_file(c.params_path, "params");
    try {
        auto params = j.get<PolicyParams>();
        params.validate();
        return params;
    } catch (const json::exception& e) {
        throw DataError("params '" + c.params_path + "': " + e.what());
    }
}

std::unique_ptr<Expander> make_expander(const RunConfig& c, const std::string& variant) {
    if (variant == "identity") return std::make_unique<IdentityExpander>();
    if (variant == "enumerative") return std::make_unique<EnumerativeExpander>(c.pipeline.rewrites);
    return std::make_unique<PolicyExpander>(load_params(c), *c.policy_seed);
}

using Command = int (*)(const RunConfig&, const fs::path&, std::ostream&);

int cmd_gen_corpus(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    const auto schema = load_schema(c);
    CatalogSpec spec;
    spec.num_items = c.num_items;
    spec.schema = schema;
    spec.seed = *c.corpus_seed;
    const auto catalog = generate_catalog(spec);
    {
        auto f = open_output(dir / "catalog.jsonl");
        write_catalog_jsonl(f, catalog);
    }
    write_text(dir / "schema.json", json(schema).dump(2) + "\n");
    out << "wrote " << catalog.size() << " items to " << (dir / "catalog.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_gen_benchmark(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    const auto w = open_workspace(c);
    const auto records =
        build_query_benchmark(w.catalog, w.schema, c.benchmark_count, c.benchmark_level, *c.benchmark_seed);
    auto f = open_output(dir / "benchmark.jsonl");
    write_benchmark_jsonl(f, records);
    out << "wrote " << records.size() << " queries to " << (dir / "benchmark.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_search(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    const auto q = config_query(c);
    const auto w = open_workspace(c);
    const auto rewrite = RewriteSpec::identity(q);
    const auto result = w.backend->search({rewrite, c.pipeline.limit, c.offset});
    json j = {{"query", serialize(q)},
              {"offset", c.offset},
              {"limit", c.pipeline.limit},
              {"total_matches", result.total_matches},
              {"item_ids", result.item_ids}};
    write_text(dir / "search.json", j.dump(2) + "\n");
    out << result.total_matches << " matches, " << result.item_ids.size() << " returned\n";
    return kExitOk;
}

int cmd_build_sft(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    const auto w = open_workspace(c);
    const auto bench = load_benchmark(c, w);
    auto pc = c.posterior;
    pc.verifier = c.pipeline.verifier;
    pc.user = c.user;
    const auto records = build_sft_dataset(bench, *w.backend, w.catalog, pc);
    auto f = open_output(dir / "sft.jsonl");
    write_sft_jsonl(f, records);
    out << "wrote " << records.size() << " sft records\n";
    return kExitOk;
}

void write_params(const fs::path& path, const PolicyParams& params) { write_text(path, json(params).dump(2) + "\n"); }

int cmd_train(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    const auto w = open_workspace(c);
    const auto bench = load_benchmark(c, w);
    if (bench.empty()) throw DataError("training benchmark is empty");
    RolloutEnvironment env(w.catalog, *w.backend, parse_benchmark(bench), c.user, c.pipeline.verifier,
                           c.pipeline.limit);

    CheckpointFn checkpoint;
    if (c.optimizer.checkpoint_every > 0) {
        fs::create_directories(dir / "checkpoints");
        checkpoint = [&dir](std::size_t step, const PolicyParams& params) {
            write_params(dir / "checkpoints" / ("step_" + std::to_string(step) + ".json"), params);
        };
    }

    TrainResult result;
    try {
        result = train(env, c.optimizer, nullptr, checkpoint);
    } catch (const TrainingDiverged& e) {
        write_params(dir / "params.json", e.last_good());
        throw;
    }
    {
        auto f = open_output(dir / "curve.csv");
        write_curve_csv(f, result.curve);
    }
    write_params(dir / "params.json", result.params);

    const auto mode = c.optimizer.reward_mode;
    const auto eval_seed = mix_seed(c.optimizer.seed, hash_string("evaluation"));
    const auto initial = PolicyParams::zeros(c.optimizer.n_slots, env.max_constraints(), c.optimizer.temperature);
    const double identity = evaluate_expander(env, IdentityExpander{}, mode);
    const double before = evaluate_policy(env, initial, mode, c.eval_samples, eval_seed);
    const double after = evaluate_policy(env, result.params, mode, c.eval_samples, eval_seed);
    json summary = {{"algorithm", to_string(c.optimizer.algorithm)},
                    {"reward_mode", to_string(mode)},
                    {"steps", c.optimizer.steps},
                    {"queries", env.size()},
                    {"identity_reward", identity},
                    {"initial_policy_reward", before},
                    {"trained_policy_reward", after}};
    write_text(dir / "train_summary.json", summary.dump(2) + "\n");
    out << to_string(c.optimizer.algorithm) << " " << c.optimizer.steps << " steps: " << to_string(mode)
        << " reward " << before << " -> " << after << " (identity " << identity << ")\n";
    return kExitOk;
}

struct Aggregate {
    std::size_t queries = 0;
    double hybrid = 0.0;
    double global = 0.0;
    double effective = 0.0;
    std::size_t low = 0;
    std::size_t zero = 0;
};

int cmd_evaluate(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    if (c.variants.empty()) throw ConfigError("variants must name at least one expander");
    const auto w = open_workspace(c);
    const auto bench = load_benchmark(c, w);
    const auto queries = parse_benchmark(bench);

    std::vector<Aggregate> aggs;
    for (const auto& variant : c.variants) {
        const auto expander = make_expander(c, variant);
        auto f = open_output(dir / ("sessions_" + variant + ".jsonl"));
        Aggregate a;
        for (const auto& q : queries) {
            const auto rep = run_session(q, c.user, c.pipeline, *expander, *w.backend, w.catalog);
            f << json(rep).dump() << '\n';
            ++a.queries;
            a.hybrid += rep.page0.hybrid;
            a.global += rep.page0.global;
            a.effective += rep.page0.effective;
            if (rep.low_result) ++a.low;
            if (rep.refined_count == 0) ++a.zero;
        }
        aggs.push_back(a);
    }

    std::ostringstream csv;
    csv << "metric";
    for (const auto& v : c.variants) csv << ',' << v;
    csv << '\n';
    if (!queries.empty()) {
        auto row = [&](const char* name, auto value) {
            csv << name;
            for (const auto& a : aggs) csv << ',' << value(a);
            csv << '\n';
        };
        auto mean = [](double sum, std::size_t n) { return format_number(sum / static_cast<double>(n)); };
        row("queries", [](const Aggregate& a) { return std::to_string(a.queries); });
        row("mean_hybrid", [&](const Aggregate& a) { return mean(a.hybrid, a.queries); });
        row("mean_global", [&](const Aggregate& a) { return mean(a.global, a.queries); });
        row("mean_effective", [&](const Aggregate& a) { return mean(a.effective, a.queries); });
        row("lrr", [&](const Aggregate& a) { return mean(static_cast<double>(a.low), a.queries); });
        row("zero_result_count", [](const Aggregate& a) { return std::to_string(a.zero); });
    }
    write_text(dir / "aggregate.csv", csv.str());
    out << "evaluated " << queries.size() << " queries x " << c.variants.size() << " variants\n";
    return kExitOk;
}

int cmd_session(const RunConfig& c, const fs::path& dir, std::ostream& out) {
    const auto q = config_query(c);
    const auto w = open_workspace(c);
    const auto expander = make_expander(c, c.variant);
    const auto rep = run_session(q, c.user, c.pipeline, *expander, *w.backend, w.catalog);
    write_text(dir / "session.json", json(rep).dump(2) + "\n");
    out << rep.page.displayed.size() << " items displayed, " << rep.refined_count << " verified of "
        << rep.dedup_count << " candidates\n";
    return kExitOk;
}

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string reward;
    std::string optimizer;
    std::string out;
};

int execute(const std::string& command, Command fn, const Flags& flags, std::ostream& out) {
    json doc;
    {
        std::ifstream in(flags.config);
        if (!in) throw DataError("--config: cannot open '" + flags.config + "'");
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("--config: " + std::string(e.what()));
        }
    }
    RunConfig c;
    try {
        c = parse_config(doc);
    } catch (const json::exception& e) {
        throw ConfigError("--config: " + std::string(e.what()));
    }
    c.command = command;
    if (flags.seed) c.seed = *flags.seed;
    if (!flags.out.empty()) c.out = flags.out;
    if (!flags.reward.empty()) {
        c.pipeline.reward_mode = parse_reward_mode(flags.reward);
        c.optimizer.reward_mode = c.pipeline.reward_mode;
    }
    if (!flags.optimizer.empty()) c.optimizer.algorithm = parse_algorithm(flags.optimizer);
    resolve_seeds(c);

    const fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("--out: cannot create '" + c.out + "': " + ec.message());
    write_text(dir / "resolved_config.json", resolved_json(c).dump(2) + "\n");
    return fn(c, dir, out);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Query broadening and verification experiments", "broadrefine"};
    app.require_subcommand(1);

    Flags flags;
    const std::vector<std::pair<std::string, Command>> commands = {
        {"gen-corpus", cmd_gen_corpus}, {"gen-benchmark", cmd_gen_benchmark}, {"search", cmd_search},
        {"build-sft", cmd_build_sft},   {"train", cmd_train},                 {"evaluate", cmd_evaluate},
        {"session", cmd_session},
    };
    const std::map<std::string, std::string> help = {
        {"gen-corpus", "Generate a synthetic catalog"},
        {"gen-benchmark", "Generate an over-constrained query benchmark"},
        {"search", "Run one query against the engine"},
        {"build-sft", "Build top-k rewrite supervision records"},
        {"train", "Train the rewrite policy"},
        {"evaluate", "Run every benchmark query through each expander variant"},
        {"session", "Run one query through broaden and refine"},
    };
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", flags.config, "JSON run configuration")->required();
        sub->add_option("--seed", flags.seed, "global seed (overrides the config)");
        sub->add_option("--reward", flags.reward, "reward mode")->check(CLI::IsMember({"hybrid", "global", "effective"}));
        sub->add_option("--optimizer", flags.optimizer, "policy optimizer")
            ->check(CLI::IsMember({"grpo", "gspo", "reinforcepp"}));
        sub->add_option("--out", flags.out, "output directory");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kExitUsage;
    }

    const auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    Command fn = nullptr;
    for (const auto& [n, f] : commands) {
        if (n == name) fn = f;
    }
    try {
        return execute(name, fn, flags, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        err << "training diverged: " << e.what() << " (last finite params written)\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace broadrefine
