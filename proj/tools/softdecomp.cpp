#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <softdecomp/softdecomp.hpp>

using namespace softdecomp;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, reject = 1, usage = 2, budget = 3 };

class usage_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw usage_error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Input {
    Hypergraph h;
    std::optional<ConjunctiveQuery> cq;
    std::vector<std::string> warnings;
};

Input load_input(const std::string& path, std::string format, bool allow_isolated) {
    if (format.empty()) {
        auto ext = fs::path(path).extension().string();
        format = ext == ".sql" ? "sql" : ext == ".cq" || ext == ".dl" ? "cq" : "hg";
    }
    auto text = slurp(path);
    Input in;
    if (format == "hg") {
        in.h = parse_hypergraph(text);
        if (allow_isolated) in.h = Hypergraph(in.h.vertex_names(), in.h.edges(), true);
    } else if (format == "cq") {
        auto p = parse_cq(text);
        in.h = std::move(p.hypergraph);
        in.warnings = p.cq.warnings;
        in.cq = std::move(p.cq);
    } else if (format == "sql") {
        auto p = sql_to_cq(text);
        in.h = std::move(p.hypergraph);
        in.cq = std::move(p.cq);
    } else {
        throw usage_error("unknown format '" + format + "'");
    }
    return in;
}

void write_out(const std::string& dir, const std::string& name, const std::string& text) {
    if (dir.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    fs::create_directories(dir);
    std::ofstream(fs::path(dir) / name) << text;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Soft hypertree decompositions of hypergraphs and conjunctive queries"};
    app.require_subcommand(1);

    std::string input, format, out_dir, emit = "txt", stats_file, replay_file;
    int k = 0, level = 0, max_k = 0;
    std::size_t top = 0;
    bool allow_isolated = false, literal = false;
    std::vector<std::string> constraints;
    std::string measure;
    std::string td_file, hg_file, mode = "ctd";
    std::optional<int> verify_k;
    std::string plan_file, db_dir;

    auto* dec = app.add_subcommand("decompose", "Find a (cheapest) candidate tree decomposition");
    dec->add_option("--input", input, "hypergraph, datalog query or SQL file")->required();
    dec->add_option("--format", format, "hg | cq | sql (default: by extension)")->check(CLI::IsMember({"hg", "cq", "sql"}));
    dec->add_option("--k", k, "width bound")->required()->check(CLI::PositiveNumber);
    dec->add_option("--level", level, "candidate-bag iteration level")->check(CLI::NonNegativeNumber);
    dec->add_option("--constraint", constraints, "concov | shallowcyc:d=N | partclust:labels=FILE");
    dec->add_option("--stats", stats_file, "cardinality statistics (JSON)");
    dec->add_option("--replay", replay_file, "replayed per-bag and per-semijoin costs (JSON)");
    dec->add_option("--top", top, "enumerate the N cheapest decompositions");
    dec->add_option("--out", out_dir, "write results into this directory");
    dec->add_option("--emit", emit, "gml | txt | plan | sql")->check(CLI::IsMember({"gml", "txt", "plan", "sql"}));
    dec->add_flag("--allow-isolated", allow_isolated, "wrap isolated vertices in unary edges");
    dec->add_flag("--literal", literal, "one partial decomposition per block");

    auto* wid = app.add_subcommand("widths", "Least width up to a bound");
    wid->add_option("--input", input)->required();
    wid->add_option("--format", format)->check(CLI::IsMember({"hg", "cq", "sql"}));
    wid->add_option("--measure", measure, "shw | shw:i | hw | ghw")->required();
    wid->add_option("--max-k", max_k)->required()->check(CLI::PositiveNumber);
    wid->add_flag("--allow-isolated", allow_isolated);

    auto* ver = app.add_subcommand("verify", "Validate a decomposition");
    ver->add_option("--td", td_file)->required();
    ver->add_option("--hypergraph", hg_file)->required();
    ver->add_option("--format", format)->check(CLI::IsMember({"hg", "cq", "sql"}));
    ver->add_option("--mode", mode)->check(CLI::IsMember({"hw", "ghw", "ctd"}));
    ver->add_option("--k", verify_k)->check(CLI::PositiveNumber);
    ver->add_option("--level", level)->check(CLI::NonNegativeNumber);

    auto* run = app.add_subcommand("run-plan", "Evaluate a compiled plan over CSV relations");
    run->add_option("--plan", plan_file)->required();
    run->add_option("--db", db_dir, "directory with one <relation>.csv per relation")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? Exit::ok : Exit::usage;
    }

    try {
        if (*dec) {
            auto in = load_input(input, format, allow_isolated);
            for (const auto& w : in.warnings) std::cerr << "warning: " << w << '\n';
            const auto& h = in.h;
            if ((emit == "plan" || emit == "sql") && !in.cq) throw usage_error("--emit " + emit + " needs a cq or sql input");

            Constraint c;
            for (const auto& spec : constraints) {
                if (spec.rfind("partclust:labels=", 0) == 0) c = c && parse_partition_labels(h, slurp(spec.substr(17)));
                else c = c && parse_constraint_spec(spec);
            }
            StatsCatalog stats;
            ReplayCosts replay;
            ConstrainedOptions opt;
            opt.literal = literal;
            if (!stats_file.empty() && !replay_file.empty()) throw usage_error("--stats and --replay are exclusive");
            if (!stats_file.empty()) {
                stats = parse_stats(h, slurp(stats_file));
                opt.cost = CostProvider::cardinality(stats);
            }
            if (!replay_file.empty()) {
                replay = parse_replay_costs(h, slurp(replay_file));
                opt.cost = CostProvider::replayed(replay);
            }

            auto bags = soft_bags_level(h, k, level);
            std::cerr << "candidate bags: " << bags.size() << '\n';

            std::vector<RankedTd> results;
            bool truncated = false;
            if (top > 0) {
                auto t = enumerate_top_n(h, bags, c, top, opt);
                for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
                results = std::move(t.items);
                truncated = t.truncated;
            } else if (c.trivial() && opt.cost.kind == CostProvider::Kind::none) {
                auto r = solve(h, bags);
                if (r.accepted) results.push_back({attach_covers(h, r.td, original_edge_pool(h), k), {}});
            } else {
                auto r = solve_constrained(h, bags, c, opt);
                for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
                if (r.accepted) results.push_back({r.td, r.key});
            }
            if (results.empty()) {
                std::cout << "REJECT\n";
                return Exit::reject;
            }
            std::cout << "ACCEPT " << results.size() << " decomposition(s)" << (truncated ? " (truncated)" : "") << '\n';
            for (std::size_t i = 0; i < results.size(); ++i) {
                const auto& td = results[i].td;
                std::string name = "td" + std::to_string(i + 1);
                if (opt.cost.kind != CostProvider::Kind::none) std::cout << "# " << name << " cost " << results[i].key.cost << '\n';
                if (emit == "txt") {
                    write_out(out_dir, name + ".td", format_td(h, td));
                } else if (emit == "gml") {
                    write_out(out_dir, name + ".gml", format_gml(h, td));
                } else {
                    auto plan = compile_plan(*in.cq, h, td);
                    for (const auto& f : plan.flags) std::cerr << "warning: " << f << '\n';
                    if (emit == "plan") write_out(out_dir, name + ".plan.json", plan_to_json(plan));
                    else write_out(out_dir, name + ".sql", emit_sql(plan));
                }
            }
            return Exit::ok;
        }

        if (*wid) {
            auto in = load_input(input, format, allow_isolated);
            const auto& h = in.h;
            for (int kk = 1; kk <= max_k; ++kk) {
                bool found = false;
                if (measure == "hw") {
                    found = hw_leq(h, kk).has_value();
                } else if (measure == "ghw") {
                    found = ghw_leq(h, kk).has_value();
                } else if (measure == "shw" || measure.rfind("shw:", 0) == 0) {
                    int lv = measure == "shw" ? 0 : std::stoi(measure.substr(4));
                    if (lv < 0) throw usage_error("negative level");
                    found = solve(h, soft_bags_level(h, kk, lv)).accepted;
                } else {
                    throw usage_error("unknown measure '" + measure + "'");
                }
                std::cout << "k=" << kk << ' ' << (found ? "ACCEPT" : "REJECT") << '\n';
                if (found) {
                    std::cout << measure << " = " << kk << '\n';
                    return Exit::ok;
                }
            }
            std::cout << measure << " > " << max_k << '\n';
            return Exit::reject;
        }

        if (*ver) {
            auto in = load_input(hg_file, format, false);
            const auto& h = in.h;
            auto td = parse_td(h, slurp(td_file));
            ValidationOptions vo;
            vo.mode = mode == "hw" ? ValidationMode::hw : mode == "ghw" ? ValidationMode::ghw : ValidationMode::ctd;
            vo.k = verify_k;
            std::optional<CandidateBagSet> bags;
            if (vo.mode == ValidationMode::ctd && verify_k) {
                bags = soft_bags_level(h, *verify_k, level);
                vo.bags = &*bags;
            }
            auto rep = validate_td(h, td, vo);
            std::cout << rep.format();
            nlohmann::json j;
            j["ok"] = rep.ok();
            j["width"] = td.width();
            j["failed"] = nlohmann::json::array();
            for (const auto& ch : rep.checks)
                if (!ch.pass) j["failed"].push_back(ch.name);
            std::cout << j.dump() << '\n';
            return rep.ok() ? Exit::ok : Exit::reject;
        }

        if (*run) {
            auto plan = plan_from_json(slurp(plan_file));
            Database db;
            std::map<std::string, Value> intern;
            std::vector<std::string> values;
            for (const auto& a : plan.cq.atoms) {
                if (db.count(a.relation)) continue;
                auto path = fs::path(db_dir) / (a.relation + ".csv");
                std::istringstream lines(slurp(path.string()));
                std::string line;
                Relation rel;
                if (std::getline(lines, line)) rel.columns = split_csv(line);
                int lineno = 1;
                while (std::getline(lines, line)) {
                    ++lineno;
                    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                    auto cells = split_csv(line);
                    if (cells.size() != rel.columns.size())
                        throw usage_error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(rel.columns.size()) + " fields");
                    std::vector<Value> row;
                    for (const auto& cell : cells) {
                        auto [it, fresh] = intern.emplace(cell, static_cast<Value>(values.size()));
                        if (fresh) values.push_back(cell);
                        row.push_back(it->second);
                    }
                    rel.rows.push_back(std::move(row));
                }
                db.emplace(a.relation, std::move(rel));
            }
            auto res = execute_plan(plan, db);
            if (res.boolean) {
                std::cout << (res.nonempty ? "true" : "false") << '\n';
                return Exit::ok;
            }
            std::vector<std::vector<std::string>> rows;
            for (const auto& r : res.table.rows) {
                std::vector<std::string> s;
                for (auto v : r) s.push_back(values[static_cast<std::size_t>(v)]);
                rows.push_back(std::move(s));
            }
            std::sort(rows.begin(), rows.end());
            for (std::size_t i = 0; i < res.table.vars.size(); ++i) std::cout << (i ? "," : "") << res.table.vars[i];
            std::cout << '\n';
            for (const auto& r : rows) {
                for (std::size_t i = 0; i < r.size(); ++i) std::cout << (i ? "," : "") << r[i];
                std::cout << '\n';
            }
            return Exit::ok;
        }
    } catch (const budget_exceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << '\n';
        return Exit::budget;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::usage;
    }
    return Exit::usage;
}
