// Command-line front end: simulation, training, evaluation, reporting, split
// inspection, and synthetic data generation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "satop/baselines.hpp"
#include "satop/checkpoint.hpp"
#include "satop/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace satop;

namespace {

// exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
}

json default_config() {
    EnvConfig env;
    TrainConfig tr;
    AcoParams aco;
    json cfg;
    cfg["seed"] = 0;
    cfg["paths"] = {{"graph", ""}, {"spots", ""}, {"events", ""}};
    cfg["env"] = {{"gamma", env.gamma},
                  {"officer_speed_kmh", env.officer_speed_kmh},
                  {"shift_start_h", env.shift_start_h},
                  {"shift_end_h", env.shift_end_h},
                  {"start_vertex", env.start_vertex}};
    cfg["trainer"] = {{"gamma", tr.gamma},
                      {"batch", tr.batch},
                      {"parallel_envs", tr.parallel_envs},
                      {"train_every", tr.train_every},
                      {"target_update", tr.target_update},
                      {"learning_start", tr.learning_start},
                      {"total_env_steps", tr.total_env_steps},
                      {"buffer_capacity", tr.buffer_capacity},
                      {"eval_every", tr.eval_every},
                      {"bootstrap_truncated", tr.bootstrap_truncated},
                      {"lr", tr.opt.lr},
                      {"rms_alpha", tr.opt.alpha},
                      {"eps",
                       {{"start", tr.eps.eps_start},
                        {"min", tr.eps.eps_min},
                        {"decay_start", tr.eps.decay_start},
                        {"min_step", tr.eps.min_step}}},
                      {"net", {{"preset", "full"}}}};
    cfg["baseline"] = {{"ants", aco.ants},     {"alpha", aco.alpha},
                       {"beta", aco.beta},     {"rho", aco.rho},
                       {"deposit", aco.deposit}, {"budget_s", aco.budget_s}};
    cfg["simulate"] = {{"policy", "greedy"}, {"days", "test"}, {"checkpoint", ""},
                       {"rate_model", ""}};
    return cfg;
}

void merge_into(json& base, const json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

void apply_override(json& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value, got '" + kv + "'");
    std::string path = kv.substr(0, eq);
    std::string raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw; // plain string
    }
    json* node = &cfg;
    size_t pos = 0;
    while (true) {
        size_t dot = path.find('.', pos);
        std::string key = path.substr(pos, dot - pos);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

json resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                    bool seed_given, uint64_t seed) {
    json cfg = default_config();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw DataError("cannot open config file: " + config_path);
        json file_cfg;
        try {
            file_cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config parse error in " + config_path + ": " + e.what());
        }
        merge_into(cfg, file_cfg);
    }
    for (const std::string& kv : overrides) apply_override(cfg, kv);
    if (seed_given) cfg["seed"] = seed;
    return cfg;
}

EnvConfig env_from(const json& cfg) {
    const json& e = cfg.at("env");
    EnvConfig c;
    c.gamma = e.at("gamma");
    c.officer_speed_kmh = e.at("officer_speed_kmh");
    c.shift_start_h = e.at("shift_start_h");
    c.shift_end_h = e.at("shift_end_h");
    c.start_vertex = e.at("start_vertex");
    if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw ConfigError("env.gamma must be in (0, 1]");
    if (c.shift_end_h <= c.shift_start_h) throw ConfigError("shift must end after it starts");
    return c;
}

NetConfig net_from(const json& n) {
    std::string preset = n.value("preset", "full");
    NetConfig c;
    if (preset == "desk") c = NetConfig::desk_scale();
    else if (preset == "tiny") c = NetConfig::tiny();
    else if (preset != "full")
        throw ConfigError("trainer.net.preset must be full, desk, or tiny (got '" + preset + "')");
    c.d_h = n.value("d_h", c.d_h);
    c.d_le = n.value("d_le", c.d_le);
    c.d_at = n.value("d_at", c.d_at);
    c.d_ah = n.value("d_ah", c.d_ah);
    c.n_layers = n.value("n_layers", c.n_layers);
    c.spot_hidden = n.value("spot_hidden", c.spot_hidden);
    c.ah_hidden = n.value("ah_hidden", c.ah_hidden);
    c.delta_hidden = n.value("delta_hidden", c.delta_hidden);
    c.q_hidden = n.value("q_hidden", c.q_hidden);
    return c;
}

TrainConfig train_from(const json& cfg) {
    const json& t = cfg.at("trainer");
    TrainConfig c;
    c.gamma = t.at("gamma");
    c.batch = t.at("batch");
    c.parallel_envs = t.at("parallel_envs");
    c.train_every = t.at("train_every");
    c.target_update = t.at("target_update");
    c.learning_start = t.at("learning_start");
    c.total_env_steps = t.at("total_env_steps");
    c.buffer_capacity = t.at("buffer_capacity");
    c.eval_every = t.at("eval_every");
    c.bootstrap_truncated = t.at("bootstrap_truncated");
    c.opt.lr = t.at("lr");
    c.opt.alpha = t.at("rms_alpha");
    c.eps.eps_start = t.at("eps").at("start");
    c.eps.eps_min = t.at("eps").at("min");
    c.eps.decay_start = t.at("eps").at("decay_start");
    c.eps.min_step = t.at("eps").at("min_step");
    c.net = net_from(t.at("net"));
    c.seed = cfg.at("seed");
    if (c.batch <= 0 || c.parallel_envs <= 0) throw ConfigError("trainer sizes must be positive");
    return c;
}

AcoParams aco_from(const json& cfg) {
    const json& b = cfg.at("baseline");
    AcoParams p;
    p.ants = b.at("ants");
    p.alpha = b.at("alpha");
    p.beta = b.at("beta");
    p.rho = b.at("rho");
    p.deposit = b.at("deposit");
    p.budget_s = b.at("budget_s");
    p.seed = cfg.at("seed");
    return p;
}

struct Workspace {
    LoadedNetwork net;
    ActionSpace actions;
    std::shared_ptr<PathCache> cache;
    EdgeInfoMatrix info;
    std::shared_ptr<GeometryProvider> gp;
    std::map<std::string, EventLog> logs;
    DatasetSplit split;
    EnvConfig env_cfg;

    std::unique_ptr<Environment> make_env() const {
        return std::make_unique<Environment>(net.graph, actions, net.spots, cache, gp, &logs,
                                             env_cfg);
    }
};

Workspace build_workspace(const json& cfg) {
    const json& paths = cfg.at("paths");
    std::string graph = paths.at("graph"), spots = paths.at("spots"), events = paths.at("events");
    if (graph.empty() || spots.empty() || events.empty())
        throw ConfigError("paths.graph, paths.spots, and paths.events are all required");
    for (const std::string& p : {graph, spots, events})
        if (!fs::exists(p)) throw DataError("missing input file: " + p);
    Workspace ws;
    ws.env_cfg = env_from(cfg);
    LoadOptions opt;
    opt.officer_speed_kmh = ws.env_cfg.officer_speed_kmh;
    ws.net = load_graph(graph, spots, opt);
    ws.actions = derive_actions(ws.net.graph, ws.net.spots);
    check_routable_core(ws.net.graph, ws.actions);
    ws.cache = std::make_shared<PathCache>(ws.net.graph, ws.actions, ws.net.spots);
    ws.info = build_edge_info(ws.net.graph, ws.actions, *ws.cache);
    ws.gp = std::make_shared<GeometryProvider>(ws.net.graph, ws.actions, ws.net.spots, ws.cache,
                                               ws.info, ws.env_cfg);
    ws.logs = load_events(events, ws.net.spots);
    std::vector<std::string> days;
    for (const auto& [day, _] : ws.logs) days.push_back(day);
    ws.split = split_days(days);
    return ws;
}

std::vector<std::string> pick_days(const Workspace& ws, const std::string& spec) {
    if (spec == "train") return ws.split.train;
    if (spec == "validation") return ws.split.validation;
    if (spec == "test") return ws.split.test;
    if (spec == "all") {
        std::vector<std::string> all;
        for (const auto& [day, _] : ws.logs) all.push_back(day);
        return all;
    }
    std::vector<std::string> days;
    std::stringstream ss(spec);
    std::string day;
    while (std::getline(ss, day, ',')) {
        if (!ws.logs.count(day)) throw DataError("day " + day + " not present in the event file");
        days.push_back(day);
    }
    if (days.empty()) throw ConfigError("empty day selection '" + spec + "'");
    return days;
}

const char* split_of(const Workspace& ws, const std::string& day) {
    int r = day_of_year(day) % 13;
    return r == 0 ? "test" : r == 1 ? "validation" : "train";
}

ViolationRateModel rate_model_for(const Workspace& ws, const json& cfg) {
    std::string path = cfg.at("simulate").at("rate_model");
    if (!path.empty()) {
        if (!fs::exists(path)) throw DataError("missing rate model file: " + path);
        return load_rate_model(path, ws.net.spots.size());
    }
    std::map<std::string, EventLog> train_logs;
    const auto& days = ws.split.train.empty()
                           ? ws.split.validation // tiny datasets may lack a train split
                           : ws.split.train;
    for (const std::string& day : days) train_logs[day] = ws.logs.at(day);
    if (train_logs.empty()) throw DataError("no days available to fit the rate model");
    return fit_rate_model(train_logs, ws.net.spots);
}

void write_resolved_config(const json& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "config.resolved");
    out << cfg.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_split_info(int year) {
    if (year < 1900 || year > 2200) throw ConfigError("implausible year " + std::to_string(year));
    std::vector<std::string> days;
    for (int d = 1; d <= days_in_year(year); ++d) days.push_back(iso_date(year, d));
    DatasetSplit split = split_days(days);
    auto print = [](const char* name, const std::vector<std::string>& v) {
        std::cout << name << " (" << v.size() << "):";
        for (const std::string& d : v) std::cout << " " << d;
        std::cout << "\n";
    };
    std::cout << "year " << year << ": " << days.size() << " days\n";
    print("train", split.train);
    print("validation", split.validation);
    print("test", split.test);
    return 0;
}

struct GenSynthArgs {
    int rows = 5, cols = 5;
    double edge_time = 60.0, spot_prob = 0.35, max_duration = 3600.0;
    int days = 20;
    double rate = 0.5, mean_stay = 3600.0;
    std::string menu = "1800,3600,7200";
    int start_year = 2019, start_doy = 1;
};

int cmd_gen_synth(const GenSynthArgs& a, uint64_t seed, const fs::path& out_dir) {
    SyntheticParams p;
    p.day_count = a.days;
    p.arrivals_per_spot_hour = a.rate;
    p.mean_stay = a.mean_stay;
    p.start_year = a.start_year;
    p.start_doy = a.start_doy;
    p.allowed_menu.clear();
    std::stringstream ss(a.menu);
    std::string tok;
    while (std::getline(ss, tok, ',')) p.allowed_menu.push_back(std::stod(tok));
    if (p.allowed_menu.empty()) throw ConfigError("empty allowed-duration menu");

    LoadedNetwork net = synth_grid(a.rows, a.cols, a.edge_time, a.spot_prob, seed, a.max_duration);
    auto logs = generate_synthetic(net.spots, p, seed + 1);
    fs::create_directories(out_dir);
    write_graph_files(net, (out_dir / "graph.csv").string(), (out_dir / "spots.csv").string());
    write_events(logs, (out_dir / "events.csv").string());
    size_t n_events = 0;
    for (const auto& [_, log] : logs) n_events += log.events.size();
    std::cout << "wrote " << net.graph.vertices.size() << " vertices, "
              << net.graph.edges.size() << " edges, " << net.spots.size() << " spots, "
              << logs.size() << " days, " << n_events << " events to " << out_dir.string()
              << "\n";
    return 0;
}

std::function<int(const Observation&)> make_policy(const std::string& name, const Workspace& ws,
                                                   const json& cfg, uint64_t seed,
                                                   const std::string& checkpoint,
                                                   std::unique_ptr<SatopNet>& net_holder,
                                                   std::shared_ptr<std::mt19937_64>& rng_holder,
                                                   std::unique_ptr<ViolationRateModel>& model_holder) {
    if (name == "random") {
        rng_holder = std::make_shared<std::mt19937_64>(seed);
        int n = ws.actions.size();
        auto rng = rng_holder;
        return [n, rng](const Observation&) { return random_action(n, *rng); };
    }
    if (name == "greedy") {
        model_holder = std::make_unique<ViolationRateModel>(rate_model_for(ws, cfg));
        const ViolationRateModel* m = model_holder.get();
        const GeometryProvider* gp = ws.gp.get();
        return [m, gp](const Observation& o) { return greedy_action(o, *m, *gp); };
    }
    if (name == "aco") {
        model_holder = std::make_unique<ViolationRateModel>(rate_model_for(ws, cfg));
        const ViolationRateModel* m = model_holder.get();
        const GeometryProvider* gp = ws.gp.get();
        const EdgeInfoMatrix* info = &ws.info;
        AcoParams params = aco_from(cfg);
        return [m, gp, info, params](const Observation& o) {
            AcoResult res = aco_plan(o, *m, params, *gp, *info);
            if (!res.tour.empty()) return res.tour.front();
            return greedy_action(o, *m, *gp); // nothing in violation: fall back
        };
    }
    if (name == "checkpoint") {
        if (checkpoint.empty())
            throw ConfigError("policy 'checkpoint' requires --checkpoint <file.bin>");
        if (!fs::exists(checkpoint)) throw DataError("missing checkpoint file: " + checkpoint);
        fs::path manifest = fs::path(checkpoint).replace_extension(".txt");
        if (!fs::exists(manifest)) throw DataError("missing checkpoint manifest: " + manifest.string());
        net_holder = std::make_unique<SatopNet>(net_from(cfg.at("trainer").at("net")),
                                                static_cast<int>(ws.net.spots.size()),
                                                ws.actions.size(), seed);
        load_checkpoint(net_holder->params(), checkpoint, manifest.string());
        auto qc = std::make_shared<CachedQ>(*net_holder, *ws.gp);
        return [qc](const Observation& o) {
            return argmax_with_index_tiebreak((*qc)(o.features, o.officer_vertex));
        };
    }
    throw ConfigError("unknown policy '" + name + "' (valid: random, greedy, aco, checkpoint)");
}

int cmd_simulate(const json& cfg, const fs::path& out_dir, const std::string& policy_name,
                 const std::string& days_spec, const std::string& checkpoint) {
    Workspace ws = build_workspace(cfg);
    std::vector<std::string> days = pick_days(ws, days_spec);
    uint64_t seed = cfg.at("seed");
    std::string hash = hex64(fnv1a(cfg.dump()));

    std::unique_ptr<SatopNet> net_holder;
    std::shared_ptr<std::mt19937_64> rng_holder;
    std::unique_ptr<ViolationRateModel> model_holder;
    auto policy = make_policy(policy_name, ws, cfg, seed, checkpoint, net_holder, rng_holder,
                              model_holder);

    write_resolved_config(cfg, out_dir);
    fs::create_directories(out_dir / "episodes");
    std::ofstream summary(out_dir / "summary.csv");
    summary << "policy,split,day,fines,violations,fine_ratio,config_hash,seed\n";

    auto env = ws.make_env();
    for (const std::string& day : days) {
        std::ofstream trace(out_dir / "episodes" / (day + ".csv"));
        trace << "# config_hash=" << hash << " seed=" << seed << "\n";
        trace << "time,event,spot,reward\n";
        Observation obs = env->reset(day);
        while (!env->done()) {
            double t0 = env->clock();
            int action = policy(obs);
            StepResult res = env->step(action);
            trace << t0 << ",action," << action << "," << res.zeta << "\n";
            for (const FineRecord& f : res.fines)
                trace << t0 + f.step + 1 << ",fine," << f.spot << ",1\n";
            obs = res.next_observation;
        }
        auto sum = env->episode_summary();
        summary << policy_name << "," << split_of(ws, day) << "," << day << "," << sum.total_fines
                << "," << sum.violation_events << "," << sum.fine_ratio << "," << hash << ","
                << seed << "\n";
        std::cout << day << ": " << sum.total_fines << " fines / " << sum.violation_events
                  << " violations\n";
    }
    return 0;
}

int cmd_train(const json& cfg, const fs::path& out_dir, const std::string& resume) {
    Workspace ws = build_workspace(cfg);
    if (ws.split.train.empty()) throw DataError("event file has no training days");
    TrainConfig tc = train_from(cfg);
    write_resolved_config(cfg, out_dir);
    Trainer trainer(ws.gp, ws.net.graph, ws.actions, ws.net.spots, ws.cache, &ws.logs,
                    ws.split.train, ws.split.validation, ws.env_cfg, tc);
    std::string resume_path = resume;
    if (resume == "auto") {
        fs::path state = out_dir / "train_state.txt";
        resume_path = fs::exists(state) ? state.string() : "";
    }
    if (!resume_path.empty() && !fs::exists(resume_path))
        throw DataError("missing resume state file: " + resume_path);
    auto rows = trainer.run_training(out_dir.string(), resume_path);
    for (const MetricsRow& r : rows)
        std::cout << "steps " << r.env_steps << " grad " << r.grad_steps << " eps " << r.epsilon
                  << " loss " << r.train_loss << " val fines/day " << r.val_fines_per_day << "\n";
    return 0;
}

struct ReportRow {
    std::string policy, split;
    double mean = 0.0, stdev = 0.0;
    int episodes = 0;
};

int cmd_report(const std::vector<std::string>& run_dirs, const fs::path& out_dir) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const std::string& dir : run_dirs) {
        fs::path file = fs::path(dir) / "summary.csv";
        std::ifstream in(file);
        if (!in) throw DataError("missing summary file: " + file.string());
        std::string line;
        std::getline(in, line);
        auto header = detail::split_csv(line);
        auto col = [&](const std::string& name) {
            for (size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return static_cast<int>(i);
            throw DataError("summary " + file.string() + " lacks column " + name);
        };
        int c_policy = col("policy"), c_split = col("split"), c_fines = col("fines");
        int line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto f = detail::split_csv(line);
            groups[{f[c_policy], f[c_split]}].push_back(
                detail::parse_num(f[c_fines], "fines", line_no));
        }
    }
    if (groups.empty()) throw DataError("no episodes found in the given run directories");

    std::vector<ReportRow> rows;
    for (const auto& [key, fines] : groups) {
        ReportRow r;
        r.policy = key.first;
        r.split = key.second;
        r.episodes = static_cast<int>(fines.size());
        for (double v : fines) r.mean += v;
        r.mean /= r.episodes;
        if (r.episodes > 1) {
            double acc = 0.0;
            for (double v : fines) acc += (v - r.mean) * (v - r.mean);
            r.stdev = std::sqrt(acc / (r.episodes - 1));
        }
        rows.push_back(r);
    }

    auto fmt = [](double v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    std::ostringstream csv;
    csv << "policy,split,mean_fines_per_day,std,episodes\n";
    for (const ReportRow& r : rows)
        csv << r.policy << "," << r.split << "," << fmt(r.mean) << "," << fmt(r.stdev) << ","
            << r.episodes << "\n";

    std::ostringstream text;
    text << std::left << std::setw(14) << "policy" << std::setw(12) << "split" << std::setw(18)
         << "mean fines/day" << std::setw(14) << "std" << "episodes\n";
    for (const ReportRow& r : rows)
        text << std::left << std::setw(14) << r.policy << std::setw(12) << r.split
             << std::setw(18) << fmt(r.mean) << std::setw(14) << fmt(r.stdev) << r.episodes
             << "\n";

    std::cout << text.str();
    fs::create_directories(out_dir);
    std::ofstream(out_dir / "report.csv") << csv.str();
    std::ofstream(out_dir / "report.txt") << text.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"traveling officer problem: simulation, baselines, and q-learning"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "runs/default";
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--override", overrides, "config override key.path=value")->take_all();
    app.add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_given = true; });

    auto* sim = app.add_subcommand("simulate", "roll a policy over selected days");
    std::string policy = "greedy", days_spec, checkpoint;
    sim->add_option("--policy", policy, "random, greedy, aco, or checkpoint");
    sim->add_option("--days", days_spec, "train, validation, test, all, or a day list");
    sim->add_option("--checkpoint", checkpoint, "parameters for the checkpoint policy");
    sim->fallthrough();

    auto* train = app.add_subcommand("train", "run q-learning");
    std::string resume;
    train->add_option("--resume", resume, "state file to resume from, or 'auto'");
    train->fallthrough();

    auto* eval = app.add_subcommand("evaluate", "roll a trained checkpoint over selected days");
    eval->add_option("--checkpoint", checkpoint, "parameters to evaluate")->required();
    eval->add_option("--days", days_spec, "train, validation, test, all, or a day list");
    eval->fallthrough();

    auto* report = app.add_subcommand("report", "aggregate run summaries into a results table");
    std::vector<std::string> run_dirs;
    report->add_option("dirs", run_dirs, "run directories with summary.csv")->required();
    report->fallthrough();

    auto* split_info = app.add_subcommand("split-info", "list the train/validation/test days");
    int year = 2019;
    split_info->add_option("--year", year, "calendar year");
    split_info->fallthrough();

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic grid network and events");
    GenSynthArgs ga;
    gen->add_option("--rows", ga.rows);
    gen->add_option("--cols", ga.cols);
    gen->add_option("--edge-time", ga.edge_time, "seconds per edge");
    gen->add_option("--spot-prob", ga.spot_prob, "spot probability per directed edge");
    gen->add_option("--max-duration", ga.max_duration, "allowed parking seconds per spot");
    gen->add_option("--days", ga.days);
    gen->add_option("--rate", ga.rate, "arrivals per spot-hour");
    gen->add_option("--mean-stay", ga.mean_stay, "mean stay seconds");
    gen->add_option("--menu", ga.menu, "comma-separated allowed durations");
    gen->add_option("--start-year", ga.start_year);
    gen->add_option("--start-doy", ga.start_doy);
    gen->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        json cfg = resolve_config(config_path, overrides, seed_given, seed);
        if (*split_info) return cmd_split_info(year);
        if (*gen) return cmd_gen_synth(ga, cfg.at("seed"), out_dir);
        if (*sim) {
            if (policy.empty()) policy = cfg.at("simulate").at("policy");
            if (days_spec.empty()) days_spec = cfg.at("simulate").at("days");
            if (checkpoint.empty()) checkpoint = cfg.at("simulate").at("checkpoint");
            return cmd_simulate(cfg, out_dir, policy, days_spec, checkpoint);
        }
        if (*eval) {
            if (days_spec.empty()) days_spec = cfg.at("simulate").at("days");
            return cmd_simulate(cfg, out_dir, "checkpoint", days_spec, checkpoint);
        }
        if (*train) return cmd_train(cfg, out_dir, resume);
        if (*report) return cmd_report(run_dirs, out_dir);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const GraphError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const EventError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const BaselineError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ad::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const TrainError& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
