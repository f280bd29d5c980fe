#include "episurr/common/error.hpp"
#include "episurr/common/memory.hpp"
#include "episurr/epi/io.hpp"
#include "episurr/epi/simulation.hpp"
#include "episurr/eval/bench.hpp"
#include "episurr/eval/evaluation.hpp"
#include "episurr/metapop/simulation.hpp"
#include "episurr/scenario/dataset.hpp"
#include "episurr/scenario/encoding.hpp"
#include "episurr/service/service.hpp"
#include "episurr/surrogate/train.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

using namespace episurr;
using nlohmann::json;

namespace {

struct GraphOpts {
    std::size_t nodes = 400;
    double density = 0.25;
    std::uint64_t seed = 1;
    std::string mobility_csv;
    std::string population_csv;

    void add(CLI::App* app)
    {
        app->add_option("--nodes", nodes, "Number of synthetic nodes")->check(CLI::PositiveNumber);
        app->add_option("--density", density, "Target adjacency density of the synthetic graph")->check(CLI::Range(0.0, 1.0));
        app->add_option("--graph-seed", seed, "Seed of the synthetic graph");
        app->add_option("--mobility-csv", mobility_csv, "Commuter matrix instead of a synthetic graph");
        app->add_option("--population-csv", population_csv, "Populations and age shares per node");
    }
    metapop::GraphConfig config() const { return {nodes, density, seed, mobility_csv, population_csv}; }
};

std::ostream& open_out(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw IoError("cannot open " + path + " for writing");
    return file;
}

epi::ContactPolicy parse_changes(const std::vector<std::string>& specs)
{
    epi::ContactPolicy policy;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw InvalidArgument("change point '" + s + "' is not DAY:REDUCTION");
        policy.change_points.push_back({std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1)), std::nullopt});
    }
    policy.validate();
    return policy;
}

std::vector<std::size_t> parse_sizes(const std::string& csv)
{
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(std::stoul(item));
    }
    if (out.empty()) throw InvalidArgument("empty list '" + csv + "'");
    return out;
}

surrogate::LayerSpec layer_from(const std::string& kind, std::size_t channels, const std::string& act,
                                std::size_t stacks, std::size_t iterations)
{
    return {surrogate::layer_kind_from_name(kind), channels, surrogate::activation_from_name(act), stacks, iterations};
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

} // namespace

int main(int argc, char** argv)
{
    retain_freed_memory();
    CLI::App app{"Epidemic scenario simulator and graph-network surrogate"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run the compartment model on one region or a graph");
    int sim_days = 30;
    std::string sim_regime = "outbreak", sim_out, sim_format = "csv";
    std::uint64_t sim_seed = 1;
    std::vector<std::string> sim_changes;
    bool sim_single = false;
    double sim_population = 100'000.0;
    GraphOpts sim_graph;
    sim->add_option("--days", sim_days, "Simulated days")->check(CLI::PositiveNumber);
    sim->add_option("--regime", sim_regime, "outbreak or persistent_threat");
    sim->add_option("--seed", sim_seed, "Seed of the initial-state draw");
    sim->add_option("--change", sim_changes, "Contact change DAY:REDUCTION, repeatable");
    sim->add_flag("--single", sim_single, "One isolated region instead of the graph");
    sim->add_option("--population", sim_population, "Population of the single region");
    sim->add_option("--format", sim_format, "csv or ndjson")->check(CLI::IsMember({"csv", "ndjson"}));
    sim->add_option("-o,--out", sim_out, "Output file (default stdout)");
    sim_graph.add(sim);
    sim->callback([&] {
        const auto policy = parse_changes(sim_changes);
        const auto regime = scenario::regime_from_name(sim_regime);
        Rng rng(sim_seed);
        std::vector<epi::DailyTrajectory> runs;
        if (sim_single) {
            const auto init = scenario::sample_init(regime, rng, sim_population, epi::default_age_shares());
            runs.push_back(epi::integrate(init, epi::EpiParameters::wild_type(), policy, sim_days));
        }
        else {
            const auto graph = metapop::build_graph(sim_graph.config());
            std::vector<epi::CompartmentState> init;
            for (const auto& node : graph.nodes()) init.push_back(scenario::sample_init(regime, rng, node.population, node.age_shares));
            runs = metapop::simulate_metapopulation(graph, init, epi::EpiParameters::wild_type(), policy, sim_days);
        }
        std::ofstream file;
        auto& out = open_out(sim_out, file);
        if (sim_format == "csv") epi::write_trajectories_csv(out, runs);
        else epi::write_trajectories_ndjson(out, runs);
    });

    // graph
    auto* gr = app.add_subcommand("graph", "Build a graph and print its summary");
    GraphOpts gr_graph;
    std::string gr_csv;
    gr_graph.add(gr);
    gr->add_option("--write-csv", gr_csv, "Also write the mobility matrix as CSV");
    gr->callback([&] {
        const auto cfg = gr_graph.config();
        const auto graph = metapop::build_graph(cfg);
        auto summary = graph.summary();
        summary["graph_id"] = service::graph_id(cfg);
        summary["config"] = metapop::to_json(cfg);
        print_json(summary);
        if (!gr_csv.empty()) {
            std::ofstream f;
            metapop::write_mobility_csv(open_out(gr_csv, f), graph.mobility());
        }
    });

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a training dataset");
    scenario::ScenarioConfig gen_cfg;
    std::string gen_regime = "outbreak", gen_out;
    bool gen_nonspatial = false;
    std::size_t gen_fixed = 99;
    GraphOpts gen_graph;
    gen->add_option("--regime", gen_regime, "outbreak or persistent_threat");
    gen->add_option("--horizon", gen_cfg.horizon, "Predicted days: 30, 60 or 90");
    gen->add_option("--samples", gen_cfg.n_samples, "Number of samples");
    gen->add_option("--seed", gen_cfg.seed, "Dataset seed");
    gen->add_option("--max-changes", gen_cfg.max_changes, "Largest number of contact changes per sample");
    gen->add_option("--fixed-changes", gen_fixed, "Exactly this many changes per sample");
    gen->add_flag("--non-spatial", gen_nonspatial, "Single-region samples");
    gen->add_option("--population", gen_cfg.population, "Population of the single region");
    gen->add_option("--threads", gen_cfg.threads, "Worker threads (output does not depend on it)");
    gen->add_option("-o,--out", gen_out, "Dataset file")->required();
    gen_graph.add(gen);
    gen->callback([&] {
        gen_cfg.regime = scenario::regime_from_name(gen_regime);
        gen_cfg.spatial = !gen_nonspatial;
        gen_cfg.graph = gen_graph.config();
        if (gen_fixed != 99) gen_cfg.fixed_changes = gen_fixed;
        std::ofstream f(gen_out, std::ios::binary);
        if (!f) throw IoError("cannot open " + gen_out + " for writing");
        scenario::generate_dataset(gen_cfg, f);
        std::cerr << "wrote " << gen_cfg.n_samples << " samples to " << gen_out << '\n';
    });

    // export
    auto* exp = app.add_subcommand("export", "Write a dataset as NDJSON");
    std::string exp_in, exp_out;
    exp->add_option("data", exp_in, "Dataset file")->required();
    exp->add_option("-o,--out", exp_out, "Output file (default stdout)");
    exp->callback([&] {
        const auto ds = scenario::load_dataset(exp_in);
        std::ofstream f;
        scenario::export_ndjson(open_out(exp_out, f), ds);
    });

    // train
    auto* tr = app.add_subcommand("train", "Train a surrogate on the 80 % split of a dataset");
    std::string tr_data, tr_out, tr_kind = "arma_conv", tr_act = "elu", tr_opt = "adam";
    std::size_t tr_layers = 3, tr_channels = 64, tr_stacks = 2, tr_iters = 1;
    std::uint64_t tr_split = 1;
    surrogate::TrainConfig tr_cfg;
    bool tr_quiet = false;
    tr->add_option("data", tr_data, "Dataset file")->required();
    tr->add_option("-o,--out", tr_out, "Checkpoint file")->required();
    tr->add_option("--layers", tr_layers, "Hidden layers");
    tr->add_option("--channels", tr_channels, "Channels per hidden layer");
    tr->add_option("--kind", tr_kind, "dense, gcn_conv or arma_conv");
    tr->add_option("--activation", tr_act, "relu, elu or linear");
    tr->add_option("--stacks", tr_stacks, "ARMA parallel stacks");
    tr->add_option("--iterations", tr_iters, "ARMA recurrent iterations");
    tr->add_option("--epochs", tr_cfg.max_epochs, "Maximum epochs");
    tr->add_option("--patience", tr_cfg.patience, "Early-stopping patience");
    tr->add_option("--batch", tr_cfg.batch_size, "Mini-batch size");
    tr->add_option("--optimizer", tr_opt, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
    tr->add_option("--lr", tr_cfg.adam.lr, "Adam learning rate");
    tr->add_option("--sgd-lr", tr_cfg.sgd_lr, "SGD learning rate");
    tr->add_option("--seed", tr_cfg.seed, "Initialisation and shuffling seed");
    tr->add_option("--split-seed", tr_split, "Seed of the train/validation/test split");
    tr->add_flag("-q,--quiet", tr_quiet, "No per-epoch log");
    tr->callback([&] {
        const auto ds = scenario::load_dataset(tr_data);
        const auto split = eval::split_dataset(ds, tr_split);
        tr_cfg.optimizer = tr_opt == "adam" ? surrogate::Optimizer::adam : surrogate::Optimizer::sgd;
        if (!tr_quiet) {
            tr_cfg.on_epoch = [](const surrogate::EpochLog& e) {
                std::cerr << json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mape", e.val_mape},
                                  {"improved", e.improved}, {"seconds", e.seconds}}.dump()
                          << '\n';
            };
        }
        const std::vector<surrogate::LayerSpec> layers(tr_layers, layer_from(tr_kind, tr_channels, tr_act, tr_stacks, tr_iters));
        auto ckpt = surrogate::train(ds, split.train, split.validation, surrogate::model_spec_for(ds, layers), tr_cfg);
        ckpt.data["split_seed"] = tr_split;
        surrogate::save_checkpoint(tr_out, ckpt);
        std::optional<metapop::BinaryMatrix> adj;
        if (ds.config.spatial) adj = surrogate::dataset_adjacency(ds);
        const surrogate::Surrogate model(ckpt, adj ? &*adj : nullptr);
        const auto dummy = eval::fit_dummy(ds, split.train);
        print_json({{"checkpoint", tr_out},
                    {"epochs", ckpt.meta.epochs},
                    {"best_epoch", ckpt.meta.best_epoch},
                    {"val_mape", ckpt.meta.best_val_mape},
                    {"test_mape", surrogate::evaluate_mape(model, ds, split.test)},
                    {"dummy_test_mape", eval::evaluate_dummy(dummy, ds, split.test).mape()},
                    {"train_seconds", ckpt.meta.train_seconds}});
    });

    // grid-search
    auto* gs = app.add_subcommand("grid-search", "k-fold cross-validated architecture search");
    std::string gs_data, gs_out, gs_kind = "arma_conv", gs_channels = "32,64";
    std::size_t gs_max_layers = 3, gs_k = 5, gs_threads = 1;
    std::uint64_t gs_split = 1;
    surrogate::TrainConfig gs_cfg;
    gs->add_option("data", gs_data, "Dataset file")->required();
    gs->add_option("-o,--out", gs_out, "Results CSV (default stdout)");
    gs->add_option("--kind", gs_kind, "Layer kind of the hidden layers");
    gs->add_option("--max-layers", gs_max_layers, "Largest number of hidden layers");
    gs->add_option("--channels", gs_channels, "Comma-separated channel widths");
    gs->add_option("-k,--folds", gs_k, "Cross-validation folds");
    gs->add_option("--threads", gs_threads, "Cells trained in parallel");
    gs->add_option("--epochs", gs_cfg.max_epochs, "Maximum epochs per cell");
    gs->add_option("--patience", gs_cfg.patience, "Early-stopping patience");
    gs->add_option("--seed", gs_cfg.seed, "Training seed");
    gs->add_option("--split-seed", gs_split, "Seed of the train/validation/test split");
    gs->callback([&] {
        const auto ds = scenario::load_dataset(gs_data);
        const auto split = eval::split_dataset(ds, gs_split);
        auto idx = split.train;
        idx.insert(idx.end(), split.validation.begin(), split.validation.end());
        const auto space = surrogate::default_grid(gs_max_layers, parse_sizes(gs_channels),
                                                   surrogate::layer_kind_from_name(gs_kind), gs_cfg);
        const auto results = surrogate::grid_search(space, ds, idx, gs_k, gs_threads);
        std::ofstream f;
        surrogate::write_grid_csv(open_out(gs_out, f), results);
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Test-split MAPE report of a checkpoint");
    std::string ev_data, ev_ckpt, ev_out;
    std::uint64_t ev_split = 1;
    bool ev_all = false;
    ev->add_option("data", ev_data, "Dataset file")->required();
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
    ev->add_option("--split-seed", ev_split, "Seed of the train/validation/test split");
    ev->add_flag("--all", ev_all, "Evaluate every sample instead of the test split");
    ev->add_option("-o,--out", ev_out, "Report JSON (default stdout)");
    ev->callback([&] {
        const auto ds = scenario::load_dataset(ev_data);
        const auto split = eval::split_dataset(ds, ev_split);
        std::vector<std::size_t> idx = split.test;
        if (ev_all) {
            idx.resize(ds.records.size());
            std::iota(idx.begin(), idx.end(), 0);
        }
        std::optional<metapop::BinaryMatrix> adj;
        if (ds.config.spatial) adj = surrogate::dataset_adjacency(ds);
        const surrogate::Surrogate model(surrogate::load_checkpoint(ev_ckpt), adj ? &*adj : nullptr);
        const auto dummy = eval::fit_dummy(ds, split.train);
        json report = eval::to_json(eval::evaluate_model(model, ds, idx));
        report["dummy"] = eval::to_json(eval::evaluate_dummy(dummy, ds, idx));
        std::ofstream f;
        open_out(ev_out, f) << report.dump(2) << '\n';
    });

    // bench
    auto* bn = app.add_subcommand("bench", "Simulator versus surrogate wall-clock grid");
    std::string bn_ckpt, bn_out, bn_exec = "1,10,100", bn_hor = "30,60,90", bn_changes = "0,3";
    std::size_t bn_reps = 5;
    bool bn_no_sim = false;
    GraphOpts bn_graph;
    bn->add_option("--checkpoint", bn_ckpt, "Checkpoint (default: untrained 3x64 ARMA, timing does not depend on weights)");
    bn->add_option("--executions", bn_exec, "Comma-separated execution counts");
    bn->add_option("--horizons", bn_hor, "Comma-separated horizons");
    bn->add_option("--changes", bn_changes, "Comma-separated change counts");
    bn->add_option("--reps", bn_reps, "Repetitions per cell (median reported)");
    bn->add_flag("--no-simulator", bn_no_sim, "Time only the surrogate");
    bn->add_option("-o,--out", bn_out, "CSV output (default stdout)");
    bn_graph.add(bn);
    bn->callback([&] {
        const auto graph = metapop::build_graph(bn_graph.config());
        eval::BenchConfig cfg;
        cfg.executions = parse_sizes(bn_exec);
        cfg.horizons.clear();
        for (auto h : parse_sizes(bn_hor)) cfg.horizons.push_back(static_cast<int>(h));
        cfg.changes = parse_sizes(bn_changes);
        cfg.repetitions = bn_reps;
        cfg.simulator = !bn_no_sim;
        surrogate::Checkpoint ckpt = [&] {
            if (!bn_ckpt.empty()) return surrogate::load_checkpoint(bn_ckpt);
            surrogate::ModelSpec spec;
            spec.layers = surrogate::arma_stack(3, 64);
            spec.input_width = scenario::kSpatialWidth;
            spec.output_width = static_cast<std::size_t>(*std::max_element(cfg.horizons.begin(), cfg.horizons.end())) * 48;
            return surrogate::Checkpoint{surrogate::Network<float>(spec, 1), {}, {}};
        }();
        const surrogate::Surrogate model(std::move(ckpt), &graph.adjacency());
        const auto report = eval::bench_runtime(graph, model, cfg);
        std::ofstream f;
        eval::write_bench_csv(open_out(bn_out, f), report);
    });

    // init-model
    auto* im = app.add_subcommand("init-model", "Write an untrained checkpoint for a graph");
    std::string im_out, im_kind = "arma_conv";
    std::size_t im_layers = 3, im_channels = 64, im_horizon = 90;
    std::uint64_t im_seed = 1;
    GraphOpts im_graph;
    im->add_option("-o,--out", im_out, "Checkpoint file")->required();
    im->add_option("--layers", im_layers, "Hidden layers");
    im->add_option("--channels", im_channels, "Channels per hidden layer");
    im->add_option("--kind", im_kind, "dense, gcn_conv or arma_conv");
    im->add_option("--horizon", im_horizon, "Predicted days");
    im->add_option("--seed", im_seed, "Initialisation seed");
    im_graph.add(im);
    im->callback([&] {
        const auto cfg = im_graph.config();
        const auto graph = metapop::build_graph(cfg);
        surrogate::ModelSpec spec;
        spec.layers.assign(im_layers, layer_from(im_kind, im_channels, "elu", 2, 1));
        spec.input_width = scenario::kSpatialWidth;
        spec.output_width = im_horizon * 48;
        surrogate::Checkpoint ckpt{surrogate::Network<float>(spec, im_seed), {}, {}};
        ckpt.meta.seed = im_seed;
        ckpt.data = {{"nodes", graph.size()}, {"horizon", im_horizon}, {"spatial", true}, {"graph", metapop::to_json(cfg)}};
        surrogate::save_checkpoint(im_out, ckpt);
    });

    // run-scenario
    auto* rs = app.add_subcommand("run-scenario", "Answer one service request without the network");
    std::string rs_request, rs_out, rs_ckpt;
    GraphOpts rs_graph;
    rs->add_option("request", rs_request, "Request JSON file")->required();
    rs->add_option("--checkpoint", rs_ckpt, "Checkpoint for surrogate requests");
    rs->add_option("-o,--out", rs_out, "Response JSON (default stdout)");
    rs_graph.add(rs);
    rs->callback([&] {
        service::ServiceConfig cfg;
        cfg.graph = rs_graph.config();
        cfg.checkpoint = rs_ckpt;
        service::ScenarioService svc(cfg, &std::cerr);
        svc.start();
        if (!rs_ckpt.empty() && !svc.ready()) throw Error("checkpoint " + rs_ckpt + " could not be loaded");
        std::ifstream in(rs_request);
        if (!in) throw IoError("cannot open " + rs_request);
        std::stringstream body;
        body << in.rdbuf();
        const auto res = svc.run(body.str(), false);
        if (res.status != 200) {
            std::cerr << res.body << '\n';
            throw Error("request failed with status " + std::to_string(res.status));
        }
        std::ofstream f;
        open_out(rs_out, f) << res.body << '\n';
    });

    // serve
    auto* sv = app.add_subcommand("serve", "HTTP scenario service");
    std::string sv_config, sv_ckpt, sv_host;
    int sv_port = -1;
    sv->add_option("--config", sv_config, "Service config JSON");
    sv->add_option("--checkpoint", sv_ckpt, "Checkpoint to load at startup");
    sv->add_option("--host", sv_host, "Bind address");
    sv->add_option("--port", sv_port, "Port (0 picks a free one)");
    sv->callback([&] {
        auto cfg = sv_config.empty() ? service::ServiceConfig{} : service::load_service_config(sv_config);
        service::apply_env_overrides(cfg);
        if (!sv_ckpt.empty()) cfg.checkpoint = sv_ckpt;
        if (!sv_host.empty()) cfg.host = sv_host;
        if (sv_port >= 0) cfg.port = sv_port;
        service::ScenarioService svc(cfg, &std::cerr);
        svc.start();
        service::HttpServer server(svc);
        const int port = server.bind(cfg.host, cfg.port);
        svc.log({{"event", "listening"}, {"host", cfg.host}, {"port", port}});
        static service::HttpServer* running = &server;
        std::signal(SIGINT, [](int) { running->stop(); });
        std::signal(SIGTERM, [](int) { running->stop(); });
        server.listen();
    });

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
