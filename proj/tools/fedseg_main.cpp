// fedseg command-line driver: dataset generation, training runs (in-process
// or over the wire), evaluation and report rendering.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fedseg/experiment.hpp"
#include "fedseg/fedavg.hpp"
#include "fedseg/phantom.hpp"
#include "fedseg/transport.hpp"
#include "fedseg/weights_io.hpp"

using namespace fedseg;

namespace {

struct CliConfig {
    uint64_t seed = 20250808;
    UNetConfig unet;
    FedConfig fed;
    double binarize_threshold = 0.5;
    int polar_radius = 0; // 0 = derive from the image size
    double polar_step_deg = 3.0;
    int cv_folds = 5;
    double holdout_fraction = 16.0 / 151.0;
    PartitionMode partition = PartitionMode::Iid;
};

CliConfig load_config(const std::string& path) {
    CliConfig c;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config " + path);
        nlohmann::json j;
        f >> j;
        c.seed = j.value("seed", c.seed);
        if (j.contains("unet")) {
            const auto& u = j["unet"];
            c.unet.depth = u.value("depth", c.unet.depth);
            c.unet.base_channels = u.value("base_channels", c.unet.base_channels);
        }
        if (j.contains("fed")) {
            const auto& g = j["fed"];
            c.fed.n_clients = g.value("n_clients", c.fed.n_clients);
            c.fed.rounds = g.value("rounds", c.fed.rounds);
            c.fed.local_epochs = g.value("local_epochs", c.fed.local_epochs);
            c.fed.batch_size = g.value("batch_size", c.fed.batch_size);
            c.fed.learning_rate = g.value("learning_rate", c.fed.learning_rate);
            c.fed.l2_lambda = g.value("l2_lambda", c.fed.l2_lambda);
            c.fed.loss_omega = g.value("loss_omega", c.fed.loss_omega);
            const std::string opt = g.value("optimizer", std::string("adam"));
            c.fed.optimizer = opt == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
        }
        if (j.contains("pipeline")) {
            const auto& p = j["pipeline"];
            c.binarize_threshold = p.value("binarize_threshold", c.binarize_threshold);
            c.polar_radius = p.value("polar_radius", c.polar_radius);
            c.polar_step_deg = p.value("polar_step_deg", c.polar_step_deg);
        }
        if (j.contains("experiment")) {
            const auto& e = j["experiment"];
            c.cv_folds = e.value("cv_folds", c.cv_folds);
            c.holdout_fraction = e.value("holdout_fraction", c.holdout_fraction);
            if (e.value("partition", std::string("iid")) == "by_band")
                c.partition = PartitionMode::ByBand;
        }
    }
    if (const char* env = std::getenv("FEDSEG_SEED")) c.seed = std::strtoull(env, nullptr, 10);
    c.fed.seed = c.seed;
    c.unet.seed = c.seed;
    return c;
}

PolarGrid grid_from(const CliConfig& c, int image_h, int image_w) {
    const int radius = c.polar_radius > 0 ? c.polar_radius : std::min(image_h, image_w) / 2;
    return grid_for_image(image_h, image_w, radius, c.polar_step_deg);
}

std::pair<std::string, uint16_t> parse_host_port(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw std::runtime_error("expected host:port, got " + s);
    return {s.substr(0, colon), static_cast<uint16_t>(std::stoi(s.substr(colon + 1)))};
}

ExperimentSpec spec_from(const CliConfig& c, const std::string& mode, const std::string& coords,
                         bool post, int image_h, int image_w,
                         const std::string& protocol = "auto") {
    ExperimentSpec spec;
    spec.mode = mode == "centralized" ? ExperimentMode::Centralized : ExperimentMode::Federated;
    // the source protocol pairs CV with centralized evaluation and the global
    // verification split with the federated setup; both remain selectable
    if (protocol == "cv")
        spec.protocol = EvalProtocol::CrossValidation;
    else if (protocol == "holdout")
        spec.protocol = EvalProtocol::Holdout;
    else
        spec.protocol = spec.mode == ExperimentMode::Centralized ? EvalProtocol::CrossValidation
                                                                 : EvalProtocol::Holdout;
    spec.coords = coords == "polar" ? CoordinateMode::Polar : CoordinateMode::Cartesian;
    spec.postprocess = post;
    spec.unet = c.unet;
    spec.fed = c.fed;
    spec.binarize_threshold = c.binarize_threshold;
    spec.grid = grid_from(c, image_h, image_w);
    spec.cv_folds = c.cv_folds;
    spec.holdout_fraction = c.holdout_fraction;
    spec.partition = c.partition;
    return spec;
}

int cmd_gen(uint64_t seed, int n_cases, const std::string& bands, const std::string& out,
            int image_size, int min_frames, int max_frames, bool dropout,
            double dropout_strength) {
    PhantomConfig cfg;
    cfg.image_size = image_size;
    cfg.min_frames = min_frames;
    cfg.max_frames = max_frames;
    cfg.noise.lateral_dropout = dropout;
    cfg.noise.dropout_strength = dropout_strength;

    std::array<double, 3> mix = default_band_mix();
    if (!bands.empty()) {
        if (std::sscanf(bands.c_str(), "%lf,%lf,%lf", &mix[0], &mix[1], &mix[2]) != 3)
            throw std::runtime_error("--bands expects three comma-separated proportions");
    }
    DatasetManifest m = gen_dataset(seed, n_cases, mix, cfg, out);
    int64_t frames = 0;
    for (const auto& c : m.cases) frames += c.frame_count;
    std::cout << "generated " << m.cases.size() << " cases (" << frames << " frames) under " << out
              << "\n";
    return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& mode, const std::string& coords,
              const std::string& post, const std::string& config_path, const std::string& out,
              bool no_parallel, const std::string& protocol) {
    CliConfig c = load_config(config_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    const std::string root = std::filesystem::path(manifest_path).parent_path().string();
    std::vector<PhantomCase> cases = load_cases(manifest, root.empty() ? "." : root);

    ExperimentSpec spec = spec_from(c, mode, coords, post == "on", manifest.image_size,
                                    manifest.image_size, protocol);
    spec.parallel = !no_parallel;

    Report report = run_experiment(cases, spec);
    emit_report(report, out);
    for (const FoldReport& fr : report.folds) {
        const std::string name =
            fr.fold < 0 ? "weights.ivwt" : "weights_fold" + std::to_string(fr.fold) + ".ivwt";
        ivwt_save(combine_pair(fr.final_params), out + "/" + name);
    }

    std::cout << "aggregate DSC  eem " << format_number(report.agg_dsc_eem) << "  lumen "
              << format_number(report.agg_dsc_lumen) << "  plaque "
              << format_number(report.agg_dsc_plaque) << "\n";
    std::cout << "report written to " << out << "\n";
    return 0;
}

int cmd_serve(const std::string& listen, const std::string& config_path, const std::string& coords,
              int image_size, const std::string& out) {
    CliConfig c = load_config(config_path);
    auto [host, port] = parse_host_port(listen);
    UNetConfig u = c.unet;
    if (coords == "polar") {
        PolarGrid g = grid_from(c, image_size, image_size);
        u.in_h = g.rows();
        u.in_w = g.cols();
    } else {
        u.in_h = u.in_w = image_size;
    }
    u.validate();

    WireServerOptions opt;
    opt.host = host;
    opt.port = port;
    WireServer server(u, c.fed, opt);
    std::cout << "listening on " << host << ":" << server.port() << " for " << c.fed.n_clients
              << " clients, " << c.fed.rounds << " rounds\n";
    TrainResult res = server.serve();
    std::filesystem::create_directories(out);
    ivwt_save(combine_pair(res.global), out + "/weights.ivwt");
    std::cout << "final weights written to " << out << "/weights.ivwt\n";
    return 0;
}

int cmd_client(const std::string& connect, int id, const std::string& manifest_path,
               const std::string& config_path, const std::string& coords) {
    CliConfig c = load_config(config_path);
    auto [host, port] = parse_host_port(connect);
    DatasetManifest manifest = load_manifest(manifest_path);
    const std::string root = std::filesystem::path(manifest_path).parent_path().string();
    std::vector<PhantomCase> cases = load_cases(manifest, root.empty() ? "." : root);

    // deterministic self-partition: every client derives the same split
    std::vector<BurdenBand> bands;
    for (const auto& pc : cases) bands.push_back(pc.band);
    auto parts = partition_clients(bands, c.fed.n_clients, c.partition);
    if (id < 0 || id >= c.fed.n_clients) throw std::runtime_error("--id out of range");

    const CoordinateMode cm = coords == "polar" ? CoordinateMode::Polar : CoordinateMode::Cartesian;
    PolarGrid grid = grid_from(c, manifest.image_size, manifest.image_size);
    ClientDataset data = cases_to_samples(cases, parts[id], cm, grid);

    UNetConfig u = c.unet;
    if (cm == CoordinateMode::Polar) {
        u.in_h = grid.rows();
        u.in_w = grid.cols();
    } else {
        u.in_h = u.in_w = manifest.image_size;
    }
    u.validate();

    std::cout << "client " << id << ": " << parts[id].size() << " cases, " << data.size()
              << " frames\n";
    run_wire_client(host, port, id, data, u, c.fed);
    std::cout << "client " << id << " finished\n";
    return 0;
}

int cmd_eval(const std::string& weights_path, const std::string& manifest_path,
             const std::string& config_path, const std::string& coords, const std::string& post,
             const std::string& out) {
    CliConfig c = load_config(config_path);
    DatasetManifest manifest = load_manifest(manifest_path);
    const std::string root = std::filesystem::path(manifest_path).parent_path().string();
    std::vector<PhantomCase> cases = load_cases(manifest, root.empty() ? "." : root);

    GlobalPair pair = split_pair(ivwt_load(weights_path));
    ExperimentSpec spec = spec_from(c, "federated", coords, post == "on", manifest.image_size,
                                    manifest.image_size);

    std::vector<int> all(cases.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

    Report report;
    report.mode = spec.mode;
    report.coords = spec.coords;
    report.postprocess = spec.postprocess;
    report.seed = c.seed;
    report.unet = spec.unet;
    report.fed = spec.fed;
    FoldReport fr = evaluate_cases(pair, cases, all, spec);
    report.agg_dsc_eem = fr.mean_dsc_eem;
    report.agg_dsc_lumen = fr.mean_dsc_lumen;
    report.agg_dsc_plaque = fr.mean_dsc_plaque;
    append_indicator_pairs(report, cases, all, fr);
    finalize_bland_altman(report);
    report.folds.push_back(std::move(fr));
    emit_report(report, out);
    std::cout << "eval DSC  eem " << format_number(report.agg_dsc_eem) << "  lumen "
              << format_number(report.agg_dsc_lumen) << "  plaque "
              << format_number(report.agg_dsc_plaque) << "\n";
    return 0;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
    std::vector<CaseRow> rows = read_metrics_csv(in_dir + "/metrics.csv");
    std::filesystem::create_directories(out_dir);

    double sums[3] = {0, 0, 0};
    int counts[3] = {0, 0, 0};
    for (const CaseRow& row : rows) {
        const int s = row.structure == "eem" ? 0 : row.structure == "lumen" ? 1 : 2;
        sums[s] += row.rec.dsc;
        counts[s]++;
    }
    std::cout << "cases: " << counts[0] << "\n";
    const char* names[3] = {"eem", "lumen", "plaque"};
    for (int s = 0; s < 3; ++s)
        if (counts[s])
            std::cout << names[s] << " mean DSC " << format_number(sums[s] / counts[s]) << "\n";

    // re-render Bland-Altman SVGs from the point CSVs when present
    for (const std::string stem : {"bland_altman_plaque_area", "bland_altman_plaque_volume",
                                   "bland_altman_burden_index"}) {
        std::ifstream f(in_dir + "/" + stem + ".csv");
        if (!f) continue;
        std::string line;
        std::vector<double> manual, autos;
        bool in_points = false;
        while (std::getline(f, line)) {
            if (line == "case_id,mean,diff") {
                in_points = true;
                continue;
            }
            if (!in_points) continue;
            const auto c1 = line.find(',');
            const auto c2 = line.rfind(',');
            if (c1 == std::string::npos || c2 <= c1) continue;
            const double mean = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
            const double diff = std::stod(line.substr(c2 + 1));
            manual.push_back(mean - diff / 2.0);
            autos.push_back(mean + diff / 2.0);
        }
        if (manual.size() >= 2) {
            BlandAltmanResult ba = bland_altman(manual, autos);
            std::ofstream svg(out_dir + "/" + stem + ".svg", std::ios::trunc);
            svg << render_bland_altman_svg(ba, stem);
            std::cout << "rendered " << out_dir << "/" << stem << ".svg\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated IVUS plaque segmentation on synthetic phantoms"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a phantom dataset");
    uint64_t gen_seed = 20250808;
    int gen_cases_n = 45, gen_img = 64, gen_minf = 8, gen_maxf = 16;
    std::string gen_bands, gen_out = "dataset";
    bool gen_dropout = false;
    double gen_dropout_strength = 0.85;
    gen->add_option("--seed", gen_seed, "global seed");
    gen->add_option("--cases", gen_cases_n, "number of cases");
    gen->add_option("--bands", gen_bands,
                    "low,moderate,high proportions (default from the reference distribution)");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--image-size", gen_img, "frame size in pixels");
    gen->add_option("--min-frames", gen_minf, "min frames per case");
    gen->add_option("--max-frames", gen_maxf, "max frames per case");
    gen->add_flag("--dropout", gen_dropout, "inject lateral signal dropout");
    gen->add_option("--dropout-strength", gen_dropout_strength, "dropout strength in [0,1]");

    // train
    auto* train = app.add_subcommand("train", "train and evaluate per the experiment spec");
    std::string tr_manifest, tr_mode = "federated", tr_coords = "cartesian", tr_post = "on",
                tr_config, tr_out = "run", tr_protocol = "auto";
    bool tr_noparallel = false;
    train->add_option("--manifest", tr_manifest, "dataset manifest.json")->required();
    train->add_option("--mode", tr_mode, "centralized|federated")
        ->check(CLI::IsMember({"centralized", "federated"}));
    train->add_option("--coords", tr_coords, "cartesian|polar")
        ->check(CLI::IsMember({"cartesian", "polar"}));
    train->add_option("--post", tr_post, "on|off")->check(CLI::IsMember({"on", "off"}));
    train->add_option("--config", tr_config, "config JSON file");
    train->add_option("--out", tr_out, "output directory");
    train->add_option("--eval", tr_protocol, "cv|holdout (default: cv for centralized, holdout for federated)")
        ->check(CLI::IsMember({"auto", "cv", "holdout"}));
    train->add_flag("--no-parallel", tr_noparallel, "run clients sequentially");

    // serve
    auto* serve = app.add_subcommand("serve", "wire-mode FedAvg server");
    std::string sv_listen = "127.0.0.1:7733", sv_config, sv_coords = "cartesian",
                sv_out = "server_run";
    int sv_img = 64;
    serve->add_option("--listen", sv_listen, "host:port to listen on");
    serve->add_option("--config", sv_config, "config JSON file");
    serve->add_option("--coords", sv_coords, "cartesian|polar")
        ->check(CLI::IsMember({"cartesian", "polar"}));
    serve->add_option("--image-size", sv_img, "frame size the clients train on");
    serve->add_option("--out", sv_out, "output directory for the final weights");

    // client
    auto* client = app.add_subcommand("client", "wire-mode FedAvg client");
    std::string cl_connect = "127.0.0.1:7733", cl_manifest, cl_config, cl_coords = "cartesian";
    int cl_id = 0;
    client->add_option("--connect", cl_connect, "server host:port");
    client->add_option("--id", cl_id, "client id in [0, n_clients)")->required();
    client->add_option("--manifest", cl_manifest, "dataset manifest.json")->required();
    client->add_option("--config", cl_config, "config JSON file");
    client->add_option("--coords", cl_coords, "cartesian|polar")
        ->check(CLI::IsMember({"cartesian", "polar"}));

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate saved weights on a dataset");
    std::string ev_weights, ev_manifest, ev_config, ev_coords = "cartesian", ev_post = "on",
                ev_out = "eval_run";
    eval->add_option("--weights", ev_weights, "IVWT weight file")->required();
    eval->add_option("--manifest", ev_manifest, "dataset manifest.json")->required();
    eval->add_option("--config", ev_config, "config JSON file");
    eval->add_option("--coords", ev_coords, "cartesian|polar")
        ->check(CLI::IsMember({"cartesian", "polar"}));
    eval->add_option("--post", ev_post, "on|off")->check(CLI::IsMember({"on", "off"}));
    eval->add_option("--out", ev_out, "output directory");

    // report
    auto* rep = app.add_subcommand("report", "summarize metrics.csv and re-render plots");
    std::string rp_in, rp_out = "report";
    rep->add_option("--in", rp_in, "directory holding metrics.csv")->required();
    rep->add_option("--out", rp_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen(gen_seed, gen_cases_n, gen_bands, gen_out, gen_img, gen_minf, gen_maxf,
                           gen_dropout, gen_dropout_strength);
        if (train->parsed())
            return cmd_train(tr_manifest, tr_mode, tr_coords, tr_post, tr_config, tr_out,
                             tr_noparallel, tr_protocol);
        if (serve->parsed()) return cmd_serve(sv_listen, sv_config, sv_coords, sv_img, sv_out);
        if (client->parsed())
            return cmd_client(cl_connect, cl_id, cl_manifest, cl_config, cl_coords);
        if (eval->parsed())
            return cmd_eval(ev_weights, ev_manifest, ev_config, ev_coords, ev_post, ev_out);
        if (rep->parsed()) return cmd_report(rp_in, rp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
