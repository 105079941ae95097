#include "fedseg/experiment.hpp"

#include "fedseg/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedseg {

int FoldPlan::fold_size(int fold) const {
    int n = 0;
    for (int f : fold_of)
        if (f == fold) ++n;
    return n;
}

FoldPlan make_folds(const std::vector<std::string>& case_ids, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("make_folds: need k >= 2");
    if (static_cast<int>(case_ids.size()) < k)
        throw std::invalid_argument("make_folds: fewer cases than folds");
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.case_ids = case_ids;
    plan.fold_of.assign(case_ids.size(), 0);

    std::vector<int> order(case_ids.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0xF01D));
    rng.shuffle(order);
    for (size_t i = 0; i < order.size(); ++i)
        plan.fold_of[order[i]] = static_cast<int>(i % k);
    return plan;
}

PolarGrid default_grid_for(int image_h, int image_w) {
    const int r = std::min(image_h, image_w) / 2;
    return grid_for_image(image_h, image_w, r, 3.0);
}

ClientDataset cases_to_samples(const std::vector<PhantomCase>& cases,
                               const std::vector<int>& case_indices, CoordinateMode coords,
                               const PolarGrid& grid) {
    ClientDataset out;
    for (int ci : case_indices) {
        const PhantomCase& pc = cases[ci];
        for (int f = 0; f < pc.frame_count(); ++f) {
            TrainSample s;
            if (coords == CoordinateMode::Polar) {
                s.frame = to_polar(pc.frames[f], grid);
                s.eem = mask_to_polar(pc.eem_masks[f], grid);
                s.lumen = mask_to_polar(pc.lumen_masks[f], grid);
            } else {
                s.frame = pc.frames[f];
                s.eem = pc.eem_masks[f];
                s.lumen = pc.lumen_masks[f];
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

PipelineConfig pipeline_for(const ExperimentSpec& spec) {
    PipelineConfig p;
    p.coordinate_mode = spec.coords;
    p.binarize_threshold = spec.binarize_threshold;
    if (spec.coords == CoordinateMode::Polar) {
        p.grid = spec.grid;
        p.postprocess =
            spec.postprocess ? PostprocessKind::RadialConsolidate : PostprocessKind::None;
    } else {
        p.postprocess =
            spec.postprocess ? PostprocessKind::LargestComponentFill : PostprocessKind::None;
    }
    return p;
}

UNetConfig unet_for(const ExperimentSpec& spec, int image_h, int image_w) {
    UNetConfig u = spec.unet;
    if (spec.coords == CoordinateMode::Polar) {
        u.in_h = spec.grid.rows();
        u.in_w = spec.grid.cols();
    } else {
        u.in_h = image_h;
        u.in_w = image_w;
    }
    u.validate();
    return u;
}

struct StructureStats {
    double dsc_sum = 0, recall_sum = 0, precision_sum = 0;
    int64_t px_sum = 0;
    std::vector<double> frame_areas_mm2;
};

} // namespace

// Pools the per-case plaque agreement pairs (manual = ground truth, auto =
// model measurement) feeding the Bland-Altman analyses.
void append_indicator_pairs(Report& report, const std::vector<PhantomCase>& cases,
                            const std::vector<int>& eval_idx, const FoldReport& fr) {
    for (int ci : eval_idx) {
        const PhantomCase& pc = cases[ci];
        const double spacing2 = pc.pixel_spacing_mm * pc.pixel_spacing_mm;
        double t_area = 0, t_eem_vol = 0, t_lumen_vol = 0, t_vol = 0;
        for (int f = 0; f < pc.frame_count(); ++f) {
            t_area += static_cast<double>(pc.plaque_masks[f].count()) * spacing2;
            t_vol += static_cast<double>(pc.plaque_masks[f].count()) * spacing2 *
                     pc.frame_spacing_mm;
            t_eem_vol += static_cast<double>(pc.eem_masks[f].count()) * spacing2 *
                         pc.frame_spacing_mm;
            t_lumen_vol += static_cast<double>(pc.lumen_masks[f].count()) * spacing2 *
                           pc.frame_spacing_mm;
        }
        t_area /= pc.frame_count();
        report.plaque_area.manual.push_back(t_area);
        report.plaque_volume.manual.push_back(t_vol);
        report.burden_index.manual.push_back(
            t_eem_vol > 0 ? (t_eem_vol - t_lumen_vol) / t_eem_vol : 0.0);
    }
    for (const CaseRow& row : fr.rows) {
        if (row.structure != "plaque") continue;
        report.plaque_area.auto_vals.push_back(row.rec.area_mm2);
        report.plaque_volume.auto_vals.push_back(row.rec.volume_mm3);
        report.burden_index.auto_vals.push_back(row.rec.burden_index);
    }
}

void finalize_bland_altman(Report& report) {
    if (report.plaque_area.manual.size() < 2) return;
    report.has_bland_altman = true;
    report.ba_area = bland_altman(report.plaque_area.manual, report.plaque_area.auto_vals);
    report.ba_volume = bland_altman(report.plaque_volume.manual, report.plaque_volume.auto_vals);
    report.ba_burden = bland_altman(report.burden_index.manual, report.burden_index.auto_vals);
}

FoldReport evaluate_cases(const GlobalPair& global, const std::vector<PhantomCase>& cases,
                          const std::vector<int>& case_indices, const ExperimentSpec& spec) {
    if (case_indices.empty()) throw std::invalid_argument("evaluate_cases: nothing to evaluate");
    const PhantomCase& first = cases[case_indices.front()];
    const int img_h = first.frames[0].shape[1], img_w = first.frames[0].shape[2];
    const UNetConfig ucfg = unet_for(spec, img_h, img_w);
    const PipelineConfig pcfg = pipeline_for(spec);

    UNetModel eem_model{ucfg, global.eem, {}};
    UNetModel lumen_model{ucfg, global.lumen, {}};

    FoldReport rep;
    double dsum[3] = {0, 0, 0};
    int64_t frames_total = 0;

    for (int ci : case_indices) {
        const PhantomCase& pc = cases[ci];
        rep.eval_cases.push_back(pc.case_id);
        StructureStats stats[3]; // model-measured, per structure
        const double spacing = pc.pixel_spacing_mm;

        for (int f = 0; f < pc.frame_count(); ++f) {
            SegResult seg = segment_frame(pc.frames[f], eem_model, lumen_model, pcfg);
            const BinaryMask* pred[3] = {&seg.eem_mask, &seg.lumen_mask, &seg.plaque_mask};
            const BinaryMask* truth[3] = {&pc.eem_masks[f], &pc.lumen_masks[f],
                                          &pc.plaque_masks[f]};
            for (int s = 0; s < 3; ++s) {
                stats[s].dsc_sum += dsc(*pred[s], *truth[s]);
                auto [rec, prec] = recall_precision(*pred[s], *truth[s]);
                stats[s].recall_sum += rec;
                stats[s].precision_sum += prec;
                stats[s].px_sum += pred[s]->count();
                stats[s].frame_areas_mm2.push_back(static_cast<double>(pred[s]->count()) *
                                                   spacing * spacing);
            }
            dsum[0] += dsc(seg.eem_mask, pc.eem_masks[f]);
            dsum[1] += dsc(seg.lumen_mask, pc.lumen_masks[f]);
            dsum[2] += dsc(seg.plaque_mask, pc.plaque_masks[f]);
            ++frames_total;
        }

        const int nf = pc.frame_count();
        const char* names[3] = {"eem", "lumen", "plaque"};
        double vol[3], mean_area[3];
        for (int s = 0; s < 3; ++s) {
            vol[s] = case_volume(stats[s].frame_areas_mm2, pc.frame_spacing_mm);
            mean_area[s] = std::accumulate(stats[s].frame_areas_mm2.begin(),
                                           stats[s].frame_areas_mm2.end(), 0.0) / nf;
        }
        // volume-weighted case burden stays in [0,1] because lumen is clipped
        const double burden = vol[0] > 0 ? (vol[0] - vol[1]) / vol[0] : 0.0;

        for (int s = 0; s < 3; ++s) {
            CaseRow row;
            row.case_id = pc.case_id;
            row.structure = names[s];
            row.rec.dsc = stats[s].dsc_sum / nf;
            row.rec.recall = stats[s].recall_sum / nf;
            row.rec.precision = stats[s].precision_sum / nf;
            row.rec.area_px = stats[s].px_sum;
            row.rec.area_mm2 = mean_area[s];
            row.rec.volume_mm3 = vol[s];
            row.rec.burden_index = burden;
            rep.rows.push_back(std::move(row));
        }
    }

    rep.mean_dsc_eem = dsum[0] / static_cast<double>(frames_total);
    rep.mean_dsc_lumen = dsum[1] / static_cast<double>(frames_total);
    rep.mean_dsc_plaque = dsum[2] / static_cast<double>(frames_total);
    return rep;
}

Report run_experiment(const std::vector<PhantomCase>& cases, const ExperimentSpec& spec_in) {
    if (cases.empty()) throw std::invalid_argument("run_experiment: no cases");
    const auto t_start = std::chrono::steady_clock::now();
    ExperimentSpec spec = spec_in;
    const int img_h = cases[0].frames.at(0).shape[1];
    const int img_w = cases[0].frames.at(0).shape[2];
    if (spec.grid.max_radius == 0) spec.grid = default_grid_for(img_h, img_w);
    const UNetConfig ucfg = unet_for(spec, img_h, img_w);

    Report report;
    report.mode = spec.mode;
    report.protocol = spec.protocol;
    report.coords = spec.coords;
    report.postprocess = spec.postprocess;
    report.seed = spec.fed.seed;
    report.unet = ucfg;
    report.fed = spec.fed;

    auto eval_into_report = [&](const GlobalPair& global, const std::vector<int>& eval_idx,
                                int fold, std::vector<RoundLog> rounds) {
        FoldReport fr = evaluate_cases(global, cases, eval_idx, spec);
        fr.fold = fold;
        fr.final_params = global;
        fr.rounds = std::move(rounds);
        append_indicator_pairs(report, cases, eval_idx, fr);
        report.folds.push_back(std::move(fr));
    };

    // splits to run: k folds (CV) or one global holdout split
    struct Split {
        int fold;
        std::vector<int> train_idx, eval_idx;
    };
    std::vector<Split> splits;
    if (spec.protocol == EvalProtocol::CrossValidation) {
        std::vector<std::string> ids;
        for (const auto& c : cases) ids.push_back(c.case_id);
        FoldPlan plan = make_folds(ids, spec.cv_folds, spec.fed.seed);
        for (int fold = 0; fold < spec.cv_folds; ++fold) {
            Split s;
            s.fold = fold;
            for (size_t i = 0; i < cases.size(); ++i)
                (plan.fold_of[i] == fold ? s.eval_idx : s.train_idx).push_back(static_cast<int>(i));
            splits.push_back(std::move(s));
        }
    } else {
        // shuffle cases, hold out the tail as the verification split
        std::vector<int> order(cases.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(spec.fed.seed, 0x5B117));
        rng.shuffle(order);
        int n_holdout = static_cast<int>(std::lround(spec.holdout_fraction * cases.size()));
        n_holdout = std::max(
            1, std::min(n_holdout, static_cast<int>(cases.size()) - spec.fed.n_clients));
        Split s;
        s.fold = -1;
        s.train_idx.assign(order.begin(), order.end() - n_holdout);
        s.eval_idx.assign(order.end() - n_holdout, order.end());
        std::sort(s.eval_idx.begin(), s.eval_idx.end());
        splits.push_back(std::move(s));
    }

    for (const Split& split : splits) {
        if (spec.mode == ExperimentMode::Centralized) {
            ClientDataset train = cases_to_samples(cases, split.train_idx, spec.coords, spec.grid);
            TrainResult res = centralized_run(train, ucfg, spec.fed);
            eval_into_report(res.global, split.eval_idx, split.fold, std::move(res.rounds));
        } else {
            std::vector<BurdenBand> train_bands;
            for (int i : split.train_idx) train_bands.push_back(cases[i].band);
            std::vector<std::vector<int>> parts =
                partition_clients(train_bands, spec.fed.n_clients, spec.partition);
            std::vector<ClientDataset> client_data;
            for (const auto& part : parts) {
                std::vector<int> case_idx;
                for (int local : part) case_idx.push_back(split.train_idx[local]);
                client_data.push_back(cases_to_samples(cases, case_idx, spec.coords, spec.grid));
            }
            TrainResult res = server_run(client_data, ucfg, spec.fed, nullptr, spec.parallel);
            eval_into_report(res.global, split.eval_idx, split.fold, std::move(res.rounds));
        }
    }

    for (const FoldReport& fr : report.folds) {
        report.agg_dsc_eem += fr.mean_dsc_eem;
        report.agg_dsc_lumen += fr.mean_dsc_lumen;
        report.agg_dsc_plaque += fr.mean_dsc_plaque;
    }
    const double nf = static_cast<double>(report.folds.size());
    report.agg_dsc_eem /= nf;
    report.agg_dsc_lumen /= nf;
    report.agg_dsc_plaque /= nf;

    finalize_bland_altman(report);
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

double parse_number(const std::string& s) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw std::runtime_error("csv: bad number: " + s);
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

void write_ba_files(const BlandAltmanResult& ba, const std::vector<std::string>& case_ids,
                    const std::string& stem, const std::string& title,
                    const std::string& out_dir) {
    std::ofstream csv(out_dir + "/" + stem + ".csv", std::ios::trunc);
    csv << "stat,value\n";
    csv << "mean_diff," << format_number(ba.mean_diff) << "\n";
    csv << "sd_diff," << format_number(ba.sd_diff) << "\n";
    csv << "lower_limit," << format_number(ba.lower_limit) << "\n";
    csv << "upper_limit," << format_number(ba.upper_limit) << "\n";
    csv << "fraction_within," << format_number(ba.fraction_within) << "\n";
    csv << "case_id,mean,diff\n";
    for (size_t i = 0; i < ba.points.size(); ++i) {
        const std::string id = i < case_ids.size() ? case_ids[i] : ("p" + std::to_string(i));
        csv << id << "," << format_number(ba.points[i].first) << ","
            << format_number(ba.points[i].second) << "\n";
    }
    std::ofstream svg(out_dir + "/" + stem + ".svg", std::ios::trunc);
    svg << render_bland_altman_svg(ba, title);
}

} // namespace

std::string render_bland_altman_svg(const BlandAltmanResult& ba, const std::string& title) {
    const int width = 520, height = 390;
    const double ml = 70, mr = 20, mt = 40, mb = 50; // margins
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 0, xmax = 1, ymin = -1, ymax = 1;
    if (!ba.points.empty()) {
        xmin = xmax = ba.points[0].first;
        ymin = std::min(ba.lower_limit, ba.points[0].second);
        ymax = std::max(ba.upper_limit, ba.points[0].second);
        for (const auto& [m, d] : ba.points) {
            xmin = std::min(xmin, m);
            xmax = std::max(xmax, m);
            ymin = std::min(ymin, d);
            ymax = std::max(ymax, d);
        }
    }
    const double xpad = (xmax - xmin) > 0 ? 0.08 * (xmax - xmin) : 0.5;
    const double ypad = (ymax - ymin) > 0 ? 0.15 * (ymax - ymin) : 0.5;
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double v) { return mt + (ymax - v) / (ymax - ymin) * ph; };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    s << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
    s << "  <text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
    // axes
    s << "  <line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
    s << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
    s << "  <text x=\"" << ml + pw / 2
      << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">mean of measurements</text>\n";
    s << "  <text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\" text-anchor=\"middle\">difference (auto - manual)</text>\n";

    auto hline = [&](double y, const char* cls, const char* color, const std::string& label) {
        s << "  <line class=\"" << cls << "\" x1=\"" << ml << "\" y1=\"" << sy(y) << "\" x2=\""
          << ml + pw << "\" y2=\"" << sy(y) << "\" stroke=\"" << color
          << "\" stroke-dasharray=\"" << (std::string(cls) == "mean" ? "" : "6,4") << "\"/>\n";
        s << "  <text class=\"" << cls << "-label\" x=\"" << ml + pw - 4 << "\" y=\""
          << sy(y) - 5 << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">"
          << label << "</text>\n";
    };
    hline(ba.mean_diff, "mean", "blue", "mean " + format_number(ba.mean_diff));
    hline(ba.upper_limit, "limit", "red", "+1.96 SD " + format_number(ba.upper_limit));
    hline(ba.lower_limit, "limit", "red", "-1.96 SD " + format_number(ba.lower_limit));

    for (const auto& [m, d] : ba.points)
        s << "  <circle class=\"point\" cx=\"" << sx(m) << "\" cy=\"" << sy(d)
          << "\" r=\"3.5\" fill=\"black\" fill-opacity=\"0.65\"/>\n";
    s << "</svg>\n";
    return s.str();
}

void emit_report(const Report& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::ofstream csv(out_dir + "/metrics.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write metrics.csv in " + out_dir);
    csv << "case_id,structure,dsc,recall,precision,area_mm2,volume_mm3,burden_index\n";
    for (const FoldReport& fr : report.folds)
        for (const CaseRow& row : fr.rows)
            csv << row.case_id << "," << row.structure << "," << format_number(row.rec.dsc) << ","
                << format_number(row.rec.recall) << "," << format_number(row.rec.precision) << ","
                << format_number(row.rec.area_mm2) << "," << format_number(row.rec.volume_mm3)
                << "," << format_number(row.rec.burden_index) << "\n";
    csv.close();

    if (report.has_bland_altman) {
        std::vector<std::string> ids;
        for (const FoldReport& fr : report.folds)
            for (const std::string& id : fr.eval_cases) ids.push_back(id);
        write_ba_files(report.ba_area, ids, "bland_altman_plaque_area", "Plaque Area (mm^2)",
                       out_dir);
        write_ba_files(report.ba_volume, ids, "bland_altman_plaque_volume", "Plaque Volume (mm^3)",
                       out_dir);
        write_ba_files(report.ba_burden, ids, "bland_altman_burden_index", "Plaque Burden Index",
                       out_dir);
    }

    nlohmann::json j;
    j["mode"] = report.mode == ExperimentMode::Centralized ? "centralized" : "federated";
    j["protocol"] =
        report.protocol == EvalProtocol::CrossValidation ? "cross_validation" : "holdout";
    j["coords"] = report.coords == CoordinateMode::Polar ? "polar" : "cartesian";
    j["postprocess"] = report.postprocess;
    j["seed"] = report.seed;
    j["unet"] = {{"in_h", report.unet.in_h},
                 {"in_w", report.unet.in_w},
                 {"depth", report.unet.depth},
                 {"base_channels", report.unet.base_channels}};
    j["fed"] = {{"n_clients", report.fed.n_clients},
                {"rounds", report.fed.rounds},
                {"local_epochs", report.fed.local_epochs},
                {"batch_size", report.fed.batch_size},
                {"learning_rate", report.fed.learning_rate},
                {"l2_lambda", report.fed.l2_lambda},
                {"loss_omega", report.fed.loss_omega},
                {"optimizer", report.fed.optimizer == OptimizerKind::Adam ? "adam" : "sgd"}};
    j["aggregate_dsc"] = {{"eem", report.agg_dsc_eem},
                          {"lumen", report.agg_dsc_lumen},
                          {"plaque", report.agg_dsc_plaque}};
    // reference values from the source clinical study; not comparable to
    // phantom results (different data), kept for orientation only
    j["reference_clinical_dsc"] = {{"eem", 0.890},
                                   {"lumen", 0.877},
                                   {"plaque", 0.706},
                                   {"note", "not comparable (different data)"}};
    j["folds"] = nlohmann::json::array();
    for (const FoldReport& fr : report.folds) {
        nlohmann::json f;
        f["fold"] = fr.fold;
        f["eval_cases"] = fr.eval_cases;
        f["mean_dsc"] = {{"eem", fr.mean_dsc_eem},
                         {"lumen", fr.mean_dsc_lumen},
                         {"plaque", fr.mean_dsc_plaque}};
        nlohmann::json rounds = nlohmann::json::array();
        for (const RoundLog& rl : fr.rounds) {
            rounds.push_back({{"round", rl.round},
                              {"client_samples", rl.client_samples},
                              {"client_loss", rl.client_loss}});
        }
        f["rounds"] = std::move(rounds);
        j["folds"].push_back(std::move(f));
    }
    j["versions"] = {{"fedseg", "0.1.0"}, {"ivwt", 1}, {"wire", 1}};
    const auto now = std::chrono::system_clock::now();
    // wall-clock fields; everything else in this file is seed-reproducible
    j["timings"] = {{"timestamp_unix", std::chrono::duration_cast<std::chrono::seconds>(
                                           now.time_since_epoch())
                                           .count()},
                    {"elapsed_seconds", report.elapsed_seconds}};

    std::ofstream rj(out_dir + "/run.json", std::ios::trunc);
    rj << j.dump(2) << "\n";
}

std::vector<CaseRow> read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("csv: empty file " + path);
    if (line != "case_id,structure,dsc,recall,precision,area_mm2,volume_mm3,burden_index")
        throw std::runtime_error("csv: unexpected header in " + path);
    std::vector<CaseRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 8) throw std::runtime_error("csv: bad row: " + line);
        CaseRow row;
        row.case_id = fields[0];
        row.structure = fields[1];
        row.rec.dsc = parse_number(fields[2]);
        row.rec.recall = parse_number(fields[3]);
        row.rec.precision = parse_number(fields[4]);
        row.rec.area_mm2 = parse_number(fields[5]);
        row.rec.volume_mm3 = parse_number(fields[6]);
        row.rec.burden_index = parse_number(fields[7]);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace fedseg
