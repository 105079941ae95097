#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedseg/fedavg.hpp"
#include "fedseg/loss.hpp"
#include "fedseg/phantom.hpp"
#include "fedseg/pipeline.hpp"

namespace fedseg {

// Case-level fold assignment ("folds at the patient level"): seeded shuffle
// then round-robin, fold sizes within one of each other.
struct FoldPlan {
    int k = 5;
    uint64_t seed = 0;
    std::vector<std::string> case_ids;
    std::vector<int> fold_of; // aligned with case_ids

    int fold_size(int fold) const;
};

FoldPlan make_folds(const std::vector<std::string>& case_ids, int k, uint64_t seed);

enum class ExperimentMode { Centralized, Federated };

// The source protocol reports both k-fold cross-validation and a global
// train/verification split; both are supported for either training mode and
// the outputs are labeled accordingly.
enum class EvalProtocol { CrossValidation, Holdout };

struct ExperimentSpec {
    ExperimentMode mode = ExperimentMode::Federated;
    CoordinateMode coords = CoordinateMode::Cartesian;
    bool postprocess = true;
    UNetConfig unet; // spatial dims are set from the data / polar grid
    FedConfig fed;
    double binarize_threshold = 0.5;
    PolarGrid grid; // filled from the image size when unset
    EvalProtocol protocol = EvalProtocol::Holdout;
    int cv_folds = 5;
    double holdout_fraction = 16.0 / 151.0; // ~ 16 of 151 cases
    PartitionMode partition = PartitionMode::Iid;
    bool parallel = true;
};

struct CaseRow {
    std::string case_id;
    std::string structure; // "eem" | "lumen" | "plaque"
    MetricsRecord rec;
};

struct FoldReport {
    int fold = -1; // -1 = federated holdout evaluation
    GlobalPair final_params;
    std::vector<std::string> eval_cases;
    std::vector<CaseRow> rows;
    // frame-level means over every evaluated frame
    double mean_dsc_eem = 0, mean_dsc_lumen = 0, mean_dsc_plaque = 0;
    std::vector<RoundLog> rounds;
};

struct IndicatorPairs {
    std::vector<double> manual; // ground truth
    std::vector<double> auto_vals;
};

struct Report {
    ExperimentMode mode = ExperimentMode::Federated;
    EvalProtocol protocol = EvalProtocol::Holdout;
    CoordinateMode coords = CoordinateMode::Cartesian;
    bool postprocess = true;
    uint64_t seed = 0;
    UNetConfig unet;
    FedConfig fed;
    std::vector<FoldReport> folds;
    double agg_dsc_eem = 0, agg_dsc_lumen = 0, agg_dsc_plaque = 0; // mean over folds
    // plaque indicators per evaluated case: area (mm^2), volume (mm^3), burden index
    IndicatorPairs plaque_area, plaque_volume, burden_index;
    bool has_bland_altman = false;
    BlandAltmanResult ba_area, ba_volume, ba_burden;
    double elapsed_seconds = 0.0;
};

Report run_experiment(const std::vector<PhantomCase>& cases, const ExperimentSpec& spec);

// Evaluates a trained pair on the given cases (Cartesian frame space).
FoldReport evaluate_cases(const GlobalPair& global, const std::vector<PhantomCase>& cases,
                          const std::vector<int>& case_indices, const ExperimentSpec& spec);

// Pools per-case plaque indicator pairs (truth vs model) into the report and
// computes the Bland-Altman statistics once at least two cases are present.
void append_indicator_pairs(Report& report, const std::vector<PhantomCase>& cases,
                            const std::vector<int>& eval_idx, const FoldReport& fr);
void finalize_bland_altman(Report& report);

// Writes metrics.csv, bland_altman_<indicator>.{csv,svg} and run.json.
void emit_report(const Report& report, const std::string& out_dir);

// Shortest round-trip decimal representation; shared by the CSV and the SVG
// annotations so both carry identical strings.
std::string format_number(double v);

std::vector<CaseRow> read_metrics_csv(const std::string& path);

std::string render_bland_altman_svg(const BlandAltmanResult& ba, const std::string& title);

// Training-space conversion used by both training and the CLI.
ClientDataset cases_to_samples(const std::vector<PhantomCase>& cases,
                               const std::vector<int>& case_indices, CoordinateMode coords,
                               const PolarGrid& grid);

PolarGrid default_grid_for(int image_h, int image_w);

} // namespace fedseg
