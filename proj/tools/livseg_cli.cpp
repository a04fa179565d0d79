// Command-line front end for the two-step liver/tumor pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "livseg/clinical.hpp"
#include "livseg/config.hpp"
#include "livseg/error.hpp"
#include "livseg/metrics.hpp"
#include "livseg/nifti.hpp"
#include "livseg/phantom.hpp"
#include "livseg/pipeline.hpp"
#include "livseg/preprocess.hpp"
#include "livseg/report.hpp"

namespace fs = std::filesystem;
using namespace livseg;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

PipelineConfig load(const Common& c) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig::desk_scale() : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

void add_common(CLI::App* app, Common& c, bool out_required = true) {
    app->add_option("--config", c.config, "flat key = value configuration file");
    app->add_option("--seed", c.seed, "random seed (overrides the config)");
    auto* o = app->add_option("--out", c.out, "output file or directory");
    if (out_required) o->required();
}

fs::path ct_path(const fs::path& dir, const std::string& id) { return dir / (id + "_ct.nii"); }
fs::path labels_path(const fs::path& dir, const std::string& id) { return dir / (id + "_labels.nii"); }

Mask split_label(const Mask& labels, Tissue t, std::uint8_t value) {
    return Mask::from_binary(labels.grid(), labels.binary(t), value);
}

/// Loads a dataset written by `phantom`: clinical.csv plus one CT and one
/// label volume per patient id.
std::vector<Phantom> load_dataset(const fs::path& dir) {
    const ClinicalTable table = read_clinical_csv(dir / "clinical.csv");
    if (table.features != clinical_schema()) {
        throw Error(Errc::BadFormat, "clinical.csv columns must follow the schema order");
    }
    std::vector<Phantom> out;
    for (const auto& rec : table.records) {
        Phantom p;
        p.ct = read_nifti(ct_path(dir, rec.patient_id));
        const Mask labels = read_mask_nifti(labels_path(dir, rec.patient_id));
        p.liver = split_label(labels, Tissue::Liver, kLiverLabel);
        p.tumor = split_label(labels, Tissue::Tumor, kTumorLabel);
        p.record = rec;
        out.push_back(std::move(p));
    }
    return out;
}

int cmd_phantom(const Common& c, std::size_t n, const std::string& contrast) {
    const PipelineConfig cfg = load(c);
    const PhantomSpec spec = contrast == "low" ? low_contrast_spec() : high_contrast_spec();
    const fs::path dir = c.out;
    fs::create_directories(dir);
    ClinicalTable table;
    table.features = clinical_schema();
    for (const auto& p : generate_dataset(spec, n, cfg.seed)) {
        write_nifti(p.ct, ct_path(dir, p.record.patient_id));
        write_mask_nifti(combine_labels(p.liver, p.tumor), labels_path(dir, p.record.patient_id));
        table.records.push_back(p.record);
    }
    write_clinical_csv(table, dir / "clinical.csv");
    std::cout << "wrote " << n << " phantoms to " << dir.string() << '\n';
    return 0;
}

int cmd_clinical_fit(const Common& c, const std::string& csv) {
    const PipelineConfig cfg = load(c);
    const ClinicalTable table = read_clinical_csv(csv);
    std::vector<double> labels;
    for (const auto& r : table.records) {
        if (!r.tlvr) throw Error(Errc::MissingColumn, "every record needs a tlvr label for fitting");
        labels.push_back(*r.tlvr);
    }
    SelectionOptions opt;
    opt.seed = cfg.seed;
    const Selection sel = select_features(table, labels, opt);
    const fs::path dir = c.out;
    fs::create_directories(dir);
    write_selection_curve_csv(sel.report, dir / "selection_curve.csv");
    write_coefficients_csv(sel.model, dir / "coefficients.csv");
    save_linear_model(sel.model, dir / "model.txt");
    std::cout << "selected " << sel.report.best_n << " features, CV Pearson " << sel.report.best_cv_pearson << '\n';
    if (!sel.report.informative) {
        std::cerr << "warning: clinical features carry little signal (CV Pearson below "
                  << kMinInformativePearson << ")\n";
    }
    return 0;
}

int cmd_train(const Common& c, const std::string& task, const std::string& data, const std::string& clinical_model,
              const std::string& val_data) {
    const PipelineConfig cfg = load(c);
    const auto items = load_dataset(data);
    const auto val = val_data.empty() ? std::vector<Phantom>{} : load_dataset(val_data);
    TrainResult result;
    if (task == "liver") {
        result = train_liver_model(items, val, cfg);
    } else {
        std::vector<double> r_hat(items.size(), 0.0);
        if (cfg.tumor_loss.weak > 0.0) {
            if (clinical_model.empty()) {
                throw Error(Errc::InvalidArgument, "--clinical-model is required when tumor.loss.weak > 0");
            }
            const LinearModel model = load_linear_model(clinical_model);
            for (std::size_t i = 0; i < items.size(); ++i) r_hat[i] = weak_label(model, items[i].record);
        }
        result = train_tumor_model(items, val, r_hat, cfg);
    }
    const fs::path out = c.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_params(result.params, out);
    fs::path curves = out;
    curves.replace_extension(".curves.csv");
    write_curves_csv(result.curves, curves);
    std::cout << "best epoch " << result.best_epoch << ", final training loss "
              << result.curves.epochs.back().total << '\n';
    return 0;
}

int cmd_segment(const Common& c, const std::string& ct, const std::string& liver_model,
                const std::string& tumor_model) {
    const PipelineConfig cfg = load(c);
    const TwoStepResult r = run_two_step(read_nifti(ct), load_params(liver_model), load_params(tumor_model), cfg);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    const fs::path dir = c.out;
    fs::create_directories(dir);
    write_mask_nifti(r.liver, dir / "liver.nii");
    write_mask_nifti(r.tumor, dir / "tumor.nii");
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& pred_liver, const std::string& pred_tumor,
                 const std::string& truth, const std::string& method) {
    const Mask gt = standardize_orientation(read_mask_nifti(truth));
    const Mask pl = read_mask_nifti(pred_liver);
    const Mask pt = read_mask_nifti(pred_tumor);
    const Mask gt_liver = Mask::from_binary(gt.grid(), gt.foreground(), kLiverLabel);
    const Mask gt_tumor = split_label(gt, Tissue::Tumor, kTumorLabel);
    const Mask pl_whole = Mask::from_binary(pl.grid(), pl.foreground(), kLiverLabel);
    const Mask pt_tumor = Mask::from_binary(pt.grid(), pt.foreground(), kTumorLabel);
    const MetricsReport m = evaluate(pl_whole, pt_tumor, gt_liver, gt_tumor);
    const std::vector<CohortRow> rows{aggregate(method, "liver", std::vector<Scores>{m.liver}),
                                      aggregate(method, "tumor", std::vector<Scores>{m.tumor})};
    write_cohort_csv(rows, c.out, true);
    std::cout << cohort_csv(rows, true);
    return 0;
}

int cmd_ablate(const Common& c, std::size_t seeds, const std::string& contrast) {
    AblationConfig a;
    a.pipeline = load(c);
    if (contrast == "high") a.spec = high_contrast_spec();
    a.seeds.clear();
    for (std::size_t s = 0; s < seeds; ++s) a.seeds.push_back(a.pipeline.seed + 1 + s);
    const AblationResult r = run_ablation(a);
    write_ablation_outputs(r, c.out);
    std::cout << cohort_csv(r.rows);
    for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
        std::cout << "mean tumor dice " << variant_name(kAllVariants[v]) << ": " << r.mean_tumor_dice[v] << '\n';
    }
    return 0;
}

int cmd_smoothing(const Common& c, std::size_t seeds) {
    SmoothingConfig s;
    s.pipeline = load(c);
    s.seeds.clear();
    for (std::size_t k = 0; k < seeds; ++k) s.seeds.push_back(s.pipeline.seed + 1 + k);
    const SmoothingSummary r = run_smoothing_experiment(s);
    write_smoothing_outputs(r, c.out);
    std::ifstream summary(fs::path(c.out) / "summary.txt");
    std::cout << summary.rdbuf();
    return 0;
}

int cmd_report(const Common& c, const std::string& liver, const std::string& tumor, const std::string& clinical,
               const std::string& patient) {
    std::optional<ClinicalRecord> record;
    if (!clinical.empty()) {
        const ClinicalTable t = read_clinical_csv(clinical);
        for (const auto& r : t.records) {
            if (r.patient_id == patient) record = r;
        }
        if (!record) throw Error(Errc::InvalidArgument, "patient " + patient + " not in " + clinical);
    }
    const DiagnosticReport r = emit_report(read_mask_nifti(liver), read_mask_nifti(tumor), record);
    const fs::path prefix = c.out;
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    std::ofstream(prefix.string() + ".txt", std::ios::binary) << r.text;
    std::ofstream(prefix.string() + ".json", std::ios::binary) << r.json;
    std::cout << r.text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-step liver and tumor segmentation with clinically informed label smoothing"};
    app.require_subcommand(1);

    Common common;
    std::size_t n = 10, seeds = 5;
    std::string contrast = "high", ablate_contrast = "low", csv, task, data, val_data, clinical_model, ct, liver_model, tumor_model;
    std::string pred_liver, pred_tumor, truth, method = "two-step", liver, tumor, clinical, patient;

    auto* phantom = app.add_subcommand("phantom", "generate a phantom dataset");
    add_common(phantom, common);
    phantom->add_option("--n", n, "number of phantoms");
    phantom->add_option("--contrast", contrast, "high or low")->check(CLI::IsMember({"high", "low"}));

    auto* fit = app.add_subcommand("clinical-fit", "fit the TLVR model with feature selection");
    add_common(fit, common);
    fit->add_option("--csv", csv, "clinical CSV with a tlvr column")->required();

    auto* tr = app.add_subcommand("train", "train one branch");
    add_common(tr, common);
    tr->add_option("--task", task, "liver or tumor")->required()->check(CLI::IsMember({"liver", "tumor"}));
    tr->add_option("--data", data, "dataset directory")->required();
    tr->add_option("--val", val_data, "validation dataset directory");
    tr->add_option("--clinical-model", clinical_model, "model file from clinical-fit");

    auto* seg = app.add_subcommand("segment", "run two-step inference on one CT volume");
    add_common(seg, common);
    seg->add_option("--ct", ct, "CT NIfTI")->required();
    seg->add_option("--liver-model", liver_model)->required();
    seg->add_option("--tumor-model", tumor_model)->required();

    auto* ev = app.add_subcommand("evaluate", "score predicted masks against a label volume");
    add_common(ev, common);
    ev->add_option("--pred-liver", pred_liver)->required();
    ev->add_option("--pred-tumor", pred_tumor)->required();
    ev->add_option("--truth", truth, "label NIfTI (1 liver, 2 tumor)")->required();
    ev->add_option("--method", method, "method name for the CSV row");

    auto* ab = app.add_subcommand("ablate", "run the variant ablation on phantoms");
    add_common(ab, common);
    ab->add_option("--seeds", seeds, "number of seeds");
    ab->add_option("--contrast", ablate_contrast, "high or low")->check(CLI::IsMember({"high", "low"}));

    auto* sm = app.add_subcommand("smoothing-experiment", "training curves with and without the weak term");
    add_common(sm, common);
    sm->add_option("--seeds", seeds, "number of seeds");

    auto* rep = app.add_subcommand("report", "diagnostic summary from predicted masks");
    add_common(rep, common);
    rep->add_option("--liver", liver)->required();
    rep->add_option("--tumor", tumor)->required();
    rep->add_option("--clinical", clinical, "clinical CSV");
    rep->add_option("--patient", patient, "patient id in the clinical CSV");

    CLI11_PARSE(app, argc, argv);
    try {
        if (phantom->parsed()) return cmd_phantom(common, n, contrast);
        if (fit->parsed()) return cmd_clinical_fit(common, csv);
        if (tr->parsed()) return cmd_train(common, task, data, clinical_model, val_data);
        if (seg->parsed()) return cmd_segment(common, ct, liver_model, tumor_model);
        if (ev->parsed()) return cmd_evaluate(common, pred_liver, pred_tumor, truth, method);
        if (ab->parsed()) return cmd_ablate(common, seeds, ablate_contrast);
        if (sm->parsed()) return cmd_smoothing(common, seeds);
        if (rep->parsed()) return cmd_report(common, liver, tumor, clinical, patient);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
