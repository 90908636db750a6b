// certwatch: synthetic data generation, detector training, gated evaluation,
// attack sweeps, certification and drift checks, all seeded and reproducible.
//
// Exit codes: 0 success, 1 usage, 2 runtime failure, 3 validation failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "certwatch/attacks.hpp"
#include "certwatch/datagen.hpp"
#include "certwatch/eval.hpp"
#include "certwatch/haarpsi.hpp"
#include "certwatch/ibp.hpp"
#include "certwatch/report.hpp"
#include "certwatch/trainer.hpp"

using certwatch::json;

namespace {

int threads_cap() {
    const char* env = std::getenv("CERTWATCH_THREADS");
    if (!env) return 1;
    int v = 0;
    try {
        v = std::stoi(env);
    } catch (const std::exception&) {
        throw std::invalid_argument("CERTWATCH_THREADS must be an integer");
    }
    if (v < 1) throw std::invalid_argument("CERTWATCH_THREADS must be >= 1");
    return v;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config file missing: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    return j;
}

// File values fill in anything the command line left unset; flags always win.
template <typename T>
void resolve(const CLI::App* cmd, const json& file, const std::string& flag,
             const std::string& key, T& val) {
    if (cmd->count(flag) == 0 && file.contains(key)) val = file.at(key).get<T>();
}

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct SplitData {
    std::vector<certwatch::Tensor> frames;
    std::vector<int> labels;
};

SplitData load_split(const std::string& manifest, const std::string& split) {
    SplitData d;
    for (auto& lf : certwatch::load_dataset(manifest, split)) {
        d.frames.push_back(std::move(lf.image));
        d.labels.push_back(lf.label);
    }
    if (d.frames.empty())
        throw std::runtime_error("no frames in split '" + split + "' of " + manifest);
    return d;
}

void write_config_echo(const json& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir + "/config.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_dir + "/config.json");
    f << cfg.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"visual overlay cheat detection: data, training, certification, attacks"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    auto* g_config = app.add_option("--config", config_path, "JSON file with default option values");
    auto* g_seed = app.add_option("--seed", seed, "run seed; mandatory, every run is reproducible");
    app.add_option("--out", out_dir, "output directory");
    (void)g_config;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "render a paired synthetic dataset");
    int gd_width = 192, gd_height = 108, gd_train = 400, gd_val = 100, gd_test = 200;
    int gd_entities = 4;
    float gd_density = 0.5f;
    std::string gd_style = "A", gd_levels = "minimal,medium,full";
    gen->add_option("--width", gd_width);
    gen->add_option("--height", gd_height);
    gen->add_option("--train", gd_train, "train split frame count");
    gen->add_option("--val", gd_val, "validation split frame count");
    gen->add_option("--test", gd_test, "test split frame count");
    gen->add_option("--style", gd_style, "overlay palette: A or B");
    gen->add_option("--levels", gd_levels, "comma list of overlay levels");
    gen->add_option("--entities", gd_entities);
    gen->add_option("--texture-density", gd_density);

    // train
    auto* tr = app.add_subcommand("train", "fit the detector on a dataset split");
    std::string tr_data, tr_split = "train", tr_loss = "ce_combined", tr_ibp = "none";
    std::string tr_reduction = "avg", tr_head = "auto";
    int tr_epochs = 60, tr_batch = 6;
    float tr_lr = 1e-3f, tr_lr_decay = 0.1f, tr_lr_decay_frac = 0.6f, tr_dropout = 0.15f;
    bool tr_paper_schedule = false;
    tr->add_option("--data", tr_data, "dataset manifest.json");
    tr->add_option("--split", tr_split);
    tr->add_option("--loss", tr_loss, "ce_combined | mse_combined | ul_combined");
    tr->add_option("--ibp", tr_ibp, "none | one_sided | two_sided");
    tr->add_option("--epochs", tr_epochs);
    tr->add_option("--batch-size", tr_batch);
    tr->add_option("--lr", tr_lr);
    tr->add_option("--lr-decay", tr_lr_decay, "one-shot decay factor outside the curriculum");
    tr->add_option("--lr-decay-frac", tr_lr_decay_frac);
    tr->add_option("--reduction", tr_reduction, "fc | max | avg");
    tr->add_option("--head", tr_head, "softmax | evidential | auto");
    tr->add_option("--dropout", tr_dropout);
    tr->add_flag("--paper-schedule", tr_paper_schedule, "1000 epochs, batch size 6");

    // eval
    auto* ev = app.add_subcommand("eval", "confidence-gated evaluation of saved weights");
    std::string ev_weights, ev_data, ev_split = "test";
    int ev_passes = certwatch::kDefaultVrPasses;
    float ev_umax = certwatch::kDefaultUMax;
    bool ev_ungated = false;
    ev->add_option("--weights", ev_weights);
    ev->add_option("--data", ev_data);
    ev->add_option("--split", ev_split);
    ev->add_option("--passes", ev_passes, "stochastic forward passes for the variation ratio");
    ev->add_option("--u-max", ev_umax);
    ev->add_flag("--ungated", ev_ungated, "count every prediction as confident");

    // attack
    auto* at = app.add_subcommand("attack", "sweep attacks over the cheat frames");
    std::string at_weights, at_data, at_split = "test";
    std::string at_attacks = "fgsm,pgd,universal", at_eps = "0.0125,0.025,0.05";
    int at_steps = 10, at_passes = certwatch::kDefaultVrPasses, at_upasses = 3;
    int at_quality_frames = 10;
    float at_step_size = 0.0f, at_umax = certwatch::kDefaultUMax;
    bool at_no_cert = false;
    at->add_option("--weights", at_weights);
    at->add_option("--data", at_data);
    at->add_option("--split", at_split);
    at->add_option("--attacks", at_attacks, "comma list: fgsm,pgd,universal");
    at->add_option("--eps", at_eps, "comma list of L-inf radii");
    at->add_option("--steps", at_steps, "pgd iterations");
    at->add_option("--step-size", at_step_size, "pgd step; <= 0 means eps/4");
    at->add_option("--universal-passes", at_upasses);
    at->add_option("--passes", at_passes);
    at->add_option("--u-max", at_umax);
    at->add_option("--quality-frames", at_quality_frames,
                   "frames sampled for the perceptual similarity column");
    at->add_flag("--no-cert", at_no_cert, "skip the certified bound column");

    // cert
    auto* ct = app.add_subcommand("cert", "certified fraction per perturbation radius");
    std::string ct_weights, ct_data, ct_split = "test", ct_eps = "0.0125,0.025,0.05";
    ct->add_option("--weights", ct_weights);
    ct->add_option("--data", ct_data);
    ct->add_option("--split", ct_split);
    ct->add_option("--eps", ct_eps);

    // drift
    auto* dr = app.add_subcommand("drift", "compare likelihood-ratio baselines between windows");
    std::string dr_weights, dr_train_data, dr_train_split = "train";
    std::string dr_field_data, dr_field_split = "test";
    double dr_threshold = 0.5;
    dr->add_option("--weights", dr_weights);
    dr->add_option("--train-data", dr_train_data, "manifest for the training-time window");
    dr->add_option("--train-split", dr_train_split);
    dr->add_option("--field-data", dr_field_data, "manifest for the field window");
    dr->add_option("--field-split", dr_field_split);
    dr->add_option("--threshold", dr_threshold);

    // report
    auto* rp = app.add_subcommand("report", "validate and re-emit a report as JSON or CSV");
    std::string rp_in, rp_format = "csv";
    rp->add_option("--in", rp_in, "input report.json")->required();
    rp->add_option("--format", rp_format, "json | csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const json file_cfg = load_config_file(config_path);
        if (g_seed->count() == 0 && file_cfg.contains("seed"))
            seed = file_cfg.at("seed").get<std::uint64_t>();
        resolve(&app, file_cfg, "--out", "out", out_dir);
        const int threads = threads_cap();
        const bool need_seed = !rp->parsed();
        if (need_seed && g_seed->count() == 0 && !file_cfg.contains("seed"))
            throw std::invalid_argument("--seed is mandatory (directly or via --config)");

        if (gen->parsed()) {
            resolve(gen, file_cfg, "--width", "width", gd_width);
            resolve(gen, file_cfg, "--height", "height", gd_height);
            resolve(gen, file_cfg, "--train", "train", gd_train);
            resolve(gen, file_cfg, "--val", "val", gd_val);
            resolve(gen, file_cfg, "--test", "test", gd_test);
            resolve(gen, file_cfg, "--style", "style", gd_style);
            resolve(gen, file_cfg, "--levels", "levels", gd_levels);
            resolve(gen, file_cfg, "--entities", "entities", gd_entities);
            resolve(gen, file_cfg, "--texture-density", "texture_density", gd_density);

            certwatch::DatasetConfig cfg;
            cfg.width = gd_width;
            cfg.height = gd_height;
            cfg.train_count = gd_train;
            cfg.val_count = gd_val;
            cfg.test_count = gd_test;
            cfg.style = certwatch::style_from_string(gd_style);
            cfg.levels.clear();
            for (const std::string& l : split_csv(gd_levels))
                cfg.levels.push_back(certwatch::overlay_level_from_string(l));
            cfg.n_entities = gd_entities;
            cfg.texture_density = gd_density;
            cfg.seed = seed;

            json echo{{"subcommand", "gen-data"}, {"width", gd_width},
                      {"height", gd_height},      {"train", gd_train},
                      {"val", gd_val},            {"test", gd_test},
                      {"style", gd_style},        {"levels", gd_levels},
                      {"entities", gd_entities},  {"texture_density", gd_density},
                      {"seed", seed},             {"threads", threads}};
            certwatch::build_dataset(cfg, out_dir);
            write_config_echo(echo, out_dir);
            std::cout << "dataset written to " << out_dir << "\n";
        } else if (tr->parsed()) {
            resolve(tr, file_cfg, "--data", "data", tr_data);
            resolve(tr, file_cfg, "--split", "split", tr_split);
            resolve(tr, file_cfg, "--loss", "loss", tr_loss);
            resolve(tr, file_cfg, "--ibp", "ibp", tr_ibp);
            resolve(tr, file_cfg, "--epochs", "epochs", tr_epochs);
            resolve(tr, file_cfg, "--batch-size", "batch_size", tr_batch);
            resolve(tr, file_cfg, "--lr", "lr", tr_lr);
            resolve(tr, file_cfg, "--lr-decay", "lr_decay", tr_lr_decay);
            resolve(tr, file_cfg, "--lr-decay-frac", "lr_decay_frac", tr_lr_decay_frac);
            resolve(tr, file_cfg, "--reduction", "reduction", tr_reduction);
            resolve(tr, file_cfg, "--head", "head", tr_head);
            resolve(tr, file_cfg, "--dropout", "dropout", tr_dropout);
            if (tr_data.empty()) throw std::invalid_argument("train: --data is required");
            if (tr_paper_schedule) {
                if (tr->count("--epochs") == 0) tr_epochs = 1000;
                if (tr->count("--batch-size") == 0) tr_batch = 6;
                if (tr->count("--lr") == 0 && !file_cfg.contains("lr")) tr_lr = 1e-4f;
            }

            certwatch::TrainConfig tcfg;
            tcfg.loss = certwatch::loss_kind_from_string(tr_loss);
            tcfg.defense = certwatch::defense_kind_from_string(tr_ibp);
            tcfg.epochs = tr_epochs;
            tcfg.batch_size = tr_batch;
            tcfg.lr = tr_lr;
            tcfg.lr_decay = tr_lr_decay;
            tcfg.lr_decay_frac = tr_lr_decay_frac;
            tcfg.seed = seed;
            certwatch::validate_train_config(tcfg);

            SplitData data = load_split(tr_data, tr_split);
            certwatch::DetectorConfig dcfg;
            dcfg.input_height = data.frames.front().shape[1];
            dcfg.input_width = data.frames.front().shape[2];
            dcfg.reduction = certwatch::reduction_from_string(tr_reduction);
            dcfg.dropout_p = tr_dropout;
            if (tr_head == "auto")
                dcfg.head_mode = tcfg.loss == certwatch::LossKind::UlCombined
                                     ? certwatch::HeadMode::Evidential
                                     : certwatch::HeadMode::Softmax;
            else
                dcfg.head_mode = certwatch::head_mode_from_string(tr_head);

            json echo{{"subcommand", "train"},   {"data", tr_data},
                      {"split", tr_split},       {"loss", tr_loss},
                      {"ibp", tr_ibp},           {"epochs", tr_epochs},
                      {"batch_size", tr_batch},  {"lr", tr_lr},
                      {"lr_decay", tr_lr_decay}, {"lr_decay_frac", tr_lr_decay_frac},
                      {"reduction", tr_reduction},
                      {"head", certwatch::to_string(dcfg.head_mode)},
                      {"dropout", tr_dropout},   {"seed", seed},
                      {"threads", threads}};

            certwatch::DetectorModel model(dcfg, seed);
            certwatch::TrainResult result =
                certwatch::train(model, data.frames, data.labels, tcfg);
            std::filesystem::create_directories(out_dir);
            model.save(out_dir + "/weights.vcd");
            json rep = certwatch::train_report(result, echo, seed);
            certwatch::write_json_report(rep, out_dir + "/train_report.json");
            certwatch::write_csv_report(rep, out_dir + "/train_report.csv");
            write_config_echo(echo, out_dir);
            std::cout << "final mean loss " << result.curve.back().mean_loss
                      << " after " << tr_epochs << " epochs; weights in "
                      << out_dir << "/weights.vcd\n";
        } else if (ev->parsed()) {
            resolve(ev, file_cfg, "--weights", "weights", ev_weights);
            resolve(ev, file_cfg, "--data", "data", ev_data);
            resolve(ev, file_cfg, "--split", "split", ev_split);
            resolve(ev, file_cfg, "--passes", "passes", ev_passes);
            resolve(ev, file_cfg, "--u-max", "u_max", ev_umax);
            if (ev_weights.empty()) throw std::invalid_argument("eval: --weights is required");
            if (ev_data.empty()) throw std::invalid_argument("eval: --data is required");

            certwatch::DetectorModel model = certwatch::DetectorModel::load(ev_weights);
            SplitData data = load_split(ev_data, ev_split);
            certwatch::EvalConfig ecfg;
            ecfg.vr_passes = ev_passes;
            ecfg.u_max = ev_umax;
            ecfg.seed = seed;
            ecfg.gated = !ev_ungated;
            certwatch::EvalResult result =
                certwatch::evaluate(model, data.frames, data.labels, ecfg);

            json echo{{"subcommand", "eval"}, {"weights", ev_weights},
                      {"data", ev_data},      {"split", ev_split},
                      {"passes", ev_passes},  {"u_max", ev_umax},
                      {"gated", !ev_ungated}, {"seed", seed},
                      {"threads", threads}};
            json rep = certwatch::eval_report(result, echo, seed);
            std::filesystem::create_directories(out_dir);
            certwatch::write_json_report(rep, out_dir + "/eval_report.json");
            certwatch::write_csv_report(rep, out_dir + "/eval_report.csv");
            write_config_echo(echo, out_dir);
            std::cout << "confident block: tp=" << result.table.confident.tp
                      << " fp=" << result.table.confident.fp
                      << " deployable=" << (result.deployable ? "yes" : "no") << "\n";
        } else if (at->parsed()) {
            resolve(at, file_cfg, "--weights", "weights", at_weights);
            resolve(at, file_cfg, "--data", "data", at_data);
            resolve(at, file_cfg, "--split", "split", at_split);
            resolve(at, file_cfg, "--attacks", "attacks", at_attacks);
            resolve(at, file_cfg, "--eps", "eps", at_eps);
            resolve(at, file_cfg, "--steps", "steps", at_steps);
            resolve(at, file_cfg, "--step-size", "step_size", at_step_size);
            resolve(at, file_cfg, "--universal-passes", "universal_passes", at_upasses);
            resolve(at, file_cfg, "--passes", "passes", at_passes);
            resolve(at, file_cfg, "--u-max", "u_max", at_umax);
            resolve(at, file_cfg, "--quality-frames", "quality_frames", at_quality_frames);
            if (at_weights.empty()) throw std::invalid_argument("attack: --weights is required");
            if (at_data.empty()) throw std::invalid_argument("attack: --data is required");

            certwatch::DetectorModel model = certwatch::DetectorModel::load(at_weights);
            SplitData data = load_split(at_data, at_split);
            std::vector<certwatch::Tensor> cheat;
            for (std::size_t i = 0; i < data.frames.size(); ++i)
                if (data.labels[i] == 1) cheat.push_back(data.frames[i]);
            if (cheat.empty())
                throw std::runtime_error("attack: split has no cheat frames");

            const std::vector<double> eps_grid = parse_list(at_eps);
            const std::vector<std::string> attack_names = split_csv(at_attacks);
            if (eps_grid.empty() || attack_names.empty())
                throw std::invalid_argument("attack: empty attack or eps list");

            certwatch::GateParams gate;
            gate.T = at_passes;
            gate.dropout_p = model.config().dropout_p;
            gate.u_max = at_umax;
            gate.rng_seed = seed;

            json echo{{"subcommand", "attack"}, {"weights", at_weights},
                      {"data", at_data},        {"split", at_split},
                      {"attacks", at_attacks},  {"eps", at_eps},
                      {"steps", at_steps},      {"step_size", at_step_size},
                      {"universal_passes", at_upasses},
                      {"passes", at_passes},    {"u_max", at_umax},
                      {"quality_frames", at_quality_frames},
                      {"cert", !at_no_cert},    {"seed", seed},
                      {"threads", threads}};

            std::vector<certwatch::AttackCell> cells;
            bool saved_universal = false;
            for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
                const float eps = static_cast<float>(eps_grid[ei]);
                double bound = std::numeric_limits<double>::quiet_NaN();
                if (!at_no_cert) bound = certwatch::certified_fraction(model, cheat, eps);
                certwatch::UniversalPerturbation up;
                bool have_universal = false;
                for (const std::string& name : attack_names) {
                    certwatch::AttackSpec spec;
                    spec.kind = certwatch::attack_kind_from_string(name);
                    spec.eps = eps;
                    spec.steps = at_steps;
                    spec.step_size = at_step_size;
                    spec.rng_seed = seed + 1000 * ei;
                    if (spec.kind == certwatch::AttackKind::Universal && !have_universal) {
                        up = certwatch::build_universal(model, cheat, eps, at_upasses,
                                                        seed + 1000 * ei);
                        have_universal = true;
                        if (!saved_universal) {
                            std::filesystem::create_directories(out_dir);
                            certwatch::save_universal(up, out_dir + "/universal.vcd");
                            saved_universal = true;
                        }
                    }
                    certwatch::AttackResult res = certwatch::evaluate_attack(
                        model, cheat, spec, gate, have_universal ? &up : nullptr);

                    double hp_sum = 0.0;
                    int hp_n = std::min<int>(at_quality_frames,
                                             static_cast<int>(cheat.size()));
                    for (int i = 0; i < hp_n; ++i) {
                        certwatch::Tensor adv;
                        switch (spec.kind) {
                            case certwatch::AttackKind::Fgsm:
                                adv = certwatch::fgsm(model, cheat[static_cast<std::size_t>(i)], eps);
                                break;
                            case certwatch::AttackKind::Pgd:
                                adv = eps > 0.0f
                                          ? certwatch::pgd_madry(
                                                model, cheat[static_cast<std::size_t>(i)], eps,
                                                at_steps,
                                                at_step_size > 0.0f ? at_step_size : eps / 4.0f,
                                                spec.rng_seed + static_cast<std::uint64_t>(i))
                                          : cheat[static_cast<std::size_t>(i)];
                                break;
                            case certwatch::AttackKind::Universal:
                                adv = certwatch::apply_universal(
                                    cheat[static_cast<std::size_t>(i)], up.delta);
                                break;
                        }
                        hp_sum += certwatch::haarpsi(cheat[static_cast<std::size_t>(i)], adv);
                    }

                    certwatch::AttackCell cell;
                    cell.attack = name;
                    cell.eps = eps_grid[ei];
                    cell.tp_clean = res.tp_clean;
                    cell.tp_attack = res.tp_attack;
                    cell.ratio_defined = res.defined;
                    cell.ratio = res.ratio;
                    cell.haarpsi_mean = hp_n > 0 ? hp_sum / hp_n
                                                 : std::numeric_limits<double>::quiet_NaN();
                    cell.ibp_bound = bound;
                    cells.push_back(cell);
                }
            }
            json rep = certwatch::attack_report(cells, echo, seed);
            std::filesystem::create_directories(out_dir);
            certwatch::write_json_report(rep, out_dir + "/attack_report.json");
            certwatch::write_csv_report(rep, out_dir + "/attack_report.csv");
            write_config_echo(echo, out_dir);
            std::cout << cells.size() << " attack cells written to " << out_dir << "\n";
        } else if (ct->parsed()) {
            resolve(ct, file_cfg, "--weights", "weights", ct_weights);
            resolve(ct, file_cfg, "--data", "data", ct_data);
            resolve(ct, file_cfg, "--split", "split", ct_split);
            resolve(ct, file_cfg, "--eps", "eps", ct_eps);
            if (ct_weights.empty()) throw std::invalid_argument("cert: --weights is required");
            if (ct_data.empty()) throw std::invalid_argument("cert: --data is required");

            certwatch::DetectorModel model = certwatch::DetectorModel::load(ct_weights);
            SplitData data = load_split(ct_data, ct_split);
            std::vector<certwatch::Tensor> cheat;
            for (std::size_t i = 0; i < data.frames.size(); ++i)
                if (data.labels[i] == 1) cheat.push_back(data.frames[i]);
            if (cheat.empty()) throw std::runtime_error("cert: split has no cheat frames");

            std::vector<std::pair<double, double>> rows;
            for (double eps : parse_list(ct_eps))
                rows.emplace_back(eps, certwatch::certified_fraction(
                                           model, cheat, static_cast<float>(eps)));
            json echo{{"subcommand", "cert"}, {"weights", ct_weights},
                      {"data", ct_data},      {"split", ct_split},
                      {"eps", ct_eps},        {"seed", seed},
                      {"threads", threads}};
            json rep = certwatch::cert_report(rows, echo, seed);
            std::filesystem::create_directories(out_dir);
            certwatch::write_json_report(rep, out_dir + "/cert_report.json");
            certwatch::write_csv_report(rep, out_dir + "/cert_report.csv");
            write_config_echo(echo, out_dir);
            for (const auto& [eps, frac] : rows)
                std::cout << "eps " << eps << ": certified fraction " << frac << "\n";
        } else if (dr->parsed()) {
            resolve(dr, file_cfg, "--weights", "weights", dr_weights);
            resolve(dr, file_cfg, "--train-data", "train_data", dr_train_data);
            resolve(dr, file_cfg, "--train-split", "train_split", dr_train_split);
            resolve(dr, file_cfg, "--field-data", "field_data", dr_field_data);
            resolve(dr, file_cfg, "--field-split", "field_split", dr_field_split);
            resolve(dr, file_cfg, "--threshold", "threshold", dr_threshold);
            if (dr_weights.empty()) throw std::invalid_argument("drift: --weights is required");
            if (dr_train_data.empty() || dr_field_data.empty())
                throw std::invalid_argument("drift: --train-data and --field-data are required");

            certwatch::DetectorModel model = certwatch::DetectorModel::load(dr_weights);
            SplitData train_d = load_split(dr_train_data, dr_train_split);
            SplitData field_d = load_split(dr_field_data, dr_field_split);
            certwatch::LRBaselines train_b =
                certwatch::compute_lr_baselines(model, train_d.frames, "train");
            certwatch::LRBaselines field_b =
                certwatch::compute_lr_baselines(model, field_d.frames, "field");
            certwatch::DriftVerdict verdict =
                certwatch::drift_check(train_b, field_b, dr_threshold);

            json echo{{"subcommand", "drift"},       {"weights", dr_weights},
                      {"train_data", dr_train_data}, {"train_split", dr_train_split},
                      {"field_data", dr_field_data}, {"field_split", dr_field_split},
                      {"threshold", dr_threshold},   {"seed", seed},
                      {"threads", threads}};
            json rep = certwatch::drift_report(train_b, field_b, verdict, echo, seed);
            std::filesystem::create_directories(out_dir);
            certwatch::write_json_report(rep, out_dir + "/drift_report.json");
            certwatch::write_csv_report(rep, out_dir + "/drift_report.csv");
            write_config_echo(echo, out_dir);
            std::cout << "retrain=" << (verdict.retrain ? "true" : "false") << "\n";
        } else if (rp->parsed()) {
            json rep = certwatch::read_json_report(rp_in);
            certwatch::validate_report(rep);
            std::filesystem::create_directories(out_dir);
            if (rp_format == "json") {
                certwatch::write_json_report(rep, out_dir + "/report.json");
                std::cout << out_dir << "/report.json\n";
            } else if (rp_format == "csv") {
                certwatch::write_csv_report(rep, out_dir + "/report.csv");
                std::cout << out_dir << "/report.csv\n";
            } else {
                throw std::invalid_argument("report: unknown format '" + rp_format + "'");
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
