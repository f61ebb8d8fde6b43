// apogee: amortized parameter estimation for vertical model-rocket flight.
//
// Subcommands wire the library end to end: simulate a flight, generate a
// synthetic training corpus, train the bootstrap MLP ensemble, infer
// parameters from an observed apogee, and evaluate against real flights.
// Exit codes: 0 success, 2 usage/input error, 3 physics-domain failure,
// 4 training failure.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "apogee/csvio.hpp"
#include "apogee/errors.hpp"
#include "apogee/evaluation.hpp"
#include "apogee/inference.hpp"
#include "apogee/motordb.hpp"
#include "apogee/physics.hpp"
#include "apogee/synthgen.hpp"
#include "apogee/train.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitPhysics = 3;
constexpr int kExitTraining = 4;

struct RunConfig {
    std::string motor_db = "data/motors.json";
    uint64_t seed = 0;
    apogee::SimOptions sim;
    apogee::PriorSpec priors;
    std::pair<double, double> mass_range = apogee::kDefaultMassRange;
    double reference_area = apogee::kDefaultReferenceArea;
    apogee::nn::NetworkConfig net;
    apogee::nn::TrainConfig train;
};

// Every omitted key keeps its compiled-in default.
void apply_config_file(RunConfig& cfg, const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(apogee::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw apogee::ParseError("config " + path + ": " + e.what());
    }
    auto get = [](const nlohmann::json& obj, const char* key, auto& target) {
        if (obj.contains(key)) target = obj.at(key).get<std::decay_t<decltype(target)>>();
    };
    get(doc, "motor_db", cfg.motor_db);
    get(doc, "seed", cfg.seed);
    get(doc, "reference_area", cfg.reference_area);
    if (doc.contains("mass_range")) {
        const auto mr = doc.at("mass_range").get<std::vector<double>>();
        if (mr.size() != 2) throw apogee::ParseError("config: mass_range needs 2 entries");
        cfg.mass_range = {mr[0], mr[1]};
    }
    if (doc.contains("sim")) {
        const auto& s = doc.at("sim");
        get(s, "rel_tol", cfg.sim.rel_tol);
        get(s, "abs_tol", cfg.sim.abs_tol);
        get(s, "max_time", cfg.sim.max_time);
        get(s, "gravity", cfg.sim.gravity);
        get(s, "sea_level_density", cfg.sim.sea_level_density);
        get(s, "scale_height", cfg.sim.scale_height);
        get(s, "initial_step", cfg.sim.initial_step);
        get(s, "max_step", cfg.sim.max_step);
        get(s, "safety", cfg.sim.safety);
    }
    if (doc.contains("priors")) {
        const auto& p = doc.at("priors");
        get(p, "cd_low", cfg.priors.cd_low);
        get(p, "cd_high", cfg.priors.cd_high);
        get(p, "alpha_low", cfg.priors.alpha_low);
        get(p, "alpha_high", cfg.priors.alpha_high);
        get(p, "noise_sigma", cfg.priors.noise_sigma);
    }
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        get(t, "learning_rate", cfg.train.learning_rate);
        get(t, "weight_decay", cfg.train.weight_decay);
        get(t, "batch_size", cfg.train.batch_size);
        get(t, "epochs", cfg.train.epochs);
        get(t, "scheduler_patience", cfg.train.scheduler_patience);
        get(t, "scheduler_factor", cfg.train.scheduler_factor);
        get(t, "min_lr", cfg.train.min_lr);
        get(t, "ensemble_size", cfg.train.ensemble_size);
        get(t, "val_fraction", cfg.train.val_fraction);
        get(t, "threads", cfg.train.threads);
    }
}

std::string resolve_motor_db(const RunConfig& cfg, const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("APOGEE_MOTOR_DB"); env != nullptr && *env != '\0')
        return env;
    return cfg.motor_db;
}

std::string replace_suffix(const std::string& path, const std::string& from,
                           const std::string& to) {
    if (path.size() > from.size() &&
        path.compare(path.size() - from.size(), from.size(), from) == 0)
        return path.substr(0, path.size() - from.size()) + to;
    return path + to;
}

void write_trajectory_csv(const apogee::SimResult& result, const std::string& path) {
    std::string out = "t,h,v,m\n";
    for (const auto& p : result.trajectory) {
        out += apogee::format_double(p.t) + ',' + apogee::format_double(p.h) + ',' +
               apogee::format_double(p.v) + ',' + apogee::format_double(p.m) + '\n';
    }
    apogee::write_file(path, out);
}

void write_loss_history_csv(const std::vector<std::vector<apogee::nn::EpochStats>>& histories,
                            const std::string& path) {
    std::string out = "member,epoch,train_loss,val_loss,lr\n";
    for (size_t m = 0; m < histories.size(); ++m) {
        for (size_t e = 0; e < histories[m].size(); ++e) {
            out += std::to_string(m) + ',' + std::to_string(e + 1) + ',' +
                   apogee::format_double(histories[m][e].train_loss) + ',' +
                   apogee::format_double(histories[m][e].val_loss) + ',' +
                   apogee::format_double(histories[m][e].lr) + '\n';
        }
    }
    apogee::write_file(path, out);
}

int cmd_simulate(const RunConfig& cfg, const std::string& db_path, double cd, double alpha,
                 const std::string& motor, double dry_mass, std::optional<double> area,
                 const std::string& trajectory_path) {
    const apogee::MotorDatabase db = apogee::load_motor_db(db_path);
    apogee::RocketConfig config;
    config.motor = db.get(motor);
    config.dry_mass = dry_mass;
    config.reference_area = area.value_or(cfg.reference_area);

    const apogee::SimResult result = apogee::simulate_flight({cd, alpha}, config, cfg.sim);
    if (!result.lifted_off()) {
        std::cerr << "no liftoff: thrust never exceeded weight before burnout (alpha=" << alpha
                  << ")\n";
        return kExitPhysics;
    }
    if (!trajectory_path.empty()) write_trajectory_csv(result, trajectory_path);
    std::cout << "apogee_m=" << apogee::format_double(result.apogee) << "\n"
              << "time_to_apogee_s=" << apogee::format_double(result.time_to_apogee) << "\n";
    return 0;
}

int cmd_generate(const RunConfig& cfg, const std::string& db_path, size_t n,
                 const std::string& out_path, int threads) {
    const apogee::MotorDatabase db = apogee::load_motor_db(db_path);
    const auto t0 = std::chrono::steady_clock::now();
    const apogee::Dataset ds =
        apogee::generate_dataset(n, cfg.priors, db, cfg.mass_range, cfg.sim, cfg.seed, threads,
                                 cfg.reference_area);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    apogee::write_dataset_csv(ds, out_path);
    apogee::write_norm_sidecar(*ds.norm, ds.seed, apogee::norm_sidecar_path(out_path));
    std::cout << "samples=" << ds.samples.size() << "\n"
              << "rejected=" << ds.rejected << "\n"
              << "out=" << out_path << "\n"
              << "norm=" << apogee::norm_sidecar_path(out_path) << "\n"
              << "wall_time_s=" << wall << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& dataset_path, const std::string& db_path,
              const std::string& out_path) {
    const apogee::MotorDatabase db = apogee::load_motor_db(db_path);
    apogee::Dataset ds = apogee::read_dataset_csv(dataset_path);
    const std::string sidecar = apogee::norm_sidecar_path(dataset_path);
    try {
        auto [norm, seed] = apogee::read_norm_sidecar(sidecar);
        ds.norm = norm;
        ds.seed = seed;
    } catch (const apogee::ParseError&) {
        // No usable sidecar: the statistics are a pure function of the samples.
        ds.norm = apogee::compute_norm_stats(ds.samples);
    }

    const auto t0 = std::chrono::steady_clock::now();
    apogee::nn::TrainOutput out =
        apogee::nn::train_ensemble(ds, cfg.net, cfg.train, cfg.seed, db.size());
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    apogee::nn::save_model(out.model, out_path);
    const std::string losses = replace_suffix(out_path, ".json", ".losses.csv");
    write_loss_history_csv(out.histories, losses);

    std::cout << "members=" << out.model.members.size() << "\n";
    for (size_t m = 0; m < out.model.members.size(); ++m)
        std::cout << "member" << m << "_best_epoch=" << out.model.meta.best_epochs[m]
                  << " val_loss=" << apogee::format_double(out.model.meta.final_val_losses[m])
                  << "\n";
    std::cout << "model=" << out_path << "\n"
              << "losses=" << losses << "\n"
              << "wall_time_s=" << wall << "\n";
    return 0;
}

int cmd_infer(const RunConfig& cfg, const std::string& db_path, const std::string& model_path,
              double h_obs, const std::string& motor, double dry_mass,
              std::optional<double> area) {
    const apogee::MotorDatabase db = apogee::load_motor_db(db_path);
    const apogee::nn::EnsembleModel model = apogee::nn::load_model(model_path);
    apogee::RocketConfig config;
    config.motor = db.get(motor);
    config.dry_mass = dry_mass;
    config.reference_area = area.value_or(cfg.reference_area);

    const apogee::InferenceResult r = apogee::predict(model, h_obs, config, cfg.sim);
    std::cout << "cd_hat=" << apogee::format_double(r.cd_mean) << "\n"
              << "alpha_hat=" << apogee::format_double(r.alpha_mean) << "\n"
              << "cd_std=" << apogee::format_double(r.cd_std) << "\n"
              << "alpha_std=" << apogee::format_double(r.alpha_std) << "\n"
              << "replayed_apogee_m=" << apogee::format_double(r.replayed_apogee) << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& db_path, const std::string& model_path,
                 bool builtin, const std::string& flights_path, bool paper_columns,
                 const std::string& json_path, const std::string& heldout_path,
                 const std::string& parity_path) {
    const apogee::MotorDatabase db = apogee::load_motor_db(db_path);
    const std::vector<apogee::RealFlight> flights =
        builtin ? apogee::builtin_real_flights() : apogee::load_real_flights_csv(flights_path);

    std::optional<apogee::nn::EnsembleModel> model;
    if (!model_path.empty()) model = apogee::nn::load_model(model_path);
    if (!paper_columns && !model)
        throw apogee::ValidationError("evaluate: --model is required unless --paper-columns");

    const apogee::EvalReport report = apogee::run_evaluation(
        model ? &*model : nullptr, flights, db, cfg.sim, paper_columns);
    std::cout << apogee::format_report_text(report);
    if (!json_path.empty()) apogee::write_file(json_path, apogee::report_to_json(report));

    if (!heldout_path.empty()) {
        if (!model)
            throw apogee::ValidationError("evaluate: --heldout needs --model");
        const apogee::Dataset heldout = apogee::read_dataset_csv(heldout_path);
        const apogee::ParityStats parity = apogee::parameter_mae(*model, heldout);
        std::cout << "heldout_cd_mae=" << apogee::format_double(parity.cd_mae) << "\n"
                  << "heldout_alpha_mae=" << apogee::format_double(parity.alpha_mae) << "\n";
        if (!parity_path.empty()) apogee::write_parity_csv(*model, heldout, parity_path);
    } else if (!parity_path.empty()) {
        throw apogee::ValidationError("evaluate: --parity-csv needs --heldout");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"amortized inference for model-rocket drag and thrust parameters"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may appear after the subcommand

    RunConfig cfg;
    std::string config_path;
    std::string db_flag;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--motor-db", db_flag, "motor database JSON (overrides APOGEE_MOTOR_DB)");
    app.add_option("--seed", cfg.seed, "master seed for all randomized commands");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run one forward flight simulation");
    double cd = 0.0, alpha = 1.0, dry_mass = 0.0;
    std::string motor, trajectory_path;
    double area_flag = 0.0;
    sim->add_option("--cd", cd, "drag coefficient")->required();
    sim->add_option("--alpha", alpha, "thrust correction factor")->required();
    sim->add_option("--motor", motor, "motor name")->required();
    sim->add_option("--dry-mass", dry_mass, "dry mass [kg]")->required();
    sim->add_option("--area", area_flag, "reference area [m^2]");
    sim->add_option("--trajectory", trajectory_path, "write trajectory CSV here");

    // generate
    auto* gen = app.add_subcommand("generate", "generate a synthetic training dataset");
    size_t gen_n = 0;
    std::string gen_out;
    int gen_threads = 0;
    gen->add_option("-n,--samples", gen_n, "number of samples")->required()
        ->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "output dataset CSV")->required();
    gen->add_option("--threads", gen_threads, "worker threads (0 = hardware)");

    // train
    auto* train = app.add_subcommand("train", "train the bootstrap MLP ensemble");
    std::string train_dataset, train_out;
    train->add_option("--dataset", train_dataset, "training dataset CSV")->required();
    train->add_option("--out", train_out, "output model JSON")->required();
    train->add_option("--epochs", cfg.train.epochs, "training epochs");
    train->add_option("--ensemble-size", cfg.train.ensemble_size, "number of members");
    train->add_option("--batch-size", cfg.train.batch_size, "mini-batch size");
    train->add_option("--threads", cfg.train.threads, "member-parallel threads (0 = hardware)");

    // infer
    auto* infer = app.add_subcommand("infer", "predict parameters from an observed apogee");
    std::string infer_model;
    double h_obs = 0.0;
    infer->add_option("--model", infer_model, "trained model JSON")->required();
    infer->add_option("--h-obs", h_obs, "observed apogee [m]")->required();
    infer->add_option("--motor", motor, "motor name")->required();
    infer->add_option("--dry-mass", dry_mass, "dry mass [kg]")->required();
    infer->add_option("--area", area_flag, "reference area [m^2]");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score flights and print the report table");
    std::string eval_model, eval_flights, eval_json, eval_heldout, eval_parity;
    bool builtin = false, paper_columns = false;
    eval->add_option("--model", eval_model, "trained model JSON");
    eval->add_flag("--builtin", builtin, "use the embedded published flights");
    eval->add_option("--flights", eval_flights, "flights CSV (id,motor,config,measured_m,valid,dry_mass_kg)");
    eval->add_flag("--paper-columns", paper_columns,
                   "score the embedded published predictions instead of the model");
    eval->add_option("--json", eval_json, "also write a JSON report here");
    eval->add_option("--heldout", eval_heldout, "held-out dataset CSV for parameter MAE");
    eval->add_option("--parity-csv", eval_parity, "write true-vs-predicted CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (!config_path.empty()) {
            // config file fills defaults; explicitly passed flags still win
            const RunConfig from_flags = cfg;
            apply_config_file(cfg, config_path);
            if (app.count("--seed")) cfg.seed = from_flags.seed;
            if (train->count("--epochs")) cfg.train.epochs = from_flags.train.epochs;
            if (train->count("--ensemble-size"))
                cfg.train.ensemble_size = from_flags.train.ensemble_size;
            if (train->count("--batch-size")) cfg.train.batch_size = from_flags.train.batch_size;
            if (train->count("--threads")) cfg.train.threads = from_flags.train.threads;
        }
        const std::string db_path = resolve_motor_db(cfg, db_flag);
        const bool area_given = (sim->parsed() && sim->count("--area") > 0) ||
                                (infer->parsed() && infer->count("--area") > 0);
        if (area_given && !(area_flag > 0.0))
            throw apogee::ValidationError("--area must be > 0");
        const std::optional<double> area =
            area_given ? std::optional<double>(area_flag) : std::nullopt;

        if (sim->parsed())
            return cmd_simulate(cfg, db_path, cd, alpha, motor, dry_mass, area, trajectory_path);
        if (gen->parsed()) return cmd_generate(cfg, db_path, gen_n, gen_out, gen_threads);
        if (train->parsed()) return cmd_train(cfg, train_dataset, db_path, train_out);
        if (infer->parsed())
            return cmd_infer(cfg, db_path, infer_model, h_obs, motor, dry_mass, area);
        if (eval->parsed()) {
            if (builtin == !eval_flights.empty())
                throw apogee::ValidationError("evaluate: pass exactly one of --builtin/--flights");
            return cmd_evaluate(cfg, db_path, eval_model, builtin, eval_flights, paper_columns,
                                eval_json, eval_heldout, eval_parity);
        }
        return kExitUsage;
    } catch (const apogee::DivergenceError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return kExitTraining;
    } catch (const apogee::SimulationError& e) {
        std::cerr << "simulation failed: " << e.what() << "\n";
        return kExitPhysics;
    } catch (const apogee::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
