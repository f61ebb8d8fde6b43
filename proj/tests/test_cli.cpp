#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

// End-to-end tests for the apogee binary. APOGEE_BIN and APOGEE_TEST_DB are
// injected by ctest.

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const char* path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CmdResult run_cli(const std::string& args, bool with_db = true, const std::string& env = "") {
    const char* bin = std::getenv("APOGEE_BIN");
    REQUIRE(bin != nullptr);
    std::string cmd = env.empty() ? "" : env + " ";
    cmd += std::string(bin);
    if (with_db) {
        const char* db = std::getenv("APOGEE_TEST_DB");
        REQUIRE(db != nullptr);
        cmd += std::string(" --motor-db ") + db;
    }
    cmd += " " + args + " > cli_out.tmp 2> cli_err.tmp";
    const int rc = std::system(cmd.c_str());
    CmdResult res;
    res.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    res.out = slurp("cli_out.tmp");
    res.err = slurp("cli_err.tmp");
    return res;
}

// value of a "key=value" line in stdout
std::string value_of(const std::string& out, const std::string& key) {
    const std::string needle = key + "=";
    const size_t pos = out.find(needle);
    if (pos == std::string::npos) return "";
    const size_t end = out.find('\n', pos);
    return out.substr(pos + needle.size(), end - pos - needle.size());
}

bool same_file_bytes(const std::string& a, const std::string& b) {
    return slurp(a.c_str()) == slurp(b.c_str());
}

} // namespace

TEST_CASE("simulate: prints apogee, writes trajectory") {
    const CmdResult r = run_cli(
        "simulate --cd 0.52 --alpha 1.0 --motor F24 --dry-mass 0.322 --trajectory traj_tmp.csv");
    CHECK(r.code == 0);
    CHECK_FALSE(value_of(r.out, "apogee_m").empty());
    CHECK_FALSE(value_of(r.out, "time_to_apogee_s").empty());
    const double apogee = std::stod(value_of(r.out, "apogee_m"));
    CHECK(apogee > 100.0);
    CHECK(apogee < 500.0);

    std::ifstream traj("traj_tmp.csv");
    std::string header;
    std::getline(traj, header);
    CHECK(header == "t,h,v,m");
    std::remove("traj_tmp.csv");

    // identical invocation reproduces the exact value
    const CmdResult again =
        run_cli("simulate --cd 0.52 --alpha 1.0 --motor F24 --dry-mass 0.322");
    CHECK(value_of(again.out, "apogee_m") == value_of(r.out, "apogee_m"));
}

TEST_CASE("simulate: exit codes for physics and usage failures") {
    CHECK(run_cli("simulate --cd 0.5 --alpha 0 --motor F24 --dry-mass 0.322").code == 3);
    const CmdResult unknown =
        run_cli("simulate --cd 0.5 --alpha 1 --motor Z99 --dry-mass 0.322");
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("unknown motor") != std::string::npos);
    CHECK(run_cli("simulate --cd 0.5 --motor F24").code == 2); // missing required flags
    CHECK(run_cli("").code == 2);                              // no subcommand
    // missing motor database
    const CmdResult nodb =
        run_cli("--motor-db does_not_exist.json simulate --cd .5 --alpha 1 --motor F24 --dry-mass .3",
                false);
    CHECK(nodb.code == 2);
}

TEST_CASE("generate: deterministic files, usage checks") {
    const CmdResult a = run_cli("--seed 42 generate -n 200 --out gen_a_tmp.csv --threads 1");
    CHECK(a.code == 0);
    CHECK(value_of(a.out, "rejected") == "0");
    const CmdResult b = run_cli("--seed 42 generate -n 200 --out gen_b_tmp.csv --threads 2");
    CHECK(b.code == 0);
    CHECK(same_file_bytes("gen_a_tmp.csv", "gen_b_tmp.csv"));
    CHECK(same_file_bytes("gen_a_tmp.norm.json", "gen_b_tmp.norm.json"));

    CHECK(run_cli("--seed 42 generate -n 0 --out gen_c_tmp.csv").code == 2);
    for (const char* f : {"gen_b_tmp.csv", "gen_b_tmp.norm.json"}) std::remove(f);
}

TEST_CASE("train, infer, evaluate: full pipeline on a small corpus") {
    // train twice: byte-identical model files
    const std::string train_args =
        "--seed 9 train --dataset gen_a_tmp.csv --epochs 3 --ensemble-size 2 --batch-size 64";
    const CmdResult t1 = run_cli(train_args + " --out model_a_tmp.json --threads 1");
    CHECK(t1.code == 0);
    const CmdResult t2 = run_cli(train_args + " --out model_b_tmp.json --threads 2");
    CHECK(t2.code == 0);
    CHECK(same_file_bytes("model_a_tmp.json", "model_b_tmp.json"));

    // loss history: header plus epochs rows per member
    std::ifstream losses("model_a_tmp.losses.csv");
    std::string line;
    std::getline(losses, line);
    CHECK(line == "member,epoch,train_loss,val_loss,lr");
    int rows = 0;
    while (std::getline(losses, line)) ++rows;
    CHECK(rows == 2 * 3); // members * epochs

    // infer prints the five labeled numbers
    const CmdResult inf =
        run_cli("infer --model model_a_tmp.json --h-obs 250 --motor F24 --dry-mass 0.322");
    CHECK(inf.code == 0);
    for (const char* key : {"cd_hat", "alpha_hat", "cd_std", "alpha_std", "replayed_apogee_m"})
        CHECK_FALSE(value_of(inf.out, key).empty());

    // replayed apogee equals simulate with the inferred parameters
    const CmdResult replay =
        run_cli("simulate --cd " + value_of(inf.out, "cd_hat") + " --alpha " +
                value_of(inf.out, "alpha_hat") + " --motor F24 --dry-mass 0.322");
    CHECK(replay.code == 0);
    CHECK(value_of(replay.out, "apogee_m") == value_of(inf.out, "replayed_apogee_m"));

    // evaluate with the fresh model: full table, json report, parity csv
    const CmdResult ev = run_cli(
        "evaluate --builtin --model model_a_tmp.json --json report_tmp.json "
        "--heldout gen_a_tmp.csv --parity-csv parity_tmp.csv");
    CHECK(ev.code == 0);
    CHECK(ev.out.find("valid flights: 8") != std::string::npos);
    CHECK_FALSE(value_of(ev.out, "heldout_cd_mae").empty());
    CHECK(slurp("report_tmp.json").find("\"rows\"") != std::string::npos);
    std::ifstream parity("parity_tmp.csv");
    std::getline(parity, line);
    CHECK(line == "cd_true,cd_pred,alpha_true,alpha_pred");

    // deterministic evaluate: identical report bytes on rerun
    const CmdResult ev2 = run_cli(
        "evaluate --builtin --model model_a_tmp.json --json report2_tmp.json");
    CHECK(ev2.code == 0);
    CHECK(same_file_bytes("report_tmp.json", "report2_tmp.json"));

    for (const char* f : {"gen_a_tmp.csv", "gen_a_tmp.norm.json", "model_a_tmp.json",
                          "model_b_tmp.json", "model_a_tmp.losses.csv", "model_b_tmp.losses.csv",
                          "report_tmp.json", "report2_tmp.json", "parity_tmp.csv"})
        std::remove(f);
}

TEST_CASE("evaluate: paper columns need no model, bad flights file exits 2") {
    const CmdResult ev = run_cli("evaluate --builtin --paper-columns");
    CHECK(ev.code == 0);
    CHECK(ev.out.find("positive errors 8/8") != std::string::npos);

    // model required when not scoring paper columns
    CHECK(run_cli("evaluate --builtin").code == 2);

    std::ofstream bad("bad_flights_tmp.csv");
    bad << "id,motor,config,measured_m,valid,dry_mass_kg\n1,F24,A,oops,1,\n";
    bad.close();
    const CmdResult r = run_cli("evaluate --flights bad_flights_tmp.csv --paper-columns");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
    std::remove("bad_flights_tmp.csv");
}

TEST_CASE("train: divergence exits 4, config file feeds defaults") {
    const CmdResult gen = run_cli("--seed 3 generate -n 120 --out div_tmp.csv --threads 1");
    REQUIRE(gen.code == 0);

    std::ofstream cfg("diverge_cfg_tmp.json");
    cfg << R"({"train": {"learning_rate": 1e150, "epochs": 2, "ensemble_size": 1}})";
    cfg.close();
    const CmdResult t = run_cli(
        "--config diverge_cfg_tmp.json --seed 3 train --dataset div_tmp.csv --out div_model_tmp.json");
    CHECK(t.code == 4);
    CHECK(t.err.find("training failed") != std::string::npos);

    // a sane config file trains fine and the flag still overrides it
    std::ofstream cfg2("ok_cfg_tmp.json");
    cfg2 << R"({"train": {"epochs": 5, "ensemble_size": 1, "batch_size": 64}})";
    cfg2.close();
    const CmdResult t2 = run_cli(
        "--config ok_cfg_tmp.json --seed 3 train --dataset div_tmp.csv --out div_model_tmp.json "
        "--epochs 2");
    CHECK(t2.code == 0);
    std::ifstream losses("div_model_tmp.losses.csv");
    std::string line;
    int rows = -1; // header
    while (std::getline(losses, line)) ++rows;
    CHECK(rows == 2); // --epochs 2 beat the config file's 5

    for (const char* f : {"div_tmp.csv", "div_tmp.norm.json", "diverge_cfg_tmp.json",
                          "ok_cfg_tmp.json", "div_model_tmp.json", "div_model_tmp.losses.csv"})
        std::remove(f);
}

TEST_CASE("motor db resolution: environment variable override") {
    const char* db = std::getenv("APOGEE_TEST_DB");
    REQUIRE(db != nullptr);
    const CmdResult r =
        run_cli("simulate --cd 0.52 --alpha 1.0 --motor E35 --dry-mass 0.448", false,
                std::string("APOGEE_MOTOR_DB=") + db);
    CHECK(r.code == 0);
    CHECK_FALSE(value_of(r.out, "apogee_m").empty());
}
