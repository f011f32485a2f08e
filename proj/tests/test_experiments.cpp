#include "doctest.h"

#include "qntk/experiments.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace qntk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const auto p = fs::temp_directory_path() / ("qntk_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Checks the header and that every row has the header's column count.
void check_csv(const fs::path &p, const std::string &header) {
    std::istringstream in(slurp(p));
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == header);
    const auto commas = std::count(header.begin(), header.end(), ',');
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == commas);
        ++rows;
    }
    CHECK(rows > 0);
}

std::string error_of(const json &doc, const std::string &text = {}) {
    try {
        (void)config_from_json(doc, text);
    } catch (const std::exception &e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("minimal config resolves defaults") {
    const auto c = config_from_json({{"experiment", "train"}, {"seed", 7}});
    CHECK(c.experiment == Experiment::Train);
    CHECK(c.seed == 7);
    CHECK(c.num_qubits() == 8);
    CHECK(c.delta_for(8) == 1.0 / 64);
    CHECK(c.kappa_for(8) == doctest::Approx(std::sqrt(0.05) / 512));
    CHECK(c.eta.kind == EtaRule::Kind::Auto);
    CHECK(config_from_json({{"experiment", "kernel-concentration"}, {"seed", 1}}).kappa == 1.0);

    const auto big = config_from_json(
        {{"experiment", "train"}, {"seed", 18446744073709551615ULL}, {"eta", "inv-lambda-max"},
         {"eta_scale", 0.5}, {"delta", 0.2}, {"kappa", 0.3}});
    CHECK(big.seed == 18446744073709551615ULL);
    CHECK(big.eta.kind == EtaRule::Kind::InverseLambdaMax);
    CHECK(big.eta.value == 0.5);
    CHECK(big.delta_for(8) == 0.2);
    CHECK(big.kappa_for(8) == 0.3);
}

TEST_CASE("resolved config round-trips") {
    const auto c = config_from_json({{"experiment", "generalization"},
                                     {"seed", 3},
                                     {"ansatz", {{"m", 4}, {"L", 2}}},
                                     {"eta", 0.25},
                                     {"sweep", {{"Ms", {5, 10}}, {"seeds", 2}}}});
    const auto again = config_from_json(config_to_json(c));
    CHECK(config_to_json(again) == config_to_json(c));
    CHECK(again.Ms == std::vector<std::size_t>{5, 10});
    CHECK(again.eta.value == 0.25);
}

TEST_CASE("config errors name the field and its line") {
    const std::string text = "{\n  \"experiment\": \"train\",\n  \"ansatz\": {\"m\": 3}\n}\n";
    const auto doc = parse_config_text(text);
    auto msg = error_of(doc, text);
    CHECK(msg.find("seed") != std::string::npos);
    CHECK(msg.find("missing") != std::string::npos);

    const std::string odd = "{\n  \"experiment\": \"train\",\n  \"seed\": 1,\n  \"ansatz\": {\"m\": 3}\n}\n";
    msg = error_of(parse_config_text(odd), odd);
    CHECK(msg.find("line 4") != std::string::npos);
    CHECK(msg.find("even") != std::string::npos);

    CHECK(error_of({{"experiment", "train"}, {"seed", 1}, {"ansatz", {{"m", 4}}}, {"lattice", {{"cols", 3}}}})
              .find("divide") != std::string::npos);
    CHECK(error_of({{"experiment", "train"}, {"seed", 1}, {"gamma", 1.5}}).find("gamma") !=
          std::string::npos);
    CHECK(error_of({{"experiment", "train"}, {"seed", 1}, {"kappa", 0}}).find("kappa") !=
          std::string::npos);
    CHECK(error_of({{"experiment", "train"}, {"seed", 1}, {"eta", "fast"}}).find("eta") !=
          std::string::npos);
    CHECK(error_of({{"experiment", "train"}, {"seed", -1}}).find("seed") != std::string::npos);
    CHECK(error_of({{"experiment", "train"}, {"seed", 1}, {"Mtrain", 3}}).find("unknown field") !=
          std::string::npos);
    CHECK(error_of({{"experiment", "dance"}, {"seed", 1}}).find("unknown experiment") !=
          std::string::npos);
    CHECK(error_of({{"experiment", "lazy-training"}, {"seed", 1}, {"sweep", {{"ns", {5}}}}})
              .find("sweep.ns") != std::string::npos);
    CHECK(error_of({{"experiment", "train"}, {"seed", 1}, {"T", "many"}}).find("integer") !=
          std::string::npos);

    CHECK_THROWS_AS(config_from_json({{"experiment", "train"}, {"seed", 1}, {"lattice", {{"cols", 8}}}}),
                    CapacityError);
    CHECK_THROWS_AS(config_from_json({{"experiment", "kernel-concentration"},
                                      {"seed", 1},
                                      {"sweep", {{"ns", {4, 16}}}}}),
                    CapacityError);
}

TEST_CASE("syntax errors report line and column") {
    const std::string text = "{\n  \"seed\": 1,\n  \"T\": ,\n}\n";
    try {
        (void)parse_config_text(text);
        FAIL("expected a parse error");
    } catch (const ConfigError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("column") != std::string::npos);
    }
}

TEST_CASE("dotted overrides") {
    json doc = {{"experiment", "train"}, {"seed", 1}};
    apply_override(doc, "ansatz.m=4");
    apply_override(doc, "eta=inv-lambda-max");
    apply_override(doc, "sweep.Ms=[5,6]");
    apply_override(doc, "save_dataset=true");
    CHECK(doc["ansatz"]["m"] == 4);
    CHECK(doc["eta"] == "inv-lambda-max");
    CHECK(doc["sweep"]["Ms"] == json::array({5, 6}));
    CHECK(doc["save_dataset"] == true);
    CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "seed.x=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "a..b=3"), ConfigError);
}

TEST_CASE("resolution report") {
    const auto c = config_from_json({{"experiment", "train"}, {"seed", 1}});
    const auto text = describe_resolution(c);
    CHECK(text.find("delta = 0.015625 (rule 1/n^2)") != std::string::npos);
    CHECK(text.find("lambda_min(K0)/M^2") != std::string::npos);
    CHECK(text.find("1e-6") != std::string::npos);
    CHECK(text.find("kappa") != std::string::npos);
}

TEST_CASE("fnv1a") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("experiments write their files and a manifest") {
    const json base = {{"seed", 5},
                       {"lattice", {{"rows", 2}, {"cols", 2}}},
                       {"ansatz", {{"m", 2}, {"r", 2}, {"L", 2}}},
                       {"T", 4},
                       {"M_train", 4},
                       {"M_test", 2},
                       {"eta", "inv-lambda-max"}};
    const std::map<std::string, std::map<std::string, std::string>> expected = {
        {"gen-data", {{"dataset.json", ""}}},
        {"train", {{"trace.csv", "iter,loss,grad_norm,eta,wallclock_ms"}}},
        {"kernel-concentration", {{"concentration.csv", "n,trial_count,variance"}}},
        {"lazy-training",
         {{"drift.csv", "n,t,min,q25,median,q75,max"},
          {"drift_pooled.csv", "n,steps,min,q25,median,q75,max"}}},
        {"lin-vs-true",
         {{"gap.csv", "t,true_loss,lin_loss,gap,envelope"},
          {"trace.csv", "iter,loss,grad_norm,eta,wallclock_ms"}}},
        {"generalization",
         {{"generalization.csv", "M,seed_index,T,eta,train_loss,gen_error"},
          {"generalization_median.csv", "M,median_gen_error"},
          {"bounds.csv", "M,eta,lambda_min,lambda_max,T_star,trace_exp,B1,B2"}}}};
    for (const auto &[name, files] : expected) {
        CAPTURE(name);
        json doc = base;
        doc["experiment"] = name;
        doc["out"] = scratch(name).string();
        doc["sweep"] = {{"ns", {4, 6}}, {"trials", 3}, {"Ms", {2, 4}}, {"seeds", 2}};
        const auto cfg = config_from_json(doc);
        const auto manifest = run_experiment(cfg);
        const fs::path out = cfg.out;
        CHECK(fs::exists(out / "manifest.json"));
        CHECK(manifest["experiment"] == name);
        CHECK(manifest["config"] == config_to_json(cfg));
        CHECK(manifest["config_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
        CHECK(manifest.contains("wallclock_ms"));
        CHECK(manifest["versions"].contains("eigen"));
        std::vector<std::string> listed;
        for (const auto &f : manifest["files"]) {
            listed.push_back(f["name"]);
            CHECK(fs::file_size(out / f["name"].get<std::string>()) == f["bytes"].get<std::size_t>());
        }
        for (const auto &[file, header] : files) {
            CHECK(std::find(listed.begin(), listed.end(), file) != listed.end());
            if (!header.empty()) {
                check_csv(out / file, header);
            }
        }
        fs::remove_all(out);
    }
}

TEST_CASE("train writes parameter sidecars and a reloadable dataset") {
    const auto out = scratch("sidecars");
    const auto cfg = config_from_json({{"experiment", "train"},
                                       {"seed", 9},
                                       {"lattice", {{"rows", 1}, {"cols", 4}}},
                                       {"T", 4},
                                       {"M_train", 3},
                                       {"M_test", 1},
                                       {"eta", 0.1},
                                       {"kappa", 0.1},
                                       {"param_stride", 2},
                                       {"save_dataset", true},
                                       {"save_amplitudes", false},
                                       {"out", out.string()}});
    (void)run_experiment(cfg);
    for (const char *f : {"params_initial.json", "params_final.json", "params/theta_0.json",
                          "params/theta_2.json", "params/theta_4.json", "circuit.json",
                          "dataset.json"}) {
        CHECK(fs::exists(out / f));
    }
    const auto circuit = circuit_from_json(json::parse(slurp(out / "circuit.json")));
    const auto theta = params_from_json(json::parse(slurp(out / "params_initial.json")), circuit);
    CHECK(theta.values == init_params(circuit, 0.1, 9).values);
    const auto [tr, te] = datasets_from_json(json::parse(slurp(out / "dataset.json")));
    CHECK(tr.size() == 3);
    CHECK(te.size() == 1);
    fs::remove_all(out);
}

TEST_CASE("csv bodies are identical across runs and thread counts") {
    json doc = {{"experiment", "lin-vs-true"},
                {"seed", 11},
                {"lattice", {{"rows", 2}, {"cols", 2}}},
                {"ansatz", {{"m", 2}, {"L", 2}}},
                {"T", 6},
                {"M_train", 5},
                {"eta", "inv-lambda-max"}};
    std::vector<std::string> gaps;
    for (int threads : {1, 3}) {
        const auto out = scratch("repro" + std::to_string(threads));
        doc["threads"] = threads;
        doc["out"] = out.string();
        (void)run_experiment(config_from_json(doc));
        gaps.push_back(slurp(out / "gap.csv"));
        fs::remove_all(out);
    }
    CHECK(gaps[0] == gaps[1]);
}
