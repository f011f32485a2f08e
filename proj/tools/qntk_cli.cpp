#include "qntk/experiments.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

enum Exit { kOk = 0, kConfig = 2, kCapacity = 3, kNumerical = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<int> threads;
};

void add_common(CLI::App *cmd, Common &c) {
    cmd->add_option("--config", c.config, "JSON config file");
    cmd->add_option("--seed", c.seed, "master seed (u64)");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--override", c.overrides, "dotted KEY=VAL applied after the file")
        ->take_all();
    cmd->add_option("--threads", c.threads, "worker threads (0: all cores)");
}

qntk::ExperimentConfig load(const Common &c, const std::string &experiment) {
    std::string text;
    nlohmann::json doc = nlohmann::json::object();
    if (!c.config.empty()) {
        std::ifstream f(c.config, std::ios::binary);
        if (!f) {
            throw qntk::ConfigError("cannot read config file '" + c.config + "'");
        }
        std::stringstream ss;
        ss << f.rdbuf();
        text = ss.str();
        try {
            doc = qntk::parse_config_text(text);
        } catch (const qntk::ConfigError &e) {
            throw qntk::ConfigError(c.config + ": " + e.what());
        }
    }
    if (!experiment.empty()) {
        if (doc.is_object() && doc.contains("experiment") && doc["experiment"] != experiment) {
            throw qntk::ConfigError("config declares experiment " + doc["experiment"].dump() +
                                    " but the subcommand is '" + experiment + "'");
        }
        doc["experiment"] = experiment;
    }
    for (const auto &o : c.overrides) {
        qntk::apply_override(doc, o);
    }
    if (c.seed) {
        doc["seed"] = *c.seed;
    }
    if (!c.out.empty()) {
        doc["out"] = c.out;
    }
    if (c.threads) {
        doc["threads"] = *c.threads;
    }
    try {
        return qntk::config_from_json(doc, text);
    } catch (const qntk::ConfigError &e) {
        throw qntk::ConfigError((c.config.empty() ? std::string("config") : c.config) + ": " +
                                e.what());
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum neural tangent kernel experiments on Heisenberg ground states"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("qntk ") + qntk::kVersion);

    const std::vector<std::string> experiments{"gen-data",      "train",
                                               "kernel-concentration", "lazy-training",
                                               "lin-vs-true",   "generalization"};
    std::vector<Common> opts(experiments.size() + 1);
    std::vector<CLI::App *> cmds;
    for (std::size_t i = 0; i < experiments.size(); ++i) {
        cmds.push_back(app.add_subcommand(experiments[i], "run the " + experiments[i] +
                                                              " experiment"));
        add_common(cmds.back(), opts[i]);
    }
    auto *validate = app.add_subcommand("validate", "check a config and print resolved rules");
    add_common(validate, opts.back());
    std::string positional;
    validate->add_option("path", positional, "config file (same as --config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (validate->parsed()) {
            Common c = opts.back();
            if (c.config.empty()) {
                c.config = positional;
            }
            if (c.config.empty()) {
                throw qntk::ConfigError("validate needs a config file");
            }
            const auto cfg = load(c, "");
            std::cout << c.config << ": ok\n" << qntk::describe_resolution(cfg);
            return kOk;
        }
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            if (!cmds[i]->parsed()) {
                continue;
            }
            const auto cfg = load(opts[i], experiments[i]);
            const auto manifest = qntk::run_experiment(cfg);
            std::cout << "wrote " << cfg.out << "/manifest.json\n"
                      << manifest["summary"].dump(2) << '\n';
        }
        return kOk;
    } catch (const qntk::CapacityError &e) {
        std::cerr << "capacity error: " << e.what() << '\n';
        return kCapacity;
    } catch (const qntk::DomainError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const qntk::NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
