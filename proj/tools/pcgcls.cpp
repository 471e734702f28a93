// Command-line front end: pcgcls <synth|train|evaluate|predict|features|segment> [flags]

#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "pcgcls/error.hpp"
#include "pcgcls/pipeline.hpp"

namespace {

struct Command {
    const char* name;
    const char* help;
    void (*run)(const pcg::RunConfig&);
};

void run_synth(const pcg::RunConfig& c) { pcg::cmd_synth(c, std::cerr); }
void run_train(const pcg::RunConfig& c) { pcg::cmd_train(c, std::cerr); }
void run_evaluate(const pcg::RunConfig& c) { pcg::cmd_evaluate(c, std::cout, std::cerr); }
void run_predict(const pcg::RunConfig& c) { pcg::cmd_predict(c, std::cout, std::cerr); }
void run_features(const pcg::RunConfig& c) { pcg::cmd_features(c, std::cerr); }
void run_segment(const pcg::RunConfig& c) { pcg::cmd_segment(c, std::cerr); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heart-sound beat classification: synthesis, training, evaluation and prediction"};
    app.require_subcommand(1);

    const Command commands[] = {
        {"synth", "write a seeded synthetic dataset to --out", run_synth},
        {"train", "train --model and write the model container, history and report", run_train},
        {"evaluate", "score a model on the TEST split", run_evaluate},
        {"predict", "per-beat scores for one recording (--wav, --annotations)", run_predict},
        {"features", "dump feature maps of every beat", run_features},
        {"segment", "dump length-normalised beats", run_segment},
    };

    std::string config_path;
    std::map<std::string, std::string> overrides;
    const Command* chosen = nullptr;

    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_path, "key = value config file");
        for (const auto& key : pcg::config_keys()) {
            std::string names = "--" + key.name;
            std::string hyphenated = key.name;
            std::replace(hyphenated.begin(), hyphenated.end(), '_', '-');
            if (hyphenated != key.name) names += ",--" + hyphenated;
            sub->add_option_function<std::string>(
                names, [&overrides, name = key.name](const std::string& v) { overrides[name] = v; }, key.help);
        }
        sub->callback([&chosen, &cmd] { chosen = &cmd; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        pcg::ConfigValues values;
        if (!config_path.empty()) values = pcg::load_config_file(config_path);
        for (const auto& [k, v] : overrides) values[k] = v;
        const pcg::RunConfig cfg = pcg::make_run_config(values);
        chosen->run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pcg::exit_code_for(e);
    }
    return 0;
}
