/*
 * Copyright 2026 The uiprune Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "uiprune/app.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using uiprune::app::Settings;

struct FlagSpec
{
    const char* name;
    const char* help;
};

constexpr FlagSpec kCommonFlags[] = {
    {"patch-size", "patch side length in pixels (default 14)"},
    {"lambda", "bbox weight in the fused supervision, in [0,1] (default 0.8)"},
    {"tau", "patch distance threshold in 0-255 units (default 2)"},
    {"ratio", "retention ratio in (0,1] (default 0.5)"},
    {"variant", "end, first, middle, drop or full (default end)"},
    {"dim", "embedding dimension (default 8)"},
    {"seed", "random seed (default 0)"},
    {"out", "output directory (default .)"},
    {"workers", "worker threads (default 1)"},
    {"iou-threshold", "drop records whose detected box has IoU below this (default 0, off)"},
};

constexpr FlagSpec kModelFlags[] = {
    {"params", "scorer params JSON; defaults to a seeded initialization"},
};

struct Command
{
    CLI::App* app = nullptr;
    std::map<std::string, std::string> flags;
    std::string config;
    std::string input;
};

void add_flags(Command& cmd, std::span<const FlagSpec> specs)
{
    for (const auto& s : specs) {
        cmd.app->add_option(std::string("--") + s.name, cmd.flags[s.name], s.help);
    }
}

Command& make_command(CLI::App& root, std::vector<std::unique_ptr<Command>>& all, const char* name,
                      const char* help, const char* input_name, const char* input_help)
{
    auto cmd = std::make_unique<Command>();
    cmd->app = root.add_subcommand(name, help);
    cmd->app->add_option(input_name, cmd->input, input_help)->required();
    cmd->app->add_option("--config", cmd->config, "key=value config file; flags override it");
    add_flags(*cmd, kCommonFlags);
    all.push_back(std::move(cmd));
    return *all.back();
}

Settings merged_settings(const Command& cmd)
{
    Settings s;
    if (!cmd.config.empty()) {
        s = uiprune::app::read_config_file(cmd.config);
    }
    for (const auto& [key, value] : cmd.flags) {
        if (cmd.app->count("--" + key) > 0) {
            s[key] = value;
        }
    }
    return s;
}

} // namespace

int main(int argc, char** argv)
{
    namespace ua = uiprune::app;
    CLI::App root{"Query-guided visual token selection for UI screenshots"};
    root.require_subcommand(1);
    std::vector<std::unique_ptr<Command>> commands;

    make_command(root, commands, "supervise", "build per-patch supervision maps", "dataset",
                 "JSONL dataset");
    auto& score = make_command(root, commands, "score", "score patches with the saliency model", "dataset",
                               "JSONL dataset");
    add_flags(score, kModelFlags);
    auto& select = make_command(root, commands, "select", "apply top-K retention and position padding", "dataset",
                                "JSONL dataset");
    add_flags(select, kModelFlags);
    select.app->add_option("--scores-dir", select.flags["scores-dir"],
                           "read {id}.saliency.json from this directory instead of scoring");
    auto& train = make_command(root, commands, "train", "train the saliency scorer", "dataset", "JSONL dataset");
    add_flags(train, kModelFlags);
    train.app->add_option("--epochs", train.flags["epochs"], "gradient steps (default 300)");
    train.app->add_option("--lr", train.flags["lr"], "learning rate (default 5)");
    train.app->add_option("--attn-loss", train.flags["attn-loss"], "also train the action head (true/false)");
    auto& eval = make_command(root, commands, "eval", "report patch recall and coverage budget", "dataset",
                              "JSONL dataset");
    add_flags(eval, kModelFlags);
    eval.app->add_option("--scorer", eval.flags["scorer"], "model, oracle or random (default model)");
    eval.app->add_option("--csv", eval.flags["csv"], "also write per-record eval.csv (true/false)");
                 make_command(root, commands, "stats", "visual token share table", "counts",
                               "CSV of name,system,visual,instruction");
    auto& synth = make_command(root, commands, "synth", "write a seeded toy dataset", "name",
                               "dataset name; writes <out>/<name>.jsonl");
    std::size_t synth_count = 100;
    synth.app->add_option("--count", synth_count, "number of records (default 100)");

    try {
        root.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = root.exit(e);
        return rc == 0 ? ua::kExitOk : ua::kExitUsage;
    }

    try {
        for (const auto& cmd : commands) {
            if (!cmd->app->parsed()) {
                continue;
            }
            const ua::RunConfig config = ua::config_from_settings(merged_settings(*cmd));
            const std::string name = cmd->app->get_name();
            if (name == "supervise") {
                return ua::cmd_supervise(cmd->input, config, std::cerr);
            }
            if (name == "score") {
                return ua::cmd_score(cmd->input, config, std::cerr);
            }
            if (name == "select") {
                return ua::cmd_select(cmd->input, config, std::cerr);
            }
            if (name == "train") {
                return ua::cmd_train(cmd->input, config, std::cerr);
            }
            if (name == "eval") {
                return ua::cmd_eval(cmd->input, config, std::cerr);
            }
            if (name == "stats") {
                return ua::cmd_stats(cmd->input, config, std::cout, std::cerr);
            }
            if (name == "synth") {
                return ua::cmd_synth(synth_count, cmd->input, config, std::cerr);
            }
        }
    } catch (const ua::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ua::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ua::kExitUsage;
    }
    return ua::kExitUsage;
}
