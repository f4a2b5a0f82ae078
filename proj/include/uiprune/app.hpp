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

#pragma once

// Command implementations behind the uiprune CLI. Each command returns a
// process exit code: 0 success, 1 partial record failure, 2 invalid invocation.

#include "uiprune/grid.hpp"
#include "uiprune/selector.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace uiprune::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

struct UsageError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

enum class ScorerKind { Model, Oracle, Random };

struct RunConfig
{
    std::size_t patch_size = 14;
    double lambda = 0.8;
    double tau = 2.0;
    double ratio = 0.5;
    PadVariant variant = PadVariant::SequenceEnd;
    std::size_t dim = 8;
    std::uint64_t seed = 0;
    std::filesystem::path out = ".";
    std::size_t workers = 1;

    // train
    std::size_t epochs = 300;
    double lr = 5.0;
    bool attn_loss = false;

    // score / select / eval
    std::optional<std::filesystem::path> params;
    std::optional<std::filesystem::path> scores_dir;
    ScorerKind scorer = ScorerKind::Model;
    bool csv = false;

    /// Records carrying a "detected" box are dropped when its IoU with the
    /// element box is below this value; 0 disables the filter.
    double iou_threshold = 0.0;
};

using Settings = std::map<std::string, std::string>;

/// Flat key=value document; '#' starts a comment, blank lines are ignored.
Settings read_config_file(const std::filesystem::path& path);

/// Builds a validated config from settings keyed by long flag name
/// (patch-size, lambda, tau, ratio, variant, dim, seed, out, workers, epochs,
/// lr, attn-loss, params, scores-dir, scorer, csv, iou-threshold).
RunConfig config_from_settings(const Settings& settings);

struct DatasetRecord
{
    std::string id;
    std::filesystem::path image_path;
    std::string instruction;
    BBox bbox;
    std::optional<BBox> detected;
};

struct Dataset
{
    std::vector<DatasetRecord> records;
    /// Lines that could not be parsed, as "line N: reason".
    std::vector<std::string> errors;
    std::size_t filtered = 0;
};

/// JSONL: {"image": path, "instruction": str, "bbox": [x1,y1,x2,y2]} per line,
/// optional "detected": [x1,y1,x2,y2]. Relative image paths resolve against
/// the dataset file's directory. Record ids are rec00000, rec00001, ... over
/// non-blank lines.
Dataset load_dataset(const std::filesystem::path& path, double iou_threshold = 0.0);

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

/// Writes text to path via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

int cmd_supervise(const std::filesystem::path& dataset, const RunConfig& config, std::ostream& log);
int cmd_score(const std::filesystem::path& dataset, const RunConfig& config, std::ostream& log);
int cmd_select(const std::filesystem::path& dataset, const RunConfig& config, std::ostream& log);
int cmd_train(const std::filesystem::path& dataset, const RunConfig& config, std::ostream& log);
int cmd_eval(const std::filesystem::path& dataset, const RunConfig& config, std::ostream& log);
/// CSV rows name,system,visual,instruction (header optional).
int cmd_stats(const std::filesystem::path& counts, const RunConfig& config, std::ostream& out, std::ostream& log);
/// Writes count seeded toy screenshots plus <name>.jsonl into config.out.
int cmd_synth(std::size_t count, const std::string& name, const RunConfig& config, std::ostream& log);

} // namespace uiprune::app
