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

#include "uiprune/head.hpp"
#include "uiprune/image_io.hpp"
#include "uiprune/metrics.hpp"
#include "uiprune/parallel.hpp"
#include "uiprune/scorer.hpp"
#include "uiprune/supervision.hpp"
#include "uiprune/synthetic.hpp"
#include "uiprune/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace uiprune::app {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw UsageError("--" + key + " expects a number, got '" + v + "'");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] == '-') {
            throw std::invalid_argument(v);
        }
        const auto u = std::stoull(v, &used);
        if (used != v.size()) {
            throw std::invalid_argument(v);
        }
        return u;
    } catch (const std::exception&) {
        throw UsageError("--" + key + " expects a non-negative integer, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw UsageError("--" + key + " expects a boolean, got '" + v + "'");
}

BBox parse_box(const json& j)
{
    if (!j.is_array() || j.size() != 4) {
        throw std::invalid_argument("box must be [x1,y1,x2,y2]");
    }
    BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!b.valid()) {
        throw std::invalid_argument("box must be finite, non-negative with x1<=x2 and y1<=y2");
    }
    return b;
}

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

std::string record_id(std::size_t index)
{
    std::array<char, 16> buf{};
    std::snprintf(buf.data(), buf.size(), "rec%05zu", index);
    return buf.data();
}

struct Outcome
{
    bool ok = true;
    std::string message;
};

/// Runs fn over all records on the worker pool, logs failures in record
/// order and returns the exit code.
template <typename Fn>
int for_each_record(const Dataset& ds, const RunConfig& config, std::ostream& log, Fn&& fn)
{
    std::vector<Outcome> outcomes(ds.records.size());
    parallel_for(ds.records.size(), config.workers, [&](std::size_t i) {
        try {
            fn(i, ds.records[i]);
        } catch (const std::exception& e) {
            outcomes[i] = {false, e.what()};
        }
    });
    std::size_t failed = ds.errors.size();
    for (const auto& e : ds.errors) {
        log << "skipped " << e << "\n";
    }
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok) {
            ++failed;
            log << "skipped " << ds.records[i].id << ": " << outcomes[i].message << "\n";
        }
    }
    log << (ds.records.size() + ds.errors.size() - failed) << " record(s) ok, " << failed << " failed\n";
    return failed == 0 ? kExitOk : kExitPartial;
}

std::vector<std::uint8_t> heatmap_pixels(const ScoreMap& map, std::size_t p)
{
    const auto vals = map.values();
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    const double range = *hi - *lo;
    const std::size_t w = map.grid_w() * p;
    std::vector<std::uint8_t> px(map.grid_h() * p * w);
    for (std::size_t i = 0; i < map.grid_h(); ++i) {
        for (std::size_t j = 0; j < map.grid_w(); ++j) {
            const double norm = range > 0.0 ? (map(i, j) - *lo) / range : 128.0 / 255.0;
            const auto level = static_cast<std::uint8_t>(std::lround(norm * 255.0));
            for (std::size_t y = i * p; y < (i + 1) * p; ++y) {
                std::fill_n(px.begin() + static_cast<std::ptrdiff_t>(y * w + j * p), p, level);
            }
        }
    }
    return px;
}

void write_heatmap(const fs::path& path, const ScoreMap& map, std::size_t p)
{
    write_png_gray(path, map.grid_h() * p, map.grid_w() * p, heatmap_pixels(map, p));
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return json::parse(in);
}

ScorerParams load_scorer(const RunConfig& config)
{
    if (config.params) {
        return scorer_params_from_json(read_json(*config.params));
    }
    return ScorerParams::init(config.dim, config.seed);
}

std::vector<double> model_scores(const DatasetRecord& rec, const ImageBuffer& image, const PatchGrid& grid,
                                 const ScorerParams& params)
{
    return scorer_forward(patch_embeddings(image, grid, params.dim, params.seed),
                          text_embeddings(rec.instruction, params.dim, params.seed), params);
}

std::vector<double> random_scores(std::size_t m, std::uint64_t seed, std::size_t index, std::uint64_t stream)
{
    std::mt19937_64 rng(seed ^ (stream * 0x9e3779b97f4a7c15ULL) ^ (index * 0xbf58476d1ce4e5b9ULL));
    std::vector<double> s(m);
    for (double& v : s) {
        v = uniform(rng, 0.0, 1.0);
    }
    return s;
}

constexpr std::array<double, 4> kRecallFractions{0.05, 0.10, 0.25, 0.50};
constexpr std::array<const char*, 4> kRecallKeys{"recall_at_5", "recall_at_10", "recall_at_25", "recall_at_50"};

struct RecallRow
{
    std::array<double, 4> recall{};
    double average = 0.0;
    double budget = 0.0;
};

RecallRow evaluate_scores(std::span<const double> scores, const GtMask& gt)
{
    RecallRow row;
    for (std::size_t k = 0; k < kRecallFractions.size(); ++k) {
        row.recall[k] = patch_recall_at_k(scores, gt, kRecallFractions[k]);
        row.average += row.recall[k] / static_cast<double>(kRecallFractions.size());
    }
    row.budget = full_coverage_budget(scores, gt);
    return row;
}

json row_json(const RecallRow& row)
{
    json j;
    for (std::size_t k = 0; k < kRecallKeys.size(); ++k) {
        j[kRecallKeys[k]] = row.recall[k];
    }
    j["recall_avg"] = row.average;
    j["coverage_budget"] = row.budget;
    return j;
}

std::string_view scorer_name(ScorerKind k)
{
    switch (k) {
    case ScorerKind::Oracle:
        return "oracle";
    case ScorerKind::Random:
        return "random";
    default:
        return "model";
    }
}

} // namespace

Settings read_config_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot read config file " + path.string());
    }
    Settings s;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key=value");
        }
        s[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return s;
}

RunConfig config_from_settings(const Settings& settings)
{
    RunConfig c;
    for (const auto& [key, value] : settings) {
        if (key == "patch-size") {
            c.patch_size = parse_uint(key, value);
        } else if (key == "lambda") {
            c.lambda = parse_double(key, value);
        } else if (key == "tau") {
            c.tau = parse_double(key, value);
        } else if (key == "ratio") {
            c.ratio = parse_double(key, value);
        } else if (key == "variant") {
            const auto v = parse_variant(value);
            if (!v) {
                throw UsageError("--variant must be one of end, first, middle, drop, full");
            }
            c.variant = *v;
        } else if (key == "dim") {
            c.dim = parse_uint(key, value);
        } else if (key == "seed") {
            c.seed = parse_uint(key, value);
        } else if (key == "out") {
            c.out = value;
        } else if (key == "workers") {
            c.workers = parse_uint(key, value);
        } else if (key == "epochs") {
            c.epochs = parse_uint(key, value);
        } else if (key == "lr") {
            c.lr = parse_double(key, value);
        } else if (key == "attn-loss") {
            c.attn_loss = parse_bool(key, value);
        } else if (key == "params") {
            c.params = value;
        } else if (key == "scores-dir") {
            c.scores_dir = value;
        } else if (key == "scorer") {
            if (value == "model") {
                c.scorer = ScorerKind::Model;
            } else if (value == "oracle") {
                c.scorer = ScorerKind::Oracle;
            } else if (value == "random") {
                c.scorer = ScorerKind::Random;
            } else {
                throw UsageError("--scorer must be model, oracle or random");
            }
        } else if (key == "csv") {
            c.csv = parse_bool(key, value);
        } else if (key == "iou-threshold") {
            c.iou_threshold = parse_double(key, value);
        } else {
            throw UsageError("unknown setting '" + key + "'");
        }
    }
    if (c.patch_size < 1) {
        throw UsageError("--patch-size must be >= 1");
    }
    if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) {
        throw UsageError("--lambda must lie in [0,1]");
    }
    if (c.tau < 0.0) {
        throw UsageError("--tau must be >= 0");
    }
    if (!(c.ratio > 0.0 && c.ratio <= 1.0)) {
        throw UsageError("--ratio must lie in (0,1]");
    }
    if (c.dim < 1) {
        throw UsageError("--dim must be >= 1");
    }
    if (c.workers < 1) {
        throw UsageError("--workers must be >= 1");
    }
    if (c.lr < 0.0) {
        throw UsageError("--lr must be >= 0");
    }
    if (c.iou_threshold < 0.0 || c.iou_threshold > 1.0) {
        throw UsageError("--iou-threshold must lie in [0,1]");
    }
    return c;
}

Dataset load_dataset(const fs::path& path, double iou_threshold)
{
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot read dataset " + path.string());
    }
    const fs::path base = path.parent_path();
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const std::string id = record_id(index++);
        try {
            const json j = json::parse(line);
            DatasetRecord rec;
            rec.id = id;
            rec.image_path = j.at("image").get<std::string>();
            if (rec.image_path.is_relative()) {
                rec.image_path = base / rec.image_path;
            }
            rec.instruction = j.at("instruction").get<std::string>();
            rec.bbox = parse_box(j.at("bbox"));
            if (j.contains("detected")) {
                rec.detected = parse_box(j.at("detected"));
            }
            if (iou_threshold > 0.0 && rec.detected) {
                const AnnotatedBox pair{rec.bbox, *rec.detected};
                if (filter_by_iou(std::span(&pair, 1), iou_threshold).empty()) {
                    ++ds.filtered;
                    continue;
                }
            }
            ds.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            ds.errors.push_back(id + " (line " + std::to_string(line_no) + "): " + e.what());
        }
    }
    return ds;
}

void write_dataset(const fs::path& path, const std::vector<DatasetRecord>& records)
{
    std::string text;
    for (const auto& r : records) {
        json j{{"image", r.image_path.string()},
               {"instruction", r.instruction},
               {"bbox", {r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2}}};
        if (r.detected) {
            j["detected"] = {r.detected->x1, r.detected->y1, r.detected->x2, r.detected->y2};
        }
        text += j.dump() + "\n";
    }
    write_file_atomic(path, text);
}

void write_file_atomic(const fs::path& path, const std::string& contents)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out << contents;
        if (!out) {
            throw std::runtime_error("write failed for " + path.string());
        }
    }
    fs::rename(tmp, path);
}

int cmd_supervise(const fs::path& dataset, const RunConfig& config, std::ostream& log)
{
    const Dataset ds = load_dataset(dataset, config.iou_threshold);
    fs::create_directories(config.out);
    const FusionConfig fusion{config.lambda, config.tau};
    return for_each_record(ds, config, log, [&](std::size_t, const DatasetRecord& rec) {
        const ImageBuffer image = load_image(rec.image_path);
        const PatchGrid grid = make_grid(image.height(), image.width(), config.patch_size);
        const ScoreMap map = build_supervision(image, grid, rec.bbox, fusion);
        write_file_atomic(config.out / (rec.id + ".supervision.json"), dump(to_json(map)));
        write_heatmap(config.out / (rec.id + ".supervision.png"), map, grid.patch_size);
    });
}

int cmd_score(const fs::path& dataset, const RunConfig& config, std::ostream& log)
{
    const Dataset ds = load_dataset(dataset, config.iou_threshold);
    const ScorerParams params = load_scorer(config);
    fs::create_directories(config.out);
    return for_each_record(ds, config, log, [&](std::size_t, const DatasetRecord& rec) {
        const ImageBuffer image = load_image(rec.image_path);
        const PatchGrid grid = make_grid(image.height(), image.width(), config.patch_size);
        const ScoreMap map(grid.grid_h, grid.grid_w, model_scores(rec, image, grid, params));
        write_file_atomic(config.out / (rec.id + ".saliency.json"), dump(to_json(map)));
        write_heatmap(config.out / (rec.id + ".saliency.png"), map, grid.patch_size);
    });
}

int cmd_select(const fs::path& dataset, const RunConfig& config, std::ostream& log)
{
    const Dataset ds = load_dataset(dataset, config.iou_threshold);
    std::optional<ScorerParams> params;
    if (!config.scores_dir) {
        params = load_scorer(config);
    }
    fs::create_directories(config.out);
    return for_each_record(ds, config, log, [&](std::size_t, const DatasetRecord& rec) {
        const ImageBuffer image = load_image(rec.image_path);
        const PatchGrid grid = make_grid(image.height(), image.width(), config.patch_size);
        std::vector<double> scores;
        if (config.scores_dir) {
            const ScoreMap map = score_map_from_json(read_json(*config.scores_dir / (rec.id + ".saliency.json")));
            if (map.grid_h() != grid.grid_h || map.grid_w() != grid.grid_w) {
                throw std::invalid_argument("saliency map shape does not match the image grid");
            }
            scores.assign(map.values().begin(), map.values().end());
        } else {
            scores = model_scores(rec, image, grid, *params);
        }

        const SelectionPlan plan = select_topk(scores, config.ratio);
        const DroppedRuns runs = partition_runs(plan.dropped, plan.m());
        const TokenSequence seq = pospad_transform(plan, runs, config.variant, grid);
        const SequenceStats stats = sequence_stats(seq);

        json trace = to_json(seq);
        trace["u"] = runs.count();
        trace["k"] = plan.k;
        trace["gamma"] = plan.threshold;
        trace["ratio"] = config.ratio;
        trace["kept_count"] = stats.kept_count;
        trace["pad_count"] = stats.pad_count;
        write_file_atomic(config.out / (rec.id + ".selection.json"), dump(trace));

        ImageBuffer masked = image;
        const std::size_t p = grid.patch_size;
        for (std::size_t idx : plan.dropped) {
            const GridCoord c = flat_to_coord(idx, grid);
            for (std::size_t y = c.h * p; y < (c.h + 1) * p; ++y) {
                for (std::size_t x = c.w * p; x < (c.w + 1) * p; ++x) {
                    masked.set_rgb(y, x, 0.0, 0.0, 0.0);
                }
            }
        }
        write_png_rgb(config.out / (rec.id + ".masked.png"), masked);
    });
}

int cmd_train(const fs::path& dataset, const RunConfig& config, std::ostream& log)
{
    const Dataset ds = load_dataset(dataset, config.iou_threshold);
    const ScorerParams init = config.params ? load_scorer(config) : ScorerParams::init(config.dim, config.seed);
    const FusionConfig fusion{config.lambda, config.tau};

    std::vector<std::optional<TrainSample>> slots(ds.records.size());
    const int load_status = for_each_record(ds, config, log, [&](std::size_t i, const DatasetRecord& rec) {
        const ImageBuffer image = load_image(rec.image_path);
        const PatchGrid grid = make_grid(image.height(), image.width(), config.patch_size);
        const ScoreMap target = build_supervision(image, grid, rec.bbox, fusion);
        TrainSample s{patch_embeddings(image, grid, init.dim, init.seed),
                      text_embeddings(rec.instruction, init.dim, init.seed),
                      std::vector<double>(target.values().begin(), target.values().end()),
                      std::nullopt};
        if (config.attn_loss) {
            HeadSample h{std::vector<double>(init.dim, 0.0), gt_mask_from_bbox(grid, rec.bbox).mask};
            for (std::size_t j = 0; j < s.text.rows(); ++j) {
                for (std::size_t c = 0; c < init.dim; ++c) {
                    h.h_actor[c] += s.text(j, c) / static_cast<double>(s.text.rows());
                }
            }
            s.head = std::move(h);
        }
        slots[i] = std::move(s);
    });

    std::vector<TrainSample> samples;
    for (auto& s : slots) {
        if (s) {
            samples.push_back(std::move(*s));
        }
    }
    if (samples.empty()) {
        log << "error: no usable training records\n";
        return kExitUsage;
    }

    TrainOptions options;
    options.lr = config.lr;
    options.epochs = config.epochs;
    options.workers = config.workers;
    options.attention_loss = config.attn_loss;
    options.head_ratio = config.ratio;
    std::optional<HeadParams> head;
    if (config.attn_loss) {
        head = HeadParams::init(init.dim, init.seed);
    }

    TrainResult result;
    try {
        result = train_scorer(samples, init, options, head);
    } catch (const DivergenceError& e) {
        log << "error: " << e.what() << " (epoch " << e.epoch() << ")\n";
        return kExitPartial;
    }

    fs::create_directories(config.out);
    write_file_atomic(config.out / "params.json", dump(to_json(result.scorer)));
    if (result.head) {
        write_file_atomic(config.out / "head_params.json", dump(to_json(*result.head)));
    }
    std::ostringstream csv;
    csv << std::setprecision(17) << "epoch,ins2patch,attention,total\n";
    for (const auto& e : result.trace) {
        csv << e.epoch << "," << e.ins2patch << "," << e.attention << "," << e.total << "\n";
    }
    write_file_atomic(config.out / "loss_trace.csv", csv.str());
    if (!result.trace.empty()) {
        log << "trained " << samples.size() << " record(s) for " << result.trace.size() << " epoch(s): loss "
            << result.trace.front().total << " -> " << result.trace.back().total << "\n";
    }
    return load_status;
}

int cmd_eval(const fs::path& dataset, const RunConfig& config, std::ostream& log)
{
    const Dataset ds = load_dataset(dataset, config.iou_threshold);
    std::optional<ScorerParams> params;
    if (config.scorer == ScorerKind::Model) {
        params = load_scorer(config);
    }

    struct Row
    {
        bool evaluated = false;
        std::size_t m = 0;
        std::size_t gt = 0;
        RecallRow model;
        RecallRow random;
    };
    std::vector<Row> rows(ds.records.size());
    const int status = for_each_record(ds, config, log, [&](std::size_t i, const DatasetRecord& rec) {
        const ImageBuffer image = load_image(rec.image_path);
        const PatchGrid grid = make_grid(image.height(), image.width(), config.patch_size);
        const GtMask gt = gt_mask_from_bbox(grid, rec.bbox);
        Row& row = rows[i];
        row.m = grid.size();
        row.gt = gt.positives();
        if (gt.empty()) {
            return;
        }
        std::vector<double> scores;
        switch (config.scorer) {
        case ScorerKind::Model:
            scores = model_scores(rec, image, grid, *params);
            break;
        case ScorerKind::Oracle:
            scores.assign(gt.mask.begin(), gt.mask.end());
            break;
        case ScorerKind::Random:
            scores = random_scores(grid.size(), config.seed, i, 1);
            break;
        }
        row.model = evaluate_scores(scores, gt);
        row.random = evaluate_scores(random_scores(grid.size(), config.seed, i, 2), gt);
        row.evaluated = true;
    });

    json records = json::array();
    RecallRow sum_model;
    RecallRow sum_random;
    std::size_t evaluated = 0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        if (!r.evaluated) {
            if (r.m > 0 && r.gt == 0) {
                ++excluded;
            }
            continue;
        }
        ++evaluated;
        json j = row_json(r.model);
        j["id"] = ds.records[i].id;
        j["m"] = r.m;
        j["gt_patches"] = r.gt;
        records.push_back(std::move(j));
        for (std::size_t k = 0; k < 4; ++k) {
            sum_model.recall[k] += r.model.recall[k];
            sum_random.recall[k] += r.random.recall[k];
        }
        sum_model.average += r.model.average;
        sum_random.average += r.random.average;
        sum_model.budget += r.model.budget;
        sum_random.budget += r.random.budget;
    }
    auto mean = [&](RecallRow s) {
        const double n = evaluated > 0 ? static_cast<double>(evaluated) : 1.0;
        for (double& v : s.recall) {
            v /= n;
        }
        s.average /= n;
        s.budget /= n;
        return s;
    };
    const RecallRow agg = mean(sum_model);
    const RecallRow rnd = mean(sum_random);

    json report{{"scorer", std::string(scorer_name(config.scorer))},
                {"evaluated", evaluated},
                {"excluded_empty_gt", excluded},
                {"failed", ds.errors.size() + (ds.records.size() - evaluated - excluded)},
                {"filtered_iou", ds.filtered},
                {"aggregate", row_json(agg)},
                {"random_baseline", row_json(rnd)},
                {"records", std::move(records)}};
    fs::create_directories(config.out);
    write_file_atomic(config.out / "eval_report.json", dump(report));

    if (config.csv) {
        std::ostringstream csv;
        csv << std::setprecision(17) << "id,m,gt_patches,recall_at_5,recall_at_10,recall_at_25,recall_at_50,"
            << "recall_avg,coverage_budget\n";
        for (const auto& j : report["records"]) {
            csv << j["id"].get<std::string>() << "," << j["m"].get<std::size_t>() << ","
                << j["gt_patches"].get<std::size_t>();
            for (const char* key : kRecallKeys) {
                csv << "," << j[key].get<double>();
            }
            csv << "," << j["recall_avg"].get<double>() << "," << j["coverage_budget"].get<double>() << "\n";
        }
        write_file_atomic(config.out / "eval.csv", csv.str());
    }

    log << std::fixed << std::setprecision(3) << "evaluated " << evaluated << " record(s), excluded " << excluded
        << " with empty GT\n";
    log << "            @5%    @10%   @25%   @50%   avg    budget\n";
    auto print = [&](const char* name, const RecallRow& r) {
        log << std::left << std::setw(10) << name << std::right;
        for (double v : r.recall) {
            log << std::setw(7) << v;
        }
        log << std::setw(7) << r.average << std::setw(7) << r.budget << "\n";
    };
    print(std::string(scorer_name(config.scorer)).c_str(), agg);
    print("random", rnd);
    log.unsetf(std::ios::floatfield);
    return status;
}

int cmd_stats(const fs::path& counts, const RunConfig& config, std::ostream& out, std::ostream& log)
{
    std::ifstream in(counts);
    if (!in) {
        throw UsageError("cannot read token counts " + counts.string());
    }
    json rows = json::array();
    std::string line;
    std::size_t line_no = 0;
    std::size_t failed = 0;
    out << std::left << std::setw(24) << "name" << std::right << std::setw(10) << "system" << std::setw(10)
        << "visual" << std::setw(12) << "instruction" << std::setw(10) << "visual%" << "\n";
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            fields.push_back(trim(f));
        }
        try {
            if (fields.size() != 4) {
                throw std::invalid_argument("expected name,system,visual,instruction");
            }
            double vals[3];
            for (int k = 0; k < 3; ++k) {
                std::size_t used = 0;
                vals[k] = std::stod(fields[k + 1], &used);
                if (used != fields[k + 1].size()) {
                    throw std::invalid_argument("non-numeric count");
                }
            }
            const TokenStats t = token_share(vals[0], vals[1], vals[2]);
            rows.push_back({{"name", fields[0]},
                            {"n_system", t.n_system},
                            {"n_visual", t.n_visual},
                            {"n_instruction", t.n_instruction},
                            {"visual_share", t.visual_share}});
            out << std::left << std::setw(24) << fields[0] << std::right << std::setw(10) << t.n_system
                << std::setw(10) << t.n_visual << std::setw(12) << t.n_instruction << std::setw(9) << std::fixed
                << std::setprecision(1) << t.visual_share * 100.0 << "%\n";
            out.unsetf(std::ios::floatfield);
        } catch (const std::exception& e) {
            // A non-numeric first row is a header.
            if (line_no == 1 && rows.empty()) {
                continue;
            }
            ++failed;
            log << "skipped line " << line_no << ": " << e.what() << "\n";
        }
    }
    fs::create_directories(config.out);
    write_file_atomic(config.out / "token_stats.json", dump(json{{"rows", std::move(rows)}}));
    return failed == 0 ? kExitOk : kExitPartial;
}

int cmd_synth(std::size_t count, const std::string& name, const RunConfig& config, std::ostream& log)
{
    SyntheticOptions opts;
    opts.patch_size = config.patch_size;
    const auto data = make_synthetic_dataset(count, config.seed, opts);
    const fs::path image_dir = config.out / (name + "_images");
    fs::create_directories(image_dir);
    std::vector<DatasetRecord> records(data.size());
    parallel_for(data.size(), config.workers, [&](std::size_t i) {
        const fs::path rel = fs::path(name + "_images") / (record_id(i) + ".png");
        write_png_rgb(config.out / rel, data[i].image);
        records[i] = DatasetRecord{record_id(i), rel, data[i].instruction, data[i].bbox, std::nullopt};
    });
    write_dataset(config.out / (name + ".jsonl"), records);
    log << "wrote " << count << " synthetic record(s) to " << (config.out / (name + ".jsonl")).string() << "\n";
    return kExitOk;
}

} // namespace uiprune::app
