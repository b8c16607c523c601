#include "omnigaze/evalrep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "omnigaze/errors.hpp"

using nlohmann::json;

namespace omnigaze {

EvalReport evaluate(GazeEstimatorParams& model, const Dataset& ds, uint64_t config_hash,
                    uint64_t seed) {
    if (ds.empty()) throw InvalidArgument("evaluate: empty dataset");
    for (const auto& s : ds.samples)
        if (!s.label)
            throw InvalidArgument("evaluate: dataset '" + ds.name +
                                  "' has unlabeled samples and no oracle was supplied");
    std::vector<size_t> idx(ds.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor preds = estimator_predict(model, features_matrix(ds, idx));

    std::vector<float> errors(ds.size());
    double total = 0.0;
    for (size_t i = 0; i < ds.size(); ++i) {
        const DirectionVector a = to_direction(gaze_from_row(preds, i));
        const DirectionVector b = to_direction(*ds.samples[i].label);
        errors[i] = angular_error(a, b).value;
        total += errors[i];
    }
    EvalReport rep;
    rep.dataset = ds.name;
    rep.count = ds.size();
    rep.mean_deg = static_cast<float>(total / static_cast<double>(ds.size()));
    std::sort(errors.begin(), errors.end());
    for (int d = 1; d <= 9; ++d) {
        const size_t pos = std::min(errors.size() - 1,
                                    static_cast<size_t>(d * errors.size() / 10));
        rep.decile_deg[d - 1] = errors[pos];
    }
    rep.config_hash = config_hash;
    rep.seed = seed;
    return rep;
}

double discrimination_auc(std::span<const float> scores, const std::vector<bool>& clean_mask) {
    if (scores.size() != clean_mask.size())
        throw ShapeError("discrimination_auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(clean_mask.size()) + " mask entries");
    size_t n_pos = 0, n_neg = 0;
    for (bool c : clean_mask) (c ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw InvalidArgument("discrimination_auc: both classes must be present");
    double wins = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!clean_mask[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (clean_mask[j]) continue;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

TrainConfig AblationCell::apply(TrainConfig base) const {
    if (weight_sup) base.weight_sup = *weight_sup;
    if (weight_unsup) base.weight_unsup = *weight_unsup;
    if (filtering) base.filtering = *filtering;
    if (reweighting) base.reweighting = *reweighting;
    if (confidence_variant) base.confidence_variant = *confidence_variant;
    if (refresh_enabled) base.refresh_enabled = *refresh_enabled;
    if (refresh_interval) base.refresh_interval = *refresh_interval;
    return base;
}

std::vector<AblationCell> default_grid() {
    AblationCell baseline;
    baseline.name = "baseline";
    baseline.weight_sup = 1.0f;
    baseline.weight_unsup = 0.0f;
    AblationCell nofilter;
    nofilter.name = "nofilter";
    nofilter.filtering = false;
    nofilter.reweighting = false;
    AblationCell full;
    full.name = "full";
    return {baseline, nofilter, full};
}

std::vector<AblationCell> parse_grid_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("grid: ") + e.what());
    }
    if (!j.is_array()) throw ParseError("grid: top level must be an array of cells");
    std::vector<AblationCell> cells;
    for (const auto& item : j) {
        AblationCell c;
        for (const auto& [key, value] : item.items()) {
            if (key == "name")
                c.name = value.get<std::string>();
            else if (key == "weight_sup")
                c.weight_sup = value.get<float>();
            else if (key == "weight_unsup")
                c.weight_unsup = value.get<float>();
            else if (key == "filtering")
                c.filtering = value.get<bool>();
            else if (key == "reweighting")
                c.reweighting = value.get<bool>();
            else if (key == "confidence_variant") {
                const std::string v = value.get<std::string>();
                if (v == "full")
                    c.confidence_variant = ConfidenceVariant::full;
                else if (v == "initial_only")
                    c.confidence_variant = ConfidenceVariant::initial_only;
                else
                    throw ParseError("grid: confidence_variant must be full|initial_only");
            } else if (key == "refresh_enabled")
                c.refresh_enabled = value.get<bool>();
            else if (key == "refresh_interval")
                c.refresh_interval = value.get<int>();
            else
                throw ParseError("grid: unknown key '" + key + "'");
        }
        if (c.name.empty()) throw ParseError("grid: cell without a name");
        cells.push_back(std::move(c));
    }
    return cells;
}

AblationTable run_ablation(const std::vector<AblationCell>& grid, const Dataset& labeled,
                           const Dataset& unlabeled, const Dataset& eval_oracle,
                           const TrainConfig& base, const std::vector<uint64_t>& seeds,
                           CueProvider& cues, int jobs) {
    if (seeds.empty()) throw InvalidArgument("run_ablation: need at least one seed");

    struct Job {
        size_t cell;
        uint64_t seed;
    };
    std::vector<Job> todo;
    for (size_t c = 0; c < grid.size(); ++c)
        for (uint64_t s : seeds) todo.push_back({c, s});

    std::vector<AblationRow> rows(todo.size());
    auto run_one = [&](size_t k) {
        const Job& job = todo[k];
        AblationRow row;
        row.config = grid[job.cell].name;
        row.seed = job.seed;
        try {
            TrainConfig cfg = grid[job.cell].apply(base);
            cfg.seed = job.seed;
            RunResult res = run_selftraining(labeled, unlabeled, cfg, cues);
            const EvalReport rep = evaluate(res.student, eval_oracle, 0, job.seed);
            row.mean_deg = rep.mean_deg;
            row.n = rep.count;
            if (!res.ssl_history.records.empty())
                row.retained_fraction_final = res.ssl_history.records.back().retained_fraction;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows[k] = std::move(row);
    };

    if (jobs <= 1) {
        for (size_t k = 0; k < todo.size(); ++k) run_one(k);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> workers;
        const int n_workers = std::min<int>(jobs, static_cast<int>(todo.size()));
        for (int w = 0; w < n_workers; ++w)
            workers.emplace_back([&] {
                for (size_t k = next.fetch_add(1); k < todo.size(); k = next.fetch_add(1))
                    run_one(k);
            });
        for (auto& t : workers) t.join();
    }

    AblationTable table;
    table.rows = std::move(rows);
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const AblationRow& a, const AblationRow& b) {
                         return a.config != b.config ? a.config < b.config : a.seed < b.seed;
                     });

    for (size_t i = 0; i < table.rows.size();) {
        size_t j = i;
        double sum = 0.0;
        size_t count = 0;
        while (j < table.rows.size() && table.rows[j].config == table.rows[i].config) {
            if (!table.rows[j].failed) {
                sum += table.rows[j].mean_deg;
                ++count;
            }
            ++j;
        }
        AblationRow s;
        s.config = table.rows[i].config;
        s.n = count;
        if (count > 0) {
            const double mean = sum / static_cast<double>(count);
            s.mean_deg = static_cast<float>(mean);
            if (count > 1) {
                double ss = 0.0;
                for (size_t k = i; k < j; ++k)
                    if (!table.rows[k].failed) {
                        const double d = table.rows[k].mean_deg - mean;
                        ss += d * d;
                    }
                s.sd_deg = static_cast<float>(std::sqrt(ss / static_cast<double>(count - 1)));
            }
        } else {
            s.failed = true;
            s.error = "all seeds failed";
        }
        table.summary.push_back(std::move(s));
        i = j;
    }
    return table;
}

// ---------------------------------------------------------------------------

namespace {

json row_to_json(const AblationRow& r) {
    json j;
    j["config"] = r.config;
    j["seed"] = r.seed;
    j["mean_deg"] = r.mean_deg;
    if (r.sd_deg) j["sd_deg"] = *r.sd_deg;
    j["n"] = r.n;
    if (r.retained_fraction_final) j["retained_fraction_final"] = *r.retained_fraction_final;
    if (r.failed) j["error"] = r.error;
    return j;
}

}  // namespace

std::string report_json(const std::vector<AblationRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(row_to_json(r));
    return arr.dump(2) + "\n";
}

std::string eval_report_json(const EvalReport& r) {
    json j;
    j["dataset"] = r.dataset;
    j["n"] = r.count;
    j["mean_deg"] = r.mean_deg;
    json dec = json::array();
    for (float d : r.decile_deg) dec.push_back(d);
    j["decile_deg"] = std::move(dec);
    j["config_hash"] = r.config_hash;
    j["seed"] = r.seed;
    return j.dump(2) + "\n";
}

void write_report(const std::vector<AblationRow>& rows, const std::string& path,
                  ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    switch (format) {
        case ReportFormat::json:
            out << report_json(rows);
            break;
        case ReportFormat::csv: {
            out << "config,seed,mean_deg,sd_deg,n,retained_fraction_final,error\n";
            for (const auto& r : rows) {
                out << r.config << ',' << r.seed << ',' << r.mean_deg << ',';
                if (r.sd_deg) out << *r.sd_deg;
                out << ',' << r.n << ',';
                if (r.retained_fraction_final) out << *r.retained_fraction_final;
                out << ',' << (r.failed ? r.error : "") << "\n";
            }
            break;
        }
        case ReportFormat::markdown: {
            out << "| config | seed | mean_deg | sd_deg | n | retained |\n";
            out << "|---|---|---|---|---|---|\n";
            for (const auto& r : rows) {
                out << "| " << r.config << " | " << r.seed << " | " << r.mean_deg << " | ";
                if (r.sd_deg) out << *r.sd_deg;
                out << " | " << r.n << " | ";
                if (r.retained_fraction_final) out << *r.retained_fraction_final;
                out << " |\n";
            }
            break;
        }
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace omnigaze
