#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cht/eval/metrics.hpp"

namespace cht::eval {

struct YearEval {
    std::optional<Metrics> all;  // absent when the year has too few labels
    std::optional<double> r2_7;  // r2 over labels above 7 m
    int64_t n_labels = 0;
};

struct EvalReport {
    std::string config_id;
    std::map<int, YearEval> years;
    std::vector<Bin> bins;  // over all years together
};

// Prediction/label pairs for one year.
struct YearPairs {
    std::vector<float> preds;
    std::vector<float> labels;
};

EvalReport build_report(const std::string& config_id, const std::map<int, YearPairs>& pairs);

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

// Per-year MAE matrix. Values are rounded to three decimals so that the JSON and text
// renderings carry the same numbers.
struct ComparisonTable {
    struct Row {
        std::string config_id;
        std::vector<std::optional<double>> mae;  // one per year
        double avg = 0.0;                        // mean over the years present
    };
    std::vector<int> years;
    std::vector<Row> rows;  // ascending avg
};

ComparisonTable compare_configs(const std::vector<EvalReport>& reports);
nlohmann::json table_to_json(const ComparisonTable& t);
std::string table_to_text(const ComparisonTable& t);

}  // namespace cht::eval
