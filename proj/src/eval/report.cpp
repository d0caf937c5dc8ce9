#include "cht/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "cht/error.hpp"

namespace cht::eval {

namespace {

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace

EvalReport build_report(const std::string& config_id, const std::map<int, YearPairs>& pairs) {
    EvalReport r;
    r.config_id = config_id;
    std::vector<float> all_p, all_l;
    for (const auto& [year, p] : pairs) {
        YearEval y;
        y.n_labels = static_cast<int64_t>(p.labels.size());
        try {
            y.all = metrics(p.preds, p.labels);
        } catch (const InsufficientDataError&) {
        }
        try {
            y.r2_7 = metrics(p.preds, p.labels, 7.0).r2;
        } catch (const InsufficientDataError&) {
        }
        r.years[year] = y;
        all_p.insert(all_p.end(), p.preds.begin(), p.preds.end());
        all_l.insert(all_l.end(), p.labels.begin(), p.labels.end());
    }
    r.bins = binned_errors(all_p, all_l);
    return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json years = nlohmann::json::object();
    for (const auto& [year, y] : r.years) {
        nlohmann::json j = {{"n_labels", y.n_labels}};
        if (y.all) {
            j["mae"] = y.all->mae;
            j["mse"] = y.all->mse;
            j["r2"] = y.all->r2;
        } else {
            j["mae"] = j["mse"] = j["r2"] = nullptr;
        }
        j["r2_7"] = y.r2_7 ? nlohmann::json(*y.r2_7) : nlohmann::json(nullptr);
        years[std::to_string(year)] = j;
    }
    return {{"config_id", r.config_id}, {"years", years}, {"bins", bins_to_json(r.bins)}};
}

EvalReport report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.config_id = j.at("config_id").get<std::string>();
        for (const auto& [key, y] : j.at("years").items()) {
            YearEval e;
            e.n_labels = y.at("n_labels").get<int64_t>();
            if (!y.at("mae").is_null()) {
                e.all = Metrics{y.at("mae").get<double>(), y.at("mse").get<double>(), y.at("r2").get<double>(),
                                e.n_labels};
            }
            if (!y.at("r2_7").is_null()) e.r2_7 = y.at("r2_7").get<double>();
            r.years[std::stoi(key)] = e;
        }
        for (const auto& b : j.at("bins")) {
            Bin bin{b.at("lo").get<double>(), b.at("hi").get<double>(), std::nullopt, b.at("count").get<int64_t>()};
            if (!b.at("mean_error").is_null()) bin.mean_error = b.at("mean_error").get<double>();
            r.bins.push_back(bin);
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("eval report: ") + e.what());
    }
}

ComparisonTable compare_configs(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw DomainError("compare_configs: no reports");
    ComparisonTable t;
    std::set<int> years;
    for (const auto& r : reports)
        for (const auto& [y, e] : r.years) years.insert(y);
    t.years.assign(years.begin(), years.end());
    for (const auto& r : reports) {
        ComparisonTable::Row row;
        row.config_id = r.config_id;
        double sum = 0.0;
        int n = 0;
        for (int y : t.years) {
            const auto it = r.years.find(y);
            if (it != r.years.end() && it->second.all) {
                const double v = round3(it->second.all->mae);
                row.mae.push_back(v);
                sum += v;
                ++n;
            } else {
                row.mae.push_back(std::nullopt);
            }
        }
        row.avg = n ? round3(sum / n) : NAN;
        t.rows.push_back(row);
    }
    std::stable_sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
        if (std::isnan(a.avg) != std::isnan(b.avg)) return std::isnan(b.avg);
        return a.avg < b.avg;
    });
    return t;
}

nlohmann::json table_to_json(const ComparisonTable& t) {
    auto rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json mae = nlohmann::json::object();
        for (size_t i = 0; i < t.years.size(); ++i) {
            mae[std::to_string(t.years[i])] = r.mae[i] ? nlohmann::json(*r.mae[i]) : nlohmann::json(nullptr);
        }
        rows.push_back({{"config_id", r.config_id},
                        {"mae", mae},
                        {"avg", std::isnan(r.avg) ? nlohmann::json(nullptr) : nlohmann::json(r.avg)}});
    }
    return {{"years", t.years}, {"rows", rows}};
}

std::string table_to_text(const ComparisonTable& t) {
    size_t id_width = 6;
    for (const auto& r : t.rows) id_width = std::max(id_width, r.config_id.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(id_width)) << "config";
    for (int y : t.years) out << "  " << std::right << std::setw(8) << y;
    out << "  " << std::setw(8) << "Avg" << '\n';
    out << std::fixed << std::setprecision(3);
    for (const auto& r : t.rows) {
        out << std::left << std::setw(static_cast<int>(id_width)) << r.config_id << std::right;
        for (const auto& v : r.mae) {
            out << "  " << std::setw(8);
            if (v) {
                out << *v;
            } else {
                out << "-";
            }
        }
        out << "  " << std::setw(8);
        if (std::isnan(r.avg)) {
            out << "-";
        } else {
            out << r.avg;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace cht::eval
