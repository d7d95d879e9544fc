#include "drift/errors.hpp"
#include "drift/fs.hpp"
#include "drift/eval/eval.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace drift::eval {
namespace {

constexpr const char* kAverageRow = "average";

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(kMissingCell); }

std::optional<double> parse_cell(const std::string& s, const std::string& where) {
    if (s == kMissingCell) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(fmt::format("{}: '{}' is not a number", where, s));
    }
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream in(line);
    for (std::string f; std::getline(in, f, '\t');) out.push_back(f);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

std::optional<double> column_mean(const Report& r, std::size_t method, std::optional<double> MethodCell::*field) {
    double total = 0.0;
    int n = 0;
    for (const auto& row : r.rows) {
        if (const auto& v = row.cells[method].*field) {
            total += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return total / n;
}

const char* layout_name(Layout l) { return l == Layout::table1 ? "table1" : "table2"; }

}  // namespace

MethodCell to_cell(const Metrics& m) { return {m.top1, m.macro_f1, m.auc, {}}; }

std::string report_filename(Layout layout, const std::string& dataset, const std::string& config_hash,
                            std::uint64_t seed) {
    return fmt::format("{}_{}_{}_seed{}.tsv", layout_name(layout), dataset, config_hash.substr(0, 12), seed);
}

void emit_report(const Report& report, const std::filesystem::path& path) {
    if (report.rows.empty() || report.methods.empty()) throw EvaluationError("report has no rows or no methods");
    for (const auto& row : report.rows) {
        if (row.cells.size() != report.methods.size()) {
            throw DimensionError(fmt::format("row '{}' has {} cells for {} methods", row.dataset, row.cells.size(),
                                             report.methods.size()));
        }
    }

    std::ostringstream tsv;
    if (report.layout == Layout::table1) {
        tsv << "# Classes\tDataset";
        for (const auto& m : report.methods) tsv << fmt::format("\t{0} Acc.\t{0} Macro-F1\t{0} AUC", m);
        tsv << '\n';
        for (const auto& row : report.rows) {
            tsv << row.num_classes << '\t' << row.dataset;
            for (const auto& c : row.cells) tsv << '\t' << cell(c.accuracy) << '\t' << cell(c.macro_f1) << '\t' << cell(c.auc);
            tsv << '\n';
        }
        tsv << '\t' << kAverageRow;
        for (std::size_t m = 0; m < report.methods.size(); ++m) {
            tsv << '\t' << cell(column_mean(report, m, &MethodCell::accuracy)) << '\t'
                << cell(column_mean(report, m, &MethodCell::macro_f1)) << '\t'
                << cell(column_mean(report, m, &MethodCell::auc));
        }
        tsv << '\n';
    } else {
        tsv << "Dataset";
        for (const auto& m : report.methods) tsv << fmt::format("\t{0} Target\t{0} Accuracy", m);
        tsv << '\n';
        for (const auto& row : report.rows) {
            tsv << row.dataset;
            for (const auto& c : row.cells) tsv << '\t' << c.target << '\t' << cell(c.accuracy);
            tsv << '\n';
        }
    }

    ensure_directory(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write report {}", path.string()));
    out << tsv.str();
    std::ofstream side(path.string() + ".json");
    if (!side) throw IoError(fmt::format("cannot write report sidecar {}.json", path.string()));
    side << nlohmann::json(report).dump(2) << '\n';
    if (!out || !side) throw IoError(fmt::format("failed writing report {}", path.string()));
}

Report parse_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read report {}", path.string()));
    std::string line;
    if (!std::getline(in, line)) throw ParseError(fmt::format("{}: empty report", path.string()));
    const auto header = split_tabs(line);

    Report report;
    std::size_t per_method = 0;
    std::size_t lead = 0;
    std::string suffix;
    if (header.size() >= 2 && header[0] == "# Classes" && header[1] == "Dataset") {
        report.layout = Layout::table1;
        per_method = 3;
        lead = 2;
        suffix = " Acc.";
    } else if (!header.empty() && header[0] == "Dataset") {
        report.layout = Layout::table2;
        per_method = 2;
        lead = 1;
        suffix = " Target";
    } else {
        throw ParseError(fmt::format("{}:1: unrecognised report header", path.string()));
    }
    if ((header.size() - lead) % per_method != 0) {
        throw ParseError(fmt::format("{}:1: ragged header", path.string()));
    }
    for (std::size_t i = lead; i < header.size(); i += per_method) {
        const auto& h = header[i];
        if (h.size() <= suffix.size() || h.compare(h.size() - suffix.size(), suffix.size(), suffix) != 0) {
            throw ParseError(fmt::format("{}:1: unexpected column '{}'", path.string(), h));
        }
        report.methods.push_back(h.substr(0, h.size() - suffix.size()));
    }

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        const std::string where = fmt::format("{}:{}", path.string(), line_no);
        if (f.size() != header.size()) {
            throw ParseError(fmt::format("{}: {} fields, header has {}", where, f.size(), header.size()));
        }
        ReportRow row;
        if (report.layout == Layout::table1) {
            if (f[1] == kAverageRow && f[0].empty()) continue;
            try {
                row.num_classes = std::stoi(f[0]);
            } catch (const std::exception&) {
                throw ParseError(fmt::format("{}: bad class count '{}'", where, f[0]));
            }
            row.dataset = f[1];
            for (std::size_t i = lead; i < f.size(); i += 3) {
                row.cells.push_back({parse_cell(f[i], where), parse_cell(f[i + 1], where), parse_cell(f[i + 2], where), {}});
            }
        } else {
            row.dataset = f[0];
            for (std::size_t i = lead; i < f.size(); i += 2) {
                row.cells.push_back({parse_cell(f[i + 1], where), std::nullopt, std::nullopt, f[i]});
            }
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

Report read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read report {}", path.string()));
    try {
        return nlohmann::json::parse(in).get<Report>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
std::optional<double> opt_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const Report& r) {
    j = nlohmann::json{{"layout", layout_name(r.layout)}, {"methods", r.methods}};
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : row.cells) {
            cells.push_back({{"accuracy", opt(c.accuracy)},
                             {"macro_f1", opt(c.macro_f1)},
                             {"auc", opt(c.auc)},
                             {"target", c.target}});
        }
        rows.push_back({{"dataset", row.dataset}, {"num_classes", row.num_classes}, {"cells", cells}});
    }
}

void from_json(const nlohmann::json& j, Report& r) {
    const auto layout = j.at("layout").get<std::string>();
    if (layout == "table1") {
        r.layout = Layout::table1;
    } else if (layout == "table2") {
        r.layout = Layout::table2;
    } else {
        throw ParseError(fmt::format("unknown report layout '{}'", layout));
    }
    r.methods = j.at("methods").get<std::vector<std::string>>();
    r.rows.clear();
    for (const auto& row : j.at("rows")) {
        ReportRow out;
        out.dataset = row.at("dataset").get<std::string>();
        out.num_classes = row.at("num_classes").get<int>();
        for (const auto& c : row.at("cells")) {
            out.cells.push_back({opt_from(c.at("accuracy")), opt_from(c.at("macro_f1")), opt_from(c.at("auc")),
                                 c.at("target").get<std::string>()});
        }
        r.rows.push_back(std::move(out));
    }
}

}  // namespace drift::eval
