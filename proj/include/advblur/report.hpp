// Copyright 2026 The AdvBlur Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "advblur/csv.hpp"
#include "advblur/evaluator.hpp"

namespace advblur {

enum class Layout { camera_table, external_table, masking_table, ablation_table };

inline std::string to_string(Layout l) {
    switch (l) {
        case Layout::camera_table: return "camera_table";
        case Layout::external_table: return "external_table";
        case Layout::masking_table: return "masking_table";
        case Layout::ablation_table: return "ablation_table";
    }
    return "?";
}

inline Layout parse_layout(std::string_view s) {
    if (s == "camera_table") return Layout::camera_table;
    if (s == "external_table") return Layout::external_table;
    if (s == "masking_table") return Layout::masking_table;
    if (s == "ablation_table") return Layout::ablation_table;
    throw InvalidArgument("unknown layout '" + std::string(s) + "'");
}

inline constexpr std::string_view kNormalAccuracy = "Normal Accuracy";
inline constexpr std::string_view kWithMasking = "With Masking";
inline constexpr std::string_view kReportCsvHeader = "method,domain,accuracy,std,n";

/// Half-up rounding to `decimals` places. The relative slack absorbs binary
/// representation error, so 82.55 renders as 82.6.
inline std::string format_fixed(double v, int decimals = 1) {
    if (!std::isfinite(v)) return "nan";
    const double scale = std::pow(10.0, decimals);
    const double scaled = std::abs(v) * scale;
    const double rounded = std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, scaled)) / scale;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v < 0 && rounded != 0.0 ? -rounded : rounded);
    return buf;
}

/// Display header of a test domain: canonical dataset names and "Camera X".
inline std::string domain_header(const std::string& domain) {
    static const std::map<std::string, std::string, std::less<>> names{
        {"messidor1", "Messidor-1"}, {"messidor2", "Messidor-2"}, {"aptos", "APTOS"}, {"eyepacs", "EyePACS"}};
    if (auto it = names.find(domain); it != names.end()) return it->second;
    if (domain.size() == 1 && domain[0] >= 'A' && domain[0] <= 'E') return "Camera " + domain;
    return domain;
}

struct TableCell {
    double accuracy = 0.0;
    std::optional<double> std;
};

/// A method x domain grid plus a per-row average column.
struct Table {
    std::vector<std::string> methods;
    std::vector<std::string> domains;
    std::vector<std::vector<TableCell>> cells;  // [method][domain]

    double row_average(std::size_t m) const {
        double s = 0.0;
        for (const auto& c : cells[m]) s += c.accuracy;
        return s / static_cast<double>(cells[m].size());
    }
};

namespace report_detail {

inline std::vector<std::string> ordered_unique(const std::vector<EvalRow>& rows, std::string EvalRow::*field) {
    std::vector<std::string> out;
    for (const auto& r : rows)
        if (std::find(out.begin(), out.end(), r.*field) == out.end()) out.push_back(r.*field);
    return out;
}

/// Known external datasets first in their canonical order, others after in report order.
inline std::vector<std::string> external_order(std::vector<std::string> domains) {
    static const std::vector<std::string> canon{"messidor1", "messidor2", "aptos"};
    std::stable_sort(domains.begin(), domains.end(), [&](const std::string& a, const std::string& b) {
        auto rank = [&](const std::string& d) {
            auto it = std::find(canon.begin(), canon.end(), d);
            return it == canon.end() ? canon.size() : static_cast<std::size_t>(it - canon.begin());
        };
        return rank(a) < rank(b);
    });
    return domains;
}

}  // namespace report_detail

/// Arranges report rows for `layout`; throws if the rows do not fit it.
inline Table make_table(const EvalReport& report, Layout layout) {
    report.validate();
    if (report.rows.empty()) throw InvalidArgument("report has no rows");
    Table t;
    t.methods = report_detail::ordered_unique(report.rows, &EvalRow::method);
    t.domains = report_detail::ordered_unique(report.rows, &EvalRow::domain);
    switch (layout) {
        case Layout::camera_table: {
            std::vector<std::string> want{"D", "E"};
            auto have = t.domains;
            std::sort(have.begin(), have.end());
            if (have != want) throw InvalidArgument("camera_table needs exactly the domains D and E");
            t.domains = want;
            break;
        }
        case Layout::external_table:
            t.domains = report_detail::external_order(t.domains);
            break;
        case Layout::masking_table: {
            auto have = t.methods;
            std::sort(have.begin(), have.end());
            if (have != std::vector<std::string>{std::string(kNormalAccuracy), std::string(kWithMasking)}) {
                throw InvalidArgument("masking_table needs exactly the rows 'Normal Accuracy' and 'With Masking'");
            }
            t.methods = {std::string(kNormalAccuracy), std::string(kWithMasking)};
            break;
        }
        case Layout::ablation_table:
            break;
    }
    t.cells.assign(t.methods.size(), std::vector<TableCell>(t.domains.size()));
    std::vector<std::vector<int>> seen(t.methods.size(), std::vector<int>(t.domains.size(), 0));
    for (const auto& r : report.rows) {
        const auto m = static_cast<std::size_t>(std::find(t.methods.begin(), t.methods.end(), r.method) - t.methods.begin());
        const auto d = static_cast<std::size_t>(std::find(t.domains.begin(), t.domains.end(), r.domain) - t.domains.begin());
        if (++seen[m][d] > 1) throw InvalidArgument("duplicate row " + r.method + "/" + r.domain);
        t.cells[m][d] = {r.accuracy, r.std};
    }
    for (std::size_t m = 0; m < t.methods.size(); ++m)
        for (std::size_t d = 0; d < t.domains.size(); ++d)
            if (!seen[m][d]) throw InvalidArgument("missing row " + t.methods[m] + "/" + t.domains[d]);
    return t;
}

/// Aligned text: one row per method, domain columns then Avg; the best value of
/// each column is marked with '*'.
inline std::string render_text(const Table& t, const std::string& title = {}) {
    const std::size_t cols = t.domains.size() + 1;
    std::vector<std::string> header{"Method"};
    for (const auto& d : t.domains) header.push_back(domain_header(d));
    header.push_back("Avg");

    auto value = [&](std::size_t m, std::size_t c) {
        return c < t.domains.size() ? t.cells[m][c].accuracy : t.row_average(m);
    };
    std::vector<double> best(cols, -1.0);
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t m = 0; m < t.methods.size(); ++m) best[c] = std::max(best[c], std::stod(format_fixed(value(m, c))));

    std::vector<std::vector<std::string>> grid{header};
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
        std::vector<std::string> row{t.methods[m]};
        for (std::size_t c = 0; c < cols; ++c) {
            std::string s = format_fixed(value(m, c));
            if (c < t.domains.size() && t.cells[m][c].std) s += " ± " + format_fixed(*t.cells[m][c].std);
            if (t.methods.size() > 1 && std::stod(format_fixed(value(m, c))) == best[c]) s += " *";
            row.push_back(std::move(s));
        }
        grid.push_back(std::move(row));
    }

    // "±" is two bytes in UTF-8 but one column wide.
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
        return w;
    };
    std::vector<std::size_t> widths(cols + 1, 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));

    std::ostringstream out;
    if (!title.empty()) out << title << "\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::size_t c = 0; c < grid[r].size(); ++c) {
            const std::size_t pad = widths[c] - width(grid[r][c]);
            if (c == 0) {
                out << grid[r][c] << std::string(pad, ' ');
            } else {
                out << "  " << std::string(pad, ' ') << grid[r][c];
            }
        }
        out << "\n";
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c ? 2 : 0);
            out << std::string(total, '-') << "\n";
        }
    }
    return out.str();
}

inline std::string report_footer(const EvalReport& report) {
    std::ostringstream out;
    out << "Accuracy in %, top-1 over grades 0-4. '*' marks the best value per column.\n";
    bool any_std = false;
    for (const auto& r : report.rows) any_std |= r.std.has_value();
    if (any_std) {
        out << "± is the population standard deviation (divide by N)";
        if (!report.provenance.seeds.empty()) out << " over " << report.provenance.seeds.size() << " seeds";
        out << ".\n";
    }
    if (!report.provenance.config_hash.empty()) out << "config " << report.provenance.config_hash.substr(0, 12);
    if (!report.provenance.seeds.empty()) {
        out << (report.provenance.config_hash.empty() ? "" : ", ") << "seeds";
        for (auto s : report.provenance.seeds) out << " " << s;
    }
    if (!report.provenance.config_hash.empty() || !report.provenance.seeds.empty()) out << "\n";
    return out.str();
}

/// CSV rows at full precision (%.17g); an absent std is an empty field.
inline std::string render_csv(const EvalReport& report) {
    std::ostringstream out;
    out << kReportCsvHeader << "\n";
    char buf[64];
    for (const auto& r : report.rows) {
        out << csv::escape(r.method) << "," << csv::escape(r.domain) << ",";
        std::snprintf(buf, sizeof buf, "%.17g", r.accuracy);
        out << buf << ",";
        if (r.std) {
            std::snprintf(buf, sizeof buf, "%.17g", *r.std);
            out << buf;
        }
        out << "," << r.n << "\n";
    }
    return out.str();
}

inline std::vector<EvalRow> parse_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kReportCsvHeader) throw InvalidArgument("report CSV header mismatch");
    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv::split_line(line);
        if (!f || f->size() != 5) throw InvalidArgument("malformed report CSV row: " + line);
        EvalRow r;
        r.method = (*f)[0];
        r.domain = (*f)[1];
        r.accuracy = std::stod((*f)[2]);
        if (!(*f)[3].empty()) r.std = std::stod((*f)[3]);
        r.n = static_cast<std::size_t>(std::stoull((*f)[4]));
        rows.push_back(std::move(r));
    }
    return rows;
}

struct RenderedReport {
    std::filesystem::path csv_path;
    std::filesystem::path text_path;
    std::string text;
};

/// Writes `<out>.csv` and `<out>.txt`.
inline RenderedReport render_report(const EvalReport& report, Layout layout, const std::filesystem::path& out,
                                    const std::string& title = {}) {
    const Table table = make_table(report, layout);
    RenderedReport r;
    r.text = render_text(table, title) + "\n" + report_footer(report);
    r.csv_path = out;
    r.csv_path += ".csv";
    r.text_path = out;
    r.text_path += ".txt";
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    std::ofstream csv(r.csv_path, std::ios::trunc);
    std::ofstream txt(r.text_path, std::ios::trunc);
    if (!csv || !txt) throw Error("cannot write report " + out.string());
    csv << render_csv(report);
    txt << r.text;
    if (!csv || !txt) throw Error("failed writing report " + out.string());
    return r;
}

}  // namespace advblur
