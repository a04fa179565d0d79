#include "livseg/clinical_csv.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "livseg/error.hpp"

namespace livseg {
namespace {

enum class ColumnType { Binary, Involvement, Clip, Tnm, Real };

const std::map<std::string, ColumnType, std::less<>>& column_types() {
    static const std::map<std::string, ColumnType, std::less<>> types = {
        {"T_involvement", ColumnType::Involvement},
        {"personal_history_of_cancer", ColumnType::Binary},
        {"lymphnodes", ColumnType::Binary},
        {"CLIP_score", ColumnType::Clip},
        {"TNM", ColumnType::Tnm},
        {"metastasis", ColumnType::Binary},
        {"evidence_of_cirrhosis", ColumnType::Binary},
        {"alcohol", ColumnType::Binary},
        {"AFP", ColumnType::Real},
        {"smoking", ColumnType::Binary},
        {"diabetes", ColumnType::Binary},
        {"family_history", ColumnType::Binary},
        {"age", ColumnType::Real},
        {"TTP", ColumnType::Real},
        {"Interval_BL", ColumnType::Real},
    };
    return types;
}

std::string trim_lower(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::optional<double> parse_real(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

bool is_missing_cell(std::string_view cell) {
    const auto t = trim_lower(cell);
    return t.empty() || t == "na" || t == "n/a" || t == "nan";
}

}  // namespace

bool ClinicalRecord::any_missing() const {
    return std::any_of(missing.begin(), missing.end(), [](bool m) { return m; });
}

std::optional<std::size_t> ClinicalTable::feature_index(std::string_view name) const {
    const auto it = std::find(features.begin(), features.end(), name);
    if (it == features.end()) return std::nullopt;
    return static_cast<std::size_t>(it - features.begin());
}

const std::vector<std::string>& clinical_schema() {
    static const std::vector<std::string> schema = {
        "T_involvement", "personal_history_of_cancer", "lymphnodes", "CLIP_score", "TNM",
        "metastasis",    "evidence_of_cirrhosis",      "alcohol",    "AFP",        "smoking",
        "diabetes",      "family_history",             "age",        "TTP",        "Interval_BL",
    };
    return schema;
}

std::optional<double> encode_clinical_cell(std::string_view column, std::string_view cell) {
    const auto& types = column_types();
    const auto it = types.find(column);
    const ColumnType type = it == types.end() ? ColumnType::Real : it->second;
    const std::string t = trim_lower(cell);
    switch (type) {
        case ColumnType::Binary:
            if (t == "yes" || t == "y" || t == "true" || t == "1") return 1.0;
            if (t == "no" || t == "n" || t == "false" || t == "0") return 0.0;
            return std::nullopt;
        case ColumnType::Involvement:
            if (t == "<50%" || t == "0") return 0.0;
            if (t == ">50%" || t == ">=50%" || t == "1") return 1.0;
            return std::nullopt;
        case ColumnType::Clip: {
            const auto v = parse_real(t);
            if (!v || *v != std::floor(*v) || *v < 0.0 || *v > 6.0) return std::nullopt;
            return v;
        }
        case ColumnType::Tnm: {
            static const std::array<std::pair<std::string_view, double>, 7> stages = {{
                {"i", 1.0}, {"ii", 2.0}, {"iiia", 3.0}, {"iiib", 4.0}, {"iiic", 5.0}, {"iva", 6.0}, {"ivb", 7.0},
            }};
            std::string_view s = t;
            if (s.starts_with("stage ")) s.remove_prefix(6);
            for (const auto& [name, code] : stages) {
                if (s == name) return code;
            }
            const auto v = parse_real(s);
            if (!v || *v != std::floor(*v) || *v < 1.0 || *v > 7.0) return std::nullopt;
            return v;
        }
        case ColumnType::Real:
            return parse_real(t);
    }
    return std::nullopt;
}

std::vector<std::vector<std::string>> parse_csv_rows(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    char c = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        const bool blank = row.size() == 1 && row.front().empty();
        if (!blank) rows.push_back(std::move(row));
        row.clear();
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            end_row();
        } else if (c == '\n') {
            end_row();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw Error(Errc::BadFormat, "unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

ClinicalTable parse_clinical_csv(std::istream& in, const CsvOptions& options) {
    auto rows = parse_csv_rows(in);
    if (rows.empty()) throw Error(Errc::MissingColumn, "CSV has no header row");
    auto header = rows.front();
    if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF")) header.front().erase(0, 3);
    if (header.empty() || header.front() != "patient_id") {
        throw Error(Errc::MissingColumn, "first column must be patient_id");
    }

    const auto& schema = clinical_schema();
    std::vector<std::optional<std::size_t>> schema_col(header.size());
    std::optional<std::size_t> tlvr_col;
    std::vector<bool> seen(schema.size(), false);
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto it = std::find(schema.begin(), schema.end(), header[c]);
        if (it != schema.end()) {
            const auto j = static_cast<std::size_t>(it - schema.begin());
            if (seen[j]) throw Error(Errc::BadFormat, "duplicate column " + header[c]);
            seen[j] = true;
            schema_col[c] = j;
        } else if (header[c] == kTlvrColumn) {
            tlvr_col = c;
        } else if (!options.allow_extra) {
            throw Error(Errc::UnknownColumn, "unexpected column " + header[c]);
        }
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (!seen[j]) throw Error(Errc::MissingColumn, "schema column " + schema[j] + " absent");
    }

    ClinicalTable table;
    table.features = schema;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw Error(Errc::UnparsableCell, "row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                                                  " cells, header has " + std::to_string(header.size()));
        }
        ClinicalRecord rec;
        rec.patient_id = row.front();
        rec.values.assign(schema.size(), 0.0);
        rec.missing.assign(schema.size(), false);
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (schema_col[c]) {
                const auto j = *schema_col[c];
                if (is_missing_cell(row[c])) {
                    rec.missing[j] = true;
                    continue;
                }
                const auto v = encode_clinical_cell(schema[j], row[c]);
                if (!v) {
                    throw Error(Errc::UnparsableCell,
                                "row " + std::to_string(r) + ", column " + header[c] + ": '" + row[c] + "'");
                }
                rec.values[j] = *v;
            } else if (tlvr_col && c == *tlvr_col && !is_missing_cell(row[c])) {
                const auto v = parse_real(row[c]);
                if (!v) {
                    throw Error(Errc::UnparsableCell,
                                "row " + std::to_string(r) + ", column tlvr: '" + row[c] + "'");
                }
                rec.tlvr = *v;
            }
        }
        table.records.push_back(std::move(rec));
    }
    return table;
}

ClinicalTable read_clinical_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return parse_clinical_csv(in, options);
}

void write_clinical_csv(const ClinicalTable& table, std::ostream& out) {
    const bool with_tlvr = std::any_of(table.records.begin(), table.records.end(),
                                       [](const ClinicalRecord& r) { return r.tlvr.has_value(); });
    out << "patient_id";
    for (const auto& f : table.features) out << ',' << csv_escape(f);
    if (with_tlvr) out << ',' << kTlvrColumn;
    out << '\n';
    out << std::setprecision(17);
    for (const auto& rec : table.records) {
        out << csv_escape(rec.patient_id);
        for (std::size_t j = 0; j < table.features.size(); ++j) {
            out << ',';
            if (!rec.missing[j]) out << rec.values[j];
        }
        if (with_tlvr) {
            out << ',';
            if (rec.tlvr) out << *rec.tlvr;
        }
        out << '\n';
    }
}

void write_clinical_csv(const ClinicalTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    write_clinical_csv(table, out);
}

}  // namespace livseg
