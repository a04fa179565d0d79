#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace livseg {

/// One patient's risk-factor vector. `values[j]` and `missing[j]` follow the
/// feature order of the owning ClinicalTable; a missing value reads as 0
/// until imputed.
struct ClinicalRecord {
    std::string patient_id;
    std::vector<double> values;
    std::vector<bool> missing;
    /// Tumor-to-liver volume ratio when the table carries one.
    std::optional<double> tlvr;

    bool any_missing() const;
};

struct ClinicalTable {
    std::vector<std::string> features;
    std::vector<ClinicalRecord> records;

    std::optional<std::size_t> feature_index(std::string_view name) const;
};

/// The fixed, ordered clinical schema.
const std::vector<std::string>& clinical_schema();

/// Optional label column holding the TLVR.
inline constexpr std::string_view kTlvrColumn = "tlvr";

struct CsvOptions {
    bool allow_extra = false;
};

/// Encodes one cell of a schema column with the documented codebook:
///   binary columns       yes/no, y/n, true/false, 1/0 -> 1/0
///   T_involvement        "<50%" -> 0, ">50%" / ">=50%" -> 1 (or 0/1)
///   CLIP_score           integer 0..6
///   TNM                  I=1, II=2, IIIA=3, IIIB=4, IIIC=5, IVA=6, IVB=7 (or 1..7)
///   AFP, age, TTP, Interval_BL   real numbers
/// Returns nullopt for an unparsable cell. Empty cells and "NA" are handled
/// by the caller as missing.
std::optional<double> encode_clinical_cell(std::string_view column, std::string_view cell);

ClinicalTable parse_clinical_csv(std::istream& in, const CsvOptions& options = {});
ClinicalTable read_clinical_csv(const std::filesystem::path& path, const CsvOptions& options = {});

void write_clinical_csv(const ClinicalTable& table, std::ostream& out);
void write_clinical_csv(const ClinicalTable& table, const std::filesystem::path& path);

/// RFC-4180 record splitting; exposed for the other table readers.
std::vector<std::vector<std::string>> parse_csv_rows(std::istream& in);
std::string csv_escape(std::string_view field);

}  // namespace livseg
