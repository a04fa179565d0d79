#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "livseg/clinical_csv.hpp"
#include "livseg/error.hpp"
#include "livseg/nifti.hpp"
#include "nifti_fixture.hpp"
#include "support.hpp"

using namespace livseg;
using livseg::test::RawNifti;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected livseg::Error");
    return Errc::InvalidArgument;
}

std::filesystem::path temp_dir() {
    auto d = std::filesystem::temp_directory_path() / "livseg_test_volio";
    std::filesystem::create_directories(d);
    return d;
}

std::string full_header() {
    std::string h = "patient_id";
    for (const auto& f : clinical_schema()) h += "," + f;
    return h + "\n";
}

std::string full_row(const std::string& id, const std::string& afp = "120.5", const std::string& alcohol = "yes") {
    return id + ",>50%,no,yes,3,IIIA,no,yes," + alcohol + "," + afp + ",no,yes,no,63,12.5,30\n";
}

}  // namespace

TEST_CASE("int16 image with unit slope is cast exactly") {
    const std::vector<std::int16_t> v{-1000, -1, 0, 1, 7, 250, 1024, 32767};
    RawNifti raw;
    raw.dims(2, 2, 2).datatype(4, 16).scaling(1.0f, 0.0f).data(v);
    const Volume vol = parse_nifti(raw.bytes());
    CHECK(vol.dims() == Dims{2, 2, 2});
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(vol[i] == static_cast<float>(v[i]));
}

TEST_CASE("scl_slope and scl_inter map stored v to slope*v + inter") {
    const std::vector<std::int16_t> v{0, 1, 2, 3, 500, 512, -3, 1000};
    RawNifti raw;
    raw.dims(2, 2, 2).datatype(4, 16).scaling(2.0f, -1000.0f).data(v);
    const Volume vol = parse_nifti(raw.bytes());
    // Hand-computed: 2v - 1000.
    const std::vector<float> expect{-1000, -998, -996, -994, 0, 24, -1006, 1000};
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(vol[i] == expect[i]);
}

TEST_CASE("zero slope disables scaling") {
    RawNifti raw;
    raw.dims(2, 1, 1).datatype(4, 16).scaling(0.0f, 55.0f).data(std::vector<std::int16_t>{3, 4});
    const Volume vol = parse_nifti(raw.bytes());
    CHECK(vol[0] == 3.0f);
    CHECK(vol[1] == 4.0f);
}

TEST_CASE("every supported datatype decodes") {
    SUBCASE("uint8") {
        RawNifti raw;
        raw.dims(3, 1, 1).datatype(2, 8).data(std::vector<std::uint8_t>{0, 128, 255});
        const Volume vol = parse_nifti(raw.bytes());
        CHECK(vol[1] == 128.0f);
        CHECK(vol[2] == 255.0f);
    }
    SUBCASE("int32") {
        RawNifti raw;
        raw.dims(2, 1, 1).datatype(8, 32).data(std::vector<std::int32_t>{-70000, 70000});
        const Volume vol = parse_nifti(raw.bytes());
        CHECK(vol[0] == -70000.0f);
    }
    SUBCASE("float64") {
        RawNifti raw;
        raw.dims(2, 1, 1).datatype(64, 64).data(std::vector<double>{0.25, -3.5});
        const Volume vol = parse_nifti(raw.bytes());
        CHECK(vol[1] == -3.5f);
    }
}

TEST_CASE("byte-swapped header and data parse identically to the native twin") {
    const std::vector<std::int16_t> v{-1000, 40, 60, 160, -80, 0, 1, 2, 3, 4, 5, 6};
    RawNifti little(false), big(true);
    for (RawNifti* r : {&little, &big}) {
        r->dims(2, 3, 2).datatype(4, 16).spacing(0.7f, 0.8f, 2.5f).scaling(1.0f, 0.0f).sform_diag(-0.7f, 0.8f, 2.5f);
        r->data(v);
    }
    std::int32_t sizeof_hdr = 0;
    std::memcpy(&sizeof_hdr, big.bytes().data(), 4);
    CHECK(sizeof_hdr == 1543569408);
    const Volume a = parse_nifti(little.bytes());
    const Volume b = parse_nifti(big.bytes());
    CHECK(a == b);
    CHECK(a.orientation().flip[0]);
    CHECK(a.spacing()[2] == doctest::Approx(2.5).epsilon(1e-7));
}

TEST_CASE("header errors carry typed codes") {
    RawNifti good;
    good.dims(2, 1, 1).datatype(4, 16).data(std::vector<std::int16_t>{1, 2});

    CHECK(code_of([&] { RawNifti r = good; r.magic("abc\0"); parse_nifti(r.bytes()); }) == Errc::BadMagic);
    CHECK(code_of([&] { RawNifti r = good; r.datatype(128, 24); parse_nifti(r.bytes()); }) ==
          Errc::UnsupportedDatatype);
    CHECK(code_of([&] {
              auto bytes = good.bytes();
              bytes.pop_back();
              parse_nifti(bytes);
          }) == Errc::TruncatedFile);
    CHECK(code_of([&] {
              RawNifti r;
              r.dims(2, 1, 1).datatype(16, 32).data(std::vector<float>{1.0f, std::nanf("")});
              parse_nifti(r.bytes());
          }) == Errc::NonFinite);
    CHECK(code_of([&] {
              RawNifti r;
              r.dims(2, 1, 1).datatype(16, 32).data(std::vector<float>{1.0f, INFINITY});
              parse_nifti(r.bytes());
          }) == Errc::NonFinite);
    CHECK(code_of([] { parse_nifti(std::vector<std::byte>(100)); }) == Errc::TruncatedFile);
}

TEST_CASE("4D with a trailing unit dimension is accepted, true 4D is not") {
    RawNifti r;
    r.dims(2, 1, 1).datatype(4, 16).data(std::vector<std::int16_t>{5, 6});
    r.put<std::int16_t>(40, 4);
    CHECK(parse_nifti(r.bytes()).size() == 2);
    r.put<std::int16_t>(48, 2);
    CHECK(code_of([&] { parse_nifti(r.bytes()); }) == Errc::BadHeader);
}

TEST_CASE("header/image pairs read from .hdr and .img") {
    RawNifti r;
    r.dims(2, 1, 1).datatype(4, 16).magic("ni1\0").put<float>(108, 0.0f);
    auto hdr = r.bytes();
    hdr.resize(348);
    RawNifti img_src;
    img_src.data(std::vector<std::int16_t>{-5, 9});
    const std::vector<std::byte> img(img_src.bytes().begin() + 352, img_src.bytes().end());
    const auto dir = temp_dir();
    write_file_bytes(dir / "pair.hdr", hdr);
    write_file_bytes(dir / "pair.img", img);
    const Volume v = read_nifti(dir / "pair.hdr");
    CHECK(v[0] == -5.0f);
    CHECK(v[1] == 9.0f);
}

TEST_CASE("write then read reproduces data bit-exactly with metadata") {
    std::mt19937_64 rng(3);
    Grid g{{4, 4, 4}, {0.7, 0.7, 2.5}, {}};
    g.orientation.axis = {1, 0, 2};
    g.orientation.flip = {true, false, true};
    const Volume v = test::random_volume(g, VolumeKind::HU, rng, -1000.0, 1000.0);
    const auto path = temp_dir() / "round.nii";
    write_nifti(v, path);
    const Volume back = read_nifti(path);
    CHECK(back.dims() == v.dims());
    CHECK(back.orientation() == v.orientation());
    CHECK(back.kind() == VolumeKind::HU);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(back.spacing()[a] - v.spacing()[a]) <= 1e-6);
    CHECK(std::memcmp(back.data().data(), v.data().data(), 4 * v.size()) == 0);
}

TEST_CASE("volume kind survives a round trip") {
    std::mt19937_64 rng(4);
    const Volume v = test::random_volume(test::cube(3), VolumeKind::Probability, rng);
    CHECK(parse_nifti(encode_nifti(v)).kind() == VolumeKind::Probability);
}

TEST_CASE("mask images carry integral labels") {
    std::mt19937_64 rng(5);
    const Mask m = test::random_mask(test::cube(4), rng, 0.3);
    CHECK(volume_to_mask(mask_to_volume(m)) == m);
    const Volume bad(test::cube(1), VolumeKind::HU, std::vector<float>{0.5f});
    CHECK(code_of([&] { volume_to_mask(bad); }) == Errc::BadFormat);
}

TEST_CASE("random header bytes yield a volume or a typed error") {
    std::mt19937_64 rng(11);
    RawNifti base;
    base.dims(3, 2, 2).datatype(4, 16).data(std::vector<std::int16_t>(12, 7));
    std::uniform_int_distribution<int> byte(0, 255);
    for (int trial = 0; trial < 3000; ++trial) {
        auto bytes = base.bytes();
        const int flips = 1 + trial % 12;
        for (int k = 0; k < flips; ++k) {
            const auto pos = static_cast<std::size_t>(rng() % bytes.size());
            bytes[pos] = static_cast<std::byte>(byte(rng));
        }
        if (trial % 7 == 0) bytes.resize(static_cast<std::size_t>(rng() % (bytes.size() + 1)));
        try {
            (void)parse_nifti(bytes);
        } catch (const Error&) {
        }
    }
    CHECK(true);
}

TEST_CASE("write to an unwritable path reports IoError") {
    const Volume v(test::cube(1), VolumeKind::HU);
    CHECK(code_of([&] { write_nifti(v, "/nonexistent_dir_livseg/x.nii"); }) == Errc::IoError);
}

TEST_CASE("complete two-row clinical file") {
    std::istringstream in(full_header() + full_row("a") + full_row("b"));
    const ClinicalTable t = parse_clinical_csv(in);
    REQUIRE(t.records.size() == 2);
    for (const auto& r : t.records) CHECK_FALSE(r.any_missing());
    CHECK(t.records[0].patient_id == "a");
    const auto& r = t.records[0];
    CHECK(r.values[*t.feature_index("T_involvement")] == 1.0);
    CHECK(r.values[*t.feature_index("CLIP_score")] == 3.0);
    CHECK(r.values[*t.feature_index("TNM")] == 3.0);
    CHECK(r.values[*t.feature_index("AFP")] == 120.5);
    CHECK(r.values[*t.feature_index("age")] == 63.0);
}

TEST_CASE("empty AFP cell sets the missing flag") {
    std::istringstream in(full_header() + full_row("a", ""));
    const ClinicalTable t = parse_clinical_csv(in);
    const auto j = *t.feature_index("AFP");
    CHECK(t.records[0].missing[j]);
    CHECK(t.records[0].values[j] == 0.0);
}

TEST_CASE("codebook encodings") {
    CHECK(encode_clinical_cell("alcohol", "yes") == 1.0);
    CHECK(encode_clinical_cell("alcohol", "no") == 0.0);
    CHECK(encode_clinical_cell("alcohol", "Y") == 1.0);
    CHECK_FALSE(encode_clinical_cell("alcohol", "maybe"));
    CHECK(encode_clinical_cell("T_involvement", "<50%") == 0.0);
    CHECK(encode_clinical_cell("TNM", "I") == 1.0);
    CHECK(encode_clinical_cell("TNM", "IVB") == 7.0);
    CHECK(encode_clinical_cell("TNM", "Stage IIIC") == 5.0);
    CHECK_FALSE(encode_clinical_cell("TNM", "8"));
    CHECK(encode_clinical_cell("CLIP_score", "6") == 6.0);
    CHECK_FALSE(encode_clinical_cell("CLIP_score", "2.5"));
    CHECK(encode_clinical_cell("TTP", "-3.25") == -3.25);

    std::istringstream in(full_header() + full_row("a", "1", "no"));
    const ClinicalTable t = parse_clinical_csv(in);
    CHECK(t.records[0].values[*t.feature_index("alcohol")] == 0.0);
}

TEST_CASE("schema violations are reported") {
    SUBCASE("missing column") {
        std::string h = full_header();
        h.replace(h.find(",AFP"), 4, "");
        std::istringstream in(h);
        CHECK(code_of([&] { parse_clinical_csv(in); }) == Errc::MissingColumn);
    }
    SUBCASE("unknown column rejected unless allowed") {
        std::string h = full_header();
        h.insert(h.size() - 1, ",shoe_size");
        std::string row = full_row("a");
        row.insert(row.size() - 1, ",44");
        std::istringstream in(h + row);
        CHECK(code_of([&] { parse_clinical_csv(in); }) == Errc::UnknownColumn);
        std::istringstream again(h + row);
        CHECK(parse_clinical_csv(again, CsvOptions{true}).records.size() == 1);
    }
    SUBCASE("unparsable cell names row and column") {
        std::string row = full_row("a");
        row.replace(row.find("yes"), 3, "blue");
        std::istringstream in(full_header() + row);
        try {
            parse_clinical_csv(in);
            FAIL("expected UnparsableCell");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::UnparsableCell);
            CHECK(std::string(e.what()).find("row 1") != std::string::npos);
        }
    }
}

TEST_CASE("quoted fields and CRLF follow RFC 4180") {
    std::istringstream in("a,\"b,c\",\"d\"\"e\"\r\n1,2,3\r\n");
    const auto rows = parse_csv_rows(in);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][1] == "b,c");
    CHECK(rows[0][2] == "d\"e");
    CHECK(rows[1][2] == "3");
}

TEST_CASE("clinical table round-trips through CSV") {
    std::istringstream in(full_header() + "\"x,1\"" + full_row("", "7") + full_row("b", ""));
    ClinicalTable t = parse_clinical_csv(in);
    t.records[0].tlvr = 0.125;
    std::ostringstream out;
    write_clinical_csv(t, out);
    std::istringstream back_in(out.str());
    const ClinicalTable back = parse_clinical_csv(back_in);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0].patient_id == "x,1");
    CHECK(back.records[0].tlvr == 0.125);
    CHECK_FALSE(back.records[1].tlvr.has_value());
    CHECK(back.records[1].missing == t.records[1].missing);
    CHECK(back.records[0].values == t.records[0].values);
}
