// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "wardseq/dataset.hpp"
#include "wardseq/errors.hpp"

using namespace wardseq;

namespace {

FeatureSchema tiny_schema() {
    FeatureSchema s;
    s.features = {{"hr", FeatureKind::continuous, {}},
                  {"sbp", FeatureKind::continuous, {}},
                  {"gender", FeatureKind::categorical, {}}};
    return s;
}

Table parse(const std::string& text, const FeatureSchema& schema = tiny_schema()) {
    std::istringstream in(text);
    return parse_csv(in, schema);
}

Table one_encounter(const std::vector<double>& times, const std::vector<int>& targets) {
    Table t;
    t.schema = tiny_schema();
    Encounter e{"P1", "E1", {}};
    for (std::size_t i = 0; i < times.size(); ++i)
        e.rows.push_back({times[i], {static_cast<double>(i + 1), 100.0 + static_cast<double>(i)}, {"F"}, targets[i]});
    t.encounters.push_back(e);
    return t;
}

// Random long-format table: `patients` patients with 1-3 encounters each.
Table random_table(std::mt19937_64& rng, std::size_t patients) {
    Table t;
    t.schema = tiny_schema();
    std::uniform_int_distribution<int> n_enc(1, 3), n_rows(1, 12);
    std::exponential_distribution<double> gap(0.25);
    std::normal_distribution<double> val(80, 15);
    std::bernoulli_distribution miss(0.1), pos(0.1), female(0.5);
    for (std::size_t p = 0; p < patients; ++p) {
        const std::string pid = "P" + std::to_string(1000 + p);
        const int ne = n_enc(rng);
        for (int e = 0; e < ne; ++e) {
            Encounter enc{pid, pid + "-E" + std::to_string(e), {}};
            double time = 0.0;
            const int nr = n_rows(rng);
            for (int r = 0; r < nr; ++r) {
                if (r > 0) time += gap(rng);
                const double a = miss(rng) ? std::nan("") : val(rng);
                enc.rows.push_back({time, {a, val(rng) + 40}, {female(rng) ? "F" : "M"}, pos(rng) ? 1 : 0});
            }
            t.encounters.push_back(enc);
        }
    }
    std::sort(t.encounters.begin(), t.encounters.end(),
              [](const Encounter& a, const Encounter& b) { return a.encounter_id < b.encounter_id; });
    return t;
}

}  // namespace

TEST(ParseCsv, ThreeRowsOneEncounter) {
    const Table t = parse(
        "patient_id,encounter_id,time_hours,hr,sbp,gender,target\n"
        "P1,E1,0,80,120,F,0\n"
        "P1,E1,1.5,82,118,F,0\n"
        "P1,E1,3,,115,F,1\n");
    ASSERT_EQ(t.encounters.size(), 1u);
    EXPECT_EQ(t.row_count(), 3u);
    EXPECT_TRUE(std::isnan(t.encounters[0].rows[2].continuous[0]));
    EXPECT_EQ(t.encounters[0].rows[2].target, 1);
}

TEST(ParseCsv, SortsRowsByTimeWithinEncounter) {
    const Table t = parse(
        "patient_id,encounter_id,time_hours,hr,sbp,gender,target\n"
        "P1,E1,5,3,0,F,0\n"
        "P1,E1,0,1,0,F,0\n"
        "P1,E1,2,2,0,F,0\n");
    const auto& rows = t.encounters[0].rows;
    EXPECT_EQ(rows[0].time, 0.0);
    EXPECT_EQ(rows[1].time, 2.0);
    EXPECT_EQ(rows[2].time, 5.0);
    EXPECT_EQ(rows[2].continuous[0], 3.0);
}

TEST(ParseCsv, DuplicateTimestampsKeepFileOrder) {
    const Table t = parse(
        "patient_id,encounter_id,time_hours,hr,sbp,gender,target\n"
        "P1,E1,1,10,0,F,0\n"
        "P1,E1,1,20,0,F,0\n"
        "P1,E1,0,30,0,F,0\n");
    const auto& rows = t.encounters[0].rows;
    EXPECT_EQ(rows[1].continuous[0], 10.0);
    EXPECT_EQ(rows[2].continuous[0], 20.0);
}

TEST(ParseCsv, MissingTargetColumnNamesIt) {
    try {
        parse("patient_id,encounter_id,time_hours,hr,sbp,gender\nP1,E1,0,1,2,F\n");
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("target"), std::string::npos);
    }
}

TEST(ParseCsv, BadNumberReportsLine) {
    try {
        parse(
            "patient_id,encounter_id,time_hours,hr,sbp,gender,target\n"
            "P1,E1,0,80,120,F,0\n"
            "P1,E1,1,eighty,120,F,0\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(ParseCsv, EncounterWithTwoPatientsRejected) {
    EXPECT_THROW(parse("patient_id,encounter_id,time_hours,hr,sbp,gender,target\n"
                       "P1,E1,0,1,1,F,0\n"
                       "P2,E1,1,1,1,F,0\n"),
                 ParseError);
}

TEST(ParseCsv, WriteThenParseRoundTrips) {
    std::mt19937_64 rng(4);
    const Table t = random_table(rng, 20);
    std::ostringstream out;
    write_csv(out, t);
    const Table back = parse(out.str());
    ASSERT_EQ(back.encounters.size(), t.encounters.size());
    for (std::size_t e = 0; e < t.encounters.size(); ++e) {
        const auto& a = t.encounters[e].rows;
        const auto& b = back.encounters[e].rows;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t r = 0; r < a.size(); ++r) {
            EXPECT_EQ(a[r].time, b[r].time);
            EXPECT_EQ(a[r].target, b[r].target);
            EXPECT_EQ(a[r].categorical, b[r].categorical);
            for (std::size_t c = 0; c < 2; ++c) {
                if (std::isnan(a[r].continuous[c])) EXPECT_TRUE(std::isnan(b[r].continuous[c]));
                else EXPECT_EQ(a[r].continuous[c], b[r].continuous[c]);
            }
        }
    }
}

TEST(Windowize, HoursZeroThreeNine) {
    const Table w = windowize(one_encounter({0, 3, 9}, {0, 0, 1}));
    const auto& rows = w.encounters[0].rows;
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_DOUBLE_EQ(rows[0].continuous[0], 1.5);  // mean of 1 and 2
    EXPECT_EQ(rows[0].target, 0);
    EXPECT_EQ(rows[1].target, 1);
}

TEST(Windowize, SingleRecord) {
    const Table w = windowize(one_encounter({0}, {1}));
    ASSERT_EQ(w.encounters[0].rows.size(), 1u);
    EXPECT_EQ(w.encounters[0].rows[0].target, 1);
}

TEST(Windowize, GapWindowIsMissing) {
    const Table w = windowize(one_encounter({0, 20}, {0, 0}));
    const auto& rows = w.encounters[0].rows;
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(std::isnan(rows[1].continuous[0]));
    EXPECT_TRUE(std::isnan(rows[1].continuous[1]));
    EXPECT_EQ(rows[1].categorical[0], "");
    EXPECT_EQ(rows[1].target, 0);
}

TEST(Windowize, RejectsNonPositiveWidth) {
    EXPECT_THROW(windowize(one_encounter({0}, {0}), 0.0), ConfigError);
}

TEST(Windowize, RowCountAndTargetProperties) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Table g = random_table(rng, 30);
        const double width = trial % 2 ? 8.0 : 5.5;
        const Table w = windowize(g, width);
        ASSERT_EQ(w.encounters.size(), g.encounters.size());
        for (std::size_t e = 0; e < g.encounters.size(); ++e) {
            const auto& gr = g.encounters[e].rows;
            const auto& wr = w.encounters[e].rows;
            EXPECT_EQ(wr.size(), static_cast<std::size_t>(std::floor(gr.back().time / width)) + 1);
            int gmax = 0, wmax = 0;
            for (const auto& r : gr) gmax = std::max(gmax, r.target);
            for (std::size_t k = 0; k < wr.size(); ++k) {
                wmax = std::max(wmax, wr[k].target);
                EXPECT_DOUBLE_EQ(wr[k].time, static_cast<double>(k) * width);
            }
            EXPECT_EQ(gmax, wmax);
        }
    }
}

TEST(Standardizer, PopulationStdDev) {
    const Table t = one_encounter({0, 1, 2}, {0, 0, 0});
    const auto p = fit_standardizer(t);
    EXPECT_DOUBLE_EQ(p.mean[0], 2.0);
    EXPECT_NEAR(p.stddev[0], std::sqrt(2.0 / 3.0), 1e-12);
    EXPECT_NEAR(p.stddev[0], 0.8165, 1e-4);
    EXPECT_DOUBLE_EQ(p.standardize(0, 2.0 + 2.0 * p.stddev[0]), 2.0);
    EXPECT_EQ(p.standardize(0, std::nan("")), 0.0);
}

TEST(Standardizer, ConstantAndMissingFeaturesFlagged) {
    Table t = one_encounter({0, 1, 2}, {0, 0, 0});
    for (auto& r : t.encounters[0].rows) {
        r.continuous[0] = 5.0;
        r.continuous[1] = std::nan("");
    }
    const auto p = fit_standardizer(t);
    EXPECT_TRUE(p.flagged[0]);
    EXPECT_TRUE(p.flagged[1]);
    EXPECT_EQ(p.flagged_names(), (std::vector<std::string>{"hr", "sbp"}));
    const Table z = apply_standardizer(t, p);
    for (const auto& r : z.encounters[0].rows) {
        EXPECT_EQ(r.continuous[0], 0.0);
        EXPECT_EQ(r.continuous[1], 0.0);
    }
}

TEST(Standardizer, EmptyTableRejected) {
    Table t;
    t.schema = tiny_schema();
    EXPECT_THROW(fit_standardizer(t), Error);
}

TEST(Standardizer, TrainingFeatureBecomesUnitScale) {
    std::mt19937_64 rng(2);
    const Table t = random_table(rng, 200);
    const auto p = fit_standardizer(t);
    const Table z = apply_standardizer(t, p);
    const Table raw = t;
    // Non-missing entries of the second column have mean 0 and population sd 1.
    double s = 0, ss = 0;
    std::size_t n = 0;
    for (const auto& e : z.encounters)
        for (const auto& r : e.rows) {
            s += r.continuous[1];
            ss += r.continuous[1] * r.continuous[1];
            ++n;
        }
    const double mean = s / static_cast<double>(n);
    EXPECT_NEAR(mean, 0.0, 1e-10);
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n) - mean * mean), 1.0, 1e-10);

    // Round trip of non-missing values.
    for (std::size_t e = 0; e < raw.encounters.size(); ++e)
        for (std::size_t r = 0; r < raw.encounters[e].rows.size(); ++r)
            for (std::size_t c = 0; c < 2; ++c) {
                const double x = raw.encounters[e].rows[r].continuous[c];
                if (std::isnan(x)) {
                    EXPECT_EQ(z.encounters[e].rows[r].continuous[c], 0.0);
                    continue;
                }
                EXPECT_NEAR(p.destandardize(c, z.encounters[e].rows[r].continuous[c]), x, 1e-10);
            }
}

TEST(Standardizer, JsonRoundTrip) {
    std::mt19937_64 rng(6);
    const auto p = fit_standardizer(random_table(rng, 10));
    const auto q = standardization_from_json(to_json(p));
    EXPECT_EQ(p.names, q.names);
    EXPECT_EQ(p.mean, q.mean);
    EXPECT_EQ(p.stddev, q.stddev);
    EXPECT_EQ(p.flagged, q.flagged);
}

TEST(OneHot, Indicators) {
    Table t = one_encounter({0, 1, 2, 3}, {0, 0, 0, 1});
    t.encounters[0].rows[1].categorical[0] = "M";
    t.encounters[0].rows[2].categorical[0] = "X";
    t.encounters[0].rows[3].categorical[0] = "";
    FeatureSchema schema = tiny_schema();
    schema.features[2].categories = {"F", "M"};
    EXPECT_EQ(schema.encoded_width(), 4u);
    EXPECT_EQ(schema.encoded_names(), (std::vector<std::string>{"hr", "sbp", "gender=F", "gender=M"}));
    const auto seqs = one_hot(t, schema);
    ASSERT_EQ(seqs.size(), 1u);
    const Matrix& x = seqs[0].features;
    ASSERT_EQ(x.cols(), 4u);
    EXPECT_EQ(x(0, 2), 1.0);
    EXPECT_EQ(x(0, 3), 0.0);
    EXPECT_EQ(x(1, 2), 0.0);
    EXPECT_EQ(x(1, 3), 1.0);
    EXPECT_EQ(x(2, 2) + x(2, 3), 0.0);  // unseen
    EXPECT_EQ(x(3, 2) + x(3, 3), 0.0);  // missing
    EXPECT_EQ(seqs[0].encounter_label, 1);
    EXPECT_EQ(seqs[0].patient_id, "P1");
}

TEST(OneHot, CategoriesComeFromTrainingOnly) {
    Table t = one_encounter({0, 1}, {0, 0});
    t.encounters[0].rows[1].categorical[0] = "M";
    const FeatureSchema s = fit_categories(t);
    EXPECT_EQ(s.features[2].categories, (std::vector<std::string>{"F", "M"}));
}

TEST(OneHot, WidthIdenticalAcrossSplits) {
    std::mt19937_64 rng(12);
    const Table t = random_table(rng, 50);
    const auto assign = split_patientwise(t, {}, 3);
    const Table train = select_split(t, assign, Split::train);
    const FeatureSchema s = fit_categories(train);
    for (Split sp : {Split::train, Split::validation, Split::test})
        for (const auto& seq : one_hot(select_split(t, assign, sp), s)) EXPECT_EQ(seq.features.cols(), s.encoded_width());
}

TEST(TimeDiff, Examples) {
    Table t = one_encounter({0, 3, 9}, {0, 0, 0});
    Encounter single{"P2", "E2", {{4.0, {1, 1}, {"F"}, 0}}};
    t.encounters.push_back(single);
    const Table d = add_time_diff(t);
    EXPECT_EQ(d.schema.continuous_names().back(), "time_diff");
    const auto& a = d.encounters[0].rows;
    EXPECT_EQ(a[0].continuous.back(), 0.0);
    EXPECT_EQ(a[1].continuous.back(), 3.0);
    EXPECT_EQ(a[2].continuous.back(), 6.0);
    EXPECT_EQ(d.encounters[1].rows[0].continuous.back(), 0.0);
    EXPECT_EQ(d.schema.encoded_width(), t.schema.encoded_width() + 1);
}

TEST(Split, TenPatientsSixTwoTwo) {
    std::mt19937_64 rng(1);
    Table t;
    t.schema = tiny_schema();
    for (int p = 0; p < 10; ++p) t.encounters.push_back({"P" + std::to_string(p), "E" + std::to_string(p), {{0, {1, 1}, {"F"}, 0}}});
    const auto a = split_patientwise(t, {}, 42);
    EXPECT_EQ(a.count(Split::train), 6u);
    EXPECT_EQ(a.count(Split::validation), 2u);
    EXPECT_EQ(a.count(Split::test), 2u);
    EXPECT_EQ(split_patientwise(t, {}, 42).patients, a.patients);
}

TEST(Split, FewerThanThreePatientsRejected) {
    Table t;
    t.schema = tiny_schema();
    t.encounters.push_back({"P1", "E1", {{0, {1, 1}, {"F"}, 0}}});
    t.encounters.push_back({"P2", "E2", {{0, {1, 1}, {"F"}, 0}}});
    EXPECT_THROW(split_patientwise(t, {}, 1), ConfigError);
    EXPECT_THROW(split_patientwise(t, {0.5, 0.5, 0.5}, 1), ConfigError);
}

TEST(Split, PartitionAndFractions) {
    std::mt19937_64 rng(21);
    const Table t = random_table(rng, 1500);
    const auto a = split_patientwise(t, {}, 99);
    std::set<std::string> all;
    for (const auto& e : t.encounters) all.insert(e.patient_id);
    EXPECT_EQ(a.patients.size(), all.size());
    const double n = static_cast<double>(all.size());
    EXPECT_NEAR(static_cast<double>(a.count(Split::train)) / n, 0.6, 0.02);
    EXPECT_NEAR(static_cast<double>(a.count(Split::validation)) / n, 0.2, 0.02);
    EXPECT_NEAR(static_cast<double>(a.count(Split::test)) / n, 0.2, 0.02);

    // Every encounter of a patient lands in the same split, and the union covers the table.
    std::size_t total = 0;
    for (Split s : {Split::train, Split::validation, Split::test}) {
        const Table part = select_split(t, a, s);
        total += part.encounters.size();
        for (const auto& e : part.encounters) EXPECT_EQ(a.patients.at(e.patient_id), s);
    }
    EXPECT_EQ(total, t.encounters.size());
}

TEST(Split, JsonRoundTrip) {
    std::mt19937_64 rng(5);
    const Table t = random_table(rng, 12);
    const auto a = split_patientwise(t, {}, 7);
    EXPECT_EQ(split_from_json(to_json(a)).patients, a.patients);
}

TEST(Schema, ValidationAndJson) {
    FeatureSchema s = tiny_schema();
    s.features.push_back({"hr", FeatureKind::continuous, {}});
    EXPECT_THROW(s.validate(), ConfigError);
    const FeatureSchema d = FeatureSchema::default_schema();
    d.validate();
    const FeatureSchema back = schema_from_json(to_json(d));
    EXPECT_EQ(back.encoded_names(), d.encoded_names());
}
