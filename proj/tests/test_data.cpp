#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "covidcare/dataset.hpp"
#include "covidcare/synth.hpp"
#include "fixtures.hpp"

using namespace covidcare;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

FeatureSchema abc_schema() {
    FeatureSchema s;
    s.add("hr", FeatureKind::vital);
    s.add("wbc");
    s.add("creatinine");
    return s;
}

PatientRecord make_record(std::vector<double> values, std::vector<std::uint8_t> mask,
                          std::size_t n_features, Outcome outcome = Outcome::discharged,
                          int days = 0) {
    PatientRecord rec;
    rec.patient_id = "p";
    rec.n_features = n_features;
    rec.n_steps = values.size() / n_features;
    rec.values = std::move(values);
    rec.mask = std::move(mask);
    rec.outcome = outcome;
    rec.days_to_outcome = days;
    return rec;
}

}  // namespace

TEST_CASE("canonicalization lowercases, trims, and collapses whitespace") {
    CHECK(FeatureSchema::canonical("  Heart   Rate ") == "heart rate");
    CHECK(FeatureSchema::canonical("WBC") == "wbc");
    FeatureSchema s;
    s.add("Heart Rate");
    CHECK_THROWS_AS(s.add(" heart  RATE "), Error);
}

TEST_CASE("fixture schemas match the dataset statistics") {
    const FeatureSchema physio = fixtures::physionet_schema();
    const FeatureSchema covid = fixtures::covid_schema();
    CHECK(physio.size() == 33);
    CHECK(covid.size() == 74);
    const SharedFeatureMap map = build_shared_map(physio, covid);
    CHECK(map.pairs.size() == 17);

    const FeatureSchema esrd = fixtures::esrd_schema();
    CHECK(build_shared_map(physio, esrd).pairs.size() == 8);  // name equality alone
    CHECK(build_shared_map(physio, esrd, fixtures::esrd_aliases()).pairs.size() == 11);
}

TEST_CASE("alias file round-trips through the loader") {
    const std::string path = tmp_path("aliases.csv");
    fixtures::write_file(path, "canonical,alias\nserum chloride,Chloride\nwbc, WBC Count \n");
    AliasTable table = load_alias_csv(path);
    CHECK(table.at("chloride") == "serum chloride");
    CHECK(table.at("wbc count") == "wbc");
}

TEST_CASE("load_csv builds one record per patient with sorted timesteps") {
    const std::string path = tmp_path("two_patients.csv");
    fixtures::write_file(path,
                         "patient_id,timestep,feature,value,outcome,days_to_outcome\n"
                         "a,2,hr,90,discharged,3\n"
                         "a,0,hr,80,discharged,3\n"
                         "a,1,wbc,5.5,discharged,3\n"
                         "a,0,creatinine,1.1,discharged,3\n"
                         "b,0,hr,70,adverse,1\n"
                         "b,0,wbc,9,adverse,1\n"
                         "b,1,creatinine,2.0,adverse,1\n");
    Dataset ds = load_csv(path, abc_schema());
    REQUIRE(ds.records.size() == 2);
    CHECK(ds.schema.size() == 3);
    const PatientRecord& a = ds.records[0];
    CHECK(a.patient_id == "a");
    CHECK(a.n_steps == 3);  // timesteps 0,1,2
    // Out-of-order input rows land sorted: hr observed at t=0 and t=2.
    CHECK(a.observed(0, 0));
    CHECK(a.value_at(0, 0) == 80.0);
    CHECK(!a.observed(0, 1));
    CHECK(a.value_at(0, 2) == 90.0);
    CHECK(ds.records[1].outcome == Outcome::adverse);
    CHECK(ds.records[1].days_to_outcome == 1);
}

TEST_CASE("load_csv rejects unknown features by name") {
    const std::string path = tmp_path("unknown_feature.csv");
    fixtures::write_file(path,
                         "patient_id,timestep,feature,value,outcome,days_to_outcome\n"
                         "a,0,hr,90,discharged,3\n"
                         "a,0,wbc,5,discharged,3\n"
                         "a,0,creatinine,1,discharged,3\n"
                         "a,1,Lipase,7,discharged,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path, abc_schema()), doctest::Contains("lipase"), Error);
}

TEST_CASE("load_csv reports the line of a non-numeric value") {
    const std::string path = tmp_path("bad_value.csv");
    fixtures::write_file(path,
                         "patient_id,timestep,feature,value,outcome,days_to_outcome\n"
                         "a,0,hr,90,discharged,3\n"
                         "a,1,hr,oops,discharged,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path, abc_schema()), doctest::Contains("line 3"), Error);
}

TEST_CASE("predict_at truncates the observation window only") {
    const std::string path = tmp_path("predictat.csv");
    fixtures::write_file(path,
                         "patient_id,timestep,feature,value,outcome,days_to_outcome\n"
                         "a,0,hr,80,adverse,6\n"
                         "a,1,hr,85,adverse,6\n"
                         "a,2,hr,90,adverse,6\n"
                         "a,0,wbc,5,adverse,6\n"
                         "a,1,creatinine,1,adverse,6\n");
    Dataset full = load_csv(path, abc_schema());
    CHECK(full.records[0].n_steps == 3);
    Dataset cut = load_csv(path, abc_schema(), TaskKind::multiclass12, 2);
    REQUIRE(cut.records.size() == 1);
    CHECK(cut.records[0].n_steps == 2);
    CHECK(cut.records[0].value_at(0, 1) == 85.0);
    CHECK(cut.records[0].days_to_outcome == 6);  // label horizon untouched
}

TEST_CASE("records with a fully missing feature are dropped and counted") {
    const std::string path = tmp_path("dropme.csv");
    fixtures::write_file(path,
                         "patient_id,timestep,feature,value,outcome,days_to_outcome\n"
                         "a,0,hr,90,discharged,3\n"  // a never reports wbc/creatinine
                         "b,0,hr,70,adverse,1\n"
                         "b,0,wbc,9,adverse,1\n"
                         "b,1,creatinine,2.0,adverse,1\n");
    Dataset ds = load_csv(path, abc_schema());
    CHECK(ds.records.size() == 1);
    CHECK(ds.dropped_records == 1);
    CHECK(ds.records[0].patient_id == "b");
}

TEST_CASE("impute forward-fills and backfills the leading gap") {
    PatientRecord rec = make_record({0, 5, 0, 7}, {0, 1, 0, 1}, 1);
    PatientRecord imp = impute(rec);
    CHECK(imp.values == std::vector<double>{5, 5, 5, 7});
    CHECK(std::all_of(imp.mask.begin(), imp.mask.end(), [](std::uint8_t m) { return m == 1; }));

    PatientRecord full = make_record({1, 2, 3}, {1, 1, 1}, 1);
    CHECK(impute(full).values == full.values);

    PatientRecord head_only = make_record({3, 0, 0, 0}, {1, 0, 0, 0}, 1);
    CHECK(impute(head_only).values == std::vector<double>{3, 3, 3, 3});

    PatientRecord empty_feature = make_record({0, 0}, {0, 0}, 1);
    CHECK_THROWS_AS(impute(empty_feature), Error);
}

TEST_CASE("normalization matches hand z-scores and freezes train statistics") {
    FeatureSchema s;
    s.add("x");
    Dataset train;
    train.schema = s;
    train.task = TaskKind::binary;
    train.records.push_back(make_record({1, 3}, {1, 1}, 1));
    auto [normed, stats] = normalize(train, train);
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.stddev[0] == doctest::Approx(1.0));  // population std
    CHECK(normed.records[0].values[0] == doctest::Approx(-1.0));
    CHECK(normed.records[0].values[1] == doctest::Approx(1.0));

    // Constant feature goes through the std floor and lands at zero.
    Dataset flat = train;
    flat.records[0] = make_record({4, 4, 4}, {1, 1, 1}, 1);
    auto [flat_normed, flat_stats] = normalize(flat, flat);
    CHECK(flat_stats.stddev[0] == doctest::Approx(1e-6));
    for (double v : flat_normed.records[0].values) CHECK(v == doctest::Approx(0.0));

    // Applying train stats to an unseen split leaves them untouched.
    Dataset unseen = train;
    unseen.records[0] = make_record({10, 20}, {1, 1}, 1);
    auto [applied, stats2] = normalize(train, unseen);
    CHECK(stats2.mean[0] == doctest::Approx(2.0));
    CHECK(applied.records[0].values[0] == doctest::Approx(8.0));

    // Round trip within 1e-9 for non-floored features.
    Dataset back = undo_normalization(applied, stats2);
    CHECK(back.records[0].values[0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(back.records[0].values[1] == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("length-of-stay labels follow the 12-bucket scheme") {
    CHECK(derive_los_label(Outcome::discharged, 1) == 0);
    CHECK(derive_los_label(Outcome::adverse, 11) == 11);
    CHECK(derive_los_label(Outcome::discharged, 4) == 3);

    // Exhaustive sweep: totality and monotonicity per outcome.
    for (Outcome outcome : {Outcome::discharged, Outcome::adverse}) {
        int prev = -1;
        for (int days = 0; days <= 15; ++days) {
            const int label = derive_los_label(outcome, days);
            const int lo = outcome == Outcome::discharged ? 0 : 6;
            CHECK(label >= lo);
            CHECK(label < lo + 6);
            CHECK(label >= prev);
            prev = label;
        }
    }
    CHECK(derive_los_label(Outcome::adverse, 10) == 10);
    CHECK(derive_los_label(Outcome::adverse, 11) == 11);
}

TEST_CASE("kfold partitions the records deterministically") {
    SynthConfig cfg;
    cfg.patients_src = 10;
    cfg.patients_tar = 10;
    cfg.n_src = 3;
    cfg.n_tar = 3;
    cfg.n_shared = 2;
    Dataset ds = synthesize(cfg, 5).target;

    auto folds = kfold(ds, 5, 99);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> seen;
    for (const auto& [train, val] : folds) {
        CHECK(val.size() == 2);
        for (std::size_t i : val) CHECK(seen.insert(i).second);  // pairwise disjoint
        CHECK(train.size() == 8);
    }
    CHECK(seen.size() == 10);  // union covers everything

    auto folds2 = kfold(ds, 5, 99);
    for (std::size_t f = 0; f < 5; ++f) {
        CHECK(folds[f].first == folds2[f].first);
        CHECK(folds[f].second == folds2[f].second);
    }

    CHECK_THROWS_AS(kfold(ds, 11, 1), Error);
    CHECK_THROWS_AS(kfold(ds, 1, 1), Error);
}

TEST_CASE("kfold stratifies labels across folds where counts permit") {
    SynthConfig cfg;
    cfg.patients_src = 40;
    cfg.n_src = 3;
    cfg.n_tar = 3;
    cfg.n_shared = 2;
    Dataset ds = synthesize(cfg, 31).source;  // binary task
    std::size_t total_pos = 0;
    for (const PatientRecord& rec : ds.records)
        total_pos += record_label(rec, ds.task) == 1;
    auto folds = kfold(ds, 4, 9);
    for (const auto& [train, val] : folds) {
        std::size_t pos = 0;
        for (std::size_t i : val) pos += record_label(ds.records[i], ds.task) == 1;
        // Each validation fold holds total_pos/4 positives, up to rounding.
        CHECK(pos >= total_pos / 4 - 1);
        CHECK(pos <= total_pos / 4 + 1);
    }
}

TEST_CASE("synthesize honors the shape contract") {
    SynthConfig cfg;  // defaults: 12/15/8 features, 400/80 patients
    SynthResult r = synthesize(cfg, 3);
    CHECK(r.source.schema.size() == 12);
    CHECK(r.target.schema.size() == 15);
    CHECK(r.map.pairs.size() == 8);
    CHECK(r.source.records.size() == 400);
    CHECK(r.target.records.size() == 80);
    CHECK(r.source.task == TaskKind::binary);
    CHECK(r.target.task == TaskKind::multiclass12);
    for (const PatientRecord& rec : r.target.records) {
        CHECK(rec.n_steps >= 8);
        CHECK(rec.n_steps <= 24);
        bool any_obs = false;
        for (std::uint8_t m : rec.mask) any_obs = any_obs || m;
        CHECK(any_obs);
    }
}

TEST_CASE("synthesize is deterministic per seed and changes with it") {
    SynthConfig cfg;
    cfg.patients_src = 20;
    cfg.patients_tar = 10;
    SynthResult a = synthesize(cfg, 7);
    SynthResult b = synthesize(cfg, 7);
    SynthResult c = synthesize(cfg, 8);
    CHECK(a.source.records[3].values == b.source.records[3].values);
    CHECK(a.target.records[5].values == b.target.records[5].values);
    CHECK(a.source.records[3].values != c.source.records[3].values);
    CHECK(c.source.records.size() == 20);  // same shapes
}

TEST_CASE("growing the patient count extends the cohort in place") {
    SynthConfig small;
    small.patients_tar = 10;
    small.patients_src = 10;
    SynthConfig big = small;
    big.patients_tar = 25;
    SynthResult a = synthesize(small, 11);
    SynthResult b = synthesize(big, 11);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(a.target.records[i].values == b.target.records[i].values);
        CHECK(a.target.records[i].days_to_outcome == b.target.records[i].days_to_outcome);
    }
}

TEST_CASE("shared features track the latent risk, pure-noise features do not") {
    SynthConfig cfg;
    cfg.patients_src = 300;
    SynthResult r = synthesize(cfg, 21);

    auto pearson = [&](std::size_t feature) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < r.source.records.size(); ++i) {
            const PatientRecord& rec = r.source.records[i];
            double mean = 0.0;
            for (std::size_t t = 0; t < rec.n_steps; ++t) mean += rec.value_at(feature, t);
            xs.push_back(mean / double(rec.n_steps));
            ys.push_back(r.risk_source[i]);
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= double(xs.size());
        my /= double(ys.size());
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        return std::abs(sxy / std::sqrt(sxx * syy));
    };

    double shared_corr = 0.0;
    for (std::size_t f = 0; f < cfg.n_shared; ++f) shared_corr += pearson(f);
    shared_corr /= double(cfg.n_shared);

    // The last source channel is pure noise by construction (4 private
    // channels, private_latent_fraction 0.75).
    const double noise_corr = pearson(11);
    CHECK(shared_corr > noise_corr);
    CHECK(shared_corr > 0.3);
    CHECK(noise_corr < 0.2);
}

TEST_CASE("synthesize rejects inconsistent configurations") {
    SynthConfig cfg;
    cfg.n_shared = 20;  // > min(n_src, n_tar)
    CHECK_THROWS_AS(synthesize(cfg, 1), Error);
    SynthConfig bad_t;
    bad_t.t_min = 9;
    bad_t.t_max = 3;
    CHECK_THROWS_AS(synthesize(bad_t, 1), Error);
}

TEST_CASE("csv round trip preserves the dataset") {
    SynthConfig cfg;
    cfg.patients_src = 6;
    cfg.patients_tar = 5;
    SynthResult r = synthesize(cfg, 13);
    const std::string path = tmp_path("roundtrip.csv");
    write_csv(path, r.target);
    Dataset back = load_csv(path, r.target.schema, TaskKind::multiclass12);
    REQUIRE(back.records.size() == r.target.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) {
        const PatientRecord& orig = r.target.records[i];
        const PatientRecord& rt = back.records[i];
        CHECK(rt.patient_id == orig.patient_id);
        CHECK(rt.n_steps == orig.n_steps);
        CHECK(rt.mask == orig.mask);
        CHECK(rt.days_to_outcome == orig.days_to_outcome);
        for (std::size_t k = 0; k < orig.values.size(); ++k)
            if (orig.mask[k]) CHECK(rt.values[k] == orig.values[k]);
    }
}

TEST_CASE("shared view keeps record alignment and selected rows") {
    SynthConfig cfg;
    cfg.patients_src = 4;
    SynthResult r = synthesize(cfg, 17);
    std::vector<std::size_t> idx;
    for (const auto& pr : r.map.pairs) idx.push_back(pr.first);
    Dataset view = shared_view(r.source, idx);
    CHECK(view.schema.size() == cfg.n_shared);
    CHECK(view.records.size() == r.source.records.size());
    for (std::size_t i = 0; i < view.records.size(); ++i) {
        CHECK(view.records[i].patient_id == r.source.records[i].patient_id);
        for (std::size_t t = 0; t < view.records[i].n_steps; ++t)
            CHECK(view.records[i].value_at(2, t) == r.source.records[i].value_at(idx[2], t));
    }
}
