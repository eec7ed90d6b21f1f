#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "recol/engine.hpp"
#include "recol/serialize.hpp"

using namespace recol;

namespace {

Table exact_linear_table(std::size_t n = 50) {
    Table t;
    t.names = {"x", "y"};
    t.columns.resize(2);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / 7.0;
        t.columns[0].push_back(x);
        t.columns[1].push_back(3.0 * x - 2.0);
    }
    return t;
}

Table random_table(Rng& rng, std::size_t n, std::size_t d) {
    Table t;
    t.columns.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        t.names.push_back("c" + std::to_string(c));
        for (std::size_t r = 0; r < n; ++r) t.columns[c].push_back(rng.normal());
    }
    return t;
}

RecolConfig linear_config() {
    RecolConfig cfg;
    cfg.regressor.kind = RegressorKind::linear;
    return cfg;
}

}  // namespace

TEST_CASE("reconstruction_error per-row semantics") {
    REQUIRE(reconstruction_error({3}, {1}, ErrorMetric::mse) == std::vector<double>{4});
    REQUIRE(reconstruction_error({3}, {1}, ErrorMetric::mad) == std::vector<double>{2});
    REQUIRE(reconstruction_error({1, 2}, {1, 2}, ErrorMetric::mse) == std::vector<double>{0, 0});
    REQUIRE_THROWS_AS(reconstruction_error({1}, {1, 2}, ErrorMetric::mse), Error);
}

TEST_CASE("clip_errors caps at twice sigma") {
    REQUIRE(clip_errors({0, 1, 5}, 1.0) == std::vector<double>{0, 1, 2});
    REQUIRE(clip_errors({0.5, 3.0}, 0.0) == std::vector<double>{0, 0});
    REQUIRE_THROWS_AS(clip_errors({1}, -0.1), Error);

    Rng rng(3);
    std::vector<double> errors(100);
    for (auto& e : errors) e = std::fabs(rng.normal());
    const double sigma = 0.4;
    for (double e : clip_errors(errors, sigma)) REQUIRE(e <= 2.0 * sigma);
}

TEST_CASE("fit_recols on an exact linear relation yields zero-error RECols") {
    const Table t = exact_linear_table();
    const auto ms = fit_recols(t, linear_config());
    REQUIRE(ms.per_column.size() == 2);
    for (const auto& cm : ms.per_column) {
        REQUIRE(cm.recol_max <= 1e-12);  // raw train errors, pre-scaling
        REQUIRE(cm.r2 >= 1.0 - 1e-9);
        REQUIRE(cm.error_stddev >= 0.0);
    }
}

TEST_CASE("fit_recols structure and leave-one-out integrity") {
    Rng rng(17);
    const Table t = random_table(rng, 60, 3);
    RecolConfig cfg = linear_config();
    const auto ms = fit_recols(t, cfg);

    REQUIRE(ms.per_column.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& names = ms.per_column[j].model.feature_names();
        REQUIRE(names.size() == 2);
        REQUIRE(std::find(names.begin(), names.end(), t.names[j]) == names.end());
    }
}

TEST_CASE("fit_recols r2 matches an external recomputation") {
    Rng rng(29);
    const Table t = random_table(rng, 80, 4);
    RecolConfig cfg;
    cfg.regressor.kind = RegressorKind::decision_tree;
    const auto ms = fit_recols(t, cfg);

    const Table scaled = ms.input_scaler.apply(t);
    for (std::size_t j = 0; j < t.n_cols(); ++j) {
        Matrix x(t.n_rows(), t.n_cols() - 1);
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < t.n_cols(); ++c) {
            if (c == j) continue;
            for (std::size_t r = 0; r < t.n_rows(); ++r) x.at(r, out_c) = scaled.columns[c][r];
            ++out_c;
        }
        const auto y_hat = ms.per_column[j].model.predict(x);
        REQUIRE_THAT(ms.per_column[j].r2,
                     Catch::Matchers::WithinAbs(r_squared(scaled.columns[j], y_hat), 1e-12));
    }
}

TEST_CASE("fit_recols requires at least two columns") {
    Table t;
    t.names = {"only"};
    t.columns = {{1, 2, 3}};
    REQUIRE_THROWS_AS(fit_recols(t, linear_config()), Error);
}

TEST_CASE("select_recols applies thresholds") {
    RecolModelSet ms;
    ms.column_names = {"a", "b", "c"};
    ms.per_column.resize(3);
    ms.per_column[0].r2 = 0.02;
    ms.per_column[1].r2 = 0.5;
    ms.per_column[2].r2 = 0.99;

    RecolConfig cfg;
    SECTION("both thresholds") {
        cfg.r2_drop_below = 0.05;
        cfg.r2_drop_above = 0.95;
        REQUIRE(select_recols(ms, cfg) == std::vector<std::size_t>{1});
    }
    SECTION("no thresholds keeps all") {
        REQUIRE(select_recols(ms, cfg) == std::vector<std::size_t>{0, 1, 2});
    }
    SECTION("dropping everything in recol_only mode errors") {
        ms.per_column[1].r2 = 0.04;
        ms.per_column[2].r2 = 0.02;
        cfg.r2_drop_below = 0.10;
        cfg.feature_mode = FeatureMode::recol_only;
        REQUIRE_THROWS_AS(select_recols(ms, cfg), Error);
        cfg.feature_mode = FeatureMode::combined;
        REQUIRE(select_recols(ms, cfg).empty());
    }
}

TEST_CASE("transform assembles the configured feature space") {
    Rng rng(41);
    Table train = random_table(rng, 50, 2);
    // add a mild relation so RECols are non-trivial
    for (std::size_t r = 0; r < 50; ++r) train.columns[1][r] += 0.8 * train.columns[0][r];
    RecolConfig cfg = linear_config();
    const auto ms = fit_recols(train, cfg);

    SECTION("combined mode on d=2 has width 4 with provenance") {
        cfg.feature_mode = FeatureMode::combined;
        const auto fm = transform(train, ms, cfg);
        REQUIRE(fm.cols() == 4);
        REQUIRE(fm.count(ColumnOrigin::original) == 2);
        REQUIRE(fm.count(ColumnOrigin::recol) == 2);
        REQUIRE(fm.columns[2].name == "recol(c0)");
    }
    SECTION("original_only equals the scaled inputs") {
        cfg.feature_mode = FeatureMode::original_only;
        const auto fm = transform(train, ms, cfg);
        const Table scaled = ms.input_scaler.apply(train);
        REQUIRE(fm.cols() == 2);
        for (std::size_t r = 0; r < 50; ++r)
            for (std::size_t c = 0; c < 2; ++c)
                REQUIRE(fm.m.at(r, c) == scaled.columns[c][r]);
    }
    SECTION("transforms are deterministic and idempotent") {
        const auto a = transform(train, ms, cfg);
        const auto b = transform(train, ms, cfg);
        REQUIRE(a.m.data == b.m.data);
    }
    SECTION("train RECol values lie in [0,1]; new data may exceed 1") {
        cfg.feature_mode = FeatureMode::recol_only;
        const auto fm = transform(train, ms, cfg);
        for (double v : fm.m.data) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
        Table test = random_table(rng, 30, 2);
        for (std::size_t r = 0; r < 30; ++r) test.columns[1][r] += 40.0;  // break the relation
        test.names = train.names;
        const auto fm_test = transform(test, ms, cfg);
        double mx = 0.0;
        for (double v : fm_test.m.data) mx = std::max(mx, v);
        REQUIRE(mx > 1.0);
    }
    SECTION("schema mismatch is rejected") {
        Table other = random_table(rng, 10, 2);
        other.names = {"p", "q"};
        REQUIRE_THROWS_AS(transform(other, ms, cfg), Error);
    }
}

TEST_CASE("width accounting holds on randomized tables with the R2 filter") {
    Rng rng(911);
    for (int round = 0; round < 10; ++round) {
        const std::size_t d = 2 + rng.next_below(5);
        const std::size_t n = 40 + rng.next_below(80);
        const Table t = random_table(rng, n, d);
        RecolConfig cfg = linear_config();
        cfg.r2_drop_below = 0.05;
        cfg.r2_drop_above = 0.95;
        const auto ms = fit_recols(t, cfg);
        const auto kept = select_recols(ms, cfg);

        cfg.feature_mode = FeatureMode::combined;
        REQUIRE(transform(t, ms, cfg).cols() == d + kept.size());
        if (!kept.empty()) {
            cfg.feature_mode = FeatureMode::recol_only;
            REQUIRE(transform(t, ms, cfg).cols() == kept.size());
        }
        cfg.feature_mode = FeatureMode::original_only;
        REQUIRE(transform(t, ms, cfg).cols() == d);
    }
}

TEST_CASE("clipping bounds the scaled RECol inputs by the train cap") {
    Rng rng(67);
    const Table train = random_table(rng, 80, 3);
    RecolConfig cfg = linear_config();
    cfg.clip_at_2sigma = true;
    cfg.feature_mode = FeatureMode::recol_only;
    const auto ms = fit_recols(train, cfg);
    // train bounds were fitted on clipped errors, so recol_max <= 2 sigma
    for (const auto& cm : ms.per_column)
        REQUIRE(cm.recol_max <= 2.0 * cm.error_stddev + 1e-15);
}

TEST_CASE("feature matrices export to CSV for inspection") {
    Rng rng(21);
    Table train = random_table(rng, 20, 2);
    RecolConfig cfg = linear_config();
    const auto ms = fit_recols(train, cfg);
    const auto fm = transform(train, ms, cfg);

    const auto path = (std::filesystem::temp_directory_path() / "recol_fm.csv").string();
    write_csv(fm, path);
    const Table back = load_csv(path);
    REQUIRE(back.n_cols() == fm.cols());
    REQUIRE(back.names == std::vector<std::string>{"c0", "c1", "recol(c0)", "recol(c1)"});
    for (std::size_t r = 0; r < fm.rows(); ++r)
        for (std::size_t c = 0; c < fm.cols(); ++c) REQUIRE(back.columns[c][r] == fm.m.at(r, c));
}

TEST_CASE("model sets round-trip through JSON") {
    Rng rng(5);
    Table train = random_table(rng, 60, 3);
    RecolConfig cfg;
    cfg.regressor.kind = RegressorKind::random_forest;
    cfg.regressor.n_trees = 10;
    const auto ms = fit_recols(train, cfg);
    const auto restored = model_set_from_json(to_json(ms));

    const auto a = transform(train, ms, cfg);
    const auto b = transform(train, restored, cfg);
    REQUIRE(a.m.data == b.m.data);
    REQUIRE(restored.column_names == ms.column_names);

    SECTION("and through a file, for reuse between invocations") {
        const auto path = (std::filesystem::temp_directory_path() / "recol_ms.json").string();
        save_model_set(ms, path);
        const auto loaded = load_model_set(path);
        REQUIRE(transform(train, loaded, cfg).m.data == a.m.data);
    }
    SECTION("unsupported format version is rejected") {
        auto doc = to_json(ms);
        doc["format_version"] = 99;
        REQUIRE_THROWS_AS(model_set_from_json(doc), Error);
    }
}
